/**
 * @file hjb.hpp
 * @brief Hamiltonian, classical-solution residuals, viscosity sub/super
 *        solution probes with finite-lattice extremum certificates, the
 *        monotonicity normalization check, and the Borwein-Preiss lattice
 *        optimizer.
 *
 * Viscosity verification is a probe, not a proof: extrema are certified only
 * over declared finite path lattices, and no inequality verdict is emitted
 * without a passing certificate. Lattice caps: value grids up to 9 points,
 * up to 5 free nodes, at most 1e6 enumerated paths.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pdhjb/functional.hpp"
#include "pdhjb/model.hpp"

namespace pdhjb {

/// Arguments (gamma, r, p, l) of the Hamiltonian.
struct HamiltonianInput {
  DiscretePath gamma;
  double r = 0.0;
  HVector p;
  Eigen::MatrixXd l;  // symmetric
};

struct HamiltonianResult {
  double value = 0.0;
  double argmax_u = 0.0;
  std::size_t argmax_index = 0;
};

/// sup over the control grid of (p,F) + Tr(l G G*)/2 + q(gamma, r, p G, u);
/// deterministic argmax, ties resolved by grid order.
HamiltonianResult hamiltonian(const ControlModel& model, const HamiltonianInput& input);

/// Residual of the equation at one path for a smooth candidate:
/// dt-term + (A* dx, gamma(t)) + Hamiltonian(gamma, value, dx, dxx).
double classical_residual(const ControlModel& model, const SmoothFunctional& candidate,
                          const DiscretePath& gamma);

/// A named path functional (the probed solution candidate w).
struct PathFunctional {
  std::string name;
  std::function<double(const DiscretePath&)> eval;
};

/// Finite path lattice: the base path extended by up to max_extra_nodes grid
/// nodes, each new node value drawn from value_grid (per coordinate).
struct PathLatticeSpec {
  DiscretePath base;
  int max_extra_nodes = 0;
  std::vector<double> value_grid;

  std::string describe() const;
};

/// All lattice paths in deterministic order; the base path comes first.
std::vector<DiscretePath> enumerate_lattice(const PathLatticeSpec& spec);

enum class ProbeMode { kSub, kSuper };
enum class ProbeVerdict { kHolds, kViolated, kNoCertificate };

struct ProbeReport {
  ProbeMode mode = ProbeMode::kSub;
  ProbeVerdict verdict = ProbeVerdict::kNoCertificate;
  bool certificate_ok = false;
  double certificate_gap = 0.0;   // lattice max of the objective minus its value at the base
  double value_at_base = 0.0;     // (w -/+ (phi+g))(gamma-hat), should be ~0
  double inequality_lhs = 0.0;    // left side of the sub/super inequality
  double slack = 0.0;             // tolerance used for the verdict
  std::size_t lattice_size = 0;
  bool terminal_ok = false;       // w(gamma_T) <=/>= terminal cost on sampled paths
  double terminal_worst = 0.0;
  std::string lattice_spec;
  std::uint64_t functional_hash = 0;
};

/// Sub/supersolution probe at the base path of the lattice. The certificate
/// demands that the base attains the lattice extremum of w - phi - g (sub)
/// or w + phi + g (super) and that the extremal value vanishes; without it
/// no inequality verdict is reported.
ProbeReport viscosity_probe(const ControlModel& model, const PathFunctional& w,
                            const SmoothFunctional& phi, const TestFunctionalG& g,
                            const PathLatticeSpec& lattice, ProbeMode mode, double cert_tol = 1e-9,
                            double slack = 1e-6);

struct MonotonicitySample {
  DiscretePath gamma;
  HVector p;
  Eigen::MatrixXd l;
  double r1 = 0.0, r2 = 1.0;  // r1 < r2
};

struct MonotonicityReport {
  double empirical_k = 0.0;  // min over samples of (H(r1)-H(r2))/(r2-r1)
  bool needs_shift = false;  // empirical_k <= 0: apply with_driver_discount
};

MonotonicityReport monotonicity_normalization_check(const ControlModel& model,
                                                    const std::vector<MonotonicitySample>& samples);

/// Outcome of the variational-principle run on a finite lattice.
struct BorweinPreissResult {
  std::size_t selected = 0;            // index of the returned point
  std::vector<std::size_t> anchors;    // anchor indices, start first
  bool bound_i_ok = false;             // rho(anchor_i, point) <= eps/(2^i delta0)
  bool bound_ii_ok = false;            // perturbed value at the point >= f(start)
  bool bound_iii_ok = false;           // strict lattice max among later-time points
  std::vector<double> anchor_rho;      // rho(anchor_i, point)
  double perturbed_value = 0.0;        // f(point) - sum_i delta_i rho(anchor_i, point)
};

/// Exact greedy anchor construction with the gauge rho = eval_gauge(.,.,op,3)
/// and weights delta_i = delta0 / 2^i; conclusions are re-verified by
/// enumeration and reported in the certificate. Requires
/// f(start) >= max f - eps on the lattice.
BorweinPreissResult borwein_preiss(const std::function<double(const DiscretePath&)>& f,
                                   const std::vector<DiscretePath>& lattice,
                                   const SpectralOperator& op, std::size_t start_index, double eps,
                                   double delta0 = 1.0);

}  // namespace pdhjb
