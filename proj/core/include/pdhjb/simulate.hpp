/**
 * @file simulate.hpp
 * @brief Exponential-Euler simulation of the controlled path-dependent state
 *        equation in mild form, plus the estimate / Ito-formula /
 *        Ito-inequality / Yosida / tail verification reports.
 *
 * Scheme ("exp-euler-v1"): X_{i+1} = e^{dt A} (X_i + F dt + G dW_i), history
 * before the initial time frozen to the initial path. Every path draws from
 * its own counter stream keyed by (seed, path index), so batches are
 * bit-identical regardless of worker count.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdhjb/functional.hpp"
#include "pdhjb/model.hpp"

namespace pdhjb {

struct TrajectoryBatch {
  PathGrid grid;
  int start_index = 0;
  int n_paths = 0;
  int dim = 0;
  int noise_dim = 0;
  std::uint64_t seed = 0;
  std::string scheme = "exp-euler-v1";
  std::string policy_id;
  bool shared_controls = false;

  std::vector<double> states;    // [path][node][coord]
  std::vector<double> noise;     // [path][sim step][noise coord]
  std::vector<double> runmax;    // [path][node], running sup of |X|
  std::vector<double> controls;  // [sim step] if shared, else [path][sim step]

  int n_nodes() const { return grid.n_steps + 1; }
  int n_sim_steps() const { return grid.n_steps - start_index; }

  const double* node_ptr(int path, int node) const {
    return states.data() + (static_cast<std::size_t>(path) * n_nodes() + node) * dim;
  }
  double state(int path, int node, int coord) const { return node_ptr(path, node)[coord]; }
  double increment(int path, int sim_step, int j) const {
    return noise[(static_cast<std::size_t>(path) * n_sim_steps() + sim_step) * noise_dim + j];
  }
  double control(int path, int sim_step) const {
    return shared_controls
               ? controls[sim_step]
               : controls[static_cast<std::size_t>(path) * n_sim_steps() + sim_step];
  }
  /// View of one path truncated at `node`. The runint feature is not stored
  /// per node; views expose endpoint and running sup only.
  PathView view(int path, int node) const {
    PathView v;
    v.data = node_ptr(path, 0);
    v.dim = dim;
    v.end_index = node;
    v.dt = grid.dt;
    v.sup = runmax[static_cast<std::size_t>(path) * n_nodes() + node];
    v.runint = 0.0;
    return v;
  }
};

/// Forward simulation from the initial path under the given policy.
/// dt must match the initial path's grid step and divide the horizon.
TrajectoryBatch simulate(const ControlModel& model, const DiscretePath& init,
                         const Policy& policy, double dt, int n_paths, std::uint64_t seed,
                         int threads = 1);

/// One-row-per-(path,node) CSV (path,node,time,x1..xN).
void export_batch_csv(const TrajectoryBatch& batch, std::ostream& out);
/// JSON manifest {model_hash, seed, dt, n_paths, scheme}.
std::string batch_manifest_json(const TrajectoryBatch& batch, const ControlModel& model);

struct MomentModulusReport {
  double p = 0.0;
  std::vector<double> dt_ladder;
  std::vector<double> terminal_moment;   // E ||X_T||_0^p per ladder entry
  std::vector<double> gaps;              // s - t values, finest dt
  std::vector<double> modulus_moment;    // E |X(s) - e^{(s-t)A} x(t)|^p
  double modulus_slope = 0.0;            // log-log fit over gaps
};

MomentModulusReport moment_and_modulus_check(const ControlModel& model, const DiscretePath& init,
                                             const Policy& policy, double p,
                                             const std::vector<double>& dt_ladder, int n_paths,
                                             std::uint64_t seed, int threads = 1);

struct YosidaCompareReport {
  std::vector<double> mu_ladder;
  std::vector<double> sup_error;  // E sup_s |X(s) - X^mu(s)| per mu
  bool non_increasing = false;
};

/// Same Brownian increments drive the base operator and each Yosida
/// approximant. Requires a contraction operator and a path-independent
/// policy (the comparison is for a fixed control process).
YosidaCompareReport yosida_compare(const ControlModel& model, const DiscretePath& init,
                                   const Policy& policy, const std::vector<double>& mu_ladder,
                                   double dt, int n_paths, std::uint64_t seed, int threads = 1);

struct ItoReport {
  std::string functional;
  std::vector<double> dt_ladder;
  std::vector<double> mean_abs_residual;
  std::vector<double> se_abs_residual;
  std::vector<double> orders;  // log2 ratios between consecutive dt halvings
};

/// Monte Carlo residual of the functional Ito formula for a functional with
/// closed-form derivatives. The dt ladder should be decreasing.
ItoReport ito_verify(const SmoothFunctional& f, const ControlModel& model,
                     const DiscretePath& init, const Policy& policy,
                     const std::vector<double>& dt_ladder, int n_paths, std::uint64_t seed,
                     int threads = 1);

struct ItoInequalityReport {
  double M = 0.0;
  double dt = 0.0;
  double mean_defect = 0.0;  // mean of RHS - LHS; should be >= -tolerance
  double se_defect = 0.0;
  double min_defect = 0.0;
  double frac_below = 0.0;  // fraction of paths with defect < -frac_tol
  double frac_tol = 0.0;
};

/// Defect of the Ito inequality for Upsilon^M on the difference of the state
/// and the semigroup extension of eta. Requires contraction and M >= 3.
ItoInequalityReport ito_inequality_verify(const ControlModel& model, const DiscretePath& init,
                                          const DiscretePath& eta, const Policy& policy, double M,
                                          double dt, int n_paths, std::uint64_t seed,
                                          double frac_tol, int threads = 1);

struct TailReport {
  std::vector<int> n_ladder;
  std::vector<double> tail_norm2;  // sup_u |Q_N G(gamma,u)|^2 per ladder entry
  bool non_increasing = false;
  bool vanishes = false;  // last entry == 0 within 1e-15
};

/// Tail of the noise loading after masking the first N coordinates.
TailReport tail_projection_check(const ControlModel& model, const DiscretePath& init,
                                 const std::vector<int>& n_ladder);

}  // namespace pdhjb
