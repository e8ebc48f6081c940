/**
 * @file bsde.hpp
 * @brief Backward SDE solving on trajectory batches (least-squares Monte
 *        Carlo), a trinomial-lattice oracle for 1-D models, the backward
 *        semigroup, and the comparison / a-priori estimate checks.
 *
 * The LSMC recursion: Y anchored at phi(X_T) per path, then backwards
 *   Z_i = E[Y_{i+1} dW_i^T | features_i] / dt,
 *   Y_i = E[Y_{i+1} | features_i] + q(X_{<=i}, Y_i, Z_i, u_i) dt,
 * with conditional expectations by ridge-regularized polynomial regression
 * on (endpoint coords, running max of |X|) and two Picard passes through the
 * implicit driver (valid while dt * L < 1/2).
 *
 * The scalar start-value estimate is the pathwise representation with the
 * martingale part dropped (it has zero mean):
 *   Y0 ~ mean_p [ phi(X_T) + sum q dt ],
 * whose sample standard error is reported alongside. A control variate built
 * from the per-step regressed Z is deliberately not used: at desk-scale step
 * counts its fitted-coefficient noise grows like k/(n dt) and dominates the
 * variance it removes.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdhjb/model.hpp"
#include "pdhjb/simulate.hpp"

namespace pdhjb {

/// Polynomial regression basis in (endpoint coordinates, running max).
struct FeatureBasis {
  int degree = 3;
  bool use_runmax = true;

  int feature_count(int dim) const;
  void fill(const PathView& v, double* out) const;  // out has feature_count entries
  std::string describe() const;
};

struct BSDEGridSolution {
  int n_paths = 0;
  int n_steps = 0;  // simulated steps in the window
  int noise_dim = 0;
  std::vector<double> y;  // [step 0..n_steps][path]
  std::vector<double> z;  // [step 0..n_steps-1][path][j]
  FeatureBasis basis;
  double max_condition = 0.0;      // largest Gram condition number seen
  bool rank_deficient = false;     // any step with condition > 1e12
  double y0 = 0.0;                 // pathwise estimate of Y at the window start
  double y0_se = 0.0;

  double Y(int step, int path) const { return y[static_cast<std::size_t>(step) * n_paths + path]; }
  double Z(int step, int path, int j) const {
    return z[(static_cast<std::size_t>(step) * n_paths + path) * noise_dim + j];
  }
};

/// Backward solve over the whole batch window with terminal phi(X_T).
BSDEGridSolution solve_lsmc(const ControlModel& model, const TrajectoryBatch& batch,
                            const FeatureBasis& basis = {});

/// Backward solve on [start, end_node] with caller-supplied terminal values
/// (one per path). This is the backward semigroup: the returned y0 is the
/// window-start value of the BSDE with terminal data zeta.
BSDEGridSolution solve_lsmc_window(const ControlModel& model, const TrajectoryBatch& batch,
                                   int end_node, const std::vector<double>& zeta,
                                   const FeatureBasis& basis = {});

/// G^{gamma,u}_{t,t+delta}[zeta]: convenience wrapper returning y0 only.
double backward_semigroup(const ControlModel& model, const TrajectoryBatch& batch, int end_node,
                          const std::vector<double>& zeta, const FeatureBasis& basis = {});

/// Deterministic trinomial-lattice solution of the 1-D BSDE under a feedback
/// policy; independent oracle for solve_lsmc. Handles endpoint-Markovian
/// models and, on an augmented (state, running max) lattice, runmax models.
double solve_lattice_1d(const ControlModel& model, const DiscretePath& init, const Policy& policy,
                        double dt);

/// CSV export `step,mean_Y,se_Y,mean_Z1..Zd` plus a JSON manifest with the
/// regression spec and condition numbers.
void export_solution_csv(const BSDEGridSolution& sol, std::ostream& out);
std::string solution_manifest_json(const BSDEGridSolution& sol, const ControlModel& model);

struct ComparisonReport {
  bool precondition_ok = false;  // phi1 >= phi2 and q1 >= q2 at (Y2, Z2) on the batch
  double min_gap = 0.0;          // min over (step, path) of Y1 - Y2
  double y0_gap = 0.0;           // Y1(0) - Y2(0)
  double tolerance = 0.0;
  bool pass = false;
};

/// Comparison theorem check for two models sharing (F, G) on one batch
/// (matched increments). tol_c scales the dt part of tol = 3*SE + tol_c*dt.
ComparisonReport comparison_check(const ControlModel& m1, const ControlModel& m2,
                                  const TrajectoryBatch& batch, double tol_c = 5.0,
                                  const FeatureBasis& basis = {});

struct AprioriReport {
  double p = 2.0;
  std::vector<double> perturbations;
  std::vector<double> numerator;  // E sup_i |Y1_i - Y2_i|^p
  std::vector<double> ratio;      // numerator / perturbation^p
  double slope = 0.0;             // log-log slope of numerator vs perturbation
};

/// A-priori estimate ladder: perturbed models produced by `perturb`,
/// matched increments, ratio must stay bounded as the perturbation vanishes.
AprioriReport apriori_estimate_check(const ControlModel& model, const TrajectoryBatch& batch,
                                     const std::function<ControlModel(double)>& perturb,
                                     const std::vector<double>& eps_ladder, double p,
                                     const FeatureBasis& basis = {});

}  // namespace pdhjb
