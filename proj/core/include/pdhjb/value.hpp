/**
 * @file value.hpp
 * @brief Value-functional estimation over declared policy classes, the
 *        dynamic-programming consistency check, and the value regularity /
 *        coefficient stability reports.
 *
 * The supremum over admissible controls is replaced by a maximum over an
 * enumerated policy class; every estimate is therefore a certified lower
 * bound on the value, and every report records the class that produced it.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pdhjb/bsde.hpp"
#include "pdhjb/model.hpp"

namespace pdhjb {

/// Enumerable surrogate of the admissible-control family.
struct PolicyClass {
  std::string kind;  // "singleton" | "open-loop-piecewise" | "feedback-on-features"
  std::vector<Policy> policies;
  std::string describe() const;
};

PolicyClass make_singleton_class(double u);
/// All |U|^(segments) open-loop piecewise-constant controls; capped.
PolicyClass make_open_loop_class(const ControlSet& controls, const std::vector<int>& switch_nodes,
                                 std::size_t cap = 512);
/// Endpoint feedback u = snap(-gain * x1) for each gain.
PolicyClass make_feedback_class(const std::vector<double>& gains, const ControlSet& controls);

struct ValueReport {
  double estimate = 0.0;
  double se = 0.0;
  std::string policy_id;  // achieving policy
  std::string class_spec;
  std::uint64_t gamma_hash = 0;
  double dt = 0.0;
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_policy;  // estimates in enumeration order
};

/// max over the class of the BSDE start value, matched seeds across policies.
ValueReport value_direct(const ControlModel& model, const DiscretePath& init,
                         const PolicyClass& policies, double dt, int n_paths, std::uint64_t seed,
                         const FeatureBasis& basis = {}, int threads = 1);

/// Continuation estimator: per-path value proxy at the window end.
using ContinuationFn = std::function<double(const PathView&)>;

/// DPP composition: sup over window policies of the backward semigroup
/// applied to the continuation values at t + delta (window_nodes grid steps).
ValueReport value_dpp(const ControlModel& model, const DiscretePath& init,
                      const PolicyClass& policies, int window_nodes,
                      const ContinuationFn& continuation, double dt, int n_paths,
                      std::uint64_t seed, const FeatureBasis& basis = {}, int threads = 1);

/// Feature-regressed continuation built from a full-horizon solve under the
/// given policy: fits the solver's Y at the window end on the basis features.
ContinuationFn make_regressed_continuation(const ControlModel& model, const DiscretePath& init,
                                           const Policy& policy, int window_nodes, double dt,
                                           int n_paths, std::uint64_t seed,
                                           const FeatureBasis& basis = {}, int threads = 1);

struct RegularityReport {
  // Lipschitz part: |V(gamma) - V(eta)| / ||gamma - eta||_0 over path pairs.
  std::vector<double> pair_distance;
  std::vector<double> pair_ratio;
  double max_ratio = 0.0;
  // Time modulus: |V(gamma_t) - V(gamma_{t,s,A})| / (s-t)^{1/2} over an s-ladder.
  std::vector<double> gaps;
  std::vector<double> modulus_ratio;
  double max_modulus_ratio = 0.0;
  double mc_noise_floor = 0.0;  // 3 * max SE seen, for reading small ratios
};

RegularityReport regularity_check(const ControlModel& model, const PolicyClass& policies,
                                  const std::vector<std::pair<DiscretePath, DiscretePath>>& pairs,
                                  const DiscretePath& modulus_base,
                                  const std::vector<int>& gap_nodes, double dt, int n_paths,
                                  std::uint64_t seed, const FeatureBasis& basis = {},
                                  int threads = 1);

struct StabilityReport {
  std::vector<double> eps_ladder;
  std::vector<double> value_gap;  // sup over the path sample of |V_eps - V|
  double slope = 0.0;             // log-log
};

/// |V-hat of perturbed model - V-hat| over an epsilon ladder, matched seeds.
StabilityReport coefficient_stability_check(const ControlModel& model,
                                            const std::function<ControlModel(double)>& perturb,
                                            const std::vector<double>& eps_ladder,
                                            const std::vector<DiscretePath>& sample,
                                            const PolicyClass& policies, double dt, int n_paths,
                                            std::uint64_t seed, const FeatureBasis& basis = {},
                                            int threads = 1);

}  // namespace pdhjb
