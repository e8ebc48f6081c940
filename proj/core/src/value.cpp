#include "pdhjb/value.hpp"

#include <cmath>
#include <stdexcept>

#include "pdhjb/mc.hpp"

namespace pdhjb {

std::string PolicyClass::describe() const {
  std::string s = kind + "{";
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (i) s += ",";
    s += policies[i].id;
  }
  return s + "}";
}

PolicyClass make_singleton_class(double u) {
  PolicyClass c;
  c.kind = "singleton";
  c.policies.push_back(make_constant_policy(u));
  return c;
}

PolicyClass make_open_loop_class(const ControlSet& controls, const std::vector<int>& switch_nodes,
                                 std::size_t cap) {
  PolicyClass c;
  c.kind = "open-loop-piecewise";
  const std::size_t segs = switch_nodes.size() + 1;
  double total = std::pow(static_cast<double>(controls.size()), static_cast<double>(segs));
  if (total > static_cast<double>(cap))
    throw RefusalError("open-loop class larger than the enumeration cap");
  std::vector<std::size_t> digit(segs, 0);
  while (true) {
    std::vector<double> u(segs);
    for (std::size_t s = 0; s < segs; ++s) u[s] = controls.values()[digit[s]];
    c.policies.push_back(make_piecewise_constant_policy(switch_nodes, u));
    std::size_t s = 0;
    while (s < segs && ++digit[s] == controls.size()) digit[s++] = 0;
    if (s == segs) break;
  }
  return c;
}

PolicyClass make_feedback_class(const std::vector<double>& gains, const ControlSet& controls) {
  PolicyClass c;
  c.kind = "feedback-on-features";
  for (double g : gains) c.policies.push_back(make_endpoint_feedback_policy(g, controls));
  return c;
}

ValueReport value_direct(const ControlModel& model, const DiscretePath& init,
                         const PolicyClass& policies, double dt, int n_paths, std::uint64_t seed,
                         const FeatureBasis& basis, int threads) {
  if (policies.policies.empty()) throw std::invalid_argument("empty policy class");
  ValueReport rep;
  rep.class_spec = policies.describe();
  rep.gamma_hash = path_hash(init);
  rep.dt = dt;
  rep.n_paths = n_paths;
  rep.seed = seed;

  bool first = true;
  for (const Policy& pol : policies.policies) {
    const TrajectoryBatch b = simulate(model, init, pol, dt, n_paths, seed, threads);
    const BSDEGridSolution sol = solve_lsmc(model, b, basis);
    rep.per_policy.push_back(sol.y0);
    if (first || sol.y0 > rep.estimate) {
      rep.estimate = sol.y0;
      rep.se = sol.y0_se;
      rep.policy_id = pol.id;
      first = false;
    }
  }
  return rep;
}

ValueReport value_dpp(const ControlModel& model, const DiscretePath& init,
                      const PolicyClass& policies, int window_nodes,
                      const ContinuationFn& continuation, double dt, int n_paths,
                      std::uint64_t seed, const FeatureBasis& basis, int threads) {
  if (policies.policies.empty()) throw std::invalid_argument("empty policy class");
  if (!continuation) throw std::invalid_argument("missing continuation estimator");
  const int end_node = init.end_index() + window_nodes;

  ValueReport rep;
  rep.class_spec = policies.describe();
  rep.gamma_hash = path_hash(init);
  rep.dt = dt;
  rep.n_paths = n_paths;
  rep.seed = seed;

  bool first = true;
  for (const Policy& pol : policies.policies) {
    const TrajectoryBatch b = simulate(model, init, pol, dt, n_paths, seed, threads);
    if (end_node > b.grid.n_steps) throw std::invalid_argument("DPP window exceeds the horizon");
    std::vector<double> zeta(n_paths);
    for (int p = 0; p < n_paths; ++p) zeta[p] = continuation(b.view(p, end_node));
    const BSDEGridSolution sol = solve_lsmc_window(model, b, end_node, zeta, basis);
    rep.per_policy.push_back(sol.y0);
    if (first || sol.y0 > rep.estimate) {
      rep.estimate = sol.y0;
      rep.se = sol.y0_se;
      rep.policy_id = pol.id;
      first = false;
    }
  }
  return rep;
}

ContinuationFn make_regressed_continuation(const ControlModel& model, const DiscretePath& init,
                                           const Policy& policy, int window_nodes, double dt,
                                           int n_paths, std::uint64_t seed,
                                           const FeatureBasis& basis, int threads) {
  const TrajectoryBatch b = simulate(model, init, policy, dt, n_paths, seed, threads);
  const BSDEGridSolution sol = solve_lsmc(model, b, basis);
  const int node = init.end_index() + window_nodes;
  const int step = node - b.start_index;
  if (step < 0 || step > sol.n_steps) throw std::invalid_argument("window exceeds the horizon");

  // Fit the solver's Y at the window end on the features.
  const int k = basis.feature_count(b.dim);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  std::vector<double> feat(k);
  for (int p = 0; p < n_paths; ++p) {
    basis.fill(b.view(p, node), feat.data());
    for (int a = 0; a < k; ++a) {
      for (int c = a; c < k; ++c) gram(a, c) += feat[a] * feat[c];
      rhs[a] += feat[a] * sol.Y(step, p);
    }
  }
  gram = gram.selfadjointView<Eigen::Upper>();
  gram.diagonal().array() += 1e-10;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);

  FeatureBasis bcopy = basis;
  return [bcopy, beta, k](const PathView& v) {
    std::vector<double> f(k);
    bcopy.fill(v, f.data());
    double s = 0.0;
    for (int a = 0; a < k; ++a) s += f[a] * beta[a];
    return s;
  };
}

RegularityReport regularity_check(const ControlModel& model, const PolicyClass& policies,
                                  const std::vector<std::pair<DiscretePath, DiscretePath>>& pairs,
                                  const DiscretePath& modulus_base,
                                  const std::vector<int>& gap_nodes, double dt, int n_paths,
                                  std::uint64_t seed, const FeatureBasis& basis, int threads) {
  RegularityReport rep;
  for (const auto& [a, b] : pairs) {
    const ValueReport va = value_direct(model, a, policies, dt, n_paths, seed, basis, threads);
    const ValueReport vb = value_direct(model, b, policies, dt, n_paths, seed, basis, threads);
    double dist = 0.0;
    {
      // ||a - b||_0 over the shared lattice (same end index required)
      if (a.end_index() != b.end_index())
        throw std::invalid_argument("Lipschitz pairs must share their end time");
      for (int i = 0; i <= a.end_index(); ++i)
        dist = std::max(dist, (a.value(i) - b.value(i)).norm());
    }
    rep.pair_distance.push_back(dist);
    const double ratio = dist > 0.0 ? std::abs(va.estimate - vb.estimate) / dist : 0.0;
    rep.pair_ratio.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.mc_noise_floor = std::max(rep.mc_noise_floor, 3.0 * (va.se + vb.se));
  }

  const ValueReport v0 =
      value_direct(model, modulus_base, policies, dt, n_paths, seed, basis, threads);
  for (int g : gap_nodes) {
    const DiscretePath extended = semigroup_extend(modulus_base, model.op, modulus_base.end_index() + g);
    const ValueReport vg =
        value_direct(model, extended, policies, dt, n_paths, seed, basis, threads);
    const double gap = g * dt;
    rep.gaps.push_back(gap);
    const double ratio = std::abs(vg.estimate - v0.estimate) / std::sqrt(gap);
    rep.modulus_ratio.push_back(ratio);
    rep.max_modulus_ratio = std::max(rep.max_modulus_ratio, ratio);
    rep.mc_noise_floor = std::max(rep.mc_noise_floor, 3.0 * (v0.se + vg.se));
  }
  return rep;
}

StabilityReport coefficient_stability_check(const ControlModel& model,
                                            const std::function<ControlModel(double)>& perturb,
                                            const std::vector<double>& eps_ladder,
                                            const std::vector<DiscretePath>& sample,
                                            const PolicyClass& policies, double dt, int n_paths,
                                            std::uint64_t seed, const FeatureBasis& basis,
                                            int threads) {
  StabilityReport rep;
  rep.eps_ladder = eps_ladder;
  std::vector<double> base;
  base.reserve(sample.size());
  for (const auto& g : sample)
    base.push_back(value_direct(model, g, policies, dt, n_paths, seed, basis, threads).estimate);

  for (double eps : eps_ladder) {
    const ControlModel pm = perturb(eps);
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const double v =
          value_direct(pm, sample[i], policies, dt, n_paths, seed, basis, threads).estimate;
      worst = std::max(worst, std::abs(v - base[i]));
    }
    rep.value_gap.push_back(worst);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < eps_ladder.size(); ++i)
    if (eps_ladder[i] > 0.0 && rep.value_gap[i] > 0.0) {
      xs.push_back(std::log(eps_ladder[i]));
      ys.push_back(std::log(rep.value_gap[i]));
    }
  if (xs.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

}  // namespace pdhjb
