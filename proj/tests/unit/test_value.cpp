#include "doctest.h"
#include "pdhjb/mc.hpp"
#include "pdhjb/value.hpp"

#include <cmath>

using namespace pdhjb;

namespace {
DiscretePath start_at(const ControlModel& m, double dt, double x) {
  return DiscretePath::constant(make_grid(m.horizon, dt), HVector::Constant(m.dim(), x), 0);
}
}  // namespace

TEST_SUITE_BEGIN("value");

TEST_CASE("singleton classes reduce to the plain cost") {
  const ControlModel m = make_uncontrolled();
  const DiscretePath init = start_at(m, 0.01, 0.3);
  const PolicyClass cls = make_singleton_class(0.0);
  const ValueReport rep = value_direct(m, init, cls, 0.01, 1500, 7);
  const TrajectoryBatch b = simulate(m, init, cls.policies[0], 0.01, 1500, 7);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  CHECK(rep.estimate == sol.y0);
  CHECK(rep.policy_id == cls.policies[0].id);
  CHECK_THROWS_AS(value_direct(m, init, PolicyClass{}, 0.01, 10, 7), std::invalid_argument);
}

TEST_CASE("enlarging the class never lowers the estimate") {
  const ControlModel m = make_lq_1d();
  const DiscretePath init = start_at(m, 0.01, 0.5);
  PolicyClass small = make_feedback_class({0.0, 1.0}, m.controls);
  PolicyClass large = make_feedback_class({0.0, 1.0, 0.5, 2.0}, m.controls);
  const ValueReport vs = value_direct(m, init, small, 0.01, 1000, 11);
  const ValueReport vl = value_direct(m, init, large, 0.01, 1000, 11);
  CHECK(vl.estimate >= vs.estimate);  // exact: same seeds, superset of candidates
  // the estimate dominates every per-policy value by construction
  for (double v : vl.per_policy) CHECK(vl.estimate >= v);
}

TEST_CASE("LQ benchmark near the closed-form value") {
  const ControlModel m = make_lq_1d();
  const PolicyClass cls = make_feedback_class({0.0, 0.5, 1.0, 2.0}, m.controls);
  const ValueReport v0 = value_direct(m, start_at(m, 4e-3, 0.0), cls, 4e-3, 3000, 13);
  CHECK(v0.estimate == doctest::Approx(-1.0).epsilon(0.08));
  CHECK(v0.policy_id == "feedback(gain=1)");
}

TEST_CASE("open-loop classes enumerate the control grid") {
  const ControlModel m = make_lq_1d();
  const ControlSet small = ControlSet::uniform(-1.0, 1.0, 1.0);
  const PolicyClass cls = make_open_loop_class(small, {50});
  CHECK(cls.policies.size() == 9);  // 3 controls on 2 segments
  CHECK_THROWS_AS(make_open_loop_class(m.controls, {10, 20, 30, 40}), RefusalError);
}

TEST_CASE("DPP consistency for a singleton class") {
  const ControlModel m = make_uncontrolled();
  const DiscretePath init = start_at(m, 0.01, 0.4);
  const PolicyClass cls = make_singleton_class(0.0);
  const int window = 25;
  const ContinuationFn cont =
      make_regressed_continuation(m, init, cls.policies[0], window, 0.01, 3000, 17);
  const ValueReport direct = value_direct(m, init, cls, 0.01, 3000, 17);
  const ValueReport dpp = value_dpp(m, init, cls, window, cont, 0.01, 3000, 17);
  CHECK(std::abs(direct.estimate - dpp.estimate) <=
        3.0 * (direct.se + dpp.se) + 5.0 * 0.01);
}

TEST_CASE("DPP with the LQ analytic continuation") {
  const ControlModel m = make_lq_1d();
  const DiscretePath init = start_at(m, 4e-3, 0.0);
  const PolicyClass cls = make_feedback_class({0.0, 1.0}, m.controls);
  const double T = m.horizon;
  const ContinuationFn cont = [T](const PathView& v) {
    return -v.endpoint().squaredNorm() - (T - v.end_time());
  };
  const ValueReport dpp = value_dpp(m, init, cls, 50, cont, 4e-3, 3000, 19);
  CHECK(dpp.estimate == doctest::Approx(-1.0).epsilon(0.08));
  // the whole-horizon window with the terminal cost is value_direct by definition
  const ContinuationFn phi = [&m](const PathView& v) { return m.terminal(v); };
  const ValueReport whole =
      value_dpp(m, init, cls, make_grid(m.horizon, 4e-3).n_steps, phi, 4e-3, 500, 19);
  const ValueReport direct = value_direct(m, init, cls, 4e-3, 500, 19);
  CHECK(whole.estimate == direct.estimate);
}

TEST_CASE("value regularity ratios on the LQ benchmark") {
  const ControlModel m = make_lq_1d();
  const double dt = 0.01;
  const PathGrid grid = make_grid(m.horizon, dt);
  const PolicyClass cls = make_feedback_class({1.0}, m.controls);

  std::vector<std::pair<DiscretePath, DiscretePath>> pairs;
  pairs.emplace_back(start_at(m, dt, 0.0), start_at(m, dt, 0.0));   // equal pair
  pairs.emplace_back(start_at(m, dt, 0.0), start_at(m, dt, 0.5));
  pairs.emplace_back(start_at(m, dt, 0.5), start_at(m, dt, 1.0));
  const RegularityReport rep = regularity_check(m, cls, pairs, start_at(m, dt, 0.8),
                                                {5, 10, 20}, dt, 2000, 23);
  CHECK(rep.pair_ratio[0] == 0.0);  // identical paths, identical pipelines
  // the oracle ratio |x + y| stays within the sampled box plus noise
  CHECK(rep.pair_ratio[1] <= 0.5 + 10.0 * rep.mc_noise_floor);
  CHECK(rep.max_ratio <= 1.5 + 10.0 * rep.mc_noise_floor);
  // time modulus stays bounded (the oracle gap is (s-t), so ratios are small)
  for (double r : rep.modulus_ratio) CHECK(r <= 1.0 + rep.mc_noise_floor);
}

TEST_CASE("coefficient stability: matched seeds and the additive-terminal case") {
  const ControlModel m = make_lq_1d();
  const PolicyClass cls = make_feedback_class({1.0}, m.controls);
  const double dt = 0.01;
  std::vector<DiscretePath> sample{start_at(m, dt, 0.0), start_at(m, dt, 1.0)};

  // zero perturbation: matched seeds give a vanishing gap
  const StabilityReport zero = coefficient_stability_check(
      m, [&](double e) { return with_terminal_shift(m, e); }, {0.0}, sample, cls, dt, 400, 29);
  CHECK(zero.value_gap[0] == 0.0);

  // additive terminal with a driver free of y: the gap tracks eps itself
  const StabilityReport add = coefficient_stability_check(
      m, [&](double e) { return with_terminal_shift(m, e); }, {0.2, 0.1}, sample, cls, dt, 2000,
      29);
  CHECK(add.value_gap[0] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(add.value_gap[1] == doctest::Approx(0.1).epsilon(1e-9));

  // drift shift: gaps shrink with eps at unit log-log slope
  const StabilityReport drift = coefficient_stability_check(
      m, [&](double e) { return with_drift_shift(m, e); }, {0.2, 0.1, 0.05}, sample, cls, dt,
      2000, 29);
  CHECK(drift.slope > 0.7);
  CHECK(drift.value_gap[2] < drift.value_gap[0]);
}

TEST_SUITE_END();
