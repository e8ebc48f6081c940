#include "doctest.h"
#include "pdhjb/bsde.hpp"
#include "pdhjb/mc.hpp"

#include <cmath>
#include <sstream>

using namespace pdhjb;

namespace {

struct Coeffs {
  double lambda = 0.0;
  double noise = 1.0;
  double driver_y = 0.0;   // q = driver_y * y + driver_c
  double driver_c = 0.0;
  std::function<double(double)> terminal = [](double) { return 1.0; };
};

ControlModel markov_1d(const Coeffs& c) {
  ControlModel m;
  m.name = "markov-1d";
  m.op = SpectralOperator({c.lambda});
  m.horizon = 1.0;
  m.noise_dim = 1;
  m.lipschitz = std::max(1.0, std::abs(c.driver_y));
  m.controls = ControlSet::singleton(0.0);
  m.markov = MarkovStructure::kEndpoint;
  m.drift = [](const PathView&, double, Eigen::Ref<HVector> o) { o[0] = 0.0; };
  const double g = c.noise;
  m.noise = [g](const PathView&, double, Eigen::Ref<Eigen::MatrixXd> o) { o(0, 0) = g; };
  const double qy = c.driver_y, qc = c.driver_c;
  m.driver = [qy, qc](const PathView&, double y, const Eigen::Ref<const Eigen::VectorXd>&,
                      double) { return qy * y + qc; };
  auto phi = c.terminal;
  m.terminal = [phi](const PathView& v) { return phi(v.endpoint()[0]); };
  m.spec_text = "test";
  return m;
}

DiscretePath start_at(const ControlModel& m, double dt, double x) {
  return DiscretePath::constant(make_grid(m.horizon, dt), HVector::Constant(m.dim(), x), 0);
}

}  // namespace

TEST_SUITE_BEGIN("bsde");

TEST_CASE("constant terminal with zero driver is a constant martingale") {
  Coeffs c;
  c.terminal = [](double) { return 2.5; };
  const ControlModel m = markov_1d(c);
  const TrajectoryBatch b =
      simulate(m, start_at(m, 0.01, 0.0), make_constant_policy(0.0), 0.01, 4000, 3);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  // terminal anchoring, bit-exact
  for (int p = 0; p < b.n_paths; ++p) CHECK(sol.Y(sol.n_steps, p) == 2.5);
  for (int i = 0; i <= sol.n_steps; i += 20)
    for (int p = 0; p < b.n_paths; p += 500)
      CHECK(sol.Y(i, p) == doctest::Approx(2.5).epsilon(1e-8));
  CHECK(sol.y0 == doctest::Approx(2.5).epsilon(1e-8));
  // Z is zero in truth; the per-step projection carries fit noise of order
  // (Y/sqrt(dt)) * sqrt(k/n), so only a noise-level sanity band is meaningful.
  std::vector<double> z0(b.n_paths);
  for (int p = 0; p < b.n_paths; ++p) z0[p] = sol.Z(sol.n_steps / 2, p, 0);
  CHECK(std::abs(mean_se(z0).mean) < 1.5);
}

TEST_CASE("linear driver reproduces the exponential") {
  Coeffs c;
  c.driver_y = 0.1;
  const ControlModel m = markov_1d(c);
  const double dt = 1e-2;
  const TrajectoryBatch b =
      simulate(m, start_at(m, dt, 0.0), make_constant_policy(0.0), dt, 2000, 11);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  CHECK(std::abs(sol.y0 - 1.1051709181) <= 3.0 * sol.y0_se + 5.0 * dt);
}

TEST_CASE("martingale representation of a linear terminal") {
  Coeffs c;
  c.terminal = [](double x) { return 2.0 * x; };
  const ControlModel m = markov_1d(c);
  // a coarser step keeps the Z projection noise well below the signal
  const TrajectoryBatch b =
      simulate(m, start_at(m, 0.05, 0.7), make_constant_policy(0.0), 0.05, 20000, 13);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  CHECK(std::abs(sol.y0 - 1.4) <= 3.0 * sol.y0_se + 1e-3);
  std::vector<double> z(b.n_paths);
  for (int p = 0; p < b.n_paths; ++p) z[p] = sol.Z(sol.n_steps / 3, p, 0);
  CHECK(mean_se(z).mean == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("zero-driver solutions have centered martingale increments") {
  Coeffs c;
  c.terminal = [](double x) { return x * x; };
  const ControlModel m = markov_1d(c);
  const TrajectoryBatch b =
      simulate(m, start_at(m, 0.02, 0.5), make_constant_policy(0.0), 0.02, 4000, 17);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  std::vector<double> inc(b.n_paths);
  for (int i = 0; i < sol.n_steps; i += 7) {
    for (int p = 0; p < b.n_paths; ++p) inc[p] = sol.Y(i + 1, p) - sol.Y(i, p);
    const MeanSe ms = mean_se(inc);
    CHECK(std::abs(ms.mean) <= std::max(3.0 * ms.se, 1e-6));
  }
}

TEST_CASE("picard contraction precondition") {
  Coeffs c;
  const ControlModel m = markov_1d(c);
  ControlModel stiff = m;
  stiff.lipschitz = 60.0;
  const TrajectoryBatch b =
      simulate(m, start_at(m, 0.01, 0.0), make_constant_policy(0.0), 0.01, 50, 19);
  CHECK_THROWS_AS(solve_lsmc(stiff, b), std::invalid_argument);
}

TEST_CASE("lattice oracle on the three closed-form models") {
  const double dt = 2e-3;
  {
    Coeffs c;
    c.driver_y = 0.1;
    const ControlModel m = markov_1d(c);
    const double y = solve_lattice_1d(m, start_at(m, dt, 0.0), make_constant_policy(0.0), dt);
    CHECK(std::abs(y - std::exp(0.1)) < 5.0 * dt);
  }
  {
    Coeffs c;
    c.terminal = [](double x) { return x * x; };
    const ControlModel m = markov_1d(c);
    const double y = solve_lattice_1d(m, start_at(m, dt, 1.0), make_constant_policy(0.0), dt);
    CHECK(y == doctest::Approx(1.0 + 1.0).epsilon(1e-6));
  }
  {
    Coeffs c;
    c.driver_y = -1.0;
    const ControlModel m = markov_1d(c);
    const double y = solve_lattice_1d(m, start_at(m, dt, 0.0), make_constant_policy(0.0), dt);
    CHECK(std::abs(y - std::exp(-1.0)) < 5.0 * dt);
  }
  // path-dependent coefficients are refused
  ControlModel pd = markov_1d(Coeffs{});
  pd.markov = MarkovStructure::kPathDependent;
  CHECK_THROWS_AS(solve_lattice_1d(pd, start_at(pd, dt, 0.0), make_constant_policy(0.0), dt),
                  std::invalid_argument);
}

TEST_CASE("lattice oracle agrees with the solver on a runmax model") {
  const ControlModel m = make_runmax();
  const double dt = 0.01;
  const Policy pol = make_constant_policy(0.25);
  const DiscretePath init = start_at(m, dt, 0.5);
  const double lat = solve_lattice_1d(m, init, pol, dt);
  const TrajectoryBatch b = simulate(m, init, pol, dt, 20000, 23);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  CHECK(std::abs(sol.y0 - lat) <= 3.0 * sol.y0_se + 10.0 * dt);
}

TEST_CASE("backward semigroup: constants, whole-window reduction, nesting") {
  Coeffs c;
  c.terminal = [](double x) { return x * x; };
  const ControlModel m = markov_1d(c);
  const double dt = 0.01;
  const TrajectoryBatch b =
      simulate(m, start_at(m, dt, 0.3), make_constant_policy(0.0), dt, 4000, 29);

  // constant terminal data with zero driver returns the constant
  std::vector<double> zeta(b.n_paths, 3.25);
  CHECK(backward_semigroup(m, b, b.grid.n_steps / 2, zeta) ==
        doctest::Approx(3.25).epsilon(1e-8));

  // the whole window with zeta = phi(X_T) is the definition of the cost
  std::vector<double> phi(b.n_paths);
  for (int p = 0; p < b.n_paths; ++p) phi[p] = m.terminal(b.view(p, b.grid.n_steps));
  const BSDEGridSolution direct = solve_lsmc(m, b);
  CHECK(backward_semigroup(m, b, b.grid.n_steps, phi) == direct.y0);

  // tower property: nesting through the midpoint stays within noise
  const int mid = b.grid.n_steps / 2;
  const BSDEGridSolution whole = solve_lsmc(m, b);
  std::vector<double> cont(b.n_paths);
  for (int p = 0; p < b.n_paths; ++p) cont[p] = whole.Y(mid, p);
  const BSDEGridSolution nested = solve_lsmc_window(m, b, mid, cont);
  CHECK(std::abs(nested.y0 - whole.y0) <= 3.0 * (nested.y0_se + whole.y0_se) + 5.0 * dt);
}

TEST_CASE("comparison theorem on ordered data") {
  Coeffs c;
  c.terminal = [](double) { return 0.0; };
  const ControlModel base = markov_1d(c);
  const double dt = 0.01;
  const TrajectoryBatch b =
      simulate(base, start_at(base, dt, 0.0), make_constant_policy(0.0), dt, 2000, 31);

  // terminal gap of exactly one
  const ComparisonReport r1 = comparison_check(with_terminal_shift(base, 1.0), base, b);
  CHECK(r1.precondition_ok);
  CHECK(r1.pass);
  CHECK(r1.y0_gap == doctest::Approx(1.0).epsilon(1e-6));

  // identical data: the difference vanishes identically
  const ComparisonReport r0 = comparison_check(base, base, b);
  CHECK(r0.min_gap == 0.0);
  CHECK(r0.y0_gap == 0.0);
  CHECK(r0.pass);

  // driver gap 0.1 integrates to about 0.1 * T
  const ComparisonReport rq = comparison_check(with_driver_shift(base, 0.1), base, b);
  CHECK(rq.pass);
  CHECK(rq.y0_gap == doctest::Approx(0.1).epsilon(0.05));

  // violated precondition is reported, not asserted
  const ComparisonReport rv = comparison_check(with_terminal_shift(base, -1.0), base, b);
  CHECK_FALSE(rv.precondition_ok);
  CHECK_FALSE(rv.pass);
}

TEST_CASE("a-priori estimate ladder") {
  Coeffs c;
  c.driver_y = -0.4;
  c.terminal = [](double x) { return std::cos(x); };
  const ControlModel base = markov_1d(c);
  const double dt = 0.01;
  const TrajectoryBatch b =
      simulate(base, start_at(base, dt, 0.2), make_constant_policy(0.0), dt, 1500, 37);

  const AprioriReport rep = apriori_estimate_check(
      base, b, [&](double e) { return with_terminal_shift(base, e); },
      {0.0, 0.2, 0.1, 0.05}, 2.0);
  CHECK(rep.numerator[0] == 0.0);  // zero perturbation
  const double bound = std::exp(2.0 * base.lipschitz * base.horizon) * 1.5;
  for (std::size_t i = 1; i < rep.ratio.size(); ++i) {
    CHECK(rep.ratio[i] > 0.0);
    CHECK(rep.ratio[i] <= bound);
  }
  CHECK(rep.slope == doctest::Approx(2.0).epsilon(0.1));  // p = 2, linear response
}

TEST_CASE("initial-path shift shrinks the solution gap linearly") {
  Coeffs c;
  c.terminal = [](double x) { return std::tanh(x); };
  c.driver_y = -0.3;
  const ControlModel m = markov_1d(c);
  const double dt = 0.01;
  const double p = 2.0;
  std::vector<double> eps{0.4, 0.2, 0.1};
  std::vector<double> nums;
  for (double e : eps) {
    const TrajectoryBatch b0 =
        simulate(m, start_at(m, dt, 0.0), make_constant_policy(0.0), dt, 1500, 41);
    const TrajectoryBatch b1 =
        simulate(m, start_at(m, dt, e), make_constant_policy(0.0), dt, 1500, 41);
    const BSDEGridSolution s0 = solve_lsmc(m, b0);
    const BSDEGridSolution s1 = solve_lsmc(m, b1);
    std::vector<double> md(b0.n_paths, 0.0);
    for (int i = 0; i <= s0.n_steps; ++i)
      for (int q = 0; q < b0.n_paths; ++q)
        md[q] = std::max(md[q], std::abs(s0.Y(i, q) - s1.Y(i, q)));
    for (double& v : md) v = std::pow(v, p);
    nums.push_back(mean_se(md).mean);
  }
  // log-log slope across the ladder is about p
  const double slope01 = std::log(nums[0] / nums[1]) / std::log(eps[0] / eps[1]);
  const double slope12 = std::log(nums[1] / nums[2]) / std::log(eps[1] / eps[2]);
  CHECK(slope01 == doctest::Approx(2.0).epsilon(0.25));
  CHECK(slope12 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("solution export format") {
  Coeffs c;
  const ControlModel m = markov_1d(c);
  const TrajectoryBatch b =
      simulate(m, start_at(m, 0.25, 0.0), make_constant_policy(0.0), 0.25, 8, 43);
  const BSDEGridSolution sol = solve_lsmc(m, b);
  std::stringstream ss;
  export_solution_csv(sol, ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "step,mean_Y,se_Y,mean_Z1");
  int rows = 0;
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) ++rows;
  CHECK(rows == sol.n_steps + 1);
  const std::string manifest = solution_manifest_json(sol, m);
  CHECK(manifest.find("max_condition") != std::string::npos);
  CHECK(manifest.find("poly(degree=3") != std::string::npos);
}

TEST_SUITE_END();
