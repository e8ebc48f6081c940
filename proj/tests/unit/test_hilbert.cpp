#include "doctest.h"
#include "pdhjb/hilbert.hpp"
#include "pdhjb/mc.hpp"

#include <cmath>

using namespace pdhjb;

namespace {
HVector vec(std::initializer_list<double> v) {
  HVector x(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}
}  // namespace

TEST_SUITE_BEGIN("hilbert");

TEST_CASE("semigroup closed form") {
  CHECK(semigroup_apply(SpectralOperator({0.0}), 1.7, vec({5.0}))[0] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(semigroup_apply(SpectralOperator({-1.0}), 0.5, vec({2.0}))[0] ==
        doctest::Approx(1.2130613194).epsilon(1e-9));
  CHECK(semigroup_apply(SpectralOperator({-2.0}), 1.0, vec({1.0}))[0] ==
        doctest::Approx(0.1353352832).epsilon(1e-9));
}

TEST_CASE("semigroup rejects bad input") {
  const SpectralOperator op({-1.0});
  CHECK_THROWS_AS(semigroup_apply(op, -0.1, vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(semigroup_apply(op, 0.1, vec({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("generator action and self-adjointness") {
  CHECK(apply_generator(SpectralOperator({0.0, 0.0}), vec({3.0, 4.0})).norm() == 0.0);
  const HVector r = apply_generator(SpectralOperator({-1.0, -4.0}), vec({1.0, 1.0}));
  CHECK(r[0] == -1.0);
  CHECK(r[1] == -4.0);
  const double pi = 3.14159265358979323846;
  CHECK(apply_generator(SpectralOperator({-pi * pi}), vec({2.0}))[0] ==
        doctest::Approx(-19.7392088022).epsilon(1e-10));
  // A* == A on the diagonal truncation
  const SpectralOperator op = SpectralOperator::dirichlet_laplacian(3);
  const HVector v = vec({1.0, -2.0, 0.5});
  CHECK((apply_generator(op, v) - apply_adjoint_generator(op, v)).norm() == 0.0);
}

TEST_CASE("yosida eigenvalue map") {
  CHECK(yosida(SpectralOperator({0.0}), 7.0).eigenvalues()[0] == 0.0);
  CHECK(yosida(SpectralOperator({-1.0}), 10.0).eigenvalues()[0] ==
        doctest::Approx(-0.9090909091).epsilon(1e-10));
  CHECK(std::abs(yosida(SpectralOperator({-1.0}), 1e6).eigenvalues()[0] + 1.0) < 1e-5);
  CHECK_THROWS_AS(yosida(SpectralOperator({-1.0}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(yosida(SpectralOperator({-1.0}), -3.0), std::invalid_argument);
  // contraction preserved
  CHECK(yosida(SpectralOperator::dirichlet_laplacian(4), 50.0).is_contraction());
}

TEST_CASE("non-contraction needs the explicit flag") {
  CHECK_THROWS_AS(SpectralOperator({0.5}), std::invalid_argument);
  const SpectralOperator op({0.5}, true);
  CHECK_FALSE(op.is_contraction());
  CHECK(op.noncontraction_allowed());
}

TEST_CASE("semigroup law and contraction on random data") {
  const SpectralOperator op({-0.3, -2.0, -9.8696});
  const CounterRng rng(SeedSequence(77).fold(stream::kPropertySuite).key());
  for (int i = 0; i < 200; ++i) {
    HVector v(3);
    for (int k = 0; k < 3; ++k) v[k] = rng.normal(10 * i + k);
    const double t = rng.uniform(10 * i + 5);
    const double s = rng.uniform(10 * i + 6);
    const HVector once = semigroup_apply(op, t + s, v);
    const HVector twice = semigroup_apply(op, t, semigroup_apply(op, s, v));
    CHECK((once - twice).norm() < 1e-12 * std::max(1.0, v.norm()));
    CHECK(semigroup_apply(op, t, v).norm() <= v.norm() * (1.0 + 1e-15));
  }
}

TEST_CASE("yosida semigroup error non-increasing along a doubling ladder") {
  const SpectralOperator op({-1.0, -4.0});
  const HVector v = vec({1.0, -0.7});
  double prev = 1e300;
  for (double mu : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0}) {
    const SpectralOperator approx = yosida(op, mu);
    double worst = 0.0;
    for (int j = 0; j <= 16; ++j) {
      const double t = j / 16.0;
      worst = std::max(worst, (semigroup_apply(approx, t, v) - semigroup_apply(op, t, v)).norm());
    }
    CHECK(worst <= prev * (1.0 + 1e-12));
    prev = worst;
  }
  CHECK(prev < 2e-2);
}

TEST_SUITE_END();
