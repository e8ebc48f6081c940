/**
 * @file functional.hpp
 * @brief Pathwise (horizontal/vertical) derivatives, the gauge functionals
 *        S and Upsilon^M with their closed-form derivatives, the bivariate
 *        gauge, finite-difference oracles, and the test-functional class
 *        used by the viscosity probes.
 *
 * With r = |x| / sup (endpoint norm over sup norm, r in [0,1]) the smooth
 * surrogate of the sup norm and its derivatives reduce to
 *
 *   S       = sup^6 (1 - r^6)^3,
 *   dS/dx   = -18 (1 - r^6)^2 |x|^4 x,
 *   d2S/dx2 = [216 (1 - r^6) |x|^8 / sup^6 - 72 (1 - r^6)^2 |x|^2] x x^T
 *             - 18 (1 - r^6)^2 |x|^4 I,
 *
 * all overflow-safe at desk scale, with the zero-path branch S = 0. The
 * horizontal derivative of S vanishes identically. Upsilon^M adds M|x|^6.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pdhjb/hilbert.hpp"
#include "pdhjb/path.hpp"

namespace pdhjb {

/// Value and pathwise derivatives of a functional at one path.
struct FunctionalDerivatives {
  double value = 0.0;
  double dt = 0.0;          // horizontal derivative
  HVector dx;               // first vertical derivative
  Eigen::MatrixXd dxx;      // second vertical derivative, symmetric

  static FunctionalDerivatives zero(int dim) {
    FunctionalDerivatives d;
    d.dx = HVector::Zero(dim);
    d.dxx = Eigen::MatrixXd::Zero(dim, dim);
    return d;
  }
};

/// S and Upsilon^M evaluated from the running state (sup norm, endpoint).
FunctionalDerivatives eval_S(double sup, const Eigen::Ref<const HVector>& endpoint);
FunctionalDerivatives eval_upsilon(double sup, const Eigen::Ref<const HVector>& endpoint,
                                   double M);

/// Path-level wrappers.
FunctionalDerivatives eval_S(const DiscretePath& gamma);
FunctionalDerivatives eval_upsilon(const DiscretePath& gamma, double M);

/// Upsilon^M(eta - gamma_{t,s,A}): the gauge core on the difference of eta
/// and the semigroup extension of gamma to eta's end time. Requires
/// end(gamma) <= end(eta).
double eval_upsilon_pair(const DiscretePath& gamma, const DiscretePath& eta,
                         const SpectralOperator& op, double M);

/// Derivatives of the pair functional with respect to endpoint bumps of eta.
FunctionalDerivatives eval_upsilon_pair_derivs(const DiscretePath& gamma, const DiscretePath& eta,
                                               const SpectralOperator& op, double M);

/// Gauge-type function: eval_upsilon_pair + |s - t|^2.
double eval_gauge(const DiscretePath& gamma, const DiscretePath& eta, const SpectralOperator& op,
                  double M);

/// Scalar C^1 time weight h(s) = c0 + c1 s + c2 s^2, h >= 0 on [0, T].
struct TimeWeight {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double value(double s) const { return c0 + c1 * s + c2 * s * s; }
  double deriv(double s) const { return c1 + 2.0 * c2 * s; }
  bool nonnegative_on(double horizon) const;
};

/// One anchor of a test functional: a frozen path with two weights.
struct GaugeAnchor {
  DiscretePath path;
  double delta = 0.0;        // weight of the gauge term
  double delta_prime = 0.0;  // weight of the endpoint-distance term
};

/// Test functionals g(gamma_s) = h(s) Upsilon^3(gamma_s)
///   + sum_i [ delta_i (Upsilon^3(gamma_s - anchor_{t_i,s,A}) + (s-t_i)^2)
///           + delta'_i |gamma_s(s) - e^{(s-t_i)A} anchor(t_i)|^6 ],
/// with sum_i (delta_i + delta'_i) <= class_bound. The derivative bundle is
/// the notational one: dt = h'(s) Upsilon^3(gamma_s) + 2 sum_i delta_i (s-t_i).
class TestFunctionalG {
 public:
  TestFunctionalG(TimeWeight h, std::vector<GaugeAnchor> anchors, double class_bound,
                  double horizon);

  const TimeWeight& h() const { return h_; }
  const std::vector<GaugeAnchor>& anchors() const { return anchors_; }
  double class_bound() const { return class_bound_; }

 private:
  TimeWeight h_;
  std::vector<GaugeAnchor> anchors_;
  double class_bound_ = 0.0;
};

FunctionalDerivatives eval_test_g(const TestFunctionalG& g, const DiscretePath& gamma,
                                  const SpectralOperator& op);

/// A path functional with closed-form derivative closures; the shared
/// currency of the Ito residual checks and the HJB analyzer. When astar_dx
/// is empty, callers fall back to apply_adjoint_generator on dx.
struct SmoothFunctional {
  std::string name;
  std::function<double(const PathView&)> value;
  std::function<FunctionalDerivatives(const PathView&)> derivatives;
  std::function<HVector(const PathView&)> astar_dx;  // optional
  int growth_degree = 6;  // declared polynomial-growth degree, not verified
};

/// Linear functional (c, gamma(t)).
SmoothFunctional make_linear_functional(const HVector& c);
/// Squared endpoint norm |gamma(t)|^2.
SmoothFunctional make_endpoint_sq_functional(int dim);
/// Upsilon^M with its closed-form derivatives.
SmoothFunctional make_upsilon_functional(int dim, double M);

/// Finite-difference derivatives of an arbitrary path functional:
/// horizontal by one-node flat extension, vertical by endpoint bumps
/// (central, symmetrized second differences). Fails on the horizontal part
/// if the path already ends at the grid horizon.
FunctionalDerivatives fd_derivatives(const std::function<double(const DiscretePath&)>& f,
                                     const DiscretePath& gamma, double h);

/// fd_derivatives at h and h/2 with Richardson extrapolation of the
/// vertical parts; max_disagreement reports the largest relative gap
/// between the two sweeps (diagnostic for the h-sweep policy).
FunctionalDerivatives fd_derivatives_richardson(
    const std::function<double(const DiscretePath&)>& f, const DiscretePath& gamma, double h,
    double* max_disagreement = nullptr);

/// Default bump size: 1e-4 * max(1, sup_norm).
double default_fd_bump(const DiscretePath& gamma);

}  // namespace pdhjb
