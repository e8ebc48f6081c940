/**
 * @file hilbert.hpp
 * @brief Finite spectral slice of the state space: diagonal generator,
 *        semigroup, adjoint and Yosida approximation.
 *
 * The generator is diagonal in a fixed eigenbasis, so e^{tA}, A* and the
 * Yosida approximant A_mu = mu A (mu I - A)^{-1} all have exact closed forms;
 * no operator-discretization error enters any test built on top.
 */
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pdhjb {

/// State-space element, coefficients in the eigenbasis of the generator.
using HVector = Eigen::VectorXd;

/// Diagonal generator on an N-mode truncation.
///
/// All eigenvalues must be <= 0 (contraction regime) unless the operator is
/// constructed with allow_noncontraction; operations that require the
/// contraction hypothesis refuse to run on non-contraction operators.
class SpectralOperator {
 public:
  explicit SpectralOperator(std::vector<double> eigenvalues, bool allow_noncontraction = false);

  /// Modes of the Dirichlet Laplacian on (0,1): lambda_k = -(k*pi)^2, k=1..n.
  static SpectralOperator dirichlet_laplacian(int n);
  /// Zero generator: identity semigroup.
  static SpectralOperator zero(int n);
  /// Preset lookup by name: "dirichlet-laplacian" or "zero".
  static SpectralOperator preset(const std::string& name, int n);

  int dim() const { return static_cast<int>(eigenvalues_.size()); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  bool is_contraction() const { return contraction_; }
  bool noncontraction_allowed() const { return allow_noncontraction_; }

 private:
  std::vector<double> eigenvalues_;
  bool allow_noncontraction_ = false;
  bool contraction_ = true;
};

/// e^{tA} v, computed mode by mode. Requires t >= 0 and matching dimension.
HVector semigroup_apply(const SpectralOperator& op, double t, const HVector& v);

/// A v (diagonal action).
HVector apply_generator(const SpectralOperator& op, const HVector& v);

/// A* v. The diagonal truncation is self-adjoint, so this equals
/// apply_generator; kept separate so call sites read like the equations.
HVector apply_adjoint_generator(const SpectralOperator& op, const HVector& v);

/// Yosida approximation: eigenvalue map lambda -> mu*lambda / (mu - lambda).
/// Requires mu > 0; preserves the contraction property.
SpectralOperator yosida(const SpectralOperator& op, double mu);

}  // namespace pdhjb
