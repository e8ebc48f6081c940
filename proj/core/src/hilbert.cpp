#include "pdhjb/hilbert.hpp"

#include <cmath>
#include <stdexcept>

namespace pdhjb {

namespace {
void check_dim(const SpectralOperator& op, const HVector& v) {
  if (op.dim() != static_cast<int>(v.size()))
    throw std::invalid_argument("dimension mismatch: operator dim " + std::to_string(op.dim()) +
                                ", vector dim " + std::to_string(v.size()));
}
}  // namespace

SpectralOperator::SpectralOperator(std::vector<double> eigenvalues, bool allow_noncontraction)
    : eigenvalues_(std::move(eigenvalues)), allow_noncontraction_(allow_noncontraction) {
  if (eigenvalues_.empty()) throw std::invalid_argument("SpectralOperator needs at least one mode");
  for (double lam : eigenvalues_) {
    if (!std::isfinite(lam)) throw std::invalid_argument("non-finite eigenvalue");
    if (lam > 0.0) contraction_ = false;
  }
  if (!contraction_ && !allow_noncontraction_)
    throw std::invalid_argument(
        "positive eigenvalue requires the explicit non-contraction flag");
}

SpectralOperator SpectralOperator::dirichlet_laplacian(int n) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  std::vector<double> lam(n);
  const double pi = 3.14159265358979323846;
  for (int k = 1; k <= n; ++k) lam[k - 1] = -(k * pi) * (k * pi);
  return SpectralOperator(std::move(lam));
}

SpectralOperator SpectralOperator::zero(int n) {
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  return SpectralOperator(std::vector<double>(n, 0.0));
}

SpectralOperator SpectralOperator::preset(const std::string& name, int n) {
  if (name == "dirichlet-laplacian") return dirichlet_laplacian(n);
  if (name == "zero") return zero(n);
  throw std::invalid_argument("unknown operator preset: " + name);
}

HVector semigroup_apply(const SpectralOperator& op, double t, const HVector& v) {
  if (t < 0.0) throw std::invalid_argument("semigroup time must be nonnegative");
  check_dim(op, v);
  HVector out(v.size());
  const auto& lam = op.eigenvalues();
  for (int k = 0; k < op.dim(); ++k) out[k] = std::exp(lam[k] * t) * v[k];
  return out;
}

HVector apply_generator(const SpectralOperator& op, const HVector& v) {
  check_dim(op, v);
  HVector out(v.size());
  const auto& lam = op.eigenvalues();
  for (int k = 0; k < op.dim(); ++k) out[k] = lam[k] * v[k];
  return out;
}

HVector apply_adjoint_generator(const SpectralOperator& op, const HVector& v) {
  return apply_generator(op, v);
}

SpectralOperator yosida(const SpectralOperator& op, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("Yosida parameter must be positive");
  std::vector<double> lam = op.eigenvalues();
  for (double& l : lam) {
    if (mu <= l) throw std::invalid_argument("Yosida parameter must exceed every eigenvalue");
    l = mu * l / (mu - l);
  }
  return SpectralOperator(std::move(lam), op.noncontraction_allowed());
}

}  // namespace pdhjb
