#include "pdhjb/functional.hpp"

#include <cmath>
#include <stdexcept>

namespace pdhjb {

namespace {

double pow6(double v) {
  const double v2 = v * v;
  return v2 * v2 * v2;
}

// Running state of the difference path eta - gamma_{t,s,A}.
struct DiffState {
  double sup = 0.0;
  HVector endpoint;
};

DiffState diff_state(const DiscretePath& gamma, const DiscretePath& eta,
                     const SpectralOperator& op) {
  if (gamma.grid().dt != eta.grid().dt) throw std::invalid_argument("paths on different grids");
  if (gamma.dim() != eta.dim()) throw std::invalid_argument("path dimension mismatch");
  if (gamma.end_index() > eta.end_index())
    throw std::invalid_argument("pair functional needs end(gamma) <= end(eta)");
  const int t = gamma.end_index();
  const int s = eta.end_index();
  const int n = gamma.dim();

  DiffState st;
  HVector y(n);
  for (int i = 0; i <= t; ++i) {
    y = eta.value(i) - gamma.value(i);
    st.sup = std::max(st.sup, y.norm());
  }
  // Per-node exponentials, matching semigroup_extend bit for bit.
  const HVector x = gamma.endpoint();
  const auto& lam = op.eigenvalues();
  for (int i = t + 1; i <= s; ++i) {
    const double gap = gamma.grid().dt * (i - t);
    for (int k = 0; k < n; ++k) y[k] = eta.value(i)[k] - std::exp(lam[k] * gap) * x[k];
    st.sup = std::max(st.sup, y.norm());
  }
  st.endpoint = y;
  return st;
}

}  // namespace

FunctionalDerivatives eval_S(double sup, const Eigen::Ref<const HVector>& endpoint) {
  const int n = static_cast<int>(endpoint.size());
  FunctionalDerivatives d = FunctionalDerivatives::zero(n);
  if (!(sup > 0.0)) return d;

  const double xn = endpoint.norm();
  const double r = std::min(1.0, xn / sup);
  const double q = 1.0 - pow6(r);
  const double x2 = xn * xn;
  const double x4 = x2 * x2;
  const double x8 = x4 * x4;
  const double sup6 = pow6(sup);

  d.value = sup6 * q * q * q;
  d.dt = 0.0;
  d.dx = -18.0 * q * q * x4 * endpoint;
  const double rank1 = 216.0 * q * x8 / sup6 - 72.0 * q * q * x2;
  d.dxx = rank1 * (endpoint * endpoint.transpose());
  d.dxx.diagonal().array() += -18.0 * q * q * x4;
  return d;
}

FunctionalDerivatives eval_upsilon(double sup, const Eigen::Ref<const HVector>& endpoint,
                                   double M) {
  if (M < 1.0) throw std::invalid_argument("Upsilon^M requires M >= 1");
  FunctionalDerivatives d = eval_S(sup, endpoint);
  const double x2 = endpoint.squaredNorm();
  const double x4 = x2 * x2;
  d.value += M * x4 * x2;
  d.dx += 6.0 * M * x4 * endpoint;
  d.dxx += 24.0 * M * x2 * (endpoint * endpoint.transpose());
  d.dxx.diagonal().array() += 6.0 * M * x4;
  return d;
}

FunctionalDerivatives eval_S(const DiscretePath& gamma) {
  return eval_S(sup_norm(gamma), gamma.endpoint());
}

FunctionalDerivatives eval_upsilon(const DiscretePath& gamma, double M) {
  return eval_upsilon(sup_norm(gamma), gamma.endpoint(), M);
}

double eval_upsilon_pair(const DiscretePath& gamma, const DiscretePath& eta,
                         const SpectralOperator& op, double M) {
  const DiffState st = diff_state(gamma, eta, op);
  return eval_upsilon(st.sup, st.endpoint, M).value;
}

FunctionalDerivatives eval_upsilon_pair_derivs(const DiscretePath& gamma, const DiscretePath& eta,
                                               const SpectralOperator& op, double M) {
  const DiffState st = diff_state(gamma, eta, op);
  return eval_upsilon(st.sup, st.endpoint, M);
}

double eval_gauge(const DiscretePath& gamma, const DiscretePath& eta, const SpectralOperator& op,
                  double M) {
  const double gap = eta.end_time() - gamma.end_time();
  return eval_upsilon_pair(gamma, eta, op, M) + gap * gap;
}

bool TimeWeight::nonnegative_on(double horizon) const {
  if (value(0.0) < 0.0 || value(horizon) < 0.0) return false;
  if (c2 > 0.0) {
    const double vertex = -c1 / (2.0 * c2);
    if (vertex > 0.0 && vertex < horizon && value(vertex) < 0.0) return false;
  }
  return true;
}

TestFunctionalG::TestFunctionalG(TimeWeight h, std::vector<GaugeAnchor> anchors,
                                 double class_bound, double horizon)
    : h_(h), anchors_(std::move(anchors)), class_bound_(class_bound) {
  if (!h_.nonnegative_on(horizon))
    throw std::invalid_argument("time weight h must be nonnegative on [0, T]");
  double total = 0.0;
  for (const auto& a : anchors_) {
    if (a.delta < 0.0 || a.delta_prime < 0.0)
      throw std::invalid_argument("anchor weights must be nonnegative");
    total += a.delta + a.delta_prime;
  }
  if (total > class_bound_ + 1e-12)
    throw std::invalid_argument("anchor weights exceed the class bound");
}

FunctionalDerivatives eval_test_g(const TestFunctionalG& g, const DiscretePath& gamma,
                                  const SpectralOperator& op) {
  const double s = gamma.end_time();
  const int n = gamma.dim();
  FunctionalDerivatives out = FunctionalDerivatives::zero(n);

  const FunctionalDerivatives ups = eval_upsilon(gamma, 3.0);
  const double hs = g.h().value(s);
  out.value = hs * ups.value;
  out.dt = g.h().deriv(s) * ups.value;
  out.dx = hs * ups.dx;
  out.dxx = hs * ups.dxx;

  for (const auto& a : g.anchors()) {
    if (a.path.end_index() > gamma.end_index())
      throw std::invalid_argument("anchor time after path end");
    const double gap = s - a.path.end_time();
    if (a.delta != 0.0) {
      const FunctionalDerivatives pd = eval_upsilon_pair_derivs(a.path, gamma, op, 3.0);
      out.value += a.delta * (pd.value + gap * gap);
      out.dt += 2.0 * a.delta * gap;
      out.dx += a.delta * pd.dx;
      out.dxx += a.delta * pd.dxx;
    }
    if (a.delta_prime != 0.0) {
      const HVector w =
          gamma.endpoint() - semigroup_apply(op, gap, a.path.endpoint());
      const double w2 = w.squaredNorm();
      const double w4 = w2 * w2;
      out.value += a.delta_prime * w4 * w2;
      out.dx += a.delta_prime * 6.0 * w4 * w;
      out.dxx += a.delta_prime * 24.0 * w2 * (w * w.transpose());
      out.dxx.diagonal().array() += a.delta_prime * 6.0 * w4;
    }
  }
  return out;
}

SmoothFunctional make_linear_functional(const HVector& c) {
  SmoothFunctional f;
  f.name = "linear";
  f.growth_degree = 1;
  f.value = [c](const PathView& p) { return c.dot(p.endpoint()); };
  f.derivatives = [c](const PathView& p) {
    FunctionalDerivatives d = FunctionalDerivatives::zero(p.dim);
    d.value = c.dot(p.endpoint());
    d.dx = c;
    return d;
  };
  return f;
}

SmoothFunctional make_endpoint_sq_functional(int dim) {
  SmoothFunctional f;
  f.name = "endpoint-sq";
  f.growth_degree = 2;
  f.value = [](const PathView& p) { return p.endpoint().squaredNorm(); };
  f.derivatives = [dim](const PathView& p) {
    FunctionalDerivatives d = FunctionalDerivatives::zero(dim);
    d.value = p.endpoint().squaredNorm();
    d.dx = 2.0 * p.endpoint();
    d.dxx = 2.0 * Eigen::MatrixXd::Identity(dim, dim);
    return d;
  };
  return f;
}

SmoothFunctional make_upsilon_functional(int dim, double M) {
  SmoothFunctional f;
  f.name = "upsilon" + std::to_string(static_cast<int>(M));
  f.growth_degree = 6;
  f.value = [M](const PathView& p) { return eval_upsilon(p.sup, p.endpoint(), M).value; };
  f.derivatives = [M, dim](const PathView& p) {
    (void)dim;
    return eval_upsilon(p.sup, p.endpoint(), M);
  };
  return f;
}

double default_fd_bump(const DiscretePath& gamma) {
  return 1e-4 * std::max(1.0, sup_norm(gamma));
}

FunctionalDerivatives fd_derivatives(const std::function<double(const DiscretePath&)>& f,
                                     const DiscretePath& gamma, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bump size must be positive");
  const int n = gamma.dim();
  FunctionalDerivatives d = FunctionalDerivatives::zero(n);
  const double f0 = f(gamma);
  d.value = f0;

  if (gamma.end_index() >= gamma.grid().n_steps)
    throw std::invalid_argument("horizontal difference needs room before the horizon");
  d.dt = (f(flat_extend(gamma, gamma.end_index() + 1)) - f0) / gamma.grid().dt;

  HVector e = HVector::Zero(n);
  std::vector<double> fp(n), fm(n);
  for (int k = 0; k < n; ++k) {
    e.setZero();
    e[k] = h;
    fp[k] = f(vertical_bump(gamma, e));
    e[k] = -h;
    fm[k] = f(vertical_bump(gamma, e));
    d.dx[k] = (fp[k] - fm[k]) / (2.0 * h);
    d.dxx(k, k) = (fp[k] - 2.0 * f0 + fm[k]) / (h * h);
  }
  for (int k = 0; k < n; ++k) {
    for (int l = k + 1; l < n; ++l) {
      e.setZero();
      e[k] = h;
      e[l] = h;
      const double fpp = f(vertical_bump(gamma, e));
      e[l] = -h;
      const double fpm = f(vertical_bump(gamma, e));
      e[k] = -h;
      e[l] = h;
      const double fmp = f(vertical_bump(gamma, e));
      e[l] = -h;
      const double fmm = f(vertical_bump(gamma, e));
      d.dxx(k, l) = d.dxx(l, k) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return d;
}

FunctionalDerivatives fd_derivatives_richardson(
    const std::function<double(const DiscretePath&)>& f, const DiscretePath& gamma, double h,
    double* max_disagreement) {
  const FunctionalDerivatives dh = fd_derivatives(f, gamma, h);
  const FunctionalDerivatives dh2 = fd_derivatives(f, gamma, 0.5 * h);

  double gap = 0.0;
  auto rel = [](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
  };
  for (int k = 0; k < gamma.dim(); ++k) gap = std::max(gap, rel(dh.dx[k], dh2.dx[k]));
  for (int k = 0; k < gamma.dim(); ++k)
    for (int l = 0; l < gamma.dim(); ++l) gap = std::max(gap, rel(dh.dxx(k, l), dh2.dxx(k, l)));
  if (max_disagreement) *max_disagreement = gap;

  FunctionalDerivatives out = dh2;
  out.dx = (4.0 * dh2.dx - dh.dx) / 3.0;
  out.dxx = (4.0 * dh2.dxx - dh.dxx) / 3.0;
  return out;
}

}  // namespace pdhjb
