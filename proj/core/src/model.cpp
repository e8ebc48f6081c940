#include "pdhjb/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pdhjb {

ControlSet::ControlSet(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("control set must be non-empty");
}

ControlSet ControlSet::uniform(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("bad control grid");
  std::vector<double> v;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 0.5));
  v.reserve(n + 1);
  for (int i = 0; i <= n; ++i) v.push_back(lo + i * step);
  return ControlSet(std::move(v));
}

ControlSet ControlSet::singleton(double u) { return ControlSet(std::vector<double>{u}); }

bool ControlSet::contains(double u, double tol) const {
  for (double v : values_)
    if (std::abs(v - u) <= tol) return true;
  return false;
}

double ControlSet::snap(double u) const {
  double best = values_[0];
  double err = std::abs(u - best);
  for (double v : values_) {
    const double e = std::abs(u - v);
    if (e < err) {
      err = e;
      best = v;
    }
  }
  return best;
}

Policy make_constant_policy(double u) {
  Policy p;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "const(%g)", u);
  p.id = buf;
  p.path_independent = true;
  p.act = [u](int, const PathView&) { return u; };
  return p;
}

Policy make_piecewise_constant_policy(const std::vector<int>& switch_nodes,
                                      const std::vector<double>& controls) {
  if (controls.empty() || switch_nodes.size() + 1 != controls.size())
    throw std::invalid_argument("need one control per switching segment");
  Policy p;
  p.id = "piecewise(";
  for (std::size_t i = 0; i < controls.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%g", i ? "," : "", controls[i]);
    p.id += buf;
  }
  p.id += ")";
  p.path_independent = true;
  p.act = [switch_nodes, controls](int step, const PathView&) {
    std::size_t seg = 0;
    while (seg < switch_nodes.size() && step >= switch_nodes[seg]) ++seg;
    return controls[seg];
  };
  return p;
}

Policy make_endpoint_feedback_policy(double gain, const ControlSet& controls) {
  Policy p;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "feedback(gain=%g)", gain);
  p.id = buf;
  p.path_independent = false;
  p.act = [gain, controls](int, const PathView& v) { return controls.snap(-gain * v.endpoint()[0]); };
  return p;
}

std::uint64_t model_hash(const ControlModel& model) {
  std::string s = model.name + "|" + model.spec_text + "|";
  char buf[40];
  for (double lam : model.op.eigenvalues()) {
    std::snprintf(buf, sizeof(buf), "%.17g,", lam);
    s += buf;
  }
  s += "|";
  for (double u : model.controls.values()) {
    std::snprintf(buf, sizeof(buf), "%.17g,", u);
    s += buf;
  }
  std::snprintf(buf, sizeof(buf), "|T=%.17g|d=%d", model.horizon, model.noise_dim);
  s += buf;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ControlModel make_lq_1d(double horizon, double u_radius, double u_step) {
  ControlModel m;
  m.name = "lq-1d";
  m.op = SpectralOperator::zero(1);
  m.horizon = horizon;
  m.noise_dim = 1;
  m.lipschitz = 10.0;  // declared desk-scale constant for the quadratic costs
  m.controls = ControlSet::uniform(-u_radius, u_radius, u_step);
  m.markov = MarkovStructure::kEndpoint;
  m.drift = [](const PathView&, double u, Eigen::Ref<HVector> out) { out[0] = u; };
  m.noise = [](const PathView&, double, Eigen::Ref<Eigen::MatrixXd> out) { out(0, 0) = 1.0; };
  m.driver = [](const PathView& v, double, const Eigen::Ref<const Eigen::VectorXd>&, double u) {
    const double x = v.endpoint()[0];
    return -x * x - u * u;
  };
  m.terminal = [](const PathView& v) {
    const double x = v.endpoint()[0];
    return -x * x;
  };
  char buf[96];
  std::snprintf(buf, sizeof(buf), "T=%g;U=[-%g:%g:%g]", horizon, u_radius, u_step, u_radius);
  m.spec_text = buf;
  return m;
}

ControlModel make_linear_heat(int n_modes, double horizon) {
  ControlModel m;
  m.name = "linear-heat";
  m.op = SpectralOperator::dirichlet_laplacian(n_modes);
  m.horizon = horizon;
  m.noise_dim = n_modes;
  m.lipschitz = 1.0;
  m.controls = ControlSet::uniform(-1.0, 1.0, 0.5);
  m.markov = MarkovStructure::kEndpoint;
  const int n = n_modes;
  m.drift = [n](const PathView& v, double u, Eigen::Ref<HVector> out) {
    for (int k = 0; k < n; ++k) out[k] = -0.2 * v.endpoint()[k];
    out[0] += 0.3 * u;
  };
  m.noise = [n](const PathView&, double, Eigen::Ref<Eigen::MatrixXd> out) {
    out.setZero();
    for (int k = 0; k < n; ++k) out(k, k) = 0.5 / (k + 1);
  };
  m.driver = [](const PathView& v, double y, const Eigen::Ref<const Eigen::VectorXd>& z, double) {
    return -0.4 * y + 0.2 * z[0] + 0.1 * v.endpoint()[0];
  };
  m.terminal = [n](const PathView& v) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += v.endpoint()[k] / ((k + 1.0) * (k + 1.0));
    return s;
  };
  char buf[64];
  std::snprintf(buf, sizeof(buf), "T=%g;N=%d", horizon, n_modes);
  m.spec_text = buf;
  return m;
}

ControlModel make_runmax(double horizon) {
  ControlModel m;
  m.name = "runmax";
  m.op = SpectralOperator(std::vector<double>{-0.5});
  m.horizon = horizon;
  m.noise_dim = 1;
  m.lipschitz = 1.0;
  m.controls = ControlSet::uniform(-1.0, 1.0, 0.25);
  m.markov = MarkovStructure::kEndpointRunMax;
  m.drift = [](const PathView&, double u, Eigen::Ref<HVector> out) { out[0] = u; };
  m.noise = [](const PathView&, double, Eigen::Ref<Eigen::MatrixXd> out) { out(0, 0) = 0.6; };
  m.driver = [](const PathView& v, double y, const Eigen::Ref<const Eigen::VectorXd>&, double) {
    return -0.3 * y + 0.2 * v.sup;
  };
  m.terminal = [](const PathView& v) { return 0.5 * v.sup - 0.25 * v.endpoint()[0]; };
  char buf[48];
  std::snprintf(buf, sizeof(buf), "T=%g", horizon);
  m.spec_text = buf;
  return m;
}

ControlModel make_uncontrolled(double horizon) {
  ControlModel m;
  m.name = "uncontrolled";
  m.op = SpectralOperator(std::vector<double>{-1.0});
  m.horizon = horizon;
  m.noise_dim = 1;
  m.lipschitz = 1.0;
  m.controls = ControlSet::singleton(0.0);
  m.markov = MarkovStructure::kEndpoint;
  m.drift = [](const PathView& v, double, Eigen::Ref<HVector> out) {
    out[0] = 0.25 * std::tanh(v.endpoint()[0]);
  };
  m.noise = [](const PathView& v, double, Eigen::Ref<Eigen::MatrixXd> out) {
    out(0, 0) = 0.5 + 0.25 * std::cos(v.endpoint()[0]);
  };
  m.driver = [](const PathView& v, double y, const Eigen::Ref<const Eigen::VectorXd>& z, double) {
    return -0.4 * y + 0.2 * z[0] + 0.1 * std::tanh(v.endpoint()[0]);
  };
  m.terminal = [](const PathView& v) { return std::cos(v.endpoint()[0]); };
  char buf[48];
  std::snprintf(buf, sizeof(buf), "T=%g", horizon);
  m.spec_text = buf;
  return m;
}

ControlModel make_preset(const std::string& name, const PresetParams& params) {
  if (name == "lq-1d") return make_lq_1d(params.horizon);
  if (name == "linear-heat") return make_linear_heat(params.n_modes > 0 ? params.n_modes : 2,
                                                     params.horizon);
  if (name == "runmax") return make_runmax(params.horizon);
  if (name == "uncontrolled") return make_uncontrolled(params.horizon);
  throw std::invalid_argument("unknown coefficient preset: " + name);
}

ControlModel with_terminal_shift(const ControlModel& m, double eps) {
  ControlModel out = m;
  auto base = m.terminal;
  out.terminal = [base, eps](const PathView& v) { return base(v) + eps; };
  char buf[40];
  std::snprintf(buf, sizeof(buf), ";phi+=%.17g", eps);
  out.spec_text += buf;
  return out;
}

ControlModel with_driver_shift(const ControlModel& m, double eps) {
  ControlModel out = m;
  auto base = m.driver;
  out.driver = [base, eps](const PathView& v, double y,
                           const Eigen::Ref<const Eigen::VectorXd>& z, double u) {
    return base(v, y, z, u) + eps;
  };
  char buf[40];
  std::snprintf(buf, sizeof(buf), ";q+=%.17g", eps);
  out.spec_text += buf;
  return out;
}

ControlModel with_drift_shift(const ControlModel& m, double eps) {
  ControlModel out = m;
  auto base = m.drift;
  out.drift = [base, eps](const PathView& v, double u, Eigen::Ref<HVector> o) {
    base(v, u, o);
    o[0] += eps;
  };
  char buf[40];
  std::snprintf(buf, sizeof(buf), ";F1+=%.17g", eps);
  out.spec_text += buf;
  return out;
}

ControlModel with_driver_discount(const ControlModel& m, double kappa) {
  ControlModel out = m;
  auto base = m.driver;
  out.driver = [base, kappa](const PathView& v, double y,
                             const Eigen::Ref<const Eigen::VectorXd>& z, double u) {
    return base(v, y, z, u) - kappa * y;
  };
  char buf[48];
  std::snprintf(buf, sizeof(buf), ";q-=%.17g*y", kappa);
  out.spec_text += buf;
  return out;
}

}  // namespace pdhjb
