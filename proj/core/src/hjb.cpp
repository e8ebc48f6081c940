#include "pdhjb/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pdhjb/mc.hpp"

namespace pdhjb {

HamiltonianResult hamiltonian(const ControlModel& model, const HamiltonianInput& input) {
  if (model.controls.size() == 0) throw std::invalid_argument("empty control set");
  if (input.p.size() != model.dim() || input.l.rows() != model.dim() ||
      input.l.cols() != model.dim())
    throw std::invalid_argument("Hamiltonian input dimension mismatch");
  const PathView v = make_view(input.gamma);

  HVector drift(model.dim());
  Eigen::MatrixXd gmat(model.dim(), model.noise_dim);
  Eigen::VectorXd z(model.noise_dim);

  HamiltonianResult best;
  bool first = true;
  for (std::size_t iu = 0; iu < model.controls.size(); ++iu) {
    const double u = model.controls.values()[iu];
    model.drift(v, u, drift);
    model.noise(v, u, gmat);
    z.noalias() = gmat.transpose() * input.p;
    const double score = input.p.dot(drift) + 0.5 * (input.l * gmat).cwiseProduct(gmat).sum() +
                         model.driver(v, input.r, z, u);
    if (first || score > best.value) {
      best.value = score;
      best.argmax_u = u;
      best.argmax_index = iu;
      first = false;
    }
  }
  return best;
}

double classical_residual(const ControlModel& model, const SmoothFunctional& candidate,
                          const DiscretePath& gamma) {
  if (!candidate.value || !candidate.derivatives)
    throw std::invalid_argument("candidate needs value and derivative closures");
  const PathView v = make_view(gamma);
  const FunctionalDerivatives d = candidate.derivatives(v);
  const HVector astar =
      candidate.astar_dx ? candidate.astar_dx(v) : apply_adjoint_generator(model.op, d.dx);
  HamiltonianInput inp{gamma, d.value, d.dx, d.dxx};
  return d.dt + astar.dot(gamma.endpoint()) + hamiltonian(model, inp).value;
}

std::string PathLatticeSpec::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "lattice{base_end=%d,extra_nodes=%d,grid_points=%zu,dt=%g,dim=%d}",
                base.end_index(), max_extra_nodes, value_grid.size(), base.grid().dt, base.dim());
  return buf;
}

std::vector<DiscretePath> enumerate_lattice(const PathLatticeSpec& spec) {
  const int g = static_cast<int>(spec.value_grid.size());
  const int n = spec.base.dim();
  if (spec.max_extra_nodes > 0 && g == 0)
    throw std::invalid_argument("lattice with free nodes needs a value grid");
  if (g > 9) throw RefusalError("lattice value grid larger than 9 points");
  if (spec.max_extra_nodes > 5) throw RefusalError("lattice with more than 5 free nodes");
  if (spec.base.end_index() + spec.max_extra_nodes > spec.base.grid().n_steps)
    throw std::invalid_argument("lattice extends past the grid horizon");

  // combos per node = g^n; total = sum_e (g^n)^e
  double per_node = std::pow(static_cast<double>(g), n);
  double total = 1.0, power = 1.0;
  for (int e = 1; e <= spec.max_extra_nodes; ++e) {
    power *= per_node;
    total += power;
  }
  if (total > 1e6) throw RefusalError("lattice enumeration exceeds the 1e6-point cap");

  std::vector<DiscretePath> out;
  out.reserve(static_cast<std::size_t>(total));
  out.push_back(spec.base);
  const std::size_t per_node_i = static_cast<std::size_t>(per_node);

  for (int e = 1; e <= spec.max_extra_nodes; ++e) {
    std::size_t combos = 1;
    for (int i = 0; i < e; ++i) combos *= per_node_i;
    for (std::size_t c = 0; c < combos; ++c) {
      Eigen::MatrixXd nodes(n, spec.base.end_index() + 1 + e);
      nodes.leftCols(spec.base.end_index() + 1) = spec.base.nodes();
      std::size_t rem = c;
      for (int node = 0; node < e; ++node) {
        std::size_t node_combo = rem % per_node_i;
        rem /= per_node_i;
        for (int k = 0; k < n; ++k) {
          nodes(k, spec.base.end_index() + 1 + node) =
              spec.value_grid[node_combo % static_cast<std::size_t>(g)];
          node_combo /= static_cast<std::size_t>(g);
        }
      }
      out.emplace_back(spec.base.grid(), std::move(nodes));
    }
  }
  return out;
}

ProbeReport viscosity_probe(const ControlModel& model, const PathFunctional& w,
                            const SmoothFunctional& phi, const TestFunctionalG& g,
                            const PathLatticeSpec& lattice, ProbeMode mode, double cert_tol,
                            double slack) {
  if (!w.eval) throw std::invalid_argument("probe needs a candidate functional");
  const std::vector<DiscretePath> paths = enumerate_lattice(lattice);
  const DiscretePath& base = lattice.base;
  const double sign = mode == ProbeMode::kSub ? -1.0 : 1.0;  // w - (phi+g) vs w + (phi+g)

  auto objective = [&](const DiscretePath& eta) {
    const PathView v = make_view(eta);
    return w.eval(eta) + sign * (phi.value(v) + eval_test_g(g, eta, model.op).value);
  };

  ProbeReport rep;
  rep.mode = mode;
  rep.lattice_size = paths.size();
  rep.lattice_spec = lattice.describe();
  {
    std::string tag = w.name + "|" + phi.name;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    rep.functional_hash = h;
  }

  rep.value_at_base = objective(base);
  double extremum = rep.value_at_base;
  for (const DiscretePath& eta : paths) {
    const double s = objective(eta);
    if (mode == ProbeMode::kSub)
      extremum = std::max(extremum, s);
    else
      extremum = std::min(extremum, s);
  }
  rep.certificate_gap = mode == ProbeMode::kSub ? extremum - rep.value_at_base
                                                : rep.value_at_base - extremum;
  rep.certificate_ok =
      rep.certificate_gap <= cert_tol && std::abs(rep.value_at_base) <= cert_tol;

  // Terminal domination on the lattice paths pushed to the horizon.
  rep.terminal_ok = true;
  rep.terminal_worst = 0.0;
  for (const DiscretePath& eta : paths) {
    const DiscretePath etaT = flat_extend(eta, base.grid().n_steps);
    const double wT = w.eval(etaT);
    const double phiT = model.terminal(make_view(etaT));
    const double gap = mode == ProbeMode::kSub ? wT - phiT : phiT - wT;
    rep.terminal_worst = std::max(rep.terminal_worst, gap);
    if (gap > slack) rep.terminal_ok = false;
  }

  if (!rep.certificate_ok) {
    rep.verdict = ProbeVerdict::kNoCertificate;
    return rep;
  }

  const PathView v = make_view(base);
  const FunctionalDerivatives pd = phi.derivatives(v);
  const FunctionalDerivatives gd = eval_test_g(g, base, model.op);
  const HVector astar =
      phi.astar_dx ? phi.astar_dx(v) : apply_adjoint_generator(model.op, pd.dx);
  rep.slack = slack;
  if (mode == ProbeMode::kSub) {
    HamiltonianInput inp{base, pd.value + gd.value, pd.dx + gd.dx, pd.dxx + gd.dxx};
    rep.inequality_lhs =
        pd.dt + gd.dt + astar.dot(base.endpoint()) + hamiltonian(model, inp).value;
    rep.verdict = rep.inequality_lhs >= -slack ? ProbeVerdict::kHolds : ProbeVerdict::kViolated;
  } else {
    HamiltonianInput inp{base, -(pd.value + gd.value), -(pd.dx + gd.dx).eval(),
                         -(pd.dxx + gd.dxx).eval()};
    rep.inequality_lhs =
        -pd.dt - gd.dt - astar.dot(base.endpoint()) + hamiltonian(model, inp).value;
    rep.verdict = rep.inequality_lhs <= slack ? ProbeVerdict::kHolds : ProbeVerdict::kViolated;
  }
  return rep;
}

MonotonicityReport monotonicity_normalization_check(
    const ControlModel& model, const std::vector<MonotonicitySample>& samples) {
  if (samples.empty()) throw std::invalid_argument("monotonicity check needs samples");
  MonotonicityReport rep;
  rep.empirical_k = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (!(s.r1 < s.r2)) throw std::invalid_argument("monotonicity samples need r1 < r2");
    HamiltonianInput a{s.gamma, s.r1, s.p, s.l};
    HamiltonianInput b{s.gamma, s.r2, s.p, s.l};
    const double k =
        (hamiltonian(model, a).value - hamiltonian(model, b).value) / (s.r2 - s.r1);
    rep.empirical_k = std::min(rep.empirical_k, k);
  }
  rep.needs_shift = !(rep.empirical_k > 0.0);
  return rep;
}

namespace {

bool same_path(const DiscretePath& a, const DiscretePath& b) {
  return a.end_index() == b.end_index() && a.dim() == b.dim() && a.nodes() == b.nodes();
}

}  // namespace

BorweinPreissResult borwein_preiss(const std::function<double(const DiscretePath&)>& f,
                                   const std::vector<DiscretePath>& lattice,
                                   const SpectralOperator& op, std::size_t start_index,
                                   double eps, double delta0) {
  if (lattice.empty()) throw std::invalid_argument("empty lattice");
  if (start_index >= lattice.size()) throw std::invalid_argument("start index out of range");
  if (!(eps > 0.0) || !(delta0 > 0.0))
    throw std::invalid_argument("eps and delta0 must be positive");

  std::vector<double> fval(lattice.size());
  double fmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    fval[i] = f(lattice[i]);
    if (!std::isfinite(fval[i])) throw std::invalid_argument("functional unbounded on the lattice");
    fmax = std::max(fmax, fval[i]);
  }
  if (fval[start_index] < fmax - eps)
    throw std::invalid_argument("start point is not an eps-maximizer");

  auto rho = [&](std::size_t a, std::size_t b) {
    return eval_gauge(lattice[a], lattice[b], op, 3.0);
  };

  std::vector<std::size_t> anchors{start_index};
  std::vector<double> weights{delta0};
  std::size_t current = start_index;

  for (std::size_t iter = 0; iter <= lattice.size() + 1; ++iter) {
    const double t_cur = lattice[current].end_time();
    std::size_t best = current;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < lattice.size(); ++x) {
      if (lattice[x].end_time() < t_cur) continue;
      double val = fval[x];
      for (std::size_t i = 0; i < anchors.size(); ++i) val -= weights[i] * rho(anchors[i], x);
      if (val > best_val) {
        best_val = val;
        best = x;
      }
    }
    if (best == current) break;
    current = best;
    anchors.push_back(best);
    weights.push_back(weights.back() * 0.5);
    if (iter == lattice.size() + 1)
      throw std::runtime_error("anchor construction failed to settle on the lattice");
  }

  BorweinPreissResult res;
  res.selected = current;
  res.anchors = anchors;

  // Total perturbation including the constant tail of repeated final anchors:
  // P(x) = sum_{i<m} delta_i rho(a_i, x) + 2*delta_m rho(point, x).
  const std::size_t m = anchors.size() - 1;
  auto perturbation = [&](std::size_t x) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += weights[i] * rho(anchors[i], x);
    s += 2.0 * weights[m] * rho(anchors[m], x);
    return s;
  };

  res.perturbed_value = fval[current] - perturbation(current);

  res.bound_i_ok = true;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = rho(anchors[i], current);
    res.anchor_rho.push_back(r);
    const double bound = eps / (std::pow(2.0, static_cast<double>(i)) * delta0);
    if (r > bound + 1e-12) res.bound_i_ok = false;
  }

  res.bound_ii_ok = res.perturbed_value >= fval[start_index] - 1e-12;

  res.bound_iii_ok = true;
  const double t_hat = lattice[current].end_time();
  for (std::size_t x = 0; x < lattice.size(); ++x) {
    if (x == current) continue;
    if (lattice[x].end_time() < t_hat) continue;
    if (same_path(lattice[x], lattice[current])) continue;
    if (fval[x] - perturbation(x) >= res.perturbed_value) {
      res.bound_iii_ok = false;
      break;
    }
  }
  return res;
}

}  // namespace pdhjb
