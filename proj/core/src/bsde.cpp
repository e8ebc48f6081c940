#include "pdhjb/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "pdhjb/mc.hpp"

namespace pdhjb {

namespace {

// Exponent table for monomials of total degree <= degree in n_vars variables,
// enumerated in a fixed lexicographic order.
std::vector<std::vector<int>> monomial_exponents(int n_vars, int degree) {
  std::vector<std::vector<int>> table;
  std::vector<int> expo(n_vars, 0);
  std::function<void(int, int)> rec = [&](int var, int remaining) {
    if (var == n_vars) {
      table.push_back(expo);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      expo[var] = e;
      rec(var + 1, remaining - e);
    }
    expo[var] = 0;
  };
  rec(0, degree);
  return table;
}

struct BasisEval {
  std::vector<std::vector<int>> table;
  int n_vars = 0;
  int degree = 0;
  bool use_runmax = true;

  void fill(const PathView& v, double* out) const {
    double vars[16];
    for (int k = 0; k < v.dim; ++k) vars[k] = v.endpoint()[k];
    if (use_runmax) vars[v.dim] = v.sup;
    // powers[var][e]
    double powers[16][8];
    for (int k = 0; k < n_vars; ++k) {
      powers[k][0] = 1.0;
      for (int e = 1; e <= degree; ++e) powers[k][e] = powers[k][e - 1] * vars[k];
    }
    for (std::size_t m = 0; m < table.size(); ++m) {
      double prod = 1.0;
      for (int k = 0; k < n_vars; ++k) prod *= powers[k][table[m][k]];
      out[m] = prod;
    }
  }
};

BasisEval make_basis_eval(const FeatureBasis& basis, int dim) {
  if (dim + 1 > 15 || basis.degree > 7)
    throw std::invalid_argument("regression basis too large for the desk-scale solver");
  BasisEval be;
  be.n_vars = dim + (basis.use_runmax ? 1 : 0);
  be.degree = basis.degree;
  be.use_runmax = basis.use_runmax;
  be.table = monomial_exponents(be.n_vars, basis.degree);
  return be;
}

constexpr double kRidge = 1e-10;

}  // namespace

int FeatureBasis::feature_count(int dim) const {
  return static_cast<int>(monomial_exponents(dim + (use_runmax ? 1 : 0), degree).size());
}

void FeatureBasis::fill(const PathView& v, double* out) const {
  make_basis_eval(*this, v.dim).fill(v, out);
}

std::string FeatureBasis::describe() const {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "poly(degree=%d;vars=endpoint%s)", degree,
                use_runmax ? "+runmax" : "");
  return buf;
}

namespace {

BSDEGridSolution solve_core(const ControlModel& model, const TrajectoryBatch& batch, int end_node,
                            const std::vector<double>& terminal, const FeatureBasis& basis) {
  const double dt = batch.grid.dt;
  if (dt * model.lipschitz >= 0.5)
    throw std::invalid_argument("dt * L >= 1/2: implicit Picard sweep not contractive");
  if (end_node <= batch.start_index || end_node > batch.grid.n_steps)
    throw std::invalid_argument("window end out of range");
  if (static_cast<int>(terminal.size()) != batch.n_paths)
    throw std::invalid_argument("need one terminal value per path");

  const int n_paths = batch.n_paths;
  const int n_steps = end_node - batch.start_index;
  const int d = batch.noise_dim;
  const BasisEval be = make_basis_eval(basis, batch.dim);
  const int k = static_cast<int>(be.table.size());

  BSDEGridSolution sol;
  sol.n_paths = n_paths;
  sol.n_steps = n_steps;
  sol.noise_dim = d;
  sol.basis = basis;
  sol.y.assign(static_cast<std::size_t>(n_steps + 1) * n_paths, 0.0);
  sol.z.assign(static_cast<std::size_t>(n_steps) * n_paths * d, 0.0);

  // Terminal anchoring, bit-exact.
  for (int p = 0; p < n_paths; ++p)
    sol.y[static_cast<std::size_t>(n_steps) * n_paths + p] = terminal[p];

  std::vector<double> psi(static_cast<std::size_t>(n_paths) * k);
  Eigen::MatrixXd gram(k, k);
  Eigen::MatrixXd rhs(k, 1 + d);
  Eigen::MatrixXd beta(k, 1 + d);
  Eigen::VectorXd zrow(d);

  // Accumulated driver contributions per path, for the start-value estimate.
  std::vector<double> acc(n_paths, 0.0);

  for (int step = n_steps - 1; step >= 0; --step) {
    const int node = batch.start_index + step;
    const double* y_next = sol.y.data() + static_cast<std::size_t>(step + 1) * n_paths;
    double* y_here = sol.y.data() + static_cast<std::size_t>(step) * n_paths;
    double* z_here = sol.z.data() + static_cast<std::size_t>(step) * n_paths * d;

    for (int p = 0; p < n_paths; ++p)
      be.fill(batch.view(p, node), psi.data() + static_cast<std::size_t>(p) * k);

    gram.setZero();
    rhs.setZero();
    for (int p = 0; p < n_paths; ++p) {
      const double* f = psi.data() + static_cast<std::size_t>(p) * k;
      const double yn = y_next[p];
      for (int a = 0; a < k; ++a) {
        for (int b = a; b < k; ++b) gram(a, b) += f[a] * f[b];
        rhs(a, 0) += f[a] * yn;
        for (int j = 0; j < d; ++j) rhs(a, 1 + j) += f[a] * yn * batch.increment(p, step, j);
      }
    }
    gram = gram.selfadjointView<Eigen::Upper>();
    gram.diagonal().array() += kRidge;

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    beta = ldlt.solve(rhs);
    const Eigen::VectorXd dvec = ldlt.vectorD().cwiseAbs();
    const double cond = dvec.maxCoeff() / std::max(dvec.minCoeff(), 1e-300);
    sol.max_condition = std::max(sol.max_condition, cond);
    if (cond > 1e12) sol.rank_deficient = true;

    for (int p = 0; p < n_paths; ++p) {
      const double* f = psi.data() + static_cast<std::size_t>(p) * k;
      double pred = 0.0;
      for (int a = 0; a < k; ++a) pred += f[a] * beta(a, 0);
      for (int j = 0; j < d; ++j) {
        double zj = 0.0;
        for (int a = 0; a < k; ++a) zj += f[a] * beta(a, 1 + j);
        zrow[j] = zj / dt;
        z_here[static_cast<std::size_t>(p) * d + j] = zrow[j];
      }
      const PathView v = batch.view(p, node);
      const double u = batch.control(p, step);
      // Two Picard passes through the implicit driver.
      double y_it = pred + model.driver(v, pred, zrow, u) * dt;
      y_it = pred + model.driver(v, y_it, zrow, u) * dt;
      y_here[p] = y_it;
      acc[p] += y_it - pred;  // == q dt at the values the sweep used
    }
  }

  std::vector<double> estimate(n_paths);
  for (int p = 0; p < n_paths; ++p) estimate[p] = terminal[p] + acc[p];
  const MeanSe ms = mean_se(estimate);
  sol.y0 = ms.mean;
  sol.y0_se = ms.se;
  return sol;
}

}  // namespace

BSDEGridSolution solve_lsmc(const ControlModel& model, const TrajectoryBatch& batch,
                            const FeatureBasis& basis) {
  std::vector<double> terminal(batch.n_paths);
  for (int p = 0; p < batch.n_paths; ++p)
    terminal[p] = model.terminal(batch.view(p, batch.grid.n_steps));
  return solve_core(model, batch, batch.grid.n_steps, terminal, basis);
}

BSDEGridSolution solve_lsmc_window(const ControlModel& model, const TrajectoryBatch& batch,
                                   int end_node, const std::vector<double>& zeta,
                                   const FeatureBasis& basis) {
  return solve_core(model, batch, end_node, zeta, basis);
}

double backward_semigroup(const ControlModel& model, const TrajectoryBatch& batch, int end_node,
                          const std::vector<double>& zeta, const FeatureBasis& basis) {
  return solve_lsmc_window(model, batch, end_node, zeta, basis).y0;
}

double solve_lattice_1d(const ControlModel& model, const DiscretePath& init, const Policy& policy,
                        double dt) {
  if (model.dim() != 1 || model.noise_dim != 1)
    throw std::invalid_argument("lattice oracle handles N = d = 1 only");
  if (model.markov == MarkovStructure::kPathDependent)
    throw std::invalid_argument("lattice oracle refuses path-dependent coefficients");
  const PathGrid grid = make_grid(model.horizon, dt);
  if (init.grid().dt != dt) throw std::invalid_argument("initial path grid mismatch");
  const int start = init.end_index();
  const int n_steps = grid.n_steps - start;
  if (n_steps <= 0) throw std::invalid_argument("nothing to solve: path ends at the horizon");

  const double x0 = init.endpoint()[0];
  const double lam = model.op.eigenvalues()[0];
  const double eg = std::exp(lam * dt);
  double sup0 = 0.0;
  for (int i = 0; i <= init.end_index(); ++i) sup0 = std::max(sup0, std::abs(init.value(i)[0]));

  // Probe coefficient magnitudes to size the lattice.
  double buf1 = 0.0;
  PathView probe;
  probe.data = &buf1;
  probe.dim = 1;
  probe.end_index = 0;
  probe.dt = dt;
  HVector fv(1);
  Eigen::MatrixXd gv(1, 1);
  double f_max = 0.0, s_max = 1e-8;
  for (double xp = -8.0; xp <= 8.0; xp += 0.5) {
    buf1 = x0 + xp;
    probe.sup = std::max(sup0, std::abs(buf1));
    for (double u : model.controls.values()) {
      model.drift(probe, u, fv);
      model.noise(probe, u, gv);
      f_max = std::max(f_max, std::abs(fv[0]));
      s_max = std::max(s_max, std::abs(gv(0, 0)));
    }
  }
  const double horizon_left = n_steps * dt;
  const double radius = f_max * horizon_left + 6.0 * s_max * std::sqrt(horizon_left) + 1.0;
  const double dx = 1.5 * s_max * std::sqrt(dt);
  const int half = static_cast<int>(std::ceil(radius / dx));
  const int n_nodes = 2 * half + 1;

  const bool with_max = model.markov == MarkovStructure::kEndpointRunMax;
  // Running-max levels: the distinct values of max(|x_j|, sup0).
  std::vector<double> levels;
  std::vector<int> level_of_node(n_nodes, 0);
  if (with_max) {
    levels.reserve(n_nodes);
    for (int j = 0; j < n_nodes; ++j)
      levels.push_back(std::max(sup0, std::abs(x0 + (j - half) * dx)));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (int j = 0; j < n_nodes; ++j) {
      const double m = std::max(sup0, std::abs(x0 + (j - half) * dx));
      level_of_node[j] =
          static_cast<int>(std::lower_bound(levels.begin(), levels.end(), m) - levels.begin());
    }
  } else {
    levels.push_back(sup0);
  }
  const int n_levels = static_cast<int>(levels.size());
  if (static_cast<long long>(n_nodes) * n_levels * n_steps > 400000000LL)
    throw RefusalError("lattice oracle state space too large at this dt");

  auto idx = [&](int j, int mi) { return static_cast<std::size_t>(mi) * n_nodes + j; };
  std::vector<double> y_next(static_cast<std::size_t>(n_nodes) * n_levels);
  std::vector<double> y_here(y_next.size());

  // Terminal values.
  for (int mi = 0; mi < n_levels; ++mi) {
    for (int j = 0; j < n_nodes; ++j) {
      buf1 = x0 + (j - half) * dx;
      probe.sup = with_max ? std::max(levels[mi], std::abs(buf1)) : std::max(sup0, std::abs(buf1));
      y_next[idx(j, mi)] = model.terminal(probe);
    }
  }

  Eigen::VectorXd zv(1);
  for (int step = n_steps - 1; step >= 0; --step) {
    for (int mi = 0; mi < n_levels; ++mi) {
      for (int j = 0; j < n_nodes; ++j) {
        buf1 = x0 + (j - half) * dx;
        const double m_here =
            with_max ? std::max(levels[mi], std::abs(buf1)) : std::max(sup0, std::abs(buf1));
        probe.sup = m_here;
        const double u = policy.act(start + step, probe);
        model.drift(probe, u, fv);
        model.noise(probe, u, gv);
        const double mean = eg * (buf1 + fv[0] * dt);
        const double sd = std::abs(eg * gv(0, 0)) * std::sqrt(dt);

        int jc = static_cast<int>(std::lround((mean - x0) / dx)) + half;
        jc = std::clamp(jc, 1, n_nodes - 2);
        const double eta = (mean - (x0 + (jc - half) * dx)) / dx;
        double m2 = (sd / dx) * (sd / dx) + eta * eta;
        double pu = 0.5 * (m2 + eta);
        double pd = 0.5 * (m2 - eta);
        double pm = 1.0 - m2;
        if (pu < 0.0 || pd < 0.0 || pm < 0.0) {  // drift-dominated fallback, mean matched
          pu = std::max(eta, 0.0);
          pd = std::max(-eta, 0.0);
          pm = 1.0 - std::abs(eta);
        }

        double ey = 0.0, eydw = 0.0;
        const int targets[3] = {jc + 1, jc, jc - 1};
        const double probs[3] = {pu, pm, pd};
        for (int b = 0; b < 3; ++b) {
          const int jt = targets[b];
          const double xt = x0 + (jt - half) * dx;
          int mt = 0;
          if (with_max) {
            const double mv = std::max(m_here, std::abs(xt));
            mt = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), mv) -
                                  levels.begin());
            if (mt == n_levels) mt = n_levels - 1;
          }
          const double yv = y_next[idx(jt, mt)];
          ey += probs[b] * yv;
          if (sd > 1e-14) eydw += probs[b] * yv * (xt - mean) / (eg * gv(0, 0));
        }
        zv[0] = sd > 1e-14 ? eydw / dt : 0.0;
        double y_it = ey;
        for (int pic = 0; pic < 3; ++pic) y_it = ey + model.driver(probe, y_it, zv, u) * dt;
        y_here[idx(j, mi)] = y_it;
      }
    }
    std::swap(y_here, y_next);
  }

  int m0 = 0;
  if (with_max) {
    const double mv = std::max(sup0, std::abs(x0));
    m0 = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), mv) - levels.begin());
    if (m0 == n_levels) m0 = n_levels - 1;
  }
  return y_next[idx(half, m0)];
}

void export_solution_csv(const BSDEGridSolution& sol, std::ostream& out) {
  out << "step,mean_Y,se_Y";
  for (int j = 1; j <= sol.noise_dim; ++j) out << ",mean_Z" << j;
  out << "\n";
  char buf[40];
  for (int i = 0; i <= sol.n_steps; ++i) {
    std::vector<double> ys(sol.n_paths);
    for (int p = 0; p < sol.n_paths; ++p) ys[p] = sol.Y(i, p);
    const MeanSe ms = mean_se(ys);
    std::snprintf(buf, sizeof(buf), "%.17g", ms.mean);
    out << i << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", ms.se);
    out << ',' << buf;
    for (int j = 0; j < sol.noise_dim; ++j) {
      double zm = 0.0;
      if (i < sol.n_steps) {
        std::vector<double> zs(sol.n_paths);
        for (int p = 0; p < sol.n_paths; ++p) zs[p] = sol.Z(i, p, j);
        zm = mean_se(zs).mean;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", zm);
      out << ',' << buf;
    }
    out << "\n";
  }
}

std::string solution_manifest_json(const BSDEGridSolution& sol, const ControlModel& model) {
  nlohmann::json j;
  j["model_hash"] = model_hash(model);
  j["regression"] = sol.basis.describe();
  j["max_condition"] = sol.max_condition;
  j["rank_deficient"] = sol.rank_deficient;
  j["n_paths"] = sol.n_paths;
  j["n_steps"] = sol.n_steps;
  j["y0"] = sol.y0;
  j["y0_se"] = sol.y0_se;
  return j.dump(2);
}

ComparisonReport comparison_check(const ControlModel& m1, const ControlModel& m2,
                                  const TrajectoryBatch& batch, double tol_c,
                                  const FeatureBasis& basis) {
  const BSDEGridSolution s1 = solve_lsmc(m1, batch, basis);
  const BSDEGridSolution s2 = solve_lsmc(m2, batch, basis);

  ComparisonReport rep;
  rep.precondition_ok = true;
  Eigen::VectorXd zrow(batch.noise_dim);
  for (int p = 0; p < batch.n_paths && rep.precondition_ok; ++p) {
    const double phi1 = m1.terminal(batch.view(p, batch.grid.n_steps));
    const double phi2 = m2.terminal(batch.view(p, batch.grid.n_steps));
    if (phi1 < phi2 - 1e-12) rep.precondition_ok = false;
  }
  for (int i = 0; i < s2.n_steps && rep.precondition_ok; ++i) {
    for (int p = 0; p < batch.n_paths; ++p) {
      const PathView v = batch.view(p, batch.start_index + i);
      for (int j = 0; j < batch.noise_dim; ++j) zrow[j] = s2.Z(i, p, j);
      const double u = batch.control(p, i);
      if (m1.driver(v, s2.Y(i, p), zrow, u) < m2.driver(v, s2.Y(i, p), zrow, u) - 1e-12) {
        rep.precondition_ok = false;
        break;
      }
    }
  }

  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= s1.n_steps; ++i)
    for (int p = 0; p < batch.n_paths; ++p) min_gap = std::min(min_gap, s1.Y(i, p) - s2.Y(i, p));
  rep.min_gap = min_gap;
  rep.y0_gap = s1.y0 - s2.y0;
  rep.tolerance = 3.0 * (s1.y0_se + s2.y0_se) + tol_c * batch.grid.dt;
  rep.pass = rep.precondition_ok && rep.min_gap >= -rep.tolerance;
  return rep;
}

AprioriReport apriori_estimate_check(const ControlModel& model, const TrajectoryBatch& batch,
                                     const std::function<ControlModel(double)>& perturb,
                                     const std::vector<double>& eps_ladder, double p,
                                     const FeatureBasis& basis) {
  if (p < 2.0) throw std::invalid_argument("a-priori check needs p >= 2");
  AprioriReport rep;
  rep.p = p;
  rep.perturbations = eps_ladder;
  const BSDEGridSolution base = solve_lsmc(model, batch, basis);
  for (double eps : eps_ladder) {
    const ControlModel pm = perturb(eps);
    const BSDEGridSolution ps = solve_lsmc(pm, batch, basis);
    std::vector<double> maxdiff(batch.n_paths, 0.0);
    for (int i = 0; i <= base.n_steps; ++i)
      for (int q = 0; q < batch.n_paths; ++q)
        maxdiff[q] = std::max(maxdiff[q], std::abs(base.Y(i, q) - ps.Y(i, q)));
    for (double& v : maxdiff) v = std::pow(v, p);
    const double num = mean_se(maxdiff).mean;
    rep.numerator.push_back(num);
    rep.ratio.push_back(eps > 0.0 ? num / std::pow(eps, p) : 0.0);
  }
  // log-log slope over the strictly positive rungs
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < eps_ladder.size(); ++i)
    if (eps_ladder[i] > 0.0 && rep.numerator[i] > 0.0) {
      xs.push_back(std::log(eps_ladder[i]));
      ys.push_back(std::log(rep.numerator[i]));
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
