#include "pdhjb/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "pdhjb/mc.hpp"

namespace pdhjb {

namespace {

// log-log least-squares slope.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

}  // namespace

TrajectoryBatch simulate(const ControlModel& model, const DiscretePath& init,
                         const Policy& policy, double dt, int n_paths, std::uint64_t seed,
                         int threads) {
  if (init.grid().dt != dt) throw std::invalid_argument("dt must equal the initial path's grid step");
  if (init.dim() != model.dim()) throw std::invalid_argument("initial path dimension mismatch");
  const PathGrid grid = make_grid(model.horizon, dt);
  if (init.end_index() > grid.n_steps)
    throw std::invalid_argument("initial path extends past the horizon");
  if (n_paths < 1) throw std::invalid_argument("need at least one path");

  TrajectoryBatch b;
  b.grid = grid;
  b.start_index = init.end_index();
  b.n_paths = n_paths;
  b.dim = model.dim();
  b.noise_dim = model.noise_dim;
  b.seed = seed;
  b.policy_id = policy.id;
  b.shared_controls = policy.path_independent;

  const int n_nodes = b.n_nodes();
  const int n_sim = b.n_sim_steps();
  const int dim = b.dim;
  const int d = b.noise_dim;
  b.states.assign(static_cast<std::size_t>(n_paths) * n_nodes * dim, 0.0);
  b.noise.assign(static_cast<std::size_t>(n_paths) * n_sim * d, 0.0);
  b.runmax.assign(static_cast<std::size_t>(n_paths) * n_nodes, 0.0);
  b.controls.assign(b.shared_controls ? n_sim : static_cast<std::size_t>(n_paths) * n_sim, 0.0);

  // Shared control sequence for path-independent policies (act ignores the view).
  if (b.shared_controls && n_sim > 0) {
    const PathView dummy = make_view(init);
    for (int i = 0; i < n_sim; ++i) {
      const double u = policy.act(b.start_index + i, dummy);
      if (!model.controls.contains(u))
        throw std::invalid_argument("policy returned a control outside the control set");
      b.controls[i] = u;
    }
  }

  std::vector<double> sg(dim);
  for (int k = 0; k < dim; ++k) sg[k] = std::exp(model.op.eigenvalues()[k] * dt);
  const std::uint64_t base_key = SeedSequence(seed).fold(stream::kSimulateNoise).key();
  const double sqrt_dt = std::sqrt(dt);

  parallel_chunks(
      static_cast<std::size_t>(n_paths), threads,
      [&](std::size_t p0, std::size_t p1, std::size_t) {
        HVector drift(dim);
        Eigen::MatrixXd gmat(dim, d);
        HVector x(dim), noise_term(dim);
        Eigen::VectorXd dw(d);
        for (std::size_t p = p0; p < p1; ++p) {
          double* sp = b.states.data() + p * n_nodes * dim;
          double* rp = b.runmax.data() + p * n_nodes;
          double* np = b.noise.data() + p * static_cast<std::size_t>(n_sim) * d;

          double sup = 0.0, runint = 0.0;
          for (int i = 0; i <= b.start_index; ++i) {
            for (int k = 0; k < dim; ++k) sp[i * dim + k] = init.value(i)[k];
            const double nrm = init.value(i).norm();
            if (i < b.start_index) runint += nrm * dt;
            sup = std::max(sup, nrm);
            rp[i] = sup;
          }

          const CounterRng rng(SeedSequence(base_key).fold(p).key());
          PathView v;
          v.data = sp;
          v.dim = dim;
          v.dt = dt;
          for (int i = b.start_index; i < grid.n_steps; ++i) {
            v.end_index = i;
            v.sup = rp[i];
            v.runint = runint;
            double u;
            if (b.shared_controls) {
              u = b.controls[i - b.start_index];
            } else {
              u = policy.act(i, v);
              if (!model.controls.contains(u))
                throw std::invalid_argument("policy returned a control outside the control set");
              b.controls[p * n_sim + (i - b.start_index)] = u;
            }
            model.drift(v, u, drift);
            model.noise(v, u, gmat);
            for (int j = 0; j < d; ++j) {
              const double z =
                  rng.normal(static_cast<std::uint64_t>(i - b.start_index) * d + j);
              dw[j] = sqrt_dt * z;
              np[(i - b.start_index) * static_cast<std::size_t>(d) + j] = dw[j];
            }
            noise_term.noalias() = gmat * dw;
            double nrm2 = 0.0;
            for (int k = 0; k < dim; ++k) {
              const double next = sg[k] * (sp[i * dim + k] + drift[k] * dt + noise_term[k]);
              sp[(i + 1) * dim + k] = next;
              nrm2 += next * next;
            }
            const double nrm = std::sqrt(nrm2);
            runint += std::sqrt(static_cast<double>(
                          Eigen::Map<const Eigen::VectorXd>(sp + i * dim, dim).squaredNorm())) *
                      dt;
            rp[i + 1] = std::max(rp[i], nrm);
          }
        }
      });
  return b;
}

void export_batch_csv(const TrajectoryBatch& batch, std::ostream& out) {
  out << "path,node,time";
  for (int k = 1; k <= batch.dim; ++k) out << ",x" << k;
  out << "\n";
  char buf[40];
  for (int p = 0; p < batch.n_paths; ++p) {
    for (int i = 0; i < batch.n_nodes(); ++i) {
      out << p << ',' << i;
      std::snprintf(buf, sizeof(buf), "%.17g", batch.grid.time(i));
      out << ',' << buf;
      for (int k = 0; k < batch.dim; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", batch.state(p, i, k));
        out << ',' << buf;
      }
      out << "\n";
    }
  }
}

std::string batch_manifest_json(const TrajectoryBatch& batch, const ControlModel& model) {
  nlohmann::json j;
  j["model_hash"] = model_hash(model);
  j["seed"] = batch.seed;
  j["dt"] = batch.grid.dt;
  j["n_paths"] = batch.n_paths;
  j["scheme"] = batch.scheme;
  j["policy"] = batch.policy_id;
  return j.dump(2);
}

MomentModulusReport moment_and_modulus_check(const ControlModel& model, const DiscretePath& init,
                                             const Policy& policy, double p,
                                             const std::vector<double>& dt_ladder, int n_paths,
                                             std::uint64_t seed, int threads) {
  if (!(p > 2.0)) throw std::invalid_argument("moment check needs p > 2");
  if (dt_ladder.empty()) throw std::invalid_argument("empty dt ladder");
  MomentModulusReport rep;
  rep.p = p;
  rep.dt_ladder = dt_ladder;

  for (double dt : dt_ladder) {
    // Ladder entries re-lattice the start; histories only transfer when dt matches.
    const PathGrid g = make_grid(model.horizon, dt);
    DiscretePath start = init.grid().dt == dt ? init : DiscretePath::constant(g, init.endpoint(), 0);
    const TrajectoryBatch b = simulate(model, start, policy, dt, n_paths, seed, threads);
    std::vector<double> vals(n_paths);
    for (int q = 0; q < n_paths; ++q)
      vals[q] = std::pow(b.runmax[static_cast<std::size_t>(q) * b.n_nodes() + b.grid.n_steps], p);
    rep.terminal_moment.push_back(mean_se(vals).mean);
  }

  const double dt = dt_ladder.back();
  const PathGrid g = make_grid(model.horizon, dt);
  DiscretePath start = init.grid().dt == dt ? init : DiscretePath::constant(g, init.endpoint(), 0);
  const TrajectoryBatch b = simulate(model, start, policy, dt, n_paths, seed, threads);
  const HVector x0 = init.endpoint();
  std::vector<double> vals(n_paths);
  for (int gap = 1; gap <= b.n_sim_steps() / 2; gap *= 2) {
    const double s = gap * dt;
    const HVector drifted = semigroup_apply(model.op, s, x0);
    for (int q = 0; q < n_paths; ++q) {
      double e2 = 0.0;
      for (int k = 0; k < b.dim; ++k) {
        const double d = b.state(q, b.start_index + gap, k) - drifted[k];
        e2 += d * d;
      }
      vals[q] = std::pow(std::sqrt(e2), p);
    }
    rep.gaps.push_back(s);
    rep.modulus_moment.push_back(mean_se(vals).mean);
  }
  rep.modulus_slope = fit_slope(rep.gaps, rep.modulus_moment);
  return rep;
}

YosidaCompareReport yosida_compare(const ControlModel& model, const DiscretePath& init,
                                   const Policy& policy, const std::vector<double>& mu_ladder,
                                   double dt, int n_paths, std::uint64_t seed, int threads) {
  if (!model.op.is_contraction())
    throw RefusalError("Yosida comparison requires the contraction regime");
  if (!policy.path_independent)
    throw std::invalid_argument("Yosida comparison needs a path-independent control process");

  const TrajectoryBatch base = simulate(model, init, policy, dt, n_paths, seed, threads);
  YosidaCompareReport rep;
  rep.mu_ladder = mu_ladder;
  for (double mu : mu_ladder) {
    ControlModel approx = model;
    approx.op = yosida(model.op, mu);
    const TrajectoryBatch bm = simulate(approx, init, policy, dt, n_paths, seed, threads);
    std::vector<double> sup_err(n_paths, 0.0);
    for (int p = 0; p < n_paths; ++p) {
      double m = 0.0;
      for (int i = base.start_index; i <= base.grid.n_steps; ++i) {
        double e2 = 0.0;
        for (int k = 0; k < base.dim; ++k) {
          const double d = base.state(p, i, k) - bm.state(p, i, k);
          e2 += d * d;
        }
        m = std::max(m, std::sqrt(e2));
      }
      sup_err[p] = m;
    }
    rep.sup_error.push_back(mean_se(sup_err).mean);
  }
  rep.non_increasing = true;
  for (std::size_t i = 1; i < rep.sup_error.size(); ++i)
    if (rep.sup_error[i] > rep.sup_error[i - 1] * (1.0 + 1e-12)) rep.non_increasing = false;
  return rep;
}

ItoReport ito_verify(const SmoothFunctional& f, const ControlModel& model,
                     const DiscretePath& init, const Policy& policy,
                     const std::vector<double>& dt_ladder, int n_paths, std::uint64_t seed,
                     int threads) {
  if (!f.value || !f.derivatives)
    throw std::invalid_argument("Ito verification needs value and derivative closures");
  ItoReport rep;
  rep.functional = f.name;
  rep.dt_ladder = dt_ladder;

  for (double dt : dt_ladder) {
    const PathGrid g = make_grid(model.horizon, dt);
    DiscretePath start = init.grid().dt == dt ? init
                         : init.end_index() == 0
                             ? DiscretePath::constant(g, init.endpoint(), 0)
                             : throw std::invalid_argument(
                                   "dt ladders need a time-0 initial point or a matching grid");
    const TrajectoryBatch b = simulate(model, start, policy, dt, n_paths, seed, threads);

    std::vector<double> abs_res(n_paths, 0.0);
    const int d = b.noise_dim;
    parallel_chunks(
        static_cast<std::size_t>(n_paths), threads,
        [&](std::size_t p0, std::size_t p1, std::size_t) {
          HVector drift(b.dim);
          Eigen::MatrixXd gmat(b.dim, d);
          Eigen::VectorXd dw(d);
          for (std::size_t p = p0; p < p1; ++p) {
            double integral = 0.0, martingale = 0.0;
            for (int i = b.start_index; i < b.grid.n_steps; ++i) {
              const PathView v = b.view(static_cast<int>(p), i);
              const FunctionalDerivatives der = f.derivatives(v);
              const HVector astar =
                  f.astar_dx ? f.astar_dx(v) : apply_adjoint_generator(model.op, der.dx);
              const double u = b.control(static_cast<int>(p), i - b.start_index);
              model.drift(v, u, drift);
              model.noise(v, u, gmat);
              for (int j = 0; j < d; ++j)
                dw[j] = b.increment(static_cast<int>(p), i - b.start_index, j);
              const double trace_term = 0.5 * (der.dxx * gmat).cwiseProduct(gmat).sum();
              integral +=
                  (der.dt + astar.dot(v.endpoint()) + der.dx.dot(drift) + trace_term) * dt;
              martingale += der.dx.dot(gmat * dw);
            }
            const double lhs = f.value(b.view(static_cast<int>(p), b.grid.n_steps)) -
                               f.value(b.view(static_cast<int>(p), b.start_index));
            abs_res[p] = std::abs(lhs - integral - martingale);
          }
        });
    const MeanSe ms = mean_se(abs_res);
    rep.mean_abs_residual.push_back(ms.mean);
    rep.se_abs_residual.push_back(ms.se);
  }
  for (std::size_t i = 1; i < rep.mean_abs_residual.size(); ++i) {
    const double ratio = rep.mean_abs_residual[i - 1] / std::max(rep.mean_abs_residual[i], 1e-300);
    const double step = rep.dt_ladder[i - 1] / rep.dt_ladder[i];
    rep.orders.push_back(std::log(ratio) / std::log(step));
  }
  return rep;
}

ItoInequalityReport ito_inequality_verify(const ControlModel& model, const DiscretePath& init,
                                          const DiscretePath& eta, const Policy& policy, double M,
                                          double dt, int n_paths, std::uint64_t seed,
                                          double frac_tol, int threads) {
  if (!model.op.is_contraction())
    throw RefusalError("the Ito inequality requires the contraction regime");
  if (M < 3.0) throw std::invalid_argument("the Ito inequality requires M >= 3");
  if (eta.end_index() != init.end_index() || eta.grid().dt != init.grid().dt)
    throw std::invalid_argument("eta must share the initial path's lattice and end time");

  const TrajectoryBatch b = simulate(model, init, policy, dt, n_paths, seed, threads);
  const int dim = b.dim;
  const int d = b.noise_dim;

  // Difference of the frozen histories, shared by all paths.
  double sup0 = 0.0;
  for (int i = 0; i <= init.end_index(); ++i)
    sup0 = std::max(sup0, (init.value(i) - eta.value(i)).norm());
  std::vector<double> sg(dim);
  for (int k = 0; k < dim; ++k) sg[k] = std::exp(model.op.eigenvalues()[k] * dt);

  std::vector<double> defect(n_paths, 0.0);
  parallel_chunks(
      static_cast<std::size_t>(n_paths), threads,
      [&](std::size_t p0, std::size_t p1, std::size_t) {
        HVector drift(dim), y(dim), ext(dim);
        Eigen::MatrixXd gmat(dim, d);
        Eigen::VectorXd dw(d);
        for (std::size_t p = p0; p < p1; ++p) {
          ext = eta.endpoint();
          y = Eigen::Map<const Eigen::VectorXd>(b.node_ptr(static_cast<int>(p), b.start_index),
                                                dim) -
              ext;
          double sup_y = std::max(sup0, y.norm());
          const double lhs0 = eval_upsilon(sup_y, y, M).value;
          double integral = 0.0, martingale = 0.0;
          for (int i = b.start_index; i < b.grid.n_steps; ++i) {
            const PathView v = b.view(static_cast<int>(p), i);
            const FunctionalDerivatives der = eval_upsilon(sup_y, y, M);
            const double u = b.control(static_cast<int>(p), i - b.start_index);
            model.drift(v, u, drift);
            model.noise(v, u, gmat);
            for (int j = 0; j < d; ++j)
              dw[j] = b.increment(static_cast<int>(p), i - b.start_index, j);
            integral += (der.dx.dot(drift) + 0.5 * (der.dxx * gmat).cwiseProduct(gmat).sum()) * dt;
            martingale += der.dx.dot(gmat * dw);
            // advance the difference path
            for (int k = 0; k < dim; ++k) ext[k] *= sg[k];
            y = Eigen::Map<const Eigen::VectorXd>(b.node_ptr(static_cast<int>(p), i + 1), dim) -
                ext;
            sup_y = std::max(sup_y, y.norm());
          }
          const double lhs_T = eval_upsilon(sup_y, y, M).value;
          defect[p] = (lhs0 + integral + martingale) - lhs_T;
        }
      });

  ItoInequalityReport rep;
  rep.M = M;
  rep.dt = dt;
  rep.frac_tol = frac_tol;
  const MeanSe ms = mean_se(defect);
  rep.mean_defect = ms.mean;
  rep.se_defect = ms.se;
  rep.min_defect = *std::min_element(defect.begin(), defect.end());
  int below = 0;
  for (double v : defect)
    if (v < -frac_tol) ++below;
  rep.frac_below = static_cast<double>(below) / n_paths;
  return rep;
}

TailReport tail_projection_check(const ControlModel& model, const DiscretePath& init,
                                 const std::vector<int>& n_ladder) {
  TailReport rep;
  rep.n_ladder = n_ladder;
  const PathView v = make_view(init);
  Eigen::MatrixXd gmat(model.dim(), model.noise_dim);
  for (int n_keep : n_ladder) {
    double worst = 0.0;
    for (double u : model.controls.values()) {
      model.noise(v, u, gmat);
      double tail = 0.0;
      for (int k = n_keep; k < model.dim(); ++k)
        for (int j = 0; j < model.noise_dim; ++j) tail += gmat(k, j) * gmat(k, j);
      worst = std::max(worst, tail);
    }
    rep.tail_norm2.push_back(worst);
  }
  rep.non_increasing = true;
  for (std::size_t i = 1; i < rep.tail_norm2.size(); ++i)
    if (rep.tail_norm2[i] > rep.tail_norm2[i - 1] * (1.0 + 1e-12)) rep.non_increasing = false;
  rep.vanishes = !rep.tail_norm2.empty() && rep.tail_norm2.back() <= 1e-15;
  return rep;
}

}  // namespace pdhjb
