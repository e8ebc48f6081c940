#include "pdhjb/path.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pdhjb {

PathGrid make_grid(double horizon, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const double steps = horizon / dt;
  const int n = static_cast<int>(std::lround(steps));
  if (n < 1 || std::abs(steps - n) > 1e-9 * std::max(1.0, steps))
    throw std::invalid_argument("dt must divide the horizon");
  return PathGrid{dt, n};
}

DiscretePath::DiscretePath(PathGrid grid, Eigen::MatrixXd nodes)
    : grid_(grid), nodes_(std::move(nodes)) {
  if (nodes_.cols() < 1) throw std::invalid_argument("path needs at least one node");
  if (nodes_.cols() > grid_.n_steps + 1)
    throw std::invalid_argument("path extends past the grid horizon");
  if (nodes_.rows() < 1) throw std::invalid_argument("path dimension must be positive");
}

DiscretePath DiscretePath::constant(PathGrid grid, const HVector& x, int end_index) {
  if (end_index < 0) throw std::invalid_argument("end_index must be nonnegative");
  Eigen::MatrixXd nodes(x.size(), end_index + 1);
  nodes.colwise() = x;
  return DiscretePath(grid, std::move(nodes));
}

DiscretePath DiscretePath::scalar(PathGrid grid, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("path needs at least one node");
  Eigen::MatrixXd nodes(1, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) nodes(0, i) = values[i];
  return DiscretePath(grid, std::move(nodes));
}

PathView make_view(const DiscretePath& gamma) {
  PathView v;
  v.data = gamma.nodes().data();
  v.dim = gamma.dim();
  v.end_index = gamma.end_index();
  v.dt = gamma.grid().dt;
  v.sup = 0.0;
  v.runint = 0.0;
  for (int i = 0; i <= v.end_index; ++i) {
    const double n = gamma.value(i).norm();
    v.sup = std::max(v.sup, n);
    if (i < v.end_index) v.runint += n * v.dt;
  }
  return v;
}

double sup_norm(const DiscretePath& gamma) {
  return gamma.nodes().colwise().norm().maxCoeff();
}

DiscretePath vertical_bump(const DiscretePath& gamma, const HVector& x) {
  if (x.size() != gamma.dim()) throw std::invalid_argument("bump dimension mismatch");
  Eigen::MatrixXd nodes = gamma.nodes();
  nodes.col(nodes.cols() - 1) += x;
  return DiscretePath(gamma.grid(), std::move(nodes));
}

DiscretePath flat_extend(const DiscretePath& gamma, int to_index) {
  if (to_index < gamma.end_index())
    throw std::invalid_argument("extension target precedes the path end");
  if (to_index > gamma.grid().n_steps)
    throw std::invalid_argument("extension target past the grid horizon");
  Eigen::MatrixXd nodes(gamma.dim(), to_index + 1);
  nodes.leftCols(gamma.end_index() + 1) = gamma.nodes();
  for (int i = gamma.end_index() + 1; i <= to_index; ++i) nodes.col(i) = gamma.endpoint();
  return DiscretePath(gamma.grid(), std::move(nodes));
}

DiscretePath semigroup_extend(const DiscretePath& gamma, const SpectralOperator& op,
                              int to_index) {
  if (op.dim() != gamma.dim()) throw std::invalid_argument("operator dimension mismatch");
  if (to_index < gamma.end_index())
    throw std::invalid_argument("extension target precedes the path end");
  if (to_index > gamma.grid().n_steps)
    throw std::invalid_argument("extension target past the grid horizon");
  Eigen::MatrixXd nodes(gamma.dim(), to_index + 1);
  nodes.leftCols(gamma.end_index() + 1) = gamma.nodes();
  const HVector x = gamma.endpoint();
  for (int i = gamma.end_index() + 1; i <= to_index; ++i) {
    const double s = gamma.grid().dt * (i - gamma.end_index());
    nodes.col(i) = semigroup_apply(op, s, x);
  }
  return DiscretePath(gamma.grid(), std::move(nodes));
}

DiscretePath restrict_to(const DiscretePath& gamma, int to_index) {
  if (to_index < 0 || to_index > gamma.end_index())
    throw std::invalid_argument("restriction index out of range");
  return DiscretePath(gamma.grid(), gamma.nodes().leftCols(to_index + 1));
}

double d_infty(const DiscretePath& a, const DiscretePath& b, const SpectralOperator& op,
               int horizon_index) {
  if (a.grid().dt != b.grid().dt) throw std::invalid_argument("paths on different grids");
  if (a.dim() != b.dim()) throw std::invalid_argument("path dimension mismatch");
  if (horizon_index < std::max(a.end_index(), b.end_index()))
    throw std::invalid_argument("horizon precedes a path end");
  const DiscretePath ea = semigroup_extend(a, op, horizon_index);
  const DiscretePath eb = semigroup_extend(b, op, horizon_index);
  const double gap = std::abs(a.end_time() - b.end_time());
  return gap + (ea.nodes() - eb.nodes()).colwise().norm().maxCoeff();
}

void write_path_csv(const DiscretePath& gamma, std::ostream& out) {
  out << "time";
  for (int k = 1; k <= gamma.dim(); ++k) out << ",c" << k;
  out << "\n";
  char buf[40];
  for (int i = 0; i <= gamma.end_index(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", gamma.grid().time(i));
    out << buf;
    for (int k = 0; k < gamma.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", gamma.nodes()(k, i));
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_path_csv(const DiscretePath& gamma, const std::string& filename) {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("cannot open " + filename);
  write_path_csv(gamma, out);
}

DiscretePath read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty path CSV");
  int dim = 0;
  for (char c : line)
    if (c == ',') ++dim;
  if (dim < 1) throw std::runtime_error("path CSV header has no coordinate columns");

  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int col = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::strtod(cell.c_str(), nullptr);
      if (col == 0)
        times.push_back(v);
      else
        values.push_back(v);
      ++col;
    }
    if (col != dim + 1) throw std::runtime_error("ragged path CSV row");
  }
  if (times.empty()) throw std::runtime_error("path CSV has no rows");

  const int m = static_cast<int>(times.size()) - 1;
  double dt = m > 0 ? times[1] - times[0] : 1.0;
  if (!(dt > 0.0)) throw std::runtime_error("non-increasing times in path CSV");
  for (int i = 0; i <= m; ++i)
    if (std::abs(times[i] - i * dt) > 1e-9 * std::max(1.0, std::abs(times[i])))
      throw std::runtime_error("path CSV times are not a uniform lattice");

  Eigen::MatrixXd nodes(dim, m + 1);
  for (int i = 0; i <= m; ++i)
    for (int k = 0; k < dim; ++k) nodes(k, i) = values[i * dim + k];
  return DiscretePath(PathGrid{dt, m == 0 ? 1 : m}, std::move(nodes));
}

DiscretePath read_path_csv(const std::string& filename) {
  std::ifstream in(filename);
  if (!in) throw std::runtime_error("cannot open " + filename);
  return read_path_csv(in);
}

std::uint64_t path_hash(const DiscretePath& gamma) {
  std::ostringstream os;
  write_path_csv(gamma, os);
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

DiscretePath sample_scaled_path(PathGrid grid, int dim, int end_index, double target_sup,
                                const CounterRng& rng, std::uint64_t draw_index) {
  if (end_index < 0 || end_index > grid.n_steps)
    throw std::invalid_argument("end_index out of range");
  if (!(target_sup > 0.0)) throw std::invalid_argument("target_sup must be positive");
  Eigen::MatrixXd nodes(dim, end_index + 1);
  const std::uint64_t base = draw_index * static_cast<std::uint64_t>((end_index + 1) * dim + 1);
  // Random start plus Brownian increments, then an exact rescale of the sup.
  for (int k = 0; k < dim; ++k) nodes(k, 0) = rng.normal(base + k);
  for (int i = 1; i <= end_index; ++i)
    for (int k = 0; k < dim; ++k)
      nodes(k, i) = nodes(k, i - 1) + std::sqrt(grid.dt) * rng.normal(base + i * dim + k);
  DiscretePath raw(grid, std::move(nodes));
  const double s = sup_norm(raw);
  if (s == 0.0) return DiscretePath::constant(grid, HVector::Constant(dim, target_sup), end_index);
  raw.nodes() *= target_sup / s;
  return raw;
}

DiscretePath sample_scaled_path_off_boundary(PathGrid grid, int dim, int end_index,
                                             double target_sup, double margin,
                                             const CounterRng& rng, std::uint64_t draw_index) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    DiscretePath g =
        sample_scaled_path(grid, dim, end_index, target_sup, rng, draw_index * 64 + attempt);
    if (g.end_index() == 0) return g;
    const double end_norm = g.endpoint().norm();
    const double pre_sup = restrict_to(g, g.end_index() - 1).nodes().colwise().norm().maxCoeff();
    if (std::abs(end_norm - pre_sup) > margin * target_sup && end_norm > margin * target_sup)
      return g;
  }
  throw std::runtime_error("could not sample a path off the branch boundary");
}

}  // namespace pdhjb
