/**
 * @file path.hpp
 * @brief Discrete path space: uniform time lattice, sup norm, the three path
 *        extensions (vertical bump, flat, semigroup) and the metric d_inf.
 *
 * Paths live on a single uniform lattice per experiment; the sup norm and the
 * metric are taken over lattice nodes only. Node times are integer indices
 * times dt, so every "time on grid" precondition is an integer check.
 */
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pdhjb/hilbert.hpp"
#include "pdhjb/mc.hpp"

namespace pdhjb {

/// Uniform time lattice t_i = i*dt, i = 0..n_steps.
struct PathGrid {
  double dt = 0.0;
  int n_steps = 0;

  double horizon() const { return dt * n_steps; }
  double time(int node) const { return dt * node; }
  bool operator==(const PathGrid& o) const { return dt == o.dt && n_steps == o.n_steps; }
};

/// Build a grid for horizon T with step dt; refuses if dt does not divide T.
PathGrid make_grid(double horizon, double dt);

/// An H-valued path observed on grid nodes 0..end_index.
///
/// The same type serves the continuous space and its cadlag superset: the
/// only jump a path can carry is the endpoint jump created by vertical_bump.
class DiscretePath {
 public:
  DiscretePath(PathGrid grid, Eigen::MatrixXd nodes);  // nodes: dim x (end_index+1)

  /// Path identically equal to x up to end_index.
  static DiscretePath constant(PathGrid grid, const HVector& x, int end_index);
  /// Convenience for scalar paths: values[i] at node i.
  static DiscretePath scalar(PathGrid grid, const std::vector<double>& values);

  const PathGrid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(nodes_.rows()); }
  int end_index() const { return static_cast<int>(nodes_.cols()) - 1; }
  double end_time() const { return grid_.time(end_index()); }

  Eigen::MatrixXd::ConstColXpr value(int node) const { return nodes_.col(node); }
  Eigen::MatrixXd::ConstColXpr endpoint() const { return nodes_.col(end_index()); }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  Eigen::MatrixXd& nodes() { return nodes_; }

 private:
  PathGrid grid_;
  Eigen::MatrixXd nodes_;
};

/// Non-owning view of a path stored contiguously (coordinate-major per node).
/// Carries the running features simulation loops maintain incrementally, so
/// functionals of (sup norm, endpoint) cost O(dim) to evaluate.
struct PathView {
  const double* data = nullptr;  // node i at data[i*dim .. i*dim+dim)
  int dim = 0;
  int end_index = 0;
  double dt = 0.0;
  double sup = 0.0;     // sup_{i<=end} |x_i|
  double runint = 0.0;  // sum_{i<end} |x_i| dt (left Riemann sum)

  double end_time() const { return dt * end_index; }
  Eigen::Map<const Eigen::VectorXd> node(int i) const {
    return Eigen::Map<const Eigen::VectorXd>(data + static_cast<std::ptrdiff_t>(i) * dim, dim);
  }
  Eigen::Map<const Eigen::VectorXd> endpoint() const { return node(end_index); }
};

/// View over a DiscretePath (computes the running features in O(nodes)).
PathView make_view(const DiscretePath& gamma);

/// sup_{nodes} |gamma(t_i)| (Euclidean norm per node).
double sup_norm(const DiscretePath& gamma);

/// Endpoint bump: identical path with gamma(t) replaced by gamma(t)+x.
DiscretePath vertical_bump(const DiscretePath& gamma, const HVector& x);

/// Extend to node to_index, freezing the endpoint value.
DiscretePath flat_extend(const DiscretePath& gamma, int to_index);

/// Extend to node to_index carrying e^{(s-t)A} gamma(t) on the new nodes.
DiscretePath semigroup_extend(const DiscretePath& gamma, const SpectralOperator& op, int to_index);

/// Restriction to nodes 0..to_index (to_index <= end_index).
DiscretePath restrict_to(const DiscretePath& gamma, int to_index);

/// d_inf(gamma, eta) = |t-s| + sup-norm distance of the semigroup extensions
/// of both paths to the horizon node. Both paths must share dt and dimension.
double d_infty(const DiscretePath& a, const DiscretePath& b, const SpectralOperator& op,
               int horizon_index);

/// CSV serialization, header `time,c1,...,cN`, 17 significant digits.
void write_path_csv(const DiscretePath& gamma, std::ostream& out);
void write_path_csv(const DiscretePath& gamma, const std::string& filename);
DiscretePath read_path_csv(std::istream& in);
DiscretePath read_path_csv(const std::string& filename);

/// FNV-1a hash of the canonical CSV serialization.
std::uint64_t path_hash(const DiscretePath& gamma);

/// Random path for property suites: Brownian increments rescaled so the
/// sup norm equals target_sup exactly. Draw i is pure in (rng key, i).
DiscretePath sample_scaled_path(PathGrid grid, int dim, int end_index, double target_sup,
                                const CounterRng& rng, std::uint64_t draw_index);

/// Same sampler, resampling until the endpoint norm is at least
/// margin*target_sup away from the supremum over earlier nodes (keeps FD
/// checks off the branch boundary of the gauge derivatives).
DiscretePath sample_scaled_path_off_boundary(PathGrid grid, int dim, int end_index,
                                             double target_sup, double margin,
                                             const CounterRng& rng, std::uint64_t draw_index);

}  // namespace pdhjb
