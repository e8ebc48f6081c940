/**
 * @file model.hpp
 * @brief Coefficient packs for the controlled state equation, finite control
 *        grids, feedback policies and the shipped presets.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pdhjb/hilbert.hpp"
#include "pdhjb/path.hpp"

namespace pdhjb {

/// Finite control grid. Order is the tie-break order for argmax operations.
class ControlSet {
 public:
  explicit ControlSet(std::vector<double> values);
  static ControlSet uniform(double lo, double hi, double step);
  static ControlSet singleton(double u);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  bool contains(double u, double tol = 1e-9) const;
  /// Nearest grid element (ties to the lower one).
  double snap(double u) const;

 private:
  std::vector<double> values_;
};

/// Declared dependence of the coefficients on the path; the 1-D lattice
/// oracle refuses genuinely path-dependent models.
enum class MarkovStructure { kEndpoint, kEndpointRunMax, kPathDependent };

/// Admissible-control surrogate: feedback on (step, endpoint, running max,
/// running integral) through the PathView, or open-loop when
/// path_independent is set (the control may then depend on the step only).
struct Policy {
  std::string id;
  bool path_independent = false;
  std::function<double(int step, const PathView&)> act;
};

Policy make_constant_policy(double u);
Policy make_piecewise_constant_policy(const std::vector<int>& switch_nodes,
                                      const std::vector<double>& controls);
/// u = snap(-gain * x_1) clamped to the control grid (first coordinate).
Policy make_endpoint_feedback_policy(double gain, const ControlSet& controls);

/// Coefficient pack (F, G, q, phi) with the declared Lipschitz constant and
/// the operator/horizon/control data every experiment needs.
struct ControlModel {
  std::string name;
  SpectralOperator op = SpectralOperator::zero(1);
  double horizon = 1.0;
  int noise_dim = 1;
  double lipschitz = 1.0;
  ControlSet controls = ControlSet::singleton(0.0);
  MarkovStructure markov = MarkovStructure::kEndpoint;

  std::function<void(const PathView&, double u, Eigen::Ref<HVector>)> drift;          // F
  std::function<void(const PathView&, double u, Eigen::Ref<Eigen::MatrixXd>)> noise;  // G
  std::function<double(const PathView&, double y, const Eigen::Ref<const Eigen::VectorXd>& z,
                       double u)>
      driver;                                    // q
  std::function<double(const PathView&)> terminal;  // phi

  std::string spec_text;  // canonical parameter record, input to model_hash

  int dim() const { return op.dim(); }
};

std::uint64_t model_hash(const ControlModel& model);

struct PresetParams {
  double horizon = 1.0;
  int n_modes = 0;  // 0 = preset default
};

/// Shipped presets: "lq-1d", "linear-heat", "runmax", "uncontrolled".
ControlModel make_preset(const std::string& name, const PresetParams& params = {});

ControlModel make_lq_1d(double horizon = 1.0, double u_radius = 4.0, double u_step = 0.25);
ControlModel make_linear_heat(int n_modes = 2, double horizon = 1.0);
ControlModel make_runmax(double horizon = 1.0);
ControlModel make_uncontrolled(double horizon = 1.0);

/// Model transforms used by the stability / comparison / normalization
/// suites. Each returns a copy with one coefficient wrapped.
ControlModel with_terminal_shift(const ControlModel& m, double eps);
ControlModel with_driver_shift(const ControlModel& m, double eps);
ControlModel with_drift_shift(const ControlModel& m, double eps);
/// Monotonicity normalization: q <- q - kappa*y, raising the constant of the
/// Hamiltonian's monotonicity in r by kappa.
ControlModel with_driver_discount(const ControlModel& m, double kappa);

}  // namespace pdhjb
