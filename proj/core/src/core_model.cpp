#include "gridsens/core_model.hpp"

#include "gridsens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gridsens {

Network::Network(Index n_buses, std::vector<Branch> branches, Index slack,
                 std::vector<double> nominal_injections)
    : n_buses_(n_buses), branches_(std::move(branches)), slack_(slack) {
  if (n_buses_ < 2) throw ModelError("network needs at least two buses");
  if (slack_ < 0 || slack_ >= n_buses_)
    throw ModelError("slack bus " + std::to_string(slack_ + 1) + " out of range");
  for (const auto& b : branches_) {
    const auto name = "branch " + std::to_string(b.id);
    if (b.from < 0 || b.from >= n_buses_ || b.to < 0 || b.to >= n_buses_)
      throw ModelError(name + ": endpoint is not a valid bus index");
    if (b.from == b.to) throw ModelError(name + ": from_bus equals to_bus");
    if (!std::isfinite(b.reactance) || b.reactance == 0.0)
      throw ModelError(name + ": reactance must be finite and nonzero");
  }
  nominal_ = Vector::Zero(n_buses_);
  if (!nominal_injections.empty()) {
    if (static_cast<Index>(nominal_injections.size()) != n_buses_)
      throw ModelError("nominal injections must have one entry per bus");
    nominal_ = Eigen::Map<const Vector>(nominal_injections.data(), n_buses_);
  }
}

Network Network::with_scaled_reactance(Index branch, double factor) const {
  if (branch < 0 || branch >= n_branches())
    throw ModelError("branch position " + std::to_string(branch + 1) + " out of range");
  Network copy = *this;
  copy.branches_[branch].reactance *= factor;
  if (!std::isfinite(copy.branches_[branch].reactance) || copy.branches_[branch].reactance == 0.0)
    throw ModelError("scaled reactance must be finite and nonzero");
  return copy;
}

MeasurementWindow::MeasurementWindow(Matrix df, Matrix dp)
    : delta_f(std::move(df)), delta_p(std::move(dp)) {
  mask = Mask::Constant(delta_f.rows(), delta_f.cols(), true);
}

MeasurementWindow::MeasurementWindow(Matrix df, Matrix dp, Mask m)
    : delta_f(std::move(df)), delta_p(std::move(dp)), mask(std::move(m)) {}

void MeasurementWindow::check_dimensions() const {
  if (delta_f.cols() != delta_p.cols())
    throw ModelError("delta_f and delta_p disagree on the number of samples");
  if (mask.rows() != delta_f.rows() || mask.cols() != delta_f.cols())
    throw ModelError("mask shape does not match delta_f");
  if (true_outliers && (true_outliers->rows() != delta_f.rows() ||
                        true_outliers->cols() != delta_f.cols()))
    throw ModelError("true_outliers shape does not match delta_f");
}

void EstimatorConfig::validate() const {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ModelError("lambda and gamma must be nonnegative");
  if (!(h_min < h_max)) throw ModelError("h_min must be below h_max");
  if (!(o_min < o_max)) throw ModelError("o_min must be below o_max");
  if (max_iters < 1) throw ModelError("max_iters must be positive");
  if (!(rel_tol >= 0.0)) throw ModelError("rel_tol must be nonnegative");
  if (const auto* fixed = std::get_if<FixedStep>(&step); fixed && !(fixed->value > 0.0))
    throw ModelError("fixed step size must be positive");
  if (const auto* d = std::get_if<Dykstra>(&prox_mode); d && d->inner_iters < 1)
    throw ModelError("dykstra inner_iters must be positive");
}

EstimatorConfig EstimatorConfig::with_default_weights(const MeasurementWindow& w) {
  EstimatorConfig cfg;
  cfg.lambda = 0.01 * w.mask.select(w.delta_f.array(), 0.0).matrix().norm();
  cfg.gamma = 0.1 * cfg.lambda;
  return cfg;
}

Matrix forward_model(const SensitivityMatrix& h, const Matrix& delta_p,
                     const OutlierMatrix* outliers, double noise_sd, Rng* rng) {
  if (h.buses() != delta_p.rows())
    throw ModelError("H has " + std::to_string(h.buses()) + " columns but delta_p has " +
                     std::to_string(delta_p.rows()) + " rows");
  if (!(noise_sd >= 0.0)) throw ModelError("noise_sd must be nonnegative");
  Matrix flows = h.h * delta_p;
  if (outliers) {
    if (outliers->o.rows() != flows.rows() || outliers->o.cols() != flows.cols())
      throw ModelError("outlier matrix shape does not match the flows");
    flows += outliers->o;
  }
  if (noise_sd > 0.0) {
    if (!rng) throw ModelError("noise requested without a random generator");
    std::normal_distribution<double> noise(0.0, noise_sd);
    for (Index j = 0; j < flows.cols(); ++j)
      for (Index i = 0; i < flows.rows(); ++i) flows(i, j) += noise(*rng);
  }
  return flows;
}

Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol =
      static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() * s(0);
  return (s.array() > tol).count();
}

WindowDiagnostics validate_window(const MeasurementWindow& w) {
  WindowDiagnostics d;
  const auto l = w.delta_f.rows();
  const auto n = w.delta_p.rows();
  const auto m = w.delta_p.cols();
  if (w.delta_f.cols() != m || w.mask.rows() != l || w.mask.cols() != w.delta_f.cols()) {
    d.dimensions_consistent = false;
    std::ostringstream msg;
    msg << "dimension mismatch: delta_f " << l << "x" << w.delta_f.cols() << ", delta_p " << n << "x"
        << m << ", mask " << w.mask.rows() << "x" << w.mask.cols();
    d.messages.push_back(msg.str());
  }
  const bool mask_usable = w.mask.rows() == l && w.mask.cols() == w.delta_f.cols();
  for (Index j = 0; j < w.delta_f.cols(); ++j)
    for (Index i = 0; i < l; ++i)
      if (!std::isfinite(w.delta_f(i, j)) && (!mask_usable || w.mask(i, j))) {
        d.non_finite.push_back({'f', i, j});
        d.messages.push_back("non-finite flow at line " + std::to_string(i + 1) + ", time " +
                             std::to_string(j + 1));
      }
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i)
      if (!std::isfinite(w.delta_p(i, j))) {
        d.non_finite.push_back({'p', i, j});
        d.messages.push_back("non-finite injection at bus " + std::to_string(i + 1) + ", time " +
                             std::to_string(j + 1));
      }
  d.mask_coverage = (mask_usable && w.mask.size() > 0)
                        ? static_cast<double>(w.mask.count()) / static_cast<double>(w.mask.size())
                        : 0.0;
  if (w.delta_p.allFinite()) {
    d.rank_delta_p = numerical_rank(w.delta_p);
    if (d.rank_delta_p < n) {
      d.underdetermined = true;
      d.messages.push_back("underdetermined: rank " + std::string(m < n ? "\u2264 " : "") +
                           std::to_string(m < n ? m : d.rank_delta_p) + " < " + std::to_string(n));
    }
  }
  return d;
}

Vector relative_errors(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ModelError("estimate and truth shapes differ");
  Vector re(truth.cols());
  for (Index j = 0; j < truth.cols(); ++j) {
    const double denom = truth.col(j).norm();
    re(j) = denom > 0.0 ? (estimate.col(j) - truth.col(j)).norm() / denom
                        : std::numeric_limits<double>::quiet_NaN();
  }
  return re;
}

double finite_median(const Vector& v) {
  std::vector<double> vals;
  for (Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) vals.push_back(v(i));
  if (vals.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  const double hi = vals[mid];
  if (vals.size() % 2 == 1) return hi;
  const double lo = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace gridsens
