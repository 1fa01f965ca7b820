#pragma once

// Shared data types and the linear flow/injection measurement model.
//
// Conventions: per-unit flows and injections; bus and line indices are
// 0-based in memory (files and messages are 1-based, see io.hpp); vec(.)
// stacks columns in order.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gridsens {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Rng = std::mt19937_64;

struct Branch {
  int id = 0;         // user-facing identifier (as written in the network file)
  Index from = 0;     // 0-based bus index
  Index to = 0;       // 0-based bus index
  double reactance = 0.0;  // per-unit, nonzero
};

/// Bus/branch topology with per-branch reactances. Immutable after
/// construction; the constructor enforces the structural invariants.
class Network {
 public:
  Network(Index n_buses, std::vector<Branch> branches, Index slack = 0,
          std::vector<double> nominal_injections = {});

  Index n_buses() const { return n_buses_; }
  Index n_branches() const { return static_cast<Index>(branches_.size()); }
  const std::vector<Branch>& branches() const { return branches_; }
  Index slack() const { return slack_; }
  /// Nominal injection p⁰ per bus (zeros when the network file had none).
  const Vector& nominal_injections() const { return nominal_; }

  /// Copy with the reactance of the branch at position `branch` multiplied by `factor`.
  Network with_scaled_reactance(Index branch, double factor) const;

 private:
  Index n_buses_;
  std::vector<Branch> branches_;
  Index slack_;
  Vector nominal_;
};

/// l x n matrix H mapping injection changes to line-flow changes.
struct SensitivityMatrix {
  Matrix h;

  Index lines() const { return h.rows(); }
  Index buses() const { return h.cols(); }
};

/// l x m matrix of outlier amplitudes. All zeros means "no outliers".
struct OutlierMatrix {
  Matrix o;
};

/// Paired flow/injection changes over m samples plus the availability mask.
struct MeasurementWindow {
  Matrix delta_f;  // l x m
  Matrix delta_p;  // n x m
  Mask mask;       // l x m, true = available
  std::optional<Matrix> true_outliers;  // evaluation only

  MeasurementWindow() = default;
  MeasurementWindow(Matrix delta_f, Matrix delta_p);
  MeasurementWindow(Matrix delta_f, Matrix delta_p, Mask mask);

  Index lines() const { return delta_f.rows(); }
  Index buses() const { return delta_p.rows(); }
  Index samples() const { return delta_p.cols(); }
  bool fully_observed() const { return mask.size() == 0 || mask.all(); }

  /// Throws ModelError unless delta_f, delta_p and mask agree on m and l.
  void check_dimensions() const;
};

struct AutoStep {};
struct FixedStep {
  double value = 0.0;
};
using StepPolicy = std::variant<AutoStep, FixedStep>;

struct SvtThenClip {};
struct Dykstra {
  int inner_iters = 50;
};
using NuclearProxMode = std::variant<SvtThenClip, Dykstra>;

struct EstimatorConfig {
  double lambda = 0.0;
  double gamma = 0.0;
  double h_min = -1.0;
  double h_max = 1.0;
  double o_min = -10.0;
  double o_max = 10.0;
  StepPolicy step = AutoStep{};
  int max_iters = 5000;
  double rel_tol = 1e-8;
  NuclearProxMode prox_mode = SvtThenClip{};
  /// Monotone accelerated variant (momentum with objective-based restart).
  /// Off by default so that the plain proximal-gradient iteration is used.
  bool accelerated = false;

  /// Throws ModelError on negative weights, empty boxes or bad step sizes.
  void validate() const;

  /// Default weights: lambda = 0.01 ||dF||_F, gamma = 0.1 lambda.
  static EstimatorConfig with_default_weights(const MeasurementWindow& w);
};

/// Returns H dP + O + E with E i.i.d. N(0, noise_sd^2). `rng` is only
/// consulted when noise_sd > 0.
Matrix forward_model(const SensitivityMatrix& h, const Matrix& delta_p,
                     const OutlierMatrix* outliers = nullptr, double noise_sd = 0.0,
                     Rng* rng = nullptr);

struct NonFiniteEntry {
  char matrix = 'f';  // 'f' for delta_f, 'p' for delta_p
  Index row = 0;
  Index col = 0;
};

struct WindowDiagnostics {
  bool dimensions_consistent = true;
  std::vector<NonFiniteEntry> non_finite;
  double mask_coverage = 1.0;
  Index rank_delta_p = 0;
  bool underdetermined = false;
  std::vector<std::string> messages;

  bool ok() const { return dimensions_consistent && non_finite.empty() && !underdetermined; }
};

WindowDiagnostics validate_window(const MeasurementWindow& w);

/// Numerical rank from the singular values (tolerance max(r, c) * eps * sigma_max).
Index numerical_rank(const Matrix& m);

/// RE_j = ||h_j - h*_j|| / ||h*_j|| per bus; NaN where the true column is zero.
Vector relative_errors(const Matrix& estimate, const Matrix& truth);

/// Median of the finite entries of `v` (NaN if there are none).
double finite_median(const Vector& v);

}  // namespace gridsens
