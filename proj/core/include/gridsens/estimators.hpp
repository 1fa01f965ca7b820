#pragma once

#include "gridsens/core_model.hpp"
#include "gridsens/prox_ops.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridsens {

enum class Variant { nuclear, robust, robust_missing };

std::string_view to_string(Variant v);
/// Accepts "nuclear", "robust", "robust-missing" (and "robust_missing").
std::optional<Variant> parse_variant(std::string_view name);

/// L = 2 (sigma_max(dP)^2 + 1), the Lipschitz constant of grad_s for the
/// stacked operator [dP^T (x) I, I].
double lipschitz_constant(const MeasurementWindow& w);

/// Step size from cfg.step: 1/L for AutoStep, the fixed value otherwise.
double resolve_step(const MeasurementWindow& w, const EstimatorConfig& cfg);

/// Full cost f = s + lambda ||H||_* (+ gamma ||vec(O)||_1 unless nuclear).
double objective(const StackedIterate& x, const MeasurementWindow& w, const EstimatorConfig& cfg,
                 Variant variant);

struct LeastSquaresResult {
  SensitivityMatrix h;
  bool underdetermined = false;
  Index rank = 0;
  Index iterations = 0;  // projected-gradient iterations (0 if the box never bound)
};

/// Box-constrained least squares min_{H in box} ||dF - H dP||_F^2. For a
/// rank-deficient dP returns the minimum-norm solution dF dP^+ clipped to the
/// box and flags `underdetermined`. Requires a fully observed window.
LeastSquaresResult least_squares_estimate(const MeasurementWindow& w, const EstimatorConfig& cfg);

struct ObjectiveTrace {
  std::vector<double> values;  // values[0] is the cost at the initial point
};

struct BatchResult {
  SensitivityMatrix h;
  OutlierMatrix o;
  ObjectiveTrace trace;
  Index iterations = 0;
  bool converged = false;
  double step = 0.0;
};

/// Proximal-gradient solve of the nuclear / robust / robust-with-missing-data
/// programs, x <- prox_{alpha g}(x - alpha grad_s(x)), from H = 0, O = 0 (or
/// `warm_start`). Stops on relative objective change <= cfg.rel_tol or after
/// cfg.max_iters. The nuclear and robust variants require a fully observed
/// window; robust_missing drops masked entries from the loss.
BatchResult batch_estimate(const MeasurementWindow& w, const EstimatorConfig& cfg, Variant variant,
                           const StackedIterate* warm_start = nullptr);

/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

struct WeightSweepEntry {
  double lambda = 0.0;
  double gamma = 0.0;
  double median_re = 0.0;
};

struct WeightSweepResult {
  std::vector<WeightSweepEntry> table;
  WeightSweepEntry best;
  BatchResult best_result;
};

/// Solves on every (lambda, gamma) pair and keeps the one with the smallest
/// median relative error against `truth` (slack/zero columns skipped). Empty
/// grids default to lambda0 * 10^{-3..1} and gamma0 * 10^{-1..3} with the
/// default weights of EstimatorConfig::with_default_weights.
WeightSweepResult sweep_weights(const MeasurementWindow& w, const EstimatorConfig& base,
                                Variant variant, const Matrix& truth,
                                std::vector<double> lambdas = {}, std::vector<double> gammas = {});

}  // namespace gridsens
