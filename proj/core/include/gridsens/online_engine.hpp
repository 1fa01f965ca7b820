#pragma once

// Online proximal-gradient tracking over a sliding window: one gradient step
// and one proximal step per arriving sample, plus dynamic-regret and
// relative-error instrumentation.

#include "gridsens/core_model.hpp"
#include "gridsens/estimators.hpp"
#include "gridsens/prox_ops.hpp"
#include "gridsens/synth.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace gridsens {

using MaskColumn = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct OnlineConfig {
  Index window = 18;
  EstimatorConfig estimator;
  /// Derive lambda/gamma from the first full window (EstimatorConfig::with_default_weights).
  bool default_weights = false;
  /// alpha = alpha_multiplier / L; values above 1 void the regret guarantee.
  double alpha_multiplier = 1.0;
  /// Optional (lambda, gamma) per 1-based arrival index; unset keeps the
  /// weights constant over the run.
  std::function<std::pair<double, double>(Index)> weight_schedule;
};

/// Sliding-window state of the online estimator. Estimation starts once the
/// buffer holds `window` samples; earlier calls only fill the buffer.
class OnlineState {
 public:
  OnlineState(Index lines, Index buses, OnlineConfig cfg);

  /// Ingest one sample. `available` marks observed flow entries (all when null).
  /// Throws StreamError if the sample dimensions differ from the stream's.
  void step(const Vector& delta_p, const Vector& delta_f, const MaskColumn* available = nullptr);

  bool estimating() const { return estimating_; }
  Index arrivals() const { return arrivals_; }
  const StackedIterate& iterate() const { return x_; }
  double step_size() const { return alpha_; }
  const OnlineConfig& config() const { return cfg_; }
  /// Weights in use (resolved from the first window when default_weights is set).
  const EstimatorConfig& estimator() const { return cfg_.estimator; }

  /// Current buffer as a measurement window (oldest column first).
  MeasurementWindow window() const;
  /// 0-based arrival index of the oldest buffered sample.
  Index oldest_arrival() const { return arrivals_ - static_cast<Index>(buffer_.size()); }

  /// Step size is recomputed from the next full window.
  void reset_step_size() { alpha_ = 0.0; }

  Index gradient_evaluations() const { return gradient_evals_; }
  Index prox_evaluations() const { return prox_evals_; }

 private:
  struct Sample {
    Vector delta_p;
    Vector delta_f;
    MaskColumn available;
  };

  Index lines_;
  Index buses_;
  OnlineConfig cfg_;
  std::deque<Sample> buffer_;
  StackedIterate x_;
  double alpha_ = 0.0;
  bool estimating_ = false;
  bool weights_resolved_ = false;
  Index arrivals_ = 0;
  Index gradient_evals_ = 0;
  Index prox_evals_ = 0;
};

struct RunOptions {
  bool track_regret = false;
  /// Comparator x_k* is solved every `comparator_every` steps; gaps in
  /// between are linearly interpolated and flagged.
  Index comparator_every = 1;
  double comparator_rel_tol = 1e-10;
  int comparator_max_iters = 20000;
  /// Bus whose relative error is tracked (0-based; default bus 2).
  Index tracked_bus = 1;
};

struct RunReport {
  Index window = 0;
  double step = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  Index tracked_bus = 1;

  std::vector<Index> steps;  // 1-based stream step k of each estimation step
  std::vector<double> cost;  // f_k(x_k)

  // Present when a ground-truth log was supplied.
  std::vector<double> re_tracked;
  std::vector<double> re_mean;  // mean RE over buses with nonzero true column

  // Present when regret tracking was requested.
  bool regret_available = false;
  std::vector<double> comparator_cost;  // f_k(x_k*)
  std::vector<double> gap;              // f_k(x_k) - f_k(x_k*)
  std::vector<double> omega;            // ||x_k* - x_{k-1}*|| (O aligned to the slid window)
  std::vector<bool> interpolated;
  bool any_interpolated = false;

  Matrix final_h;
  Matrix final_o;
  Index gradient_evaluations = 0;
  Index prox_evaluations = 0;
};

/// Drives OnlineState over every column of `stream`.
RunReport run_stream(const MeasurementStream& stream, const OnlineConfig& cfg,
                     const GroundTruthLog* oracle = nullptr, const RunOptions& options = {});

struct RegretMetrics {
  std::vector<double> regret;          // Reg_k
  std::vector<double> regret_avg;      // Reg_k / k
  std::vector<double> path_length;     // Omega_k
  std::vector<double> path_length_sq;  // bar Omega_k
  /// Smallest C with Reg_k/k <= C (1 + Omega_k/k + bar Omega_k/k) for all k.
  double bound_constant = 0.0;
  bool available = false;
};

/// Accumulates the regret and path-length sums of a run. k counts the
/// estimation steps taken so far.
RegretMetrics regret_metrics(const RunReport& report);

/// Running mean of a series.
std::vector<double> cumulative_average(const std::vector<double>& series);

}  // namespace gridsens
