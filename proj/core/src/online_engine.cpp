#include "gridsens/online_engine.hpp"

#include "gridsens/errors.hpp"

#include <cmath>
#include <limits>

namespace gridsens {
namespace {

// Shift O left by `shift` columns (oldest dropped), padding with zeros.
Matrix slide_columns(const Matrix& o, Index shift) {
  Matrix out = Matrix::Zero(o.rows(), o.cols());
  if (shift < o.cols()) out.leftCols(o.cols() - shift) = o.rightCols(o.cols() - shift);
  return out;
}

// Distance between consecutive comparators. O columns are matched by arrival
// time; columns that only exist in the newer window count against zero, the
// columns that fell out of the window are ignored.
double aligned_distance(const StackedIterate& current, const StackedIterate& previous, Index shift) {
  const Matrix prev_o = slide_columns(previous.o, shift);
  return std::sqrt((current.h - previous.h).squaredNorm() + (current.o - prev_o).squaredNorm());
}

}  // namespace

OnlineState::OnlineState(Index lines, Index buses, OnlineConfig cfg)
    : lines_(lines), buses_(buses), cfg_(std::move(cfg)) {
  if (lines_ < 1 || buses_ < 1) throw ModelError("online: dimensions must be positive");
  if (cfg_.window < 1) throw ModelError("online: window must hold at least one sample");
  if (!(cfg_.alpha_multiplier > 0.0)) throw ModelError("online: alpha multiplier must be positive");
  cfg_.estimator.validate();
  x_ = StackedIterate::zeros(lines_, buses_, cfg_.window);
}

MeasurementWindow OnlineState::window() const {
  const auto m = static_cast<Index>(buffer_.size());
  Matrix df(lines_, m);
  Matrix dp(buses_, m);
  Mask mask(lines_, m);
  for (Index j = 0; j < m; ++j) {
    const auto& s = buffer_[static_cast<std::size_t>(j)];
    df.col(j) = s.delta_f;
    dp.col(j) = s.delta_p;
    mask.col(j) = s.available;
  }
  return MeasurementWindow(std::move(df), std::move(dp), std::move(mask));
}

void OnlineState::step(const Vector& delta_p, const Vector& delta_f, const MaskColumn* available) {
  if (delta_p.size() != buses_ || delta_f.size() != lines_ || (available && available->size() != lines_))
    throw StreamError("online: sample dimensions changed mid-stream (expected " + std::to_string(buses_) +
                      " injections and " + std::to_string(lines_) + " flows)");

  buffer_.push_back({delta_p, delta_f, available ? *available : MaskColumn::Constant(lines_, true)});
  ++arrivals_;
  const bool slid = static_cast<Index>(buffer_.size()) > cfg_.window;
  if (slid) buffer_.pop_front();
  if (static_cast<Index>(buffer_.size()) < cfg_.window) return;

  const MeasurementWindow w = window();
  if (!weights_resolved_) {
    if (cfg_.default_weights) {
      const auto d = EstimatorConfig::with_default_weights(w);
      cfg_.estimator.lambda = d.lambda;
      cfg_.estimator.gamma = d.gamma;
    }
    weights_resolved_ = true;
  }
  if (cfg_.weight_schedule) {
    const auto [lambda, gamma] = cfg_.weight_schedule(arrivals_);
    if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ModelError("online: scheduled weights must be nonnegative");
    cfg_.estimator.lambda = lambda;
    cfg_.estimator.gamma = gamma;
  }
  if (alpha_ == 0.0) alpha_ = cfg_.alpha_multiplier / lipschitz_constant(w);
  if (estimating_ && slid) x_.o = slide_columns(x_.o, 1);
  estimating_ = true;

  const auto& est = cfg_.estimator;
  const StackedIterate g = grad_s(x_, w);
  ++gradient_evals_;
  x_.h = prox_nuclear_box(x_.h - alpha_ * g.h, est.lambda * alpha_, est.h_min, est.h_max, est.prox_mode);
  x_.o = soft_threshold_box(x_.o - alpha_ * g.o, est.gamma * alpha_, est.o_min, est.o_max);
  ++prox_evals_;
  if (!x_.h.allFinite() || !x_.o.allFinite())
    throw NumericalError("online: non-finite iterate at arrival " + std::to_string(arrivals_),
                         static_cast<std::ptrdiff_t>(arrivals_));
}

RunReport run_stream(const MeasurementStream& stream, const OnlineConfig& cfg,
                     const GroundTruthLog* oracle, const RunOptions& options) {
  if (options.comparator_every < 1) throw ModelError("online: comparator cadence must be >= 1");
  OnlineState state(stream.lines(), stream.buses(), cfg);
  RunReport report;
  report.window = cfg.window;
  report.tracked_bus = options.tracked_bus;

  std::optional<StackedIterate> comparator;
  Index comparator_column = -1;
  std::vector<std::ptrdiff_t> solved;  // indices into report.gap that hold solved values

  for (Index c = 0; c < stream.steps(); ++c) {
    const Vector dp = stream.delta_p.col(c);
    const Vector df = stream.delta_f.col(c);
    const MaskColumn avail = stream.mask.col(c);
    state.step(dp, df, &avail);
    if (!state.estimating()) continue;

    const MeasurementWindow w = state.window();
    const auto& est = state.estimator();
    const StackedIterate& x = state.iterate();
    report.steps.push_back(c + 1);
    report.cost.push_back(objective(x, w, est, Variant::robust_missing));

    if (oracle) {
      const Vector re = relative_errors(x.h, oracle->h_at(c).h);
      report.re_tracked.push_back(re(options.tracked_bus));
      double sum = 0.0;
      Index count = 0;
      for (Index j = 0; j < re.size(); ++j)
        if (std::isfinite(re(j))) {
          sum += re(j);
          ++count;
        }
      report.re_mean.push_back(count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN());
    }

    if (!options.track_regret) continue;
    const auto idx = static_cast<Index>(report.steps.size()) - 1;
    const bool last = c + 1 == stream.steps();
    if (idx % options.comparator_every != 0 && !last) {
      report.comparator_cost.push_back(std::numeric_limits<double>::quiet_NaN());
      report.gap.push_back(std::numeric_limits<double>::quiet_NaN());
      report.omega.push_back(0.0);
      report.interpolated.push_back(true);
      report.any_interpolated = true;
      continue;
    }

    EstimatorConfig ccfg = est;
    ccfg.rel_tol = options.comparator_rel_tol;
    ccfg.max_iters = options.comparator_max_iters;
    ccfg.accelerated = true;

    // Warm start from whichever is better: the slid previous comparator or the online iterate.
    StackedIterate start = x;
    if (comparator) {
      StackedIterate shifted{comparator->h, slide_columns(comparator->o, c - comparator_column)};
      if (objective(shifted, w, est, Variant::robust_missing) < report.cost.back()) start = std::move(shifted);
    }
    BatchResult r = batch_estimate(w, ccfg, Variant::robust_missing, &start);
    StackedIterate best{std::move(r.h.h), std::move(r.o.o)};

    report.omega.push_back(comparator ? aligned_distance(best, *comparator, c - comparator_column) : 0.0);
    report.comparator_cost.push_back(r.trace.values.back());
    report.gap.push_back(report.cost.back() - r.trace.values.back());
    report.interpolated.push_back(false);
    solved.push_back(idx);
    comparator = std::move(best);
    comparator_column = c;
  }

  if (options.track_regret && !solved.empty()) {
    report.regret_available = true;
    // Linear interpolation of the gaps between solved comparator steps.
    for (std::size_t s = 0; s + 1 < solved.size(); ++s) {
      const auto a = solved[s];
      const auto b = solved[s + 1];
      for (auto i = a + 1; i < b; ++i) {
        const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
        const auto ui = static_cast<std::size_t>(i);
        report.gap[ui] = (1.0 - t) * report.gap[static_cast<std::size_t>(a)] + t * report.gap[static_cast<std::size_t>(b)];
        report.comparator_cost[ui] = report.cost[ui] - report.gap[ui];
      }
    }
  }

  report.step = state.step_size();
  report.lambda = state.estimator().lambda;
  report.gamma = state.estimator().gamma;
  report.final_h = state.iterate().h;
  report.final_o = state.iterate().o;
  report.gradient_evaluations = state.gradient_evaluations();
  report.prox_evaluations = state.prox_evaluations();
  return report;
}

RegretMetrics regret_metrics(const RunReport& report) {
  RegretMetrics m;
  if (!report.regret_available) return m;
  m.available = true;
  double reg = 0.0;
  double path = 0.0;
  double path_sq = 0.0;
  for (std::size_t i = 0; i < report.gap.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    reg += report.gap[i];
    path += report.omega[i];
    path_sq += report.omega[i] * report.omega[i];
    m.regret.push_back(reg);
    m.regret_avg.push_back(reg / k);
    m.path_length.push_back(path);
    m.path_length_sq.push_back(path_sq);
    const double rhs = 1.0 + path / k + path_sq / k;
    m.bound_constant = std::max(m.bound_constant, (reg / k) / rhs);
  }
  return m;
}

std::vector<double> cumulative_average(const std::vector<double>& series) {
  std::vector<double> out;
  out.reserve(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    out.push_back(sum / static_cast<double>(i + 1));
  }
  return out;
}

}  // namespace gridsens
