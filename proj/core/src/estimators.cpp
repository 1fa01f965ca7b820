#include "gridsens/estimators.hpp"

#include "gridsens/errors.hpp"

#include <cmath>
#include <limits>

namespace gridsens {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::nuclear:
      return "nuclear";
    case Variant::robust:
      return "robust";
    case Variant::robust_missing:
      return "robust-missing";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  if (name == "nuclear") return Variant::nuclear;
  if (name == "robust") return Variant::robust;
  if (name == "robust-missing" || name == "robust_missing") return Variant::robust_missing;
  return std::nullopt;
}

double lipschitz_constant(const MeasurementWindow& w) {
  double sigma = 0.0;
  if (w.delta_p.size() > 0) sigma = Eigen::JacobiSVD<Matrix>(w.delta_p).singularValues()(0);
  return 2.0 * (sigma * sigma + 1.0);
}

double resolve_step(const MeasurementWindow& w, const EstimatorConfig& cfg) {
  if (const auto* fixed = std::get_if<FixedStep>(&cfg.step)) return fixed->value;
  return 1.0 / lipschitz_constant(w);
}

double objective(const StackedIterate& x, const MeasurementWindow& w, const EstimatorConfig& cfg,
                 Variant variant) {
  double f = smooth_loss(x, w);
  if (cfg.lambda > 0.0) f += cfg.lambda * nuclear_norm(x.h);
  if (variant != Variant::nuclear && cfg.gamma > 0.0) f += cfg.gamma * x.o.cwiseAbs().sum();
  return f;
}

LeastSquaresResult least_squares_estimate(const MeasurementWindow& w, const EstimatorConfig& cfg) {
  w.check_dimensions();
  cfg.validate();
  if (w.samples() == 0) throw DataError("least squares: empty measurement window");
  if (!w.fully_observed()) throw DataError("least squares: window has missing flow entries");

  LeastSquaresResult out;
  out.rank = numerical_rank(w.delta_p);
  out.underdetermined = out.rank < w.buses();

  // Minimum-norm solution of dP^T H^T = dF^T, i.e. H = dF dP^+.
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(w.delta_p.transpose());
  const Matrix unconstrained = cod.solve(w.delta_f.transpose()).transpose();
  Matrix h = clip(unconstrained, cfg.h_min, cfg.h_max);

  const bool box_binds = (h - unconstrained).cwiseAbs().maxCoeff() > 0.0;
  if (!out.underdetermined && box_binds) {
    // Projected gradient on the strongly convex quadratic; step 1/(2 sigma_max^2).
    const double sigma = Eigen::JacobiSVD<Matrix>(w.delta_p).singularValues()(0);
    const double step = 1.0 / (2.0 * sigma * sigma);
    const Matrix gram = w.delta_p * w.delta_p.transpose();
    const Matrix cross = w.delta_f * w.delta_p.transpose();
    for (int k = 0; k < cfg.max_iters; ++k) {
      Matrix next = clip(h - step * 2.0 * (h * gram - cross), cfg.h_min, cfg.h_max);
      const double change = (next - h).norm();
      h = std::move(next);
      out.iterations = k + 1;
      if (change <= cfg.rel_tol * std::max(1.0, h.norm())) break;
    }
  }
  if (!h.allFinite()) throw NumericalError("least squares: non-finite estimate");
  out.h = SensitivityMatrix{std::move(h)};
  return out;
}

BatchResult batch_estimate(const MeasurementWindow& w, const EstimatorConfig& cfg, Variant variant,
                           const StackedIterate* warm_start) {
  w.check_dimensions();
  cfg.validate();
  if (w.samples() == 0) throw DataError("batch estimate: empty measurement window");
  if (variant != Variant::robust_missing && !w.fully_observed())
    throw DataError(std::string("batch estimate: variant ") + std::string(to_string(variant)) +
                    " needs a fully observed window (use robust-missing)");

  BatchResult out;
  out.step = resolve_step(w, cfg);
  const double alpha = out.step;

  StackedIterate x = StackedIterate::zeros(w.lines(), w.buses(), w.samples());
  if (warm_start) {
    if (warm_start->h.rows() != x.h.rows() || warm_start->h.cols() != x.h.cols() ||
        warm_start->o.rows() != x.o.rows() || warm_start->o.cols() != x.o.cols())
      throw ModelError("batch estimate: warm start has the wrong shape");
    x.h = clip(warm_start->h, cfg.h_min, cfg.h_max);
    if (variant != Variant::nuclear) x.o = clip(warm_start->o, cfg.o_min, cfg.o_max);
  }

  auto prox_step = [&](const StackedIterate& from) {
    const StackedIterate g = grad_s(from, w);
    StackedIterate next;
    next.h = prox_nuclear_box(from.h - alpha * g.h, cfg.lambda * alpha, cfg.h_min, cfg.h_max, cfg.prox_mode);
    next.o = variant == Variant::nuclear
                 ? from.o
                 : soft_threshold_box(from.o - alpha * g.o, cfg.gamma * alpha, cfg.o_min, cfg.o_max);
    return next;
  };
  auto check_finite = [](double f, int k) {
    if (!std::isfinite(f))
      throw NumericalError("batch estimate diverged at iteration " + std::to_string(k) +
                               " (non-finite objective; check the step size)",
                           k);
  };
  auto small_change = [&](double prev, double f) {
    return std::abs(prev - f) <= cfg.rel_tol * std::max(std::abs(prev), std::numeric_limits<double>::min());
  };

  double prev = objective(x, w, cfg, variant);
  out.trace.values.push_back(prev);
  if (!cfg.accelerated) {
    for (int k = 1; k <= cfg.max_iters; ++k) {
      x = prox_step(x);
      const double f = objective(x, w, cfg, variant);
      check_finite(f, k);
      out.trace.values.push_back(f);
      out.iterations = k;
      if (small_change(prev, f)) {
        out.converged = true;
        break;
      }
      prev = f;
    }
  } else {
    // Monotone variant: a momentum step is kept only if it lowers the cost;
    // otherwise the momentum restarts from the current point.
    StackedIterate y = x;
    double t = 1.0;
    for (int k = 1; k <= cfg.max_iters; ++k) {
      StackedIterate z = prox_step(y);
      const double fz = objective(z, w, cfg, variant);
      check_finite(fz, k);
      out.iterations = k;
      if (fz <= prev) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        y.h = z.h + beta * (z.h - x.h);
        y.o = z.o + beta * (z.o - x.o);
        x = std::move(z);
        t = t_next;
        out.trace.values.push_back(fz);
        if (small_change(prev, fz)) {
          out.converged = true;
          break;
        }
        prev = fz;
      } else {
        out.trace.values.push_back(prev);
        // A plain step from x that fails to descend means no further progress.
        if (t == 1.0) {
          out.converged = true;
          break;
        }
        y = x;
        t = 1.0;
      }
    }
  }
  out.h = SensitivityMatrix{std::move(x.h)};
  out.o = OutlierMatrix{std::move(x.o)};
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) throw ModelError("log_grid: need 0 < lo <= hi, count >= 1");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

WeightSweepResult sweep_weights(const MeasurementWindow& w, const EstimatorConfig& base,
                                Variant variant, const Matrix& truth, std::vector<double> lambdas,
                                std::vector<double> gammas) {
  const EstimatorConfig defaults = EstimatorConfig::with_default_weights(w);
  if (lambdas.empty()) lambdas = log_grid(defaults.lambda * 1e-3, defaults.lambda * 10.0, 5);
  if (gammas.empty()) gammas = log_grid(defaults.gamma * 0.1, defaults.gamma * 1e3, 5);
  if (variant == Variant::nuclear) gammas = {0.0};

  WeightSweepResult out;
  bool have_best = false;
  for (double lambda : lambdas) {
    for (double gamma : gammas) {
      EstimatorConfig cfg = base;
      cfg.lambda = lambda;
      cfg.gamma = gamma;
      BatchResult r = batch_estimate(w, cfg, variant);
      const double med = finite_median(relative_errors(r.h.h, truth));
      out.table.push_back({lambda, gamma, med});
      if (!have_best || med < out.best.median_re) {
        out.best = out.table.back();
        out.best_result = std::move(r);
        have_best = true;
      }
    }
  }
  return out;
}

}  // namespace gridsens
