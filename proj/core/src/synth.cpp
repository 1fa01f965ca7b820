#include "gridsens/synth.hpp"

#include "gridsens/dc_ptdf.hpp"
#include "gridsens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gridsens {
namespace {

// Independent generator per stochastic component so that toggling one (e.g.
// outliers) leaves the others unchanged.
enum class Substream : std::uint32_t { injections = 1, noise, outliers, mask };

Rng make_rng(std::uint64_t seed, Substream which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return Rng(seq);
}

SyntheticStream generate(const std::optional<Network>& net, const SensitivityMatrix* fixed_h,
                         const Vector& nominal, const ScenarioSpec& spec) {
  spec.validate();
  const Matrix p = simulate_injections(nominal, spec);
  const Index n = p.rows();
  const Index k_total = spec.steps;

  SyntheticStream out;
  auto& stream = out.stream;
  auto& truth = out.truth;
  truth.seed = spec.seed;

  stream.delta_p = p.rightCols(k_total) - p.leftCols(k_total);

  // Sensitivity segments.
  if (net) {
    Network current = *net;
    truth.segments.push_back({0, compute_dc_ptdf(current)});
    for (const auto& ev : spec.events) {
      if (ev.kind != ScenarioEvent::Kind::scale_reactance) continue;
      current = current.with_scaled_reactance(ev.target, ev.factor);
      const Index col = ev.step - 1;
      if (truth.segments.back().first_column == col)
        truth.segments.back().h = compute_dc_ptdf(current);
      else
        truth.segments.push_back({col, compute_dc_ptdf(current)});
    }
  } else {
    truth.segments.push_back({0, *fixed_h});
  }
  const Index l = truth.segments.front().h.lines();
  if (truth.segments.front().h.buses() != n)
    throw ModelError("sensitivity matrix has " + std::to_string(truth.segments.front().h.buses()) +
                     " columns but there are " + std::to_string(n) + " buses");

  stream.delta_f.resize(l, k_total);
  for (std::size_t s = 0; s < truth.segments.size(); ++s) {
    const Index begin = truth.segments[s].first_column;
    const Index end = s + 1 < truth.segments.size() ? truth.segments[s + 1].first_column : k_total;
    if (end > begin)
      stream.delta_f.middleCols(begin, end - begin) =
          truth.segments[s].h.h * stream.delta_p.middleCols(begin, end - begin);
  }

  if (spec.flow_noise_sd > 0.0) {
    Rng rng = make_rng(spec.seed, Substream::noise);
    std::normal_distribution<double> noise(0.0, spec.flow_noise_sd);
    for (Index j = 0; j < k_total; ++j)
      for (Index i = 0; i < l; ++i) stream.delta_f(i, j) += noise(rng);
  }

  truth.outliers = Matrix::Zero(l, k_total);
  if (spec.outlier_rate > 0.0) {
    Rng rng = make_rng(spec.seed, Substream::outliers);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> magnitude(spec.outlier_min, spec.outlier_max);
    for (Index j = 0; j < k_total; ++j)
      for (Index i = 0; i < l; ++i) {
        if (unit(rng) >= spec.outlier_rate) continue;
        const double amp = magnitude(rng) * (unit(rng) < 0.5 ? -1.0 : 1.0);
        truth.outliers(i, j) = amp;
        truth.outlier_records.push_back({i, j, amp});
      }
    stream.delta_f += truth.outliers;
  }

  stream.mask = Mask::Constant(l, k_total, true);
  if (spec.missing_rate > 0.0) {
    Rng rng = make_rng(spec.seed, Substream::mask);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Index j = 0; j < k_total; ++j)
      for (Index i = 0; i < l; ++i)
        if (unit(rng) < spec.missing_rate) stream.mask(i, j) = false;
  }
  if (spec.periodic_mask) {
    for (Index line : spec.periodic_mask->lines) {
      if (line < 0 || line >= l) throw ModelError("periodic mask line out of range");
      for (Index j = 0; j < k_total; ++j)
        if ((j + 1) % spec.periodic_mask->period != 0) stream.mask(line, j) = false;
    }
  }
  stream.delta_f = stream.mask.select(stream.delta_f.array(), std::numeric_limits<double>::quiet_NaN()).matrix();
  return out;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (steps < 1) throw ModelError("scenario: steps must be positive");
  if (!(sigma_n1 >= 0.0) || !(sigma_n2 >= 0.0)) throw ModelError("scenario: sigma values must be >= 0");
  if (!(flow_noise_sd >= 0.0)) throw ModelError("scenario: flow_noise_sd must be >= 0");
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0) || !(missing_rate >= 0.0 && missing_rate <= 1.0))
    throw ModelError("scenario: rates must lie in [0, 1]");
  if (!(outlier_min >= 0.0 && outlier_min <= outlier_max))
    throw ModelError("scenario: outlier amplitude range must satisfy 0 <= lo <= hi");
  if (!(drift_period > 0.0)) throw ModelError("scenario: drift_period must be positive");
  if (periodic_mask && periodic_mask->period < 1) throw ModelError("scenario: mask period must be >= 1");
  Index last = 0;
  for (const auto& ev : events) {
    if (ev.step < 1 || ev.step > steps) throw ModelError("scenario: event step out of range");
    if (ev.step < last) throw ModelError("scenario: events must be sorted by step");
    if (!std::isfinite(ev.factor) || ev.factor == 0.0) throw ModelError("scenario: event factor must be finite and nonzero");
    last = ev.step;
  }
}

Matrix simulate_injections(const Vector& nominal, const ScenarioSpec& spec) {
  spec.validate();
  const Index n = nominal.size();
  Rng rng = make_rng(spec.seed, Substream::injections);
  const double sd1 = spec.literal_eta_scaling ? spec.sigma_n1 : 1.0;
  const double sd2 = spec.literal_eta_scaling ? spec.sigma_n2 : 1.0;
  std::normal_distribution<double> eta1(0.0, sd1);
  std::normal_distribution<double> eta2(0.0, sd2);

  Vector scale = Vector::Ones(n);
  auto next_event = spec.events.begin();
  Matrix p(n, spec.steps + 1);
  for (Index k = 0; k <= spec.steps; ++k) {
    for (; next_event != spec.events.end() && next_event->step <= k; ++next_event) {
      if (next_event->kind != ScenarioEvent::Kind::rescale_nominal_injection) continue;
      if (next_event->target < 0 || next_event->target >= n)
        throw ModelError("scenario: rescale event bus out of range");
      scale(next_event->target) *= next_event->factor;
    }
    const double drift =
        1.0 + spec.drift_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / spec.drift_period);
    for (Index j = 0; j < n; ++j) {
      const double p0 = nominal(j) * scale(j) * drift;
      const double e1 = spec.sigma_n1 > 0.0 ? eta1(rng) : 0.0;
      const double e2 = spec.sigma_n2 > 0.0 ? eta2(rng) : 0.0;
      p(j, k) = p0 + spec.sigma_n1 * p0 * e1 + spec.sigma_n2 * e2;
    }
  }
  return p;
}

Matrix simulate_injections(const Network& net, const ScenarioSpec& spec) {
  return simulate_injections(net.nominal_injections(), spec);
}

MeasurementWindow MeasurementStream::window(Index begin, Index end) const {
  if (begin < 0 || end > steps() || begin > end) throw ModelError("window range out of bounds");
  return MeasurementWindow(delta_f.middleCols(begin, end - begin), delta_p.middleCols(begin, end - begin),
                           mask.middleCols(begin, end - begin));
}

const SensitivityMatrix& GroundTruthLog::h_at(Index column) const {
  if (segments.empty()) throw ModelError("ground-truth log has no segments");
  auto it = std::upper_bound(segments.begin(), segments.end(), column,
                             [](Index c, const Segment& s) { return c < s.first_column; });
  return it == segments.begin() ? segments.front().h : std::prev(it)->h;
}

SyntheticStream generate_stream(const Network& net, const ScenarioSpec& spec) {
  return generate(net, nullptr, net.nominal_injections(), spec);
}

SyntheticStream generate_stream(const SensitivityMatrix& h, const Vector& nominal, const ScenarioSpec& spec) {
  for (const auto& ev : spec.events)
    if (ev.kind == ScenarioEvent::Kind::scale_reactance)
      throw ModelError("scenario: reactance events need a network source");
  return generate(std::nullopt, &h, nominal, spec);
}

}  // namespace gridsens
