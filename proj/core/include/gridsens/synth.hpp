#pragma once

// Measurement-stream synthesizer.
//
// Injections follow p_j[k] = p0_j[k] + s1 p0_j[k] eta1 + s2 eta2 with fresh
// draws per bus and step. By default eta1, eta2 are standard normal, so the
// fluctuation terms have standard deviations s1 |p0_j| and s2; with
// `literal_eta_scaling` they are drawn as N(0, s1) and N(0, s2) instead.
//
// Stream step k = 1..steps lives in column k-1:
//   dp_k = p[k] - p[k-1],  df_k = H_k dp_k + noise + outliers.

#include "gridsens/core_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gridsens {

struct ScenarioEvent {
  enum class Kind { scale_reactance, rescale_nominal_injection };
  Index step = 0;   // 1-based stream step at which the event takes effect
  Kind kind = Kind::scale_reactance;
  Index target = 0; // 0-based branch position or bus index
  double factor = 1.0;
};

/// Lines observed only every `period`-th step (rate-mismatch scenario).
struct PeriodicMask {
  std::vector<Index> lines;  // 0-based
  Index period = 1;
};

struct ScenarioSpec {
  Index steps = 100;
  double sigma_n1 = 0.1;
  double sigma_n2 = 0.1;
  bool literal_eta_scaling = false;
  double flow_noise_sd = 0.0;
  double outlier_rate = 0.0;
  double outlier_min = 0.3;  // amplitude magnitude range; sign is random
  double outlier_max = 0.6;
  double missing_rate = 0.0;
  std::optional<PeriodicMask> periodic_mask;
  /// Nominal trajectory p0_j[k] = p0_j (1 + drift_amplitude sin(2 pi k / drift_period)).
  double drift_amplitude = 0.0;
  double drift_period = 200.0;
  std::vector<ScenarioEvent> events;  // sorted by step
  std::uint64_t seed = 0;

  void validate() const;
};

/// n x (steps + 1) matrix of injections p[0..steps].
Matrix simulate_injections(const Vector& nominal, const ScenarioSpec& spec);
Matrix simulate_injections(const Network& net, const ScenarioSpec& spec);

struct MeasurementStream {
  Matrix delta_p;  // n x K
  Matrix delta_f;  // l x K, NaN where missing
  Mask mask;       // l x K

  Index steps() const { return delta_p.cols(); }
  Index lines() const { return delta_f.rows(); }
  Index buses() const { return delta_p.rows(); }

  /// Columns [begin, end) as a measurement window.
  MeasurementWindow window(Index begin, Index end) const;
};

struct OutlierRecord {
  Index line = 0;    // 0-based
  Index column = 0;  // 0-based (stream step k = column + 1)
  double amplitude = 0.0;
};

struct GroundTruthLog {
  struct Segment {
    Index first_column = 0;
    SensitivityMatrix h;
  };
  std::vector<Segment> segments;  // H is constant between consecutive segments
  Matrix outliers;                // l x K
  std::vector<OutlierRecord> outlier_records;
  std::uint64_t seed = 0;

  const SensitivityMatrix& h_at(Index column) const;
};

struct SyntheticStream {
  MeasurementStream stream;
  GroundTruthLog truth;
};

/// Stream driven by a DC network; H is recomputed at each reactance event.
SyntheticStream generate_stream(const Network& net, const ScenarioSpec& spec);

/// Stream driven by a fixed sensitivity matrix (no reactance events allowed).
SyntheticStream generate_stream(const SensitivityMatrix& h, const Vector& nominal,
                                const ScenarioSpec& spec);

}  // namespace gridsens
