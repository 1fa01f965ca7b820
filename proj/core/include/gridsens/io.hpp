#pragma once

// File formats. Bus and line indices are 1-based in every file and message;
// this is the only place they are converted.
//
//   network CSV   branch_id,from_bus,to_bus,reactance_pu
//   bus CSV       bus_id,nominal_injection_pu,is_slack
//   stream CSV    k,kind,index,value   (kind p|f; absent f rows are missing)
//   matrix CSV    plain rows of numbers, 17 significant digits
//   scenario, truth log, run report: JSON

#include "gridsens/core_model.hpp"
#include "gridsens/estimators.hpp"
#include "gridsens/online_engine.hpp"
#include "gridsens/synth.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridsens::io {

struct ParsedNetwork {
  Network network;
  std::vector<std::string> warnings;
};

/// Parses branch rows and optional bus rows. Errors carry the 1-based file line.
ParsedNetwork parse_network(std::istream& branches, std::istream* buses = nullptr);

/// Reads `path`; the bus file defaults to `<stem>_buses.csv` next to it when present.
ParsedNetwork parse_network(const std::filesystem::path& path,
                            std::optional<std::filesystem::path> bus_path = std::nullopt);

/// "%.17g": round-trips every finite double.
std::string format_double(double v);

void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_csv(const std::filesystem::path& path);

void write_stream_csv(std::ostream& out, const MeasurementStream& stream);
/// `lines` overrides the line count inferred from the largest f index.
MeasurementStream read_stream_csv(std::istream& in, std::optional<Index> lines = std::nullopt);
MeasurementStream read_stream_csv(const std::filesystem::path& path, std::optional<Index> lines = std::nullopt);

ScenarioSpec parse_scenario(std::istream& in);
ScenarioSpec parse_scenario(const std::filesystem::path& path);
std::string scenario_json(const ScenarioSpec& spec);

std::string truth_log_json(const GroundTruthLog& log, const MeasurementStream& stream);
GroundTruthLog parse_truth_log(std::istream& in);
GroundTruthLog parse_truth_log(const std::filesystem::path& path);

void write_trace_csv(std::ostream& out, const ObjectiveTrace& trace);

std::string run_report_json(const RunReport& report, const RegretMetrics& metrics);
/// Long format: step,series,value.
void write_series_csv(std::ostream& out, const RunReport& report, const RegretMetrics& metrics);

}  // namespace gridsens::io
