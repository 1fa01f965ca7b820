#include "gridsens/io.hpp"

#include "gridsens/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace gridsens::io {
namespace {

using nlohmann::json;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& s, const std::string& source, std::size_t line) {
  // strtod handles nan/inf spellings that from_chars rejects on some libstdc++ builds.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(source, line, "not a number: '" + s + "'");
  return v;
}

long long to_int(const std::string& s, const std::string& source, std::size_t line) {
  long long v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last) fail(source, line, "not an integer: '" + s + "'");
  return v;
}

bool is_header(const std::vector<std::string>& fields, const char* first_name) {
  return !fields.empty() && fields[0] == first_name;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw DataError("matrix must be a non-empty array of rows");
  const auto r = static_cast<Index>(rows.size());
  const auto c = static_cast<Index>(rows[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c) throw DataError("ragged matrix rows");
    for (Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ParsedNetwork parse_network(std::istream& branches, std::istream* buses) {
  const std::string bsrc = "network";
  std::vector<Branch> list;
  std::set<int> ids;
  Index max_bus = 0;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(branches, raw)) {
    ++lineno;
    const auto text = trim(raw);
    if (text.empty() || text[0] == '#') continue;
    const auto f = split(text);
    if (is_header(f, "branch_id")) continue;
    if (f.size() != 4) fail(bsrc, lineno, "expected 4 fields (branch_id,from_bus,to_bus,reactance_pu)");
    Branch b;
    b.id = static_cast<int>(to_int(f[0], bsrc, lineno));
    const auto from = to_int(f[1], bsrc, lineno);
    const auto to = to_int(f[2], bsrc, lineno);
    if (from < 1 || to < 1) fail(bsrc, lineno, "bus indices are 1-based");
    b.from = static_cast<Index>(from - 1);
    b.to = static_cast<Index>(to - 1);
    b.reactance = to_double(f[3], bsrc, lineno);
    if (!ids.insert(b.id).second) fail(bsrc, lineno, "duplicate branch id " + std::to_string(b.id));
    if (b.from == b.to) fail(bsrc, lineno, "branch " + std::to_string(b.id) + " connects bus " + f[1] + " to itself");
    if (!std::isfinite(b.reactance) || b.reactance == 0.0)
      fail(bsrc, lineno, "branch " + std::to_string(b.id) + " has invalid reactance " + f[3]);
    max_bus = std::max({max_bus, b.from + 1, b.to + 1});
    list.push_back(b);
  }
  if (list.empty()) throw DataError("network: no branches");

  std::vector<std::string> warnings;
  std::map<Index, double> nominal;
  std::optional<Index> slack;
  if (buses) {
    const std::string src = "buses";
    lineno = 0;
    while (std::getline(*buses, raw)) {
      ++lineno;
      const auto text = trim(raw);
      if (text.empty() || text[0] == '#') continue;
      const auto f = split(text);
      if (is_header(f, "bus_id")) continue;
      if (f.size() != 3) fail(src, lineno, "expected 3 fields (bus_id,nominal_injection_pu,is_slack)");
      const auto id = to_int(f[0], src, lineno);
      if (id < 1) fail(src, lineno, "bus indices are 1-based");
      const auto bus = static_cast<Index>(id - 1);
      if (nominal.count(bus)) fail(src, lineno, "duplicate bus id " + f[0]);
      nominal[bus] = to_double(f[1], src, lineno);
      const auto flag = to_int(f[2], src, lineno);
      if (flag != 0 && flag != 1) fail(src, lineno, "is_slack must be 0 or 1");
      if (flag == 1) {
        if (slack) fail(src, lineno, "more than one slack bus");
        slack = bus;
      }
      max_bus = std::max(max_bus, bus + 1);
    }
  }
  if (!slack) {
    slack = 0;
    warnings.push_back("no slack bus given; using bus 1");
  }
  std::vector<double> p0;
  if (!nominal.empty()) {
    p0.assign(static_cast<std::size_t>(max_bus), 0.0);
    for (const auto& [bus, v] : nominal) p0[static_cast<std::size_t>(bus)] = v;
  }
  try {
    return ParsedNetwork{Network(max_bus, std::move(list), *slack, std::move(p0)), std::move(warnings)};
  } catch (const ModelError& e) {
    throw DataError(std::string("network: ") + e.what());
  }
}

ParsedNetwork parse_network(const std::filesystem::path& path, std::optional<std::filesystem::path> bus_path) {
  auto in = open(path);
  if (!bus_path) {
    auto sibling = path.parent_path() / (path.stem().string() + "_buses.csv");
    if (std::filesystem::exists(sibling)) bus_path = sibling;
  }
  try {
    if (bus_path) {
      auto bin = open(*bus_path);
      return parse_network(in, &bin);
    }
    return parse_network(in);
  } catch (const DataError& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto text = trim(raw);
    if (text.empty() || text[0] == '#') continue;
    std::vector<double> row;
    for (const auto& f : split(text)) row.push_back(to_double(f, "matrix", lineno));
    if (!rows.empty() && row.size() != rows.front().size()) fail("matrix", lineno, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("matrix: empty file");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open(path);
  return read_matrix_csv(in);
}

void write_stream_csv(std::ostream& out, const MeasurementStream& stream) {
  out << "k,kind,index,value\n";
  for (Index c = 0; c < stream.steps(); ++c) {
    for (Index j = 0; j < stream.buses(); ++j)
      out << c + 1 << ",p," << j + 1 << ',' << format_double(stream.delta_p(j, c)) << '\n';
    for (Index i = 0; i < stream.lines(); ++i)
      if (stream.mask(i, c)) out << c + 1 << ",f," << i + 1 << ',' << format_double(stream.delta_f(i, c)) << '\n';
  }
}

MeasurementStream read_stream_csv(std::istream& in, std::optional<Index> lines) {
  struct Entry {
    Index k, index;
    double value;
  };
  std::vector<Entry> p_rows, f_rows;
  Index max_k = 0, max_bus = 0, max_line = 0;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto text = trim(raw);
    if (text.empty() || text[0] == '#') continue;
    const auto f = split(text);
    if (is_header(f, "k")) continue;
    if (f.size() != 4) fail("stream", lineno, "expected 4 fields (k,kind,index,value)");
    const auto k = to_int(f[0], "stream", lineno);
    const auto idx = to_int(f[2], "stream", lineno);
    if (k < 1 || idx < 1) fail("stream", lineno, "k and index are 1-based");
    const double v = to_double(f[3], "stream", lineno);
    if (f[1] == "p") {
      p_rows.push_back({static_cast<Index>(k), static_cast<Index>(idx), v});
      max_bus = std::max(max_bus, static_cast<Index>(idx));
    } else if (f[1] == "f") {
      f_rows.push_back({static_cast<Index>(k), static_cast<Index>(idx), v});
      max_line = std::max(max_line, static_cast<Index>(idx));
    } else {
      fail("stream", lineno, "kind must be 'p' or 'f', got '" + f[1] + "'");
    }
    max_k = std::max(max_k, static_cast<Index>(k));
  }
  if (max_k == 0) throw DataError("stream: no samples");
  if (lines) {
    if (*lines < max_line) throw DataError("stream: flow index exceeds the given line count");
    max_line = *lines;
  }
  MeasurementStream s;
  s.delta_p = Matrix::Constant(max_bus, max_k, std::numeric_limits<double>::quiet_NaN());
  s.delta_f = Matrix::Constant(max_line, max_k, std::numeric_limits<double>::quiet_NaN());
  s.mask = Mask::Constant(max_line, max_k, false);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen_p = Mask::Constant(max_bus, max_k, false);
  for (const auto& e : p_rows) {
    if (seen_p(e.index - 1, e.k - 1)) throw DataError("stream: duplicate p row for k=" + std::to_string(e.k));
    seen_p(e.index - 1, e.k - 1) = true;
    s.delta_p(e.index - 1, e.k - 1) = e.value;
  }
  for (const auto& e : f_rows) {
    if (s.mask(e.index - 1, e.k - 1)) throw DataError("stream: duplicate f row for k=" + std::to_string(e.k));
    s.mask(e.index - 1, e.k - 1) = true;
    s.delta_f(e.index - 1, e.k - 1) = e.value;
  }
  if (!seen_p.all()) throw DataError("stream: every step needs an injection value for every bus");
  return s;
}

MeasurementStream read_stream_csv(const std::filesystem::path& path, std::optional<Index> lines) {
  auto in = open(path);
  return read_stream_csv(in, lines);
}

ScenarioSpec parse_scenario(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("scenario: ") + e.what());
  }
  ScenarioSpec s;
  try {
    s.steps = j.value("steps", s.steps);
    s.sigma_n1 = j.value("sigma_n1", s.sigma_n1);
    s.sigma_n2 = j.value("sigma_n2", s.sigma_n2);
    s.literal_eta_scaling = j.value("literal_eta_scaling", s.literal_eta_scaling);
    s.flow_noise_sd = j.value("flow_noise_sd", s.flow_noise_sd);
    s.outlier_rate = j.value("outlier_rate", s.outlier_rate);
    if (j.contains("outlier_amplitude_range")) {
      const auto& r = j.at("outlier_amplitude_range");
      s.outlier_min = r.at(0).get<double>();
      s.outlier_max = r.at(1).get<double>();
    }
    s.missing_rate = j.value("missing_rate", s.missing_rate);
    if (j.contains("periodic_mask")) {
      PeriodicMask pm;
      for (const auto& line : j.at("periodic_mask").at("lines")) pm.lines.push_back(line.get<Index>() - 1);
      pm.period = j.at("periodic_mask").at("period").get<Index>();
      s.periodic_mask = pm;
    }
    if (j.contains("drift")) {
      s.drift_amplitude = j.at("drift").value("amplitude", 0.0);
      s.drift_period = j.at("drift").value("period", s.drift_period);
    }
    for (const auto& e : j.value("events", json::array())) {
      ScenarioEvent ev;
      ev.step = e.at("step").get<Index>();
      const auto type = e.at("type").get<std::string>();
      if (type == "scale_reactance") {
        ev.kind = ScenarioEvent::Kind::scale_reactance;
        ev.target = e.at("line").get<Index>() - 1;
      } else if (type == "rescale_nominal_injections") {
        ev.kind = ScenarioEvent::Kind::rescale_nominal_injection;
        ev.target = e.at("bus").get<Index>() - 1;
      } else {
        throw DataError("scenario: unknown event type '" + type + "'");
      }
      ev.factor = e.at("factor").get<double>();
      s.events.push_back(ev);
    }
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("scenario: ") + e.what());
  }
  try {
    s.validate();
  } catch (const ModelError& e) {
    throw DataError(e.what());
  }
  return s;
}

ScenarioSpec parse_scenario(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_scenario(in);
}

std::string scenario_json(const ScenarioSpec& s) {
  json j;
  j["steps"] = s.steps;
  j["sigma_n1"] = s.sigma_n1;
  j["sigma_n2"] = s.sigma_n2;
  j["literal_eta_scaling"] = s.literal_eta_scaling;
  j["flow_noise_sd"] = s.flow_noise_sd;
  j["outlier_rate"] = s.outlier_rate;
  j["outlier_amplitude_range"] = {s.outlier_min, s.outlier_max};
  j["missing_rate"] = s.missing_rate;
  if (s.periodic_mask) {
    json lines = json::array();
    for (auto l : s.periodic_mask->lines) lines.push_back(l + 1);
    j["periodic_mask"] = {{"lines", lines}, {"period", s.periodic_mask->period}};
  }
  j["drift"] = {{"amplitude", s.drift_amplitude}, {"period", s.drift_period}};
  j["events"] = json::array();
  for (const auto& e : s.events) {
    json ev{{"step", e.step}, {"factor", e.factor}};
    if (e.kind == ScenarioEvent::Kind::scale_reactance) {
      ev["type"] = "scale_reactance";
      ev["line"] = e.target + 1;
    } else {
      ev["type"] = "rescale_nominal_injections";
      ev["bus"] = e.target + 1;
    }
    j["events"].push_back(ev);
  }
  j["seed"] = s.seed;
  return j.dump(2);
}

std::string truth_log_json(const GroundTruthLog& log, const MeasurementStream& stream) {
  json j;
  j["seed"] = log.seed;
  j["lines"] = stream.lines();
  j["buses"] = stream.buses();
  j["steps"] = stream.steps();
  j["segments"] = json::array();
  for (const auto& s : log.segments) j["segments"].push_back({{"from_step", s.first_column + 1}, {"h", matrix_json(s.h.h)}});
  j["outliers"] = json::array();
  for (const auto& o : log.outlier_records)
    j["outliers"].push_back({{"line", o.line + 1}, {"step", o.column + 1}, {"amplitude", o.amplitude}});
  j["missing"] = (stream.mask == false).count();
  return j.dump(2);
}

GroundTruthLog parse_truth_log(std::istream& in) {
  GroundTruthLog log;
  try {
    json j;
    in >> j;
    log.seed = j.value("seed", std::uint64_t{0});
    const auto lines = j.at("lines").get<Index>();
    const auto steps = j.at("steps").get<Index>();
    for (const auto& s : j.at("segments"))
      log.segments.push_back({s.at("from_step").get<Index>() - 1, SensitivityMatrix{matrix_from_json(s.at("h"))}});
    log.outliers = Matrix::Zero(lines, steps);
    for (const auto& o : j.value("outliers", json::array())) {
      OutlierRecord r{o.at("line").get<Index>() - 1, o.at("step").get<Index>() - 1, o.at("amplitude").get<double>()};
      if (r.line < 0 || r.line >= lines || r.column < 0 || r.column >= steps)
        throw DataError("truth log: outlier position out of range");
      log.outliers(r.line, r.column) = r.amplitude;
      log.outlier_records.push_back(r);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("truth log: ") + e.what());
  }
  if (log.segments.empty()) throw DataError("truth log: no segments");
  return log;
}

GroundTruthLog parse_truth_log(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_truth_log(in);
}

void write_trace_csv(std::ostream& out, const ObjectiveTrace& trace) {
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < trace.values.size(); ++i) out << i << ',' << format_double(trace.values[i]) << '\n';
}

std::string run_report_json(const RunReport& r, const RegretMetrics& m) {
  json j;
  j["window"] = r.window;
  j["step_size"] = r.step;
  j["lambda"] = r.lambda;
  j["gamma"] = r.gamma;
  j["tracked_bus"] = r.tracked_bus + 1;
  j["estimation_steps"] = r.steps.size();
  j["gradient_evaluations"] = r.gradient_evaluations;
  j["prox_evaluations"] = r.prox_evaluations;
  j["final_h"] = matrix_json(r.final_h);
  if (!r.re_tracked.empty()) {
    const auto avg = cumulative_average(r.re_tracked);
    j["final_re_tracked"] = finite_or_null(r.re_tracked.back());
    j["final_re_tracked_avg"] = finite_or_null(avg.back());
  }
  j["regret_available"] = m.available;
  if (m.available) {
    j["final_regret"] = m.regret.back();
    j["final_regret_avg"] = m.regret_avg.back();
    j["path_length"] = m.path_length.back();
    j["path_length_sq"] = m.path_length_sq.back();
    j["bound_constant"] = m.bound_constant;
    j["comparator_interpolated"] = r.any_interpolated;
  }
  return j.dump(2);
}

void write_series_csv(std::ostream& out, const RunReport& r, const RegretMetrics& m) {
  out << "step,series,value\n";
  const auto re_avg = cumulative_average(r.re_tracked);
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto k = r.steps[i];
    auto emit = [&](const char* name, double v) { out << k << ',' << name << ',' << format_double(v) << '\n'; };
    emit("cost", r.cost[i]);
    if (!r.re_tracked.empty()) {
      emit("re", r.re_tracked[i]);
      emit("re_avg", re_avg[i]);
      emit("re_mean", r.re_mean[i]);
    }
    if (m.available) {
      emit("comparator_cost", r.comparator_cost[i]);
      emit("gap", r.gap[i]);
      emit("regret", m.regret[i]);
      emit("regret_avg", m.regret_avg[i]);
      emit("omega", r.omega[i]);
      emit("path_length", m.path_length[i]);
      emit("path_length_sq", m.path_length_sq[i]);
    }
  }
}

}  // namespace gridsens::io
