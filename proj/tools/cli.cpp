#include "cli.hpp"

#include "gridsens/dc_ptdf.hpp"
#include "gridsens/errors.hpp"
#include "gridsens/estimators.hpp"
#include "gridsens/io.hpp"
#include "gridsens/online_engine.hpp"
#include "gridsens/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace gridsens::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream create(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json re_json(const Vector& re) {
  json per_bus = json::array();
  for (Index j = 0; j < re.size(); ++j) per_bus.push_back(finite_or_null(re(j)));
  return {{"per_bus", per_bus}, {"median", finite_or_null(finite_median(re))}};
}

// "a:b", 1-based and inclusive, into a half-open 0-based column range.
std::pair<Index, Index> parse_window(const std::string& spec, Index steps) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--window expects a:b, got '" + spec + "'");
  Index a = 0, b = 0;
  try {
    a = std::stoll(spec.substr(0, colon));
    b = std::stoll(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--window expects integers a:b, got '" + spec + "'");
  }
  if (a < 1 || b < a) throw UsageError("--window needs 1 <= a <= b");
  if (b > steps) throw DataError("--window end " + std::to_string(b) + " exceeds the stream length " + std::to_string(steps));
  return {a - 1, b};
}

struct BoxOptions {
  std::optional<double> lambda, gamma;
  double h_min = -1.0, h_max = 1.0, o_min = -10.0, o_max = 10.0;
  int max_iters = 5000;
  double rel_tol = 1e-8;
  int dykstra = 0;

  void add_to(CLI::App* app) {
    app->add_option("--lambda", lambda, "Nuclear-norm weight (default 0.01 ||dF||_F)");
    app->add_option("--gamma", gamma, "l1 weight on O (default 0.1 lambda)");
    app->add_option("--hmin", h_min, "Lower box bound on H")->capture_default_str();
    app->add_option("--hmax", h_max, "Upper box bound on H")->capture_default_str();
    app->add_option("--omin", o_min, "Lower box bound on O")->capture_default_str();
    app->add_option("--omax", o_max, "Upper box bound on O")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Iteration cap")->capture_default_str();
    app->add_option("--rel-tol", rel_tol, "Relative objective change stop")->capture_default_str();
    app->add_option("--dykstra", dykstra, "Exact composite prox with this many inner rounds (0: svt then clip)");
  }

  EstimatorConfig config(const MeasurementWindow& w) const {
    EstimatorConfig cfg = EstimatorConfig::with_default_weights(w);
    if (lambda) cfg.lambda = *lambda;
    if (gamma) cfg.gamma = *gamma;
    else if (lambda) cfg.gamma = 0.1 * *lambda;
    cfg.h_min = h_min;
    cfg.h_max = h_max;
    cfg.o_min = o_min;
    cfg.o_max = o_max;
    cfg.max_iters = max_iters;
    cfg.rel_tol = rel_tol;
    if (dykstra > 0) cfg.prox_mode = Dykstra{dykstra};
    cfg.validate();
    return cfg;
  }
};

void print_warnings(const io::ParsedNetwork& parsed, std::ostream& err) {
  for (const auto& w : parsed.warnings) err << "warning: " << w << '\n';
}

// ---- ptdf ------------------------------------------------------------------

struct PtdfArgs {
  std::string network;
  std::optional<std::string> buses;
  std::optional<std::string> output;
};

int run_ptdf(const PtdfArgs& a, std::ostream& out, std::ostream& err) {
  const auto parsed = io::parse_network(a.network, a.buses ? std::optional<fs::path>(*a.buses) : std::nullopt);
  print_warnings(parsed, err);
  const auto h = compute_dc_ptdf(parsed.network);
  if (a.output) {
    auto f = create(*a.output);
    io::write_matrix_csv(f, h.h);
  } else {
    io::write_matrix_csv(out, h.h);
  }
  return ok;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string network;
  std::string scenario;
  std::string output;
  std::optional<std::string> buses;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const auto parsed = io::parse_network(a.network, a.buses ? std::optional<fs::path>(*a.buses) : std::nullopt);
  print_warnings(parsed, err);
  ScenarioSpec spec = io::parse_scenario(fs::path(a.scenario));
  if (a.seed) spec.seed = *a.seed;
  for (const auto& ev : spec.events)
    if (ev.kind == ScenarioEvent::Kind::scale_reactance && ev.target >= parsed.network.n_branches())
      throw DataError("scenario: event line " + std::to_string(ev.target + 1) + " does not exist");
  const auto synth = generate_stream(parsed.network, spec);

  const fs::path stream_path = a.output;
  const fs::path stem = stream_path.parent_path() / stream_path.stem();
  const fs::path truth_path = stem.string() + "_truth.json";
  const fs::path h_path = stem.string() + "_H.csv";
  {
    auto f = create(stream_path);
    io::write_stream_csv(f, synth.stream);
  }
  {
    auto f = create(truth_path);
    f << io::truth_log_json(synth.truth, synth.stream) << '\n';
  }
  {
    auto f = create(h_path);
    io::write_matrix_csv(f, synth.truth.segments.front().h.h);
  }
  out << "wrote " << stream_path.string() << ", " << truth_path.string() << ", " << h_path.string() << '\n';
  return ok;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string method;
  std::string stream;
  std::optional<std::string> window;
  std::optional<std::string> truth;
  std::optional<Index> lines;
  std::string output = ".";
  bool sweep = false;
  BoxOptions box;
  std::optional<std::uint64_t> seed;
};

int run_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const bool ls = a.method == "ls";
  const auto variant = parse_variant(a.method);
  if (!ls && !variant) throw UsageError("unknown estimator '" + a.method + "' (ls, nuclear, robust, robust-missing)");
  if (a.sweep && !a.truth) throw UsageError("--sweep needs --truth");

  std::optional<GroundTruthLog> truth;
  if (a.truth) truth = io::parse_truth_log(fs::path(*a.truth));
  std::optional<Index> lines = a.lines;
  if (!lines && truth) lines = truth->segments.front().h.lines();
  const auto stream = io::read_stream_csv(fs::path(a.stream), lines);
  auto [begin, end] = a.window ? parse_window(*a.window, stream.steps()) : std::pair<Index, Index>{0, stream.steps()};
  const MeasurementWindow w = stream.window(begin, end);
  EstimatorConfig cfg = a.box.config(w);

  const fs::path dir = a.output;
  fs::create_directories(dir);
  const fs::path diag_path = dir / "diagnostics.json";

  const auto wd = validate_window(w);
  json diag;
  diag["method"] = a.method;
  diag["window"] = {begin + 1, end};
  diag["samples"] = w.samples();
  diag["lines"] = w.lines();
  diag["buses"] = w.buses();
  diag["rank_delta_p"] = wd.rank_delta_p;
  diag["underdetermined"] = wd.underdetermined;
  diag["mask_coverage"] = wd.mask_coverage;
  diag["messages"] = wd.messages;
  diag["lambda"] = cfg.lambda;
  diag["gamma"] = cfg.gamma;
  if (a.seed) diag["seed"] = *a.seed;

  Matrix h, o;
  ObjectiveTrace trace;
  try {
    if (ls) {
      const auto r = least_squares_estimate(w, cfg);
      h = r.h.h;
      o = Matrix::Zero(w.lines(), w.samples());
      diag["underdetermined"] = r.underdetermined;
      diag["iterations"] = r.iterations;
    } else {
      BatchResult r;
      if (a.sweep) {
        auto s = sweep_weights(w, cfg, *variant, truth->h_at(end - 1).h);
        json table = json::array();
        for (const auto& e : s.table)
          table.push_back({{"lambda", e.lambda}, {"gamma", e.gamma}, {"median_re", finite_or_null(e.median_re)}});
        diag["sweep"] = table;
        diag["lambda"] = s.best.lambda;
        diag["gamma"] = s.best.gamma;
        r = std::move(s.best_result);
      } else {
        r = batch_estimate(w, cfg, *variant);
      }
      h = r.h.h;
      o = r.o.o;
      trace = r.trace;
      diag["iterations"] = r.iterations;
      diag["converged"] = r.converged;
      diag["step_size"] = r.step;
      diag["final_objective"] = r.trace.values.back();
    }
  } catch (const NumericalError& e) {
    diag["error"] = e.what();
    if (e.iteration() >= 0) diag["iteration"] = e.iteration();
    auto f = create(diag_path);
    f << diag.dump(2) << '\n';
    err << "numerical failure: " << e.what() << " (diagnostics: " << diag_path.string() << ")\n";
    return numerical_failure;
  }

  if (truth) diag["relative_error"] = re_json(relative_errors(h, truth->h_at(end - 1).h));
  {
    auto f = create(dir / "H.csv");
    io::write_matrix_csv(f, h);
  }
  {
    auto f = create(dir / "O.csv");
    io::write_matrix_csv(f, o);
  }
  {
    auto f = create(dir / "trace.csv");
    io::write_trace_csv(f, trace);
  }
  {
    auto f = create(diag_path);
    f << diag.dump(2) << '\n';
  }
  if (wd.underdetermined) err << "warning: " << wd.messages.back() << '\n';
  out << "wrote " << (dir / "H.csv").string() << ", O.csv, trace.csv, diagnostics.json\n";
  return ok;
}

// ---- online ----------------------------------------------------------------

struct OnlineArgs {
  std::string stream;
  Index m = 18;
  double alpha_mult = 1.0;
  bool regret = false;
  Index every = 1;
  Index tracked_bus = 2;
  std::optional<std::string> truth;
  std::optional<Index> lines;
  std::string output = ".";
  BoxOptions box;
  std::optional<std::uint64_t> seed;
};

int run_online(const OnlineArgs& a, std::ostream& out, std::ostream&) {
  if (a.box.gamma && !a.box.lambda) throw UsageError("--gamma needs --lambda");
  std::optional<GroundTruthLog> truth;
  if (a.truth) truth = io::parse_truth_log(fs::path(*a.truth));
  std::optional<Index> lines = a.lines;
  if (!lines && truth) lines = truth->segments.front().h.lines();
  const auto stream = io::read_stream_csv(fs::path(a.stream), lines);
  if (a.tracked_bus < 1 || a.tracked_bus > stream.buses()) throw UsageError("--bus out of range");

  OnlineConfig cfg;
  cfg.window = a.m;
  cfg.alpha_multiplier = a.alpha_mult;
  cfg.estimator.h_min = a.box.h_min;
  cfg.estimator.h_max = a.box.h_max;
  cfg.estimator.o_min = a.box.o_min;
  cfg.estimator.o_max = a.box.o_max;
  if (a.box.dykstra > 0) cfg.estimator.prox_mode = Dykstra{a.box.dykstra};
  if (a.box.lambda) {
    cfg.estimator.lambda = *a.box.lambda;
    cfg.estimator.gamma = a.box.gamma.value_or(0.1 * *a.box.lambda);
  } else {
    cfg.default_weights = true;
  }
  RunOptions opts;
  opts.track_regret = a.regret;
  opts.comparator_every = a.every;
  opts.tracked_bus = a.tracked_bus - 1;

  const auto report = run_stream(stream, cfg, truth ? &*truth : nullptr, opts);
  const auto metrics = regret_metrics(report);

  const fs::path dir = a.output;
  fs::create_directories(dir);
  {
    auto f = create(dir / "report.json");
    auto j = json::parse(io::run_report_json(report, metrics));
    if (a.seed) j["seed"] = *a.seed;
    f << j.dump(2) << '\n';
  }
  {
    auto f = create(dir / "series.csv");
    io::write_series_csv(f, report, metrics);
  }
  out << "wrote " << (dir / "report.json").string() << ", series.csv (" << report.steps.size()
      << " estimation steps)\n";
  return ok;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string estimate;
  std::string truth;
  std::optional<Index> step;
};

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const Matrix h = io::read_matrix_csv(fs::path(a.estimate));
  Matrix truth;
  if (fs::path(a.truth).extension() == ".json") {
    const auto log = io::parse_truth_log(fs::path(a.truth));
    truth = a.step ? log.h_at(*a.step - 1).h : log.segments.back().h.h;
  } else {
    truth = io::read_matrix_csv(fs::path(a.truth));
  }
  if (h.rows() != truth.rows() || h.cols() != truth.cols())
    throw DataError("estimate is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) + " but truth is " +
                    std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  const Vector re = relative_errors(h, truth);
  out << "bus,re\n";
  double sum = 0.0, worst = 0.0;
  Index count = 0;
  for (Index j = 0; j < re.size(); ++j) {
    out << j + 1 << ',' << (std::isfinite(re(j)) ? io::format_double(re(j)) : "nan") << '\n';
    if (std::isfinite(re(j))) {
      sum += re(j);
      worst = std::max(worst, re(j));
      ++count;
    }
  }
  out << "median_re," << io::format_double(finite_median(re)) << '\n';
  out << "mean_re," << io::format_double(count ? sum / static_cast<double>(count) : std::nan("")) << '\n';
  out << "max_re," << io::format_double(worst) << '\n';
  return ok;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity-matrix estimation from flow and injection measurements"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  PtdfArgs ptdf;
  auto* c_ptdf = app.add_subcommand("ptdf", "Print the DC sensitivity matrix of a network as CSV");
  c_ptdf->add_option("network", ptdf.network, "Branch CSV")->required();
  c_ptdf->add_option("--buses", ptdf.buses, "Bus CSV (default <network>_buses.csv)");
  c_ptdf->add_option("-o,--output", ptdf.output, "Write to a file instead of stdout");
  c_ptdf->add_option("--seed", seed, "Accepted for uniformity; ptdf is deterministic");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a measurement stream and its ground-truth log");
  c_synth->add_option("network", synth.network, "Branch CSV")->required();
  c_synth->add_option("scenario", synth.scenario, "Scenario JSON")->required();
  c_synth->add_option("-o,--output", synth.output, "Stream CSV; <stem>_truth.json and <stem>_H.csv go next to it")
      ->required();
  c_synth->add_option("--buses", synth.buses, "Bus CSV (default <network>_buses.csv)");
  c_synth->add_option("--seed", synth.seed, "Override the scenario seed");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Batch estimate over a window of a stream");
  c_est->add_option("method", est.method, "ls | nuclear | robust | robust-missing")->required();
  c_est->add_option("stream", est.stream, "Stream CSV")->required();
  c_est->add_option("--window", est.window, "Steps a:b, 1-based inclusive (default: whole stream)");
  c_est->add_option("--truth", est.truth, "Truth JSON; adds relative errors to diagnostics");
  c_est->add_option("--lines", est.lines, "Line count when it cannot be inferred from the stream");
  c_est->add_flag("--sweep", est.sweep, "Pick lambda/gamma on a log grid by relative error (needs --truth)");
  c_est->add_option("-o,--output", est.output, "Output directory")->capture_default_str();
  c_est->add_option("--seed", est.seed, "Recorded in diagnostics; solvers are deterministic");
  est.box.add_to(c_est);

  OnlineArgs onl;
  auto* c_onl = app.add_subcommand("online", "Run the online sliding-window estimator over a stream");
  c_onl->add_option("stream", onl.stream, "Stream CSV")->required();
  c_onl->add_option("--m", onl.m, "Window length")->capture_default_str()->check(CLI::PositiveNumber);
  c_onl->add_option("--alpha-mult", onl.alpha_mult, "Step size multiplier on 1/L")->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_onl->add_flag("--regret", onl.regret, "Solve comparators and record dynamic regret");
  c_onl->add_option("--every", onl.every, "Comparator cadence in steps")->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_onl->add_option("--bus", onl.tracked_bus, "Bus whose relative error is tracked (1-based)")->capture_default_str();
  c_onl->add_option("--truth", onl.truth, "Truth JSON; enables relative-error series");
  c_onl->add_option("--lines", onl.lines, "Line count when it cannot be inferred from the stream");
  c_onl->add_option("-o,--output", onl.output, "Output directory")->capture_default_str();
  c_onl->add_option("--seed", onl.seed, "Recorded in the report; the engine is deterministic");
  onl.box.add_to(c_onl);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Relative error of an estimate against the truth");
  c_eval->add_option("estimate", ev.estimate, "Estimated H CSV")->required();
  c_eval->add_option("truth", ev.truth, "True H CSV, or truth JSON")->required();
  c_eval->add_option("--step", ev.step, "Stream step for a truth JSON (default: last segment)");
  c_eval->add_option("--seed", seed, "Accepted for uniformity; eval is deterministic");

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return usage;
  }

  try {
    if (*c_ptdf) return run_ptdf(ptdf, out, err);
    if (*c_synth) return run_synth(synth, out, err);
    if (*c_est) return run_estimate(est, out, err);
    if (*c_onl) return run_online(onl, out, err);
    if (*c_eval) return run_eval(ev, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  }
  return usage;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace gridsens::cli
