// dpdd command-line tool: simulate | fit | forecast | housing | version

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "dpdd/csv.hpp"
#include "dpdd/housing.hpp"
#include "dpdd/io.hpp"
#include "dpdd/pipeline.hpp"
#include "dpdd/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace dpdd;
using namespace dpdd::cli;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

/// Usage or input validation problem (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string output_dir = ".";
  unsigned threads = 1;
  bool threads_set = false;
  std::string scale;
};

std::string timestamp() {
  std::time_t t;
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(e, &end, 10);
    if (end == e || *end != '\0') throw UsageError("SOURCE_DATE_EPOCH is not an integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  try {
    return read_json_file(path);
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

fs::path prepare_output(const Common& c) {
  fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path.string(), j.dump(2) + "\n"); }

void write_manifest(const fs::path& dir, const std::string& command, const Common& c, ordered_json extra) {
  ordered_json m;
  m["command"] = command;
  m["config_path"] = c.config_path.empty() ? ordered_json(nullptr) : ordered_json(c.config_path);
  m["seed"] = c.seed;
  m["output_dir"] = c.output_dir;
  m["tool_version"] = DPDD_VERSION;
  m["timestamp"] = timestamp();
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json(dir / "manifest.json", m);
}

void add_common(CLI::App* app, Common& c, bool with_threads, bool with_scale) {
  app->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t v) { c.seed = v, c.seed_set = true; }, "Base random seed");
  app->add_option("--output-dir", c.output_dir, "Directory for all outputs")->capture_default_str();
  if (with_threads)
    app->add_option_function<unsigned>(
        "--threads", [&c](unsigned v) { c.threads = v, c.threads_set = true; }, "Worker threads (0 = auto)");
  if (with_scale)
    app->add_option("--scale", c.scale, "Repetition count preset")->check(CLI::IsMember({"desk", "full"}));
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(Common& c) {
  const nlohmann::json cfg = load_config(c.config_path);
  SimulateSettings s = read_simulate_config(cfg);
  if (!c.seed_set && s.seed) c.seed = *s.seed;
  if (!c.threads_set && s.threads) c.threads = *s.threads;
  const std::string scale = !c.scale.empty() ? c.scale : s.scale.value_or("desk");
  s.bench.n_exp = s.n_exp ? *s.n_exp : (scale == "full" ? 500 : 50);
  s.bench.seed = c.seed;
  s.bench.threads = c.threads;

  const fs::path dir = prepare_output(c);
  const ResultTable table = run_benchmark(s.bench, s.scenarios);
  write_text_file((dir / "results.csv").string(), table.to_csv());
  ordered_json summary;
  summary["n_exp"] = s.bench.n_exp;
  summary["seed"] = c.seed;
  summary["summary"] = table.summary_json();
  write_json(dir / "summary.json", summary);
  ordered_json extra;
  extra["scale"] = scale;
  extra["outputs"] = {"results.csv", "summary.json"};
  write_manifest(dir, "simulate", c, extra);

  Index failures = 0;
  for (const auto& r : table.rows) failures += r.ok() ? 0 : 1;
  for (const auto& m : table.summary())
    std::cout << m.scenario << ' ' << to_string(m.method) << " mean=" << m.mean << " median=" << m.median
              << " failures=" << m.failures << '\n';
  if (failures) std::cerr << failures << " method runs failed (see results.csv)\n";
  return 0;
}

// --------------------------------------------------------------------- fit

int cmd_fit(Common& c, const std::string& input, std::optional<double> dt, std::optional<int> degree,
            std::optional<std::string> basis) {
  FitSettings s = read_fit_config(load_config(c.config_path));
  if (dt) {
    if (!(*dt > 0.0)) throw UsageError("--dt must be positive");
    s.dpdd.dt = *dt;
  }
  if (degree) s.dpdd.degree = *degree;
  if (basis) s.dpdd.basis = basis_kind_from_string(*basis);

  Points traj;
  try {
    traj = read_points_csv(input);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const TransitionPairs pairs = pairs_from_trajectory(traj);
  const DpddFit fit = fit_dpdd(pairs, traj, s.dpdd);

  const fs::path dir = prepare_output(c);
  write_json(dir / "model.json", model_to_json(fit.model));
  ordered_json extra;
  extra["input"] = input;
  extra["outputs"] = {"model.json"};
  write_manifest(dir, "fit", c, extra);
  std::cout << "modes " << fit.model.mode_count() << '\n';
  for (const auto& m : fit.model.modes) std::cout << "rate " << m.rate.real() << ' ' << m.rate.imag() << '\n';
  return 0;
}

// ---------------------------------------------------------------- forecast

int cmd_forecast(Common& c, const std::string& model_path, const std::string& samples_path, double h,
                 Index points) {
  if (!(h >= 0.0)) throw UsageError("--horizon must be >= 0");
  std::optional<KoopmanModel> loaded;
  Points samples;
  try {
    loaded = model_from_json(read_json_file(model_path));
    samples = read_points_csv(samples_path);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const KoopmanModel& model = *loaded;
  if (!model.density) throw UsageError("model file has no stationary density");
  if (samples.cols() != model.dim())
    throw UsageError("samples have dimension " + std::to_string(samples.cols()) + ", model expects " +
                     std::to_string(model.dim()));
  const Lattice grid = default_lattice(*model.density, points);
  const ForecastDensity f = dpdd_forecast(model, samples, h, grid);

  const fs::path dir = prepare_output(c);
  write_text_file((dir / "forecast.csv").string(), forecast_to_csv(f));
  ordered_json meta;
  meta["horizon"] = h;
  meta["modes"] = f.mode_count;
  meta["clipped_mass"] = f.clipped_mass;
  meta["total_mass"] = f.total_mass();
  meta["lattice"] = {{"lower", std::vector<double>(grid.lower.data(), grid.lower.data() + grid.lower.size())},
                     {"upper", std::vector<double>(grid.upper.data(), grid.upper.data() + grid.upper.size())},
                     {"counts", grid.counts}};
  write_json(dir / "forecast_meta.json", meta);
  ordered_json extra;
  extra["model"] = model_path;
  extra["samples"] = samples_path;
  extra["horizon"] = h;
  extra["outputs"] = {"forecast.csv", "forecast_meta.json"};
  write_manifest(dir, "forecast", c, extra);
  return 0;
}

// ----------------------------------------------------------------- housing

int cmd_housing(Common& c, const std::string& input, bool synthetic, std::string split) {
  HousingSettings s = read_housing_config(load_config(c.config_path));
  if (!c.seed_set && s.seed) c.seed = *s.seed;
  if (input.empty() == !synthetic) throw UsageError("give exactly one of --input or --synthetic");
  if (split.empty() && s.split) split = *s.split;

  MetroPanel metro;
  if (synthetic) {
    s.synthetic.seed = c.seed;
    metro = synthetic_metro_panel(s.synthetic);
  } else {
    try {
      metro = load_panel(input);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    s.housing.reference = std::make_pair(0.042, 0.052);
  }
  std::size_t at;
  if (split.empty()) {
    at = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(metro.months())));
  } else {
    try {
      at = split_index(metro.dates, split);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (at >= metro.dates.size()) throw UsageError("split " + split + " leaves no test months");
  if (at < 24) throw UsageError("split leaves fewer than 24 training months");

  const DistributionPanel panel = normalize_panel(metro);
  const HousingReport report = run_housing_experiment(panel, metro.dates, at, s.housing);

  const fs::path dir = prepare_output(c);
  write_text_file((dir / "housing_monthly.csv").string(), report.to_csv());
  ordered_json summary = report.summary_json();
  summary["metros"] = metro.metros();
  summary["dropped_rows"] = metro.dropped_rows;
  summary["interpolated_cells"] = metro.interpolated_cells;
  summary["source"] = synthetic ? "synthetic" : "file";
  write_json(dir / "housing_summary.json", summary);
  ordered_json extra;
  extra["input"] = synthetic ? ordered_json("synthetic") : ordered_json(input);
  extra["split"] = report.split;
  extra["outputs"] = {"housing_monthly.csv", "housing_summary.json"};
  write_manifest(dir, "housing", c, extra);
  for (int m = 0; m < 3; ++m) std::cout << kHousingMethods[m] << " mean=" << report.mean(m) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional forecasting with weighted EDMD"};
  app.require_subcommand(1);

  Common common;
  auto* sim = app.add_subcommand("simulate", "Run the simulation benchmark");
  add_common(sim, common, true, true);

  auto* fit = app.add_subcommand("fit", "Fit a model to a trajectory CSV");
  add_common(fit, common, false, false);
  std::string fit_input;
  std::optional<double> fit_dt;
  std::optional<int> fit_degree;
  std::optional<std::string> fit_basis;
  fit->add_option("--input", fit_input, "Trajectory CSV, one point per row")->required()->check(CLI::ExistingFile);
  fit->add_option("--dt", fit_dt, "Time step between rows");
  fit->add_option("--degree", fit_degree, "Dictionary degree")->check(CLI::PositiveNumber);
  fit->add_option("--basis", fit_basis, "hermite or monomial")->check(CLI::IsMember({"hermite", "monomial"}));

  auto* fc = app.add_subcommand("forecast", "Forecast a density from a model and a sample set");
  add_common(fc, common, false, false);
  std::string fc_model, fc_samples;
  double fc_h = 1.0;
  Index fc_points = 0;
  fc->add_option("--model", fc_model, "Model JSON from 'fit'")->required()->check(CLI::ExistingFile);
  fc->add_option("--samples", fc_samples, "Sample CSV of the current distribution")->required()->check(CLI::ExistingFile);
  fc->add_option("--horizon", fc_h, "Horizon in model time units")->capture_default_str();
  fc->add_option("--points", fc_points, "Lattice points per axis (0 = default)")->check(CLI::NonNegativeNumber);

  auto* hs = app.add_subcommand("housing", "Run the metro price panel experiment");
  add_common(hs, common, false, false);
  std::string hs_input, hs_split;
  bool hs_synthetic = false;
  hs->add_option("--input", hs_input, "Wide metro price CSV")->check(CLI::ExistingFile);
  hs->add_flag("--synthetic", hs_synthetic, "Use a generated stationary panel");
  hs->add_option("--split", hs_split, "First test month (YYYY-MM)");

  auto* ver = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*ver) {
      std::cout << "dpdd " << DPDD_VERSION << '\n';
      return 0;
    }
    if (*sim) return cmd_simulate(common);
    if (*fit) return cmd_fit(common, fit_input, fit_dt, fit_degree, fit_basis);
    if (*fc) return cmd_forecast(common, fc_model, fc_samples, fc_h, fc_points);
    if (*hs) return cmd_housing(common, hs_input, hs_synthetic, hs_split);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
