#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpdd/common.hpp"
#include "dpdd/csv.hpp"
#include "dpdd/pipeline.hpp"
#include "dpdd/quantile.hpp"
#include "dpdd/sliding.hpp"
#include "dpdd/transport.hpp"
#include "dpdd/war.hpp"

namespace dpdd {

enum class DgpKind { ar1, ar2, ou, ar_plus_ou, ou2d, drifting_ou };

inline std::string to_string(DgpKind k) {
  switch (k) {
    case DgpKind::ar1: return "ar1";
    case DgpKind::ar2: return "ar2";
    case DgpKind::ou: return "ou";
    case DgpKind::ar_plus_ou: return "ar_plus_ou";
    case DgpKind::ou2d: return "ou2d";
    case DgpKind::drifting_ou: return "drifting_ou";
  }
  return "?";
}

inline DgpKind dgp_kind_from_string(const std::string& s) {
  for (DgpKind k : {DgpKind::ar1, DgpKind::ar2, DgpKind::ou, DgpKind::ar_plus_ou, DgpKind::ou2d, DgpKind::drifting_ou})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown scenario '" + s + "'");
}

/// One data-generating process. AR kinds advance one step per snapshot;
/// diffusion kinds take steps_per_snapshot Euler-Maruyama steps of size dt.
/// Every path starts from the stationary law (for drifting_ou, the
/// stationary law around the initial mean).
struct DgpSpec {
  DgpKind kind = DgpKind::ar1;
  std::string name;  // empty = kind name
  Index n_paths = 400;
  Index T = 20;
  double phi1 = 0.9;
  double phi2 = 0.0;
  double noise_variance = 0.49;
  double theta = 1.0;
  double sigma = 0.7;
  double dt = 0.01;
  int steps_per_snapshot = 100;
  /// drifting_ou mean: amplitude * sin(2 pi t / (T * dt * steps_per_snapshot)).
  double drift_amplitude = 2.0;
  std::uint64_t seed = 0;

  static DgpSpec defaults(DgpKind k) {
    DgpSpec s;
    s.kind = k;
    if (k == DgpKind::ar2) {
      s.phi1 = 0.6;
      s.phi2 = 0.2;
    }
    return s;
  }

  std::string label() const { return name.empty() ? to_string(kind) : name; }
  int dim() const { return kind == DgpKind::ou2d ? 2 : 1; }
  bool has_ar() const { return kind == DgpKind::ar1 || kind == DgpKind::ar2 || kind == DgpKind::ar_plus_ou; }
  bool has_diffusion() const { return !(kind == DgpKind::ar1 || kind == DgpKind::ar2); }
  double snapshot_interval() const { return dt * steps_per_snapshot; }

  void validate() const {
    if (n_paths < 1) throw InvalidArgument("n_paths must be >= 1");
    if (T < 2) throw InvalidArgument("T must be >= 2");
    if (has_ar()) {
      if (!(noise_variance > 0.0)) throw InvalidArgument("noise_variance must be positive");
      // Stationarity triangle for AR(2) (AR(1) is phi2 = 0).
      if (!(std::abs(phi2) < 1.0 && phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0))
        throw InvalidArgument("AR coefficients are not stationary");
    }
    if (has_diffusion()) {
      if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
      if (!(theta > 0.0)) throw InvalidArgument("theta must be positive");
      if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
      if (steps_per_snapshot < 1) throw InvalidArgument("steps_per_snapshot must be >= 1");
    }
  }
};

namespace detail {

/// n_paths x T matrix of a stationary AR(2) (phi2 = 0 gives AR(1)).
inline Eigen::MatrixXd simulate_ar(const DgpSpec& s, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double sd = std::sqrt(s.noise_variance);
  const double a = s.phi1, b = s.phi2;
  // Stationary autocovariances.
  const double g0 = s.noise_variance * (1.0 - b) / ((1.0 + b) * ((1.0 - b) * (1.0 - b) - a * a));
  const double g1 = g0 * a / (1.0 - b);
  const double r = g1 / g0;
  Eigen::MatrixXd x(s.n_paths, s.T);
  for (Index i = 0; i < s.n_paths; ++i) {
    // (x_{-1}, x_0) drawn jointly from the stationary law.
    const double prev = std::sqrt(g0) * z(rng);
    const double cur = r * prev + std::sqrt(g0 * (1.0 - r * r)) * z(rng);
    double xm1 = prev, x0 = cur;
    x(i, 0) = x0;
    for (Index t = 1; t < s.T; ++t) {
      const double next = a * x0 + b * xm1 + sd * z(rng);
      xm1 = x0;
      x0 = next;
      x(i, t) = next;
    }
  }
  return x;
}

/// n_paths x T matrix of Euler-Maruyama OU snapshots, optionally around a
/// moving mean.
inline Eigen::MatrixXd simulate_ou(const DgpSpec& s, Rng& rng, bool drifting) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double total = static_cast<double>(s.T) * s.snapshot_interval();
  auto mean_at = [&](double time) {
    return drifting ? s.drift_amplitude * std::sin(2.0 * std::numbers::pi * time / total) : 0.0;
  };
  const double sd0 = s.sigma / std::sqrt(2.0 * s.theta);
  const double diffusion = s.sigma * std::sqrt(s.dt);
  Eigen::MatrixXd x(s.n_paths, s.T);
  Eigen::VectorXd cur(s.n_paths);
  for (Index i = 0; i < s.n_paths; ++i) cur(i) = mean_at(0.0) + sd0 * z(rng);
  x.col(0) = cur;
  for (Index t = 1; t < s.T; ++t) {
    for (int k = 0; k < s.steps_per_snapshot; ++k) {
      const double time = (static_cast<double>(t - 1) * s.steps_per_snapshot + k) * s.dt;
      const double m = mean_at(time);
      for (Index i = 0; i < s.n_paths; ++i) cur(i) += -s.theta * (cur(i) - m) * s.dt + diffusion * z(rng);
    }
    x.col(t) = cur;
  }
  return x;
}

}  // namespace detail

/// Snapshot t is the cross-section of all paths at time t; row i is path i
/// in every snapshot.
inline DistributionPanel generate(const DgpSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "dgp:" + to_string(spec.kind));
  std::vector<Eigen::MatrixXd> coords;
  switch (spec.kind) {
    case DgpKind::ar1:
    case DgpKind::ar2: coords.push_back(detail::simulate_ar(spec, rng)); break;
    case DgpKind::ou: coords.push_back(detail::simulate_ou(spec, rng, false)); break;
    case DgpKind::drifting_ou: coords.push_back(detail::simulate_ou(spec, rng, true)); break;
    case DgpKind::ar_plus_ou: {
      Eigen::MatrixXd ar = detail::simulate_ar(spec, rng);
      coords.push_back(ar + detail::simulate_ou(spec, rng, false));
      break;
    }
    case DgpKind::ou2d:
      coords.push_back(detail::simulate_ou(spec, rng, false));
      coords.push_back(detail::simulate_ou(spec, rng, false));
      break;
  }
  DistributionPanel panel;
  for (Index t = 0; t < spec.T; ++t) {
    Points snap(spec.n_paths, static_cast<Index>(coords.size()));
    for (std::size_t a = 0; a < coords.size(); ++a) snap.col(static_cast<Index>(a)) = coords[a].col(t);
    panel.snapshots.push_back(std::move(snap));
  }
  return panel;
}

/// Trajectory of one path sampled every `stride` Euler steps, length n + 1,
/// starting from the stationary law. Used for spectral checks where a long
/// single path is needed.
inline Points ou_trajectory(Index n, double theta, double sigma, double dt, int stride, std::uint64_t seed) {
  if (n < 1 || !(dt > 0.0) || stride < 1) throw InvalidArgument("ou_trajectory: bad arguments");
  Rng rng = make_rng(seed, "ou-trajectory");
  std::normal_distribution<double> z(0.0, 1.0);
  Points x(n + 1, 1);
  double cur = sigma / std::sqrt(2.0 * theta) * z(rng);
  x(0, 0) = cur;
  const double diffusion = sigma * std::sqrt(dt);
  for (Index k = 1; k <= n; ++k) {
    for (int s = 0; s < stride; ++s) cur += -theta * cur * dt + diffusion * z(rng);
    x(k, 0) = cur;
  }
  return x;
}

enum class Method { dpdd, war, sw_dpdd };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::dpdd: return "dpdd";
    case Method::war: return "war";
    case Method::sw_dpdd: return "sw_dpdd";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::dpdd, Method::war, Method::sw_dpdd})
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown method '" + s + "'");
}

struct BenchmarkConfig {
  Index n_exp = 50;
  std::vector<Method> methods{Method::dpdd, Method::war};
  std::uint64_t seed = 0;
  /// Training snapshots are the first floor(train_fraction * T).
  double train_fraction = 0.7;
  DpddConfig dpdd;
  /// Probability grid for quantile-based W2 and WAR: u_grid_size
  /// equispaced points in [u_lo, u_hi].
  Index u_grid_size = 128;
  double u_lo = 0.005;
  double u_hi = 0.995;
  double war_threshold = 0.95;
  /// Sliding window: fixed length, or 0 for multiplier * tau_mix.
  Index sw_window = 0;
  double sw_multiplier = 3.0;
  unsigned threads = 1;

  Eigen::VectorXd u_grid() const { return uniform_probability_grid(u_grid_size, u_lo, u_hi); }

  Index train_size(Index T) const { return static_cast<Index>(std::floor(train_fraction * static_cast<double>(T))); }
};

struct ResultRow {
  std::string scenario;
  Method method = Method::dpdd;
  Index repetition = 0;
  double mse_w2 = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

struct MethodSummary {
  std::string scenario;
  Method method = Method::dpdd;
  Index count = 0;
  Index failures = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q1 = mean, median = mean, q3 = mean, min = mean, max = mean;
};

/// Long-format benchmark results: one row per scenario, method and
/// repetition.
struct ResultTable {
  std::vector<ResultRow> rows;

  std::vector<MethodSummary> summary() const {
    std::vector<MethodSummary> out;
    for (const auto& r : rows) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const MethodSummary& s) { return s.scenario == r.scenario && s.method == r.method; });
      if (it == out.end()) {
        out.push_back({r.scenario, r.method});
        it = out.end() - 1;
      }
      ++it->count;
      if (!r.ok()) ++it->failures;
    }
    for (auto& s : out) {
      std::vector<double> v;
      for (const auto& r : rows)
        if (r.scenario == s.scenario && r.method == s.method && r.ok()) v.push_back(r.mse_w2);
      if (v.empty()) continue;
      std::sort(v.begin(), v.end());
      double acc = 0.0;
      for (double x : v) acc += x;
      s.mean = acc / static_cast<double>(v.size());
      s.q1 = sorted_quantile(v, 0.25);
      s.median = sorted_quantile(v, 0.5);
      s.q3 = sorted_quantile(v, 0.75);
      s.min = v.front();
      s.max = v.back();
    }
    return out;
  }

  const MethodSummary* find(const std::vector<MethodSummary>& s, const std::string& scenario, Method m) const {
    for (const auto& x : s)
      if (x.scenario == scenario && x.method == m) return &x;
    return nullptr;
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "scenario,method,repetition,mse_w2,status\n";
    for (const auto& r : rows)
      os << detail::csv_field(r.scenario) << ',' << to_string(r.method) << ',' << r.repetition << ','
         << detail::format_double(r.mse_w2) << ',' << detail::csv_field(r.ok() ? "ok" : r.error) << '\n';
    return os.str();
  }

  nlohmann::ordered_json summary_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& s : summary()) {
      nlohmann::ordered_json e;
      e["scenario"] = s.scenario;
      e["method"] = to_string(s.method);
      e["repetitions"] = s.count;
      e["failures"] = s.failures;
      for (auto [key, v] : {std::pair<const char*, double>{"mean", s.mean}, {"q1", s.q1}, {"median", s.median},
                            {"q3", s.q3}, {"min", s.min}, {"max", s.max}}) {
        if (std::isnan(v))
          e[key] = nullptr;
        else
          e[key] = v;
      }
      j.push_back(std::move(e));
    }
    return j;
  }
};

namespace detail {

inline double war_2d_error(const std::vector<WarModel>& models, const DistributionPanel& panel, std::size_t t,
                           const Eigen::VectorXd& u) {
  const Points& origin = panel[t - 1];
  const Points& target = panel[t];
  const Points grid = quasi_uniform_points(target.rows(), 2);
  Points draws(target.rows(), 2);
  for (int a = 0; a < 2; ++a) {
    const QuantileCurve q = empirical_quantiles(origin.col(a), u);
    const QuantileCurve f = war_forecast(models[static_cast<std::size_t>(a)], q.values, 1);
    for (Index i = 0; i < draws.rows(); ++i) draws(i, a) = interpolate_quantile(f, grid(i, a));
  }
  const double w = w2_assignment(target, draws);
  return w * w;
}

inline double evaluate_war(const DistributionPanel& panel, std::size_t t0, const Eigen::VectorXd& u, double threshold) {
  DistributionPanel train;
  train.snapshots.assign(panel.snapshots.begin(), panel.snapshots.begin() + static_cast<std::ptrdiff_t>(t0));
  std::vector<double> errs;
  if (panel.dim() == 1) {
    const WarModel model = war_fit(quantile_matrix(train, u), u, threshold);
    for (std::size_t t = t0; t < panel.size(); ++t) {
      const QuantileCurve origin = empirical_quantiles(panel[t - 1].col(0), u);
      const QuantileCurve f = war_forecast(model, origin.values, 1);
      const double w = w2_quantile_grid(f, empirical_quantiles(panel[t].col(0), u));
      errs.push_back(w * w);
    }
  } else if (panel.dim() == 2) {
    std::vector<WarModel> models;
    for (int a = 0; a < 2; ++a) models.push_back(war_fit(quantile_matrix(train, u, a), u, threshold));
    for (std::size_t t = t0; t < panel.size(); ++t) errs.push_back(war_2d_error(models, panel, t, u));
  } else {
    throw InvalidArgument("war: dimension > 2 unsupported");
  }
  return mean_squared_error(errs);
}

inline double evaluate_dpdd(const DistributionPanel& panel, std::size_t t0, const Eigen::VectorXd& u,
                            const DpddConfig& cfg) {
  const DpddFit fit = fit_dpdd(panel, 0, t0 - 1, cfg);
  std::vector<double> errs;
  for (std::size_t t = t0; t < panel.size(); ++t)
    errs.push_back(w2_squared_to_forecast(panel[t], fit.forecast(panel[t - 1], 1.0), u));
  return mean_squared_error(errs);
}

inline double evaluate_sw_dpdd(const DistributionPanel& panel, std::size_t t0, const Eigen::VectorXd& u,
                               const BenchmarkConfig& cfg) {
  Index window = cfg.sw_window;
  if (window == 0) {
    const MixingTime tau = mixing_time(summary_series(panel, 0, t0 - 1));
    window = WindowConfig::from_mixing_time(tau.lag, cfg.sw_multiplier).window_length;
  }
  std::vector<double> errs;
  for (std::size_t t = t0; t < panel.size(); ++t) {
    const std::size_t origin = t - 1;
    const Index w = std::min<Index>(window, static_cast<Index>(origin) + 1);
    errs.push_back(w2_squared_to_forecast(panel[t], sw_dpdd_forecast(panel, origin, w, 1.0, cfg.dpdd), u));
  }
  return mean_squared_error(errs);
}

}  // namespace detail

/// MSE_W2 of each method on one simulated panel: fit on the first t0
/// snapshots, one-step forecasts from every origin t0-1..T-2.
inline std::vector<ResultRow> evaluate_panel(const DistributionPanel& panel, const std::string& scenario,
                                             Index repetition, const BenchmarkConfig& cfg) {
  const auto t0 = static_cast<std::size_t>(cfg.train_size(static_cast<Index>(panel.size())));
  if (t0 < 3 || t0 >= panel.size())
    throw InvalidArgument("benchmark: training split leaves no training or test snapshots");
  const Eigen::VectorXd u = cfg.u_grid();
  std::vector<ResultRow> out;
  for (Method m : cfg.methods) {
    ResultRow row{scenario, m, repetition};
    try {
      switch (m) {
        case Method::dpdd: row.mse_w2 = detail::evaluate_dpdd(panel, t0, u, cfg.dpdd); break;
        case Method::war: row.mse_w2 = detail::evaluate_war(panel, t0, u, cfg.war_threshold); break;
        case Method::sw_dpdd: row.mse_w2 = detail::evaluate_sw_dpdd(panel, t0, u, cfg); break;
      }
      if (!std::isfinite(row.mse_w2)) throw NumericalError("non-finite error");
    } catch (const std::exception& e) {
      row.mse_w2 = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
      if (row.error.empty()) row.error = "failure";
    }
    out.push_back(std::move(row));
  }
  return out;
}

/// Seed of repetition `rep` of a scenario.
inline std::uint64_t repetition_seed(std::uint64_t base, const std::string& scenario, Index rep) {
  return derive_seed(base, "rep:" + scenario, static_cast<std::uint64_t>(rep));
}

/// Every scenario x repetition, optionally on several threads. Output order
/// is scenario, repetition, method regardless of thread count.
inline ResultTable run_benchmark(const BenchmarkConfig& cfg, const std::vector<DgpSpec>& specs) {
  if (specs.empty()) throw InvalidArgument("benchmark: no scenarios");
  if (cfg.methods.empty()) throw InvalidArgument("benchmark: no methods");
  if (cfg.n_exp < 1) throw InvalidArgument("benchmark: n_exp must be >= 1");
  for (const auto& s : specs) {
    s.validate();
    if (cfg.train_size(s.T) >= s.T) throw InvalidArgument("benchmark: training split must leave test snapshots");
  }
  const std::size_t tasks = specs.size() * static_cast<std::size_t>(cfg.n_exp);
  std::vector<std::vector<ResultRow>> slots(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks; k = next++) {
      const DgpSpec& base = specs[k / static_cast<std::size_t>(cfg.n_exp)];
      const Index rep = static_cast<Index>(k % static_cast<std::size_t>(cfg.n_exp));
      DgpSpec s = base;
      s.seed = repetition_seed(cfg.seed, base.label(), rep);
      try {
        slots[k] = evaluate_panel(generate(s), s.label(), rep, cfg);
      } catch (const std::exception& e) {
        for (Method m : cfg.methods)
          slots[k].push_back({s.label(), m, rep, std::numeric_limits<double>::quiet_NaN(), e.what()});
      }
    }
  };
  unsigned n = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  n = static_cast<unsigned>(std::min<std::size_t>(n, tasks));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ResultTable table;
  for (auto& s : slots)
    for (auto& r : s) table.rows.push_back(std::move(r));
  return table;
}

}  // namespace dpdd
