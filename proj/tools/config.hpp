#pragma once

// JSON config reading with JSON-pointer error paths.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpdd/housing.hpp"
#include "dpdd/sim.hpp"

namespace dpdd::cli {

/// Config problem; what() is "<pointer>: <message>".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& pointer, const std::string& msg)
      : std::runtime_error((pointer.empty() ? "/" : pointer) + ": " + msg) {}
};

/// Cursor into a JSON object that remembers its path and which keys were
/// read, so unknown keys can be reported.
class Node {
 public:
  Node(const nlohmann::json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {}

  const std::string& pointer() const { return ptr_; }
  const nlohmann::json& json() const { return j_; }

  void require_object() const {
    if (!j_.is_object()) throw ConfigError(ptr_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  Node child(const std::string& key) {
    seen_.insert(key);
    return Node(j_.at(key), ptr_ + "/" + escape(key));
  }

  std::string path(const std::string& key) const { return ptr_ + "/" + escape(key); }

  template <class T>
  std::optional<T> get(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(path(key), "expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(path(key), "must be nonnegative");
      } else {
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path(key), e.what());
    }
  }

  template <class T>
  std::optional<T> get_min(const std::string& key, T lo) {
    auto v = get<T>(key);
    if (v && *v < lo) throw ConfigError(path(key), "must be >= " + std::to_string(lo));
    return v;
  }

  /// Reject keys never looked at.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
  }

 private:
  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) {
      if (c == '~')
        out += "~0";
      else if (c == '/')
        out += "~1";
      else
        out += c;
    }
    return out;
  }

  const nlohmann::json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap_domain(const std::string& pointer, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(pointer, e.what());
  }
}

inline TruncationRule read_truncation(Node n) {
  n.require_object();
  const std::string rule = n.get<std::string>("rule").value_or("modulus_ratio");
  TruncationRule r;
  if (rule == "modulus_ratio") {
    const double ratio = n.get<double>("ratio").value_or(0.9);
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError(n.path("ratio"), "must lie in [0, 1]");
    r = TruncationRule::modulus_ratio(ratio);
  } else if (rule == "fixed") {
    if (!n.has("count")) throw ConfigError(n.path("count"), "required for rule 'fixed'");
    r = TruncationRule::fixed(*n.get_min<int>("count", 1));
  } else {
    throw ConfigError(n.path("rule"), "unknown truncation rule '" + rule + "' (modulus_ratio, fixed)");
  }
  n.finish();
  return r;
}

/// Keys shared by the dpdd sections of every command.
inline void read_dpdd(Node& n, DpddConfig& c) {
  if (auto v = n.get<std::string>("basis"))
    c.basis = wrap_domain(n.path("basis"), [&] { return basis_kind_from_string(*v); });
  if (auto v = n.get_min<int>("degree", 1)) c.degree = *v;
  if (n.has("truncation")) c.truncation = read_truncation(n.child("truncation"));
  if (auto v = n.get<std::string>("normalization"))
    c.fit.normalization = wrap_domain(n.path("normalization"), [&] { return mode_normalization_from_string(*v); });
  if (auto v = n.get<bool>("cv_bandwidth")) c.cv_bandwidth = *v;
  if (auto v = n.get<bool>("variance_correction")) c.variance_correction = *v;
  if (auto v = n.get_min<Index>("lattice_points", 8)) c.lattice_points = *v;
  if (auto v = n.get<double>("ridge")) {
    if (!(*v >= 0.0)) throw ConfigError(n.path("ridge"), "must be >= 0");
    c.fit.ridge = *v;
  }
}

inline DgpSpec read_scenario(const nlohmann::json& j, const std::string& pointer) {
  if (j.is_string()) {
    const auto kind = wrap_domain(pointer, [&] { return dgp_kind_from_string(j.get<std::string>()); });
    return DgpSpec::defaults(kind);
  }
  Node n(j, pointer);
  n.require_object();
  if (!n.has("kind")) throw ConfigError(n.path("kind"), "required");
  const auto kind_name = *n.get<std::string>("kind");
  DgpSpec s = DgpSpec::defaults(wrap_domain(n.path("kind"), [&] { return dgp_kind_from_string(kind_name); }));
  if (auto v = n.get<std::string>("name")) s.name = *v;
  if (auto v = n.get_min<Index>("n_paths", 2)) s.n_paths = *v;
  if (auto v = n.get_min<Index>("T", 4)) s.T = *v;
  if (auto v = n.get<double>("phi1")) s.phi1 = *v;
  if (auto v = n.get<double>("phi2")) s.phi2 = *v;
  if (auto v = n.get<double>("noise_variance")) s.noise_variance = *v;
  if (auto v = n.get<double>("theta")) s.theta = *v;
  if (auto v = n.get<double>("sigma")) s.sigma = *v;
  if (auto v = n.get<double>("dt")) s.dt = *v;
  if (auto v = n.get_min<int>("steps_per_snapshot", 1)) s.steps_per_snapshot = *v;
  if (auto v = n.get<double>("drift_amplitude")) s.drift_amplitude = *v;
  n.finish();
  wrap_domain(pointer, [&] {
    s.validate();
    return 0;
  });
  return s;
}

struct SimulateSettings {
  BenchmarkConfig bench;
  std::vector<DgpSpec> scenarios;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> scale;
  std::optional<Index> n_exp;
};

inline std::vector<DgpSpec> default_scenarios() {
  std::vector<DgpSpec> s;
  for (auto k : {DgpKind::ar1, DgpKind::ar2, DgpKind::ou, DgpKind::ou2d, DgpKind::ar_plus_ou})
    s.push_back(DgpSpec::defaults(k));
  return s;
}

inline SimulateSettings read_simulate_config(const nlohmann::json& j) {
  SimulateSettings out;
  out.scenarios = default_scenarios();
  Node n(j, "");
  n.require_object();
  out.seed = n.get<std::uint64_t>("seed");
  out.threads = n.get<unsigned>("threads");
  if (auto v = n.get<std::string>("scale")) {
    if (*v != "desk" && *v != "full") throw ConfigError(n.path("scale"), "must be 'desk' or 'full'");
    out.scale = *v;
  }
  out.n_exp = n.get_min<Index>("n_exp", 1);
  if (n.has("methods")) {
    Node m = n.child("methods");
    if (!m.json().is_array() || m.json().empty()) throw ConfigError(m.pointer(), "expected a nonempty array");
    out.bench.methods.clear();
    for (std::size_t i = 0; i < m.json().size(); ++i) {
      const std::string p = m.pointer() + "/" + std::to_string(i);
      if (!m.json()[i].is_string()) throw ConfigError(p, "expected a string");
      out.bench.methods.push_back(wrap_domain(p, [&] { return method_from_string(m.json()[i].get<std::string>()); }));
    }
  }
  if (n.has("scenarios")) {
    Node sc = n.child("scenarios");
    if (!sc.json().is_array() || sc.json().empty()) throw ConfigError(sc.pointer(), "expected a nonempty array");
    out.scenarios.clear();
    std::set<std::string> labels;
    for (std::size_t i = 0; i < sc.json().size(); ++i) {
      const std::string p = sc.pointer() + "/" + std::to_string(i);
      out.scenarios.push_back(read_scenario(sc.json()[i], p));
      if (!labels.insert(out.scenarios.back().label()).second)
        throw ConfigError(p, "duplicate scenario name '" + out.scenarios.back().label() + "'");
    }
  }
  if (auto v = n.get<double>("train_fraction")) {
    if (!(*v > 0.0 && *v < 1.0)) throw ConfigError(n.path("train_fraction"), "must lie in (0, 1)");
    out.bench.train_fraction = *v;
  }
  if (auto v = n.get<double>("war_threshold")) {
    if (!(*v > 0.0 && *v <= 1.0)) throw ConfigError(n.path("war_threshold"), "must lie in (0, 1]");
    out.bench.war_threshold = *v;
  }
  if (n.has("u_grid")) {
    Node g = n.child("u_grid");
    g.require_object();
    if (auto v = g.get_min<Index>("size", 2)) out.bench.u_grid_size = *v;
    if (auto v = g.get<double>("lo")) out.bench.u_lo = *v;
    if (auto v = g.get<double>("hi")) out.bench.u_hi = *v;
    g.finish();
    wrap_domain(g.pointer(), [&] { return out.bench.u_grid(); });
  }
  if (n.has("sliding")) {
    Node s = n.child("sliding");
    s.require_object();
    if (auto v = s.get_min<Index>("window", 2)) out.bench.sw_window = *v;
    if (auto v = s.get<double>("multiplier")) {
      if (!(*v >= 2.0 && *v <= 5.0)) throw ConfigError(s.path("multiplier"), "must lie in [2, 5]");
      out.bench.sw_multiplier = *v;
    }
    s.finish();
  }
  if (n.has("dpdd")) {
    Node d = n.child("dpdd");
    d.require_object();
    read_dpdd(d, out.bench.dpdd);
    d.finish();
  }
  n.finish();
  return out;
}

struct FitSettings {
  DpddConfig dpdd;
};

inline FitSettings read_fit_config(const nlohmann::json& j) {
  FitSettings out;
  Node n(j, "");
  n.require_object();
  read_dpdd(n, out.dpdd);
  if (auto v = n.get<double>("dt")) {
    if (!(*v > 0.0)) throw ConfigError(n.path("dt"), "must be positive");
    out.dpdd.dt = *v;
  }
  n.finish();
  return out;
}

struct HousingSettings {
  HousingConfig housing;
  std::optional<std::string> split;
  SyntheticPanelSpec synthetic;
  std::optional<std::uint64_t> seed;
};

inline HousingSettings read_housing_config(const nlohmann::json& j) {
  HousingSettings out;
  Node n(j, "");
  n.require_object();
  out.seed = n.get<std::uint64_t>("seed");
  out.split = n.get<std::string>("split");
  if (auto v = n.get<std::string>("basis"))
    out.housing.basis = wrap_domain(n.path("basis"), [&] { return basis_kind_from_string(*v); });
  if (auto v = n.get_min<int>("degree", 1)) out.housing.degree = *v;
  if (auto v = n.get_min<int>("modes", 1)) out.housing.modes = *v;
  if (auto v = n.get<bool>("refit")) out.housing.refit = *v;
  if (auto v = n.get<double>("war_threshold")) {
    if (!(*v > 0.0 && *v <= 1.0)) throw ConfigError(n.path("war_threshold"), "must lie in (0, 1]");
    out.housing.war_threshold = *v;
  }
  if (n.has("periods")) {
    Node p = n.child("periods");
    if (!p.json().is_array()) throw ConfigError(p.pointer(), "expected an array");
    for (std::size_t i = 0; i < p.json().size(); ++i) {
      Node e(p.json()[i], p.pointer() + "/" + std::to_string(i));
      e.require_object();
      Period period;
      for (auto [key, dst] : {std::pair<const char*, std::string*>{"name", &period.name}, {"start", &period.start},
                              {"end", &period.end}}) {
        if (!e.has(key)) throw ConfigError(e.path(key), "required");
        *dst = *e.get<std::string>(key);
      }
      for (auto* d : {&period.start, &period.end}) {
        const auto m = detail::parse_month(*d);
        if (!m) throw ConfigError(e.path(d == &period.start ? "start" : "end"), "expected YYYY-MM");
        *d = detail::month_label(*m);
      }
      e.finish();
      out.housing.periods.push_back(period);
    }
  }
  if (n.has("synthetic")) {
    Node s = n.child("synthetic");
    s.require_object();
    if (auto v = s.get_min<Index>("metros", 2)) out.synthetic.metros = *v;
    if (auto v = s.get_min<Index>("months", 2)) out.synthetic.months = *v;
    if (auto v = s.get<double>("phi")) {
      if (!(std::abs(*v) < 1.0)) throw ConfigError(s.path("phi"), "must lie in (-1, 1)");
      out.synthetic.phi = *v;
    }
    if (auto v = s.get<double>("log_sd")) {
      if (!(*v > 0.0)) throw ConfigError(s.path("log_sd"), "must be positive");
      out.synthetic.log_sd = *v;
    }
    if (auto v = s.get<std::string>("start")) {
      if (!detail::parse_month(*v)) throw ConfigError(s.path("start"), "expected YYYY-MM");
      out.synthetic.start = *v;
    }
    s.finish();
  }
  n.finish();
  return out;
}

}  // namespace dpdd::cli
