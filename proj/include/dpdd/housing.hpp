#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpdd/common.hpp"
#include "dpdd/csv.hpp"
#include "dpdd/pipeline.hpp"
#include "dpdd/quantile.hpp"
#include "dpdd/transport.hpp"
#include "dpdd/war.hpp"

namespace dpdd {

/// Prices of m metros over T consecutive months. Missing cells are NaN
/// until load_panel fills them.
struct MetroPanel {
  std::vector<std::string> metro_ids;
  std::vector<std::string> metro_names;
  std::vector<std::string> dates;  // YYYY-MM
  Eigen::MatrixXd prices;          // m x T
  std::string provenance;
  Index dropped_rows = 0;
  Index interpolated_cells = 0;

  Index metros() const { return prices.rows(); }
  Index months() const { return prices.cols(); }
};

namespace detail {

/// "YYYY-MM" or "YYYY-MM-DD" -> months since year 0, or nullopt.
inline std::optional<int> parse_month(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.size() != 7 && s.size() != 10) return std::nullopt;
  auto digits = [&](std::size_t at, std::size_t n, int& out) {
    const auto [p, ec] = std::from_chars(s.data() + at, s.data() + at + n, out);
    return ec == std::errc() && p == s.data() + at + n;
  };
  int y = 0, m = 0, d = 1;
  if (s[4] != '-' || !digits(0, 4, y) || !digits(5, 2, m) || m < 1 || m > 12) return std::nullopt;
  if (s.size() == 10 && (s[7] != '-' || !digits(8, 2, d) || d < 1 || d > 31)) return std::nullopt;
  return y * 12 + (m - 1);
}

inline std::string month_label(int months) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", months / 12, months % 12 + 1);
  return buf;
}

inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Wide metro CSV: leading identifier columns, then one column per month
/// (ISO-8601 header). The first column is the metro id; a RegionName
/// column, if any, supplies display names. Rows missing more than
/// `max_missing_fraction` of months are dropped; remaining gaps are filled
/// by linear interpolation within the row (flat beyond the first and last
/// observation).
inline MetroPanel parse_panel(const std::vector<std::vector<std::string>>& rows, const std::string& provenance,
                              double max_missing_fraction = 0.2) {
  if (rows.empty()) throw InvalidArgument("panel: empty file");
  const auto& header = rows[0];
  std::size_t first_date = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (detail::parse_month(header[c])) {
      first_date = c;
      break;
    }
  if (first_date == header.size()) throw InvalidArgument("panel: no date columns in header");
  if (first_date == 0) throw InvalidArgument("panel: malformed header, first column must identify the metro");
  std::vector<int> months;
  for (std::size_t c = first_date; c < header.size(); ++c) {
    const auto m = detail::parse_month(header[c]);
    if (!m) throw InvalidArgument("panel: malformed header, column " + std::to_string(c + 1) + " ('" + header[c] +
                                  "') is not a date");
    if (!months.empty() && *m != months.back() + 1)
      throw InvalidArgument("panel: dates must be consecutive months (column " + std::to_string(c + 1) + ")");
    months.push_back(*m);
  }
  std::size_t name_col = 0;
  for (std::size_t c = 0; c < first_date; ++c)
    if (trim(header[c]) == "RegionName") name_col = c;

  MetroPanel p;
  p.provenance = provenance;
  for (int m : months) p.dates.push_back(detail::month_label(m));
  const auto nt = static_cast<Index>(months.size());
  std::vector<Eigen::VectorXd> kept;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw InvalidArgument("panel: row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                            " fields, header has " + std::to_string(header.size()));
    Eigen::VectorXd v(nt);
    Index missing = 0;
    for (Index t = 0; t < nt; ++t) {
      const std::string& cell = row[first_date + static_cast<std::size_t>(t)];
      if (trim(cell).empty()) {
        v(t) = std::numeric_limits<double>::quiet_NaN();
        ++missing;
        continue;
      }
      double x;
      if (!parse_double(cell, x) || !std::isfinite(x))
        throw InvalidArgument("panel: row " + std::to_string(r + 1) + ", column '" + header[first_date + t] +
                              "': not a number: '" + cell + "'");
      if (!(x > 0.0))
        throw InvalidArgument("panel: row " + std::to_string(r + 1) + ", column '" + header[first_date + t] +
                              "': price must be positive");
      v(t) = x;
    }
    if (static_cast<double>(missing) > max_missing_fraction * static_cast<double>(nt)) {
      ++p.dropped_rows;
      continue;
    }
    // Fill gaps.
    std::vector<Index> obs;
    for (Index t = 0; t < nt; ++t)
      if (!std::isnan(v(t))) obs.push_back(t);
    for (Index t = 0; t < nt; ++t) {
      if (!std::isnan(v(t))) continue;
      const auto hi = std::upper_bound(obs.begin(), obs.end(), t);
      if (hi == obs.begin())
        v(t) = v(obs.front());
      else if (hi == obs.end())
        v(t) = v(obs.back());
      else {
        const Index a = *(hi - 1), b = *hi;
        v(t) = v(a) + (v(b) - v(a)) * static_cast<double>(t - a) / static_cast<double>(b - a);
      }
      ++p.interpolated_cells;
    }
    p.metro_ids.push_back(trim(row[0]));
    p.metro_names.push_back(trim(row[name_col]));
    kept.push_back(std::move(v));
  }
  p.prices.resize(static_cast<Index>(kept.size()), nt);
  for (std::size_t i = 0; i < kept.size(); ++i) p.prices.row(static_cast<Index>(i)) = kept[i].transpose();
  return p;
}

inline MetroPanel load_panel(const std::string& path, double max_missing_fraction = 0.2) {
  return parse_panel(read_csv_file(path), path, max_missing_fraction);
}

/// Wide CSV with columns id, RegionName, months.
inline std::string write_panel_csv(const MetroPanel& p) {
  std::ostringstream os;
  os << "RegionID,RegionName";
  for (const auto& d : p.dates) os << ',' << d;
  os << '\n';
  for (Index i = 0; i < p.metros(); ++i) {
    os << detail::csv_field(p.metro_ids[static_cast<std::size_t>(i)]) << ','
       << detail::csv_field(p.metro_names[static_cast<std::size_t>(i)]);
    for (Index t = 0; t < p.months(); ++t) {
      os << ',';
      if (!std::isnan(p.prices(i, t))) os << detail::shortest(p.prices(i, t));
    }
    os << '\n';
  }
  return os.str();
}

/// Month t becomes the empirical distribution of price / cross-sectional
/// mean; row i stays metro i.
inline DistributionPanel normalize_panel(const MetroPanel& p) {
  if (p.months() == 0) throw InvalidArgument("normalize_panel: no months");
  if (p.metros() < 2) throw InvalidArgument("normalize_panel: month " + p.dates.front() + " has fewer than 2 metros");
  if (p.prices.hasNaN()) throw InvalidArgument("normalize_panel: panel has missing values");
  DistributionPanel out;
  for (Index t = 0; t < p.months(); ++t) {
    const Eigen::VectorXd col = p.prices.col(t);
    out.snapshots.emplace_back(col / col.mean());
  }
  return out;
}

/// Stationary synthetic panel: log price of metro i at month t is a common
/// trend plus a stationary AR(1) in relative terms, so after mean
/// normalization the cross-sectional law does not drift.
struct SyntheticPanelSpec {
  Index metros = 200;
  Index months = 60;
  double phi = 0.5;
  double log_sd = 0.25;  // stationary sd of the relative log price
  double trend = 0.003;  // common monthly log growth
  std::string start = "2000-01";
  std::uint64_t seed = 0;
};

inline MetroPanel synthetic_metro_panel(const SyntheticPanelSpec& s) {
  if (s.metros < 2 || s.months < 2) throw InvalidArgument("synthetic panel: need >= 2 metros and months");
  if (!(std::abs(s.phi) < 1.0) || !(s.log_sd > 0.0)) throw InvalidArgument("synthetic panel: bad AR parameters");
  const auto start = detail::parse_month(s.start);
  if (!start) throw InvalidArgument("synthetic panel: bad start month '" + s.start + "'");
  Rng rng = make_rng(s.seed, "synthetic-metro");
  std::normal_distribution<double> z(0.0, 1.0);
  const double innov = s.log_sd * std::sqrt(1.0 - s.phi * s.phi);
  MetroPanel p;
  p.provenance = "synthetic";
  for (Index t = 0; t < s.months; ++t) p.dates.push_back(detail::month_label(*start + static_cast<int>(t)));
  p.prices.resize(s.metros, s.months);
  for (Index i = 0; i < s.metros; ++i) {
    p.metro_ids.push_back(std::to_string(100000 + i));
    p.metro_names.push_back("Metro " + std::to_string(i + 1));
    double y = s.log_sd * z(rng);
    for (Index t = 0; t < s.months; ++t) {
      if (t > 0) y = s.phi * y + innov * z(rng);
      p.prices(i, t) = 250000.0 * std::exp(s.trend * static_cast<double>(t) + y);
    }
  }
  return p;
}

struct Period {
  std::string name;
  std::string start;  // YYYY-MM, inclusive
  std::string end;    // YYYY-MM, inclusive
};

struct HousingConfig {
  BasisKind basis = BasisKind::monomial;
  int degree = 2;
  int modes = 2;
  double war_threshold = 0.95;
  Index u_grid_size = 128;
  double u_lo = 0.005;
  double u_hi = 0.995;
  /// Refit KDE, Koopman model and WAR at every origin on all data up to it.
  bool refit = false;
  std::vector<Period> periods;
  /// Reference means printed next to the measured ones for a real panel.
  std::optional<std::pair<double, double>> reference;

  Eigen::VectorXd u_grid() const { return uniform_probability_grid(u_grid_size, u_lo, u_hi); }
};

inline constexpr const char* kHousingMethods[] = {"dpdd", "war", "persistence"};

struct HousingRow {
  std::string date;
  double dpdd = std::numeric_limits<double>::quiet_NaN();
  double war = std::numeric_limits<double>::quiet_NaN();
  double persistence = std::numeric_limits<double>::quiet_NaN();
  std::string error;

  double value(int method) const { return method == 0 ? dpdd : method == 1 ? war : persistence; }
};

struct HousingReport {
  std::vector<HousingRow> rows;
  std::string split;
  Index training_months = 0;
  HousingConfig config;

  /// Mean over months where the method succeeded.
  double mean(int method) const {
    double acc = 0.0;
    Index n = 0;
    for (const auto& r : rows)
      if (!std::isnan(r.value(method))) {
        acc += r.value(method);
        ++n;
      }
    return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "date,method,w2_squared\n";
    for (const auto& r : rows)
      for (int m = 0; m < 3; ++m) os << r.date << ',' << kHousingMethods[m] << ',' << detail::format_double(r.value(m)) << '\n';
    return os.str();
  }

  nlohmann::ordered_json summary_json() const {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
    nlohmann::ordered_json j;
    j["split"] = split;
    j["training_months"] = training_months;
    j["test_months"] = rows.size();
    nlohmann::ordered_json methods;
    for (int m = 0; m < 3; ++m) {
      double mx = std::numeric_limits<double>::quiet_NaN();
      Index failures = 0;
      for (const auto& r : rows) {
        if (std::isnan(r.value(m)))
          ++failures;
        else if (std::isnan(mx) || r.value(m) > mx)
          mx = r.value(m);
      }
      methods[kHousingMethods[m]] = {{"mean", num(mean(m))}, {"max", num(mx)}, {"failures", failures}};
    }
    j["methods"] = methods;
    nlohmann::ordered_json periods = nlohmann::ordered_json::array();
    for (const auto& p : config.periods) {
      nlohmann::ordered_json e{{"name", p.name}, {"start", p.start}, {"end", p.end}};
      Index months = 0;
      for (int m = 0; m < 3; ++m) {
        double acc = 0.0;
        Index n = 0;
        for (const auto& r : rows)
          if (r.date >= p.start && r.date <= p.end && !std::isnan(r.value(m))) {
            acc += r.value(m);
            ++n;
          }
        months = std::max(months, n);
        e[kHousingMethods[m]] = n ? num(acc / static_cast<double>(n)) : nlohmann::ordered_json(nullptr);
      }
      e["months"] = months;
      periods.push_back(std::move(e));
    }
    j["periods"] = periods;
    if (config.reference) {
      j["reference"] = {{"dpdd", config.reference->first},
                        {"war", config.reference->second},
                        {"note", "reference means for the same protocol on the full metro panel"}};
    }
    return j;
  }
};

/// Index of the first test month.
inline std::size_t split_index(const std::vector<std::string>& dates, const std::string& split) {
  const auto m = detail::parse_month(split);
  if (!m) throw InvalidArgument("split date '" + split + "' is not YYYY-MM");
  const std::string key = detail::month_label(*m);
  for (std::size_t i = 0; i < dates.size(); ++i)
    if (dates[i] >= key) return i;
  return dates.size();
}

/// Rolling one-month-ahead forecasts over months split..T-1, scored by
/// W2^2 on the configured probability grid. DPDD pairs are per-metro
/// transitions of the training months; its KDE pools the same months.
inline HousingReport run_housing_experiment(const DistributionPanel& panel, const std::vector<std::string>& dates,
                                            std::size_t split, const HousingConfig& cfg = {}) {
  if (dates.size() != panel.size()) throw InvalidArgument("housing: one date per month required");
  if (split < 24) throw InvalidArgument("housing: split leaves fewer than 24 training months");
  if (split >= panel.size()) throw InvalidArgument("housing: split leaves no test months");
  if (panel.dim() != 1) throw InvalidArgument("housing: relative prices must be one-dimensional");
  const Eigen::VectorXd u = cfg.u_grid();

  DpddConfig dc;
  dc.basis = cfg.basis;
  dc.degree = cfg.degree;
  dc.truncation = TruncationRule::fixed(cfg.modes);
  dc.dt = 1.0;

  auto train_curves = [&](std::size_t end) {
    DistributionPanel sub;
    sub.snapshots.assign(panel.snapshots.begin(), panel.snapshots.begin() + static_cast<std::ptrdiff_t>(end));
    return quantile_matrix(sub, u);
  };

  HousingReport report;
  report.split = dates[split];
  report.training_months = static_cast<Index>(split);
  report.config = cfg;

  std::optional<DpddFit> dpdd;
  std::optional<WarModel> war;
  std::string dpdd_error, war_error;
  auto refit = [&](std::size_t end) {
    dpdd.reset();
    war.reset();
    dpdd_error.clear();
    war_error.clear();
    try {
      dpdd = fit_dpdd(panel, 0, end - 1, dc);
    } catch (const std::exception& e) {
      dpdd_error = std::string("dpdd: ") + e.what();
    }
    try {
      war = war_fit(train_curves(end), u, cfg.war_threshold);
    } catch (const std::exception& e) {
      war_error = std::string("war: ") + e.what();
    }
  };
  refit(split);

  for (std::size_t t = split; t < panel.size(); ++t) {
    if (cfg.refit && t > split) refit(t);
    HousingRow row;
    row.date = dates[t];
    std::vector<std::string> errs;
    const QuantileCurve target = empirical_quantiles(panel[t].col(0), u);
    const QuantileCurve origin = empirical_quantiles(panel[t - 1].col(0), u);
    if (dpdd) {
      try {
        const double w = w2_quantile_grid(dpdd->forecast(panel[t - 1], 1.0).quantiles(u), target);
        row.dpdd = w * w;
      } catch (const std::exception& e) {
        errs.push_back(std::string("dpdd: ") + e.what());
      }
    } else {
      errs.push_back(dpdd_error);
    }
    if (war) {
      const double w = w2_quantile_grid(war_forecast(*war, origin.values, 1), target);
      row.war = w * w;
    } else {
      errs.push_back(war_error);
    }
    const double w = w2_quantile_grid(origin, target);
    row.persistence = w * w;
    for (const auto& e : errs) row.error += (row.error.empty() ? "" : "; ") + e;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace dpdd
