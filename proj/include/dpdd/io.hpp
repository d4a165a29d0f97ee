#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dpdd/common.hpp"
#include "dpdd/forecast.hpp"
#include "dpdd/koopman.hpp"
#include "dpdd/quantile.hpp"

namespace dpdd {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json complex_json(Complex z) { return nlohmann::ordered_json::array({z.real(), z.imag()}); }

inline Complex complex_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  return nlohmann::ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline nlohmann::ordered_json mode_json(const KoopmanMode& m) {
  nlohmann::ordered_json j;
  j["eigenvalue"] = complex_json(m.eigenvalue);
  j["rate"] = complex_json(m.rate);
  j["unstable"] = m.unstable;
  j["stationary_mean"] = complex_json(m.stationary_mean);
  auto& xi = j["xi"] = nlohmann::ordered_json::array();
  for (Index i = 0; i < m.xi.size(); ++i) xi.push_back(complex_json(m.xi(i)));
  return j;
}

inline KoopmanMode mode_from(const nlohmann::json& j, const Eigen::MatrixXd& whitening) {
  KoopmanMode m;
  m.eigenvalue = complex_from(j.at("eigenvalue"));
  m.rate = complex_from(j.at("rate"));
  m.unstable = j.at("unstable").get<bool>();
  m.stationary_mean = complex_from(j.at("stationary_mean"));
  const auto& xi = j.at("xi");
  m.xi.resize(static_cast<Index>(xi.size()));
  for (std::size_t i = 0; i < xi.size(); ++i) m.xi(static_cast<Index>(i)) = complex_from(xi[i]);
  if (whitening.rows() == m.xi.size()) {
    // xi = W xi_w; W is symmetric, so recover xi_w by least squares.
    m.xi_whitened = whitening.cast<Complex>().completeOrthogonalDecomposition().solve(m.xi);
  }
  return m;
}

}  // namespace detail

/// Model file: dictionary descriptor, spectrum, modes, and the KDE (samples
/// and bandwidth) so forecasts can be reproduced from the file alone.
inline nlohmann::ordered_json model_to_json(const KoopmanModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "dpdd-model";
  j["version"] = kModelFormatVersion;
  j["dim"] = m.dim();
  j["dt"] = m.dt;
  j["dictionary"] = {{"kind", to_string(m.dictionary.kind())},
                     {"max_degree", m.dictionary.max_degree()},
                     {"size", m.dictionary.size()},
                     {"shift", detail::vector_json(m.dictionary.standardization().shift)},
                     {"scale", detail::vector_json(m.dictionary.standardization().scale)}};
  j["normalization"] = to_string(m.normalization);
  j["regularized"] = m.regularized;
  auto& spec = j["spectrum"] = nlohmann::ordered_json::array();
  for (const auto& z : m.spectrum) spec.push_back(detail::complex_json(z));
  auto& rates = j["rates"] = nlohmann::ordered_json::array();
  for (const auto& mode : m.modes) rates.push_back(detail::complex_json(mode.rate));
  auto& modes = j["modes"] = nlohmann::ordered_json::array();
  for (const auto& mode : m.modes) modes.push_back(detail::mode_json(mode));
  j["trivial"] = m.trivial ? detail::mode_json(*m.trivial) : nlohmann::ordered_json(nullptr);
  auto& op = j["operator"] = nlohmann::ordered_json::array();  // row-major
  for (Index r = 0; r < m.op.rows(); ++r) op.push_back(detail::vector_json(m.op.row(r).transpose()));
  auto& w = j["whitening"] = nlohmann::ordered_json::array();
  for (Index r = 0; r < m.whitening.rows(); ++r) w.push_back(detail::vector_json(m.whitening.row(r).transpose()));
  j["diagnostics"] = m.diagnostics;
  if (m.density) {
    const KdeModel& k = *m.density;
    nlohmann::ordered_json kde;
    kde["bandwidth"] = detail::vector_json(k.bandwidth());
    auto& samples = kde["samples"] = nlohmann::ordered_json::array();
    for (Index r = 0; r < k.sample_count(); ++r) samples.push_back(detail::vector_json(k.samples().row(r).transpose()));
    j["kde"] = std::move(kde);
  } else {
    j["kde"] = nullptr;
  }
  return j;
}

inline KoopmanModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dpdd-model") throw InvalidArgument("model file: wrong format tag");
    if (j.at("version").get<int>() != kModelFormatVersion) throw InvalidArgument("model file: unsupported version");
    const int dim = j.at("dim").get<int>();
    const auto& d = j.at("dictionary");
    Standardization s{detail::vector_from(d.at("shift")), detail::vector_from(d.at("scale"))};
    Dictionary dict(basis_kind_from_string(d.at("kind").get<std::string>()), d.at("max_degree").get<int>(), dim, s);
    if (dict.size() != d.at("size").get<int>()) throw InvalidArgument("model file: dictionary size mismatch");
    KoopmanModel m{dict, j.at("dt").get<double>()};
    m.normalization = mode_normalization_from_string(j.at("normalization").get<std::string>());
    m.regularized = j.at("regularized").get<bool>();
    const auto& op = j.at("operator");
    if (static_cast<int>(op.size()) != dict.size()) throw InvalidArgument("model file: operator size mismatch");
    m.op.resize(dict.size(), dict.size());
    for (std::size_t r = 0; r < op.size(); ++r) m.op.row(static_cast<Index>(r)) = detail::vector_from(op[r]).transpose();
    const auto& w = j.at("whitening");
    m.whitening.resize(static_cast<Index>(w.size()), static_cast<Index>(w.size()));
    for (std::size_t r = 0; r < w.size(); ++r) m.whitening.row(static_cast<Index>(r)) = detail::vector_from(w[r]).transpose();
    for (const auto& z : j.at("spectrum")) m.spectrum.push_back(detail::complex_from(z));
    for (const auto& mode : j.at("modes")) {
      m.modes.push_back(detail::mode_from(mode, m.whitening));
      if (m.modes.back().xi.size() != dict.size()) throw InvalidArgument("model file: mode length mismatch");
    }
    if (!j.at("trivial").is_null()) m.trivial = detail::mode_from(j.at("trivial"), m.whitening);
    m.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    if (!j.at("kde").is_null()) {
      const auto& kde = j.at("kde");
      const auto& rows = kde.at("samples");
      Points pts(static_cast<Index>(rows.size()), dim);
      for (std::size_t r = 0; r < rows.size(); ++r) pts.row(static_cast<Index>(r)) = detail::vector_from(rows[r]).transpose();
      m.density = std::make_shared<const KdeModel>(pts, detail::vector_from(kde.at("bandwidth")));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model file: ") + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("'" + path + "': " + e.what());
  }
}

/// Grid density as CSV: one coordinate column per axis, then density.
inline std::string forecast_to_csv(const ForecastDensity& f) {
  std::ostringstream os;
  for (int a = 0; a < f.dim(); ++a) os << 'x' << a + 1 << ',';
  os << "density\n";
  const Points pts = f.grid.points();
  char buf[32];
  for (Index i = 0; i < pts.rows(); ++i) {
    for (int a = 0; a < f.dim(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", pts(i, a));
      os << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", f.values(i));
    os << buf << '\n';
  }
  return os.str();
}

inline std::string quantile_curve_to_csv(const QuantileCurve& q) {
  std::ostringstream os;
  os << "u,q\n";
  char buf[64];
  for (Index i = 0; i < q.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", q.grid(i), q.values(i));
    os << buf;
  }
  return os.str();
}

}  // namespace dpdd
