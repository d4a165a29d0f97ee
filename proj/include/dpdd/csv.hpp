#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dpdd/common.hpp"

namespace dpdd {

/// Comma-separated records with double-quote escaping. Blank lines are
/// skipped; a trailing '\r' is dropped.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  auto end_row = [&] {
    if (any || !field.empty() || !row.empty()) {
      row.push_back(field);
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    any = false;
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; any = true; break;
      case ',':
        row.push_back(field);
        field.clear();
        any = true;
        break;
      case '\r': break;
      case '\n': end_row(); break;
      default: field += c;
    }
  }
  if (quoted) throw InvalidArgument("csv: unterminated quoted field");
  end_row();
  return rows;
}

inline std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_csv(in);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

/// Strict decimal parse of a whole field.
inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

/// Numeric matrix from a CSV file, one point per row. A first row that does
/// not parse as numbers is taken as a header.
inline Points read_points_csv(const std::string& path) {
  const auto rows = read_csv_file(path);
  std::size_t first = 0;
  if (!rows.empty()) {
    double v;
    for (const auto& f : rows[0])
      if (!parse_double(f, v)) {
        first = 1;
        break;
      }
  }
  if (rows.size() <= first) throw InvalidArgument("'" + path + "' has no data rows");
  const std::size_t d = rows[first].size();
  Points p(static_cast<Index>(rows.size() - first), static_cast<Index>(d));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != d)
      throw InvalidArgument("'" + path + "' line " + std::to_string(r + 1) + ": expected " + std::to_string(d) +
                            " columns, got " + std::to_string(rows[r].size()));
    for (std::size_t c = 0; c < d; ++c) {
      double v;
      if (!parse_double(rows[r][c], v) || !std::isfinite(v))
        throw InvalidArgument("'" + path + "' line " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                              ": not a number: '" + rows[r][c] + "'");
      p(static_cast<Index>(r - first), static_cast<Index>(c)) = v;
    }
  }
  return p;
}

/// Field and number formatting for CSV output.
namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

}  // namespace dpdd
