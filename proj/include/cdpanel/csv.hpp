#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdpanel/errors.hpp"
#include "cdpanel/panel.hpp"

namespace cdpanel {

enum class CsvLayout { Wide, Long };

inline CsvLayout csv_layout_from_string(std::string_view s) {
  if (s == "wide" || s == "WIDE") return CsvLayout::Wide;
  if (s == "long" || s == "LONG") return CsvLayout::Long;
  throw InputError("unknown CSV layout '" + std::string(s) + "' (expected wide or long)");
}

/// Column designations for LONG files. Empty names fall back to positions 0, 1, 2.
struct CsvColumns {
  std::string unit = "unit";
  std::string time = "time";
  std::string value = "value";
  std::vector<std::string> regressors;      // x columns, vary by unit and period
  std::vector<std::string> common_factors;  // d columns, identical across units
};

/// A balanced panel read from disk with its labels and optional covariates.
struct PanelData {
  PanelMatrix y;
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  std::vector<std::string> regressor_names;
  std::vector<Eigen::MatrixXd> X;  // per unit, T x k_x; empty when no regressors
  std::vector<std::string> common_factor_names;
  Eigen::MatrixXd D;  // T x k_d
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field(line.data() + start,
                                 (comma == std::string::npos ? line.size() : comma) - start);
    out.emplace_back(trim(field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(std::string_view text, std::size_t line, std::string_view column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError("line " + std::to_string(line) + ", column '" + std::string(column) +
                     "': cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

inline bool is_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

/// Sorted distinct labels: numeric order when every label is a number, else lexicographic.
inline std::vector<std::string> sorted_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (std::all_of(labels.begin(), labels.end(), is_number)) {
    std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return std::stod(a) < std::stod(b);
    });
  }
  return labels;
}

inline bool read_record(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) return true;
  }
  return false;
}

inline std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                               std::size_t fallback) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  if (fallback < header.size()) return fallback;
  throw ParseError("column '" + name + "' not found in header");
}

inline std::size_t require_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

/// WIDE: header row (first cell names the unit column, the rest are period labels),
/// then one row per unit with its label first.
inline PanelData parse_wide_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::read_record(in, line, line_no)) throw ParseError("empty CSV input");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3) throw ParseError("WIDE header needs a unit column and at least two periods");
  PanelData data;
  data.time_labels.assign(header.begin() + 1, header.end());
  const std::size_t T = data.time_labels.size();

  std::vector<std::vector<double>> rows;
  while (detail::read_record(in, line, line_no)) {
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != T + 1) {
      throw UnbalancedPanel("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(T + 1) + " fields, found " +
                            std::to_string(fields.size()));
    }
    if (std::find(data.unit_labels.begin(), data.unit_labels.end(), fields[0]) !=
        data.unit_labels.end()) {
      throw DuplicateCell("line " + std::to_string(line_no) + ": unit '" + fields[0] +
                          "' appears twice");
    }
    data.unit_labels.push_back(fields[0]);
    std::vector<double> row(T);
    for (std::size_t t = 0; t < T; ++t) {
      row[t] = detail::parse_number(fields[t + 1], line_no, header[t + 1]);
    }
    rows.push_back(std::move(row));
  }
  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(T));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[i][t];
    }
  }
  data.y = PanelMatrix(std::move(values));
  return data;
}

/// LONG: header row, then one row per (unit, time) cell. Sorted internally by (unit, time).
inline PanelData parse_long_csv(std::istream& in, const CsvColumns& cols = {}) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::read_record(in, line, line_no)) throw ParseError("empty CSV input");
  const auto header = detail::split_csv_line(line);
  const std::size_t ucol = detail::find_column(header, cols.unit, 0);
  const std::size_t tcol = detail::find_column(header, cols.time, 1);
  const std::size_t vcol = detail::find_column(header, cols.value, 2);
  std::vector<std::size_t> xcols, dcols;
  for (const auto& name : cols.regressors) xcols.push_back(detail::require_column(header, name));
  for (const auto& name : cols.common_factors) dcols.push_back(detail::require_column(header, name));

  struct Cell {
    double y;
    std::vector<double> x, d;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  std::vector<std::string> units, times;
  while (detail::read_record(in, line, line_no)) {
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    Cell c;
    c.y = detail::parse_number(f[vcol], line_no, header[vcol]);
    for (std::size_t k : xcols) c.x.push_back(detail::parse_number(f[k], line_no, header[k]));
    for (std::size_t k : dcols) c.d.push_back(detail::parse_number(f[k], line_no, header[k]));
    auto key = std::make_pair(f[ucol], f[tcol]);
    if (!cells.emplace(key, std::move(c)).second) {
      throw DuplicateCell("line " + std::to_string(line_no) + ": duplicate cell (unit '" +
                          key.first + "', time '" + key.second + "')");
    }
    units.push_back(f[ucol]);
    times.push_back(f[tcol]);
  }

  PanelData data;
  data.unit_labels = detail::sorted_labels(std::move(units));
  data.time_labels = detail::sorted_labels(std::move(times));
  data.regressor_names = cols.regressors;
  data.common_factor_names = cols.common_factors;
  const auto n = static_cast<Eigen::Index>(data.unit_labels.size());
  const auto T = static_cast<Eigen::Index>(data.time_labels.size());
  const auto kx = static_cast<Eigen::Index>(xcols.size());
  const auto kd = static_cast<Eigen::Index>(dcols.size());

  Matrix values(n, T);
  if (kx > 0) data.X.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(T, kx));
  data.D.resize(T, kd);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& u = data.unit_labels[static_cast<std::size_t>(i)];
      const auto& tl = data.time_labels[static_cast<std::size_t>(t)];
      const auto it = cells.find({u, tl});
      if (it == cells.end()) {
        throw UnbalancedPanel("missing cell (unit '" + u + "', time '" + tl + "')");
      }
      const Cell& c = it->second;
      values(i, t) = c.y;
      for (Eigen::Index k = 0; k < kx; ++k) data.X[static_cast<std::size_t>(i)](t, k) = c.x[static_cast<std::size_t>(k)];
      for (Eigen::Index k = 0; k < kd; ++k) {
        const double v = c.d[static_cast<std::size_t>(k)];
        if (i == 0) {
          data.D(t, k) = v;
        } else if (v != data.D(t, k)) {
          throw ParseError("common factor column '" + cols.common_factors[static_cast<std::size_t>(k)] +
                           "' differs across units at time '" + tl + "'");
        }
      }
    }
  }
  data.y = PanelMatrix(std::move(values));
  return data;
}

inline PanelData load_panel_csv(const std::string& path, CsvLayout layout,
                                const CsvColumns& cols = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  if (layout == CsvLayout::Wide) {
    if (!cols.regressors.empty() || !cols.common_factors.empty()) {
      throw InputError("regressor and common-factor columns need the LONG layout");
    }
    return parse_wide_csv(in);
  }
  return parse_long_csv(in, cols);
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void write_wide_csv(std::ostream& out, const PanelMatrix& panel,
                           const std::vector<std::string>& unit_labels = {},
                           const std::vector<std::string>& time_labels = {}) {
  out << "unit";
  for (std::size_t t = 0; t < panel.T(); ++t) {
    out << ',' << (t < time_labels.size() ? time_labels[t] : std::to_string(t + 1));
  }
  out << '\n';
  for (std::size_t i = 0; i < panel.n(); ++i) {
    out << (i < unit_labels.size() ? unit_labels[i] : std::to_string(i + 1));
    for (std::size_t t = 0; t < panel.T(); ++t) out << ',' << format_real(panel(i, t));
    out << '\n';
  }
}

}  // namespace cdpanel
