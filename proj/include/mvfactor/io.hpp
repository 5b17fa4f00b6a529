#pragma once

/// @file
/// CSV ingestion and result serialization.
///
/// Series CSV: one row per time point with p*q numeric fields, entry (i, j)
/// of Y_t at field (i - 1) * q + j. A non-numeric first row is a header, and
/// one extra leading field (a date or index) is dropped.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mvfactor/error.hpp"
#include "mvfactor/evaluation.hpp"
#include "mvfactor/factor_estimation.hpp"
#include "mvfactor/series.hpp"

namespace mvfactor::io {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Formats with 12 significant digits; infinities print as "inf".
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ReadOptions {
  bool demean = true;  // subtract each entry's temporal mean
};

inline MatrixSeries read_series_csv(const std::string& path, std::size_t p, std::size_t q,
                                    ReadOptions opts = {}) {
  if (p == 0 || q == 0) throw ConfigError("p and q must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  const std::size_t width = p * q;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_first = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    const bool first = !seen_first;
    seen_first = true;

    if (fields.size() == width + 1) {
      fields.erase(fields.begin());
    } else if (fields.size() != width) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields (p*q = " + std::to_string(p) + "*" +
                       std::to_string(q) + "), found " + std::to_string(fields.size()));
    }

    std::vector<double> values;
    values.reserve(width);
    bool numeric = true;
    std::size_t bad_field = 0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto v = parse_double(fields[k]);
      if (!v || !std::isfinite(*v)) {
        numeric = false;
        bad_field = k + 1;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (first) continue;  // header
      throw ParseError(path + ":" + std::to_string(line_no) + ": field " +
                       std::to_string(bad_field) + " is not a finite number");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");

  if (opts.demean) {
    std::vector<double> mean(width, 0.0);
    for (const auto& r : rows)
      for (std::size_t k = 0; k < width; ++k) mean[k] += r[k];
    for (double& m : mean) m /= static_cast<double>(rows.size());
    for (auto& r : rows)
      for (std::size_t k = 0; k < width; ++k) r[k] -= mean[k];
  }

  MatrixSeries series(p, q);
  for (auto& r : rows) series.push_back(Matrix(p, q, std::move(r)));
  return series;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

/// Writes a series in the layout read_series_csv expects, with full
/// precision so a read-back (without demeaning) is exact.
inline void write_series_csv(const std::string& path, const MatrixSeries& series) {
  auto out = open_for_write(path);
  for (std::size_t i = 0; i < series.p(); ++i)
    for (std::size_t j = 0; j < series.q(); ++j)
      out << (i + j == 0 ? "" : ",") << "y_" << (i + 1) << "_" << (j + 1);
  out << "\n";
  for (const auto& f : series.frames()) {
    bool first = true;
    for (double v : f.values()) {
      out << (first ? "" : ",") << format_exact(v);
      first = false;
    }
    out << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Per-index statistics and ratio curves for one (side, mode). Ratio vectors
/// may be shorter than the whiteness curves; missing cells are left empty.
struct CurveTable {
  Side side = Side::Row;
  Mode mode = Mode::TwoStep;
  std::vector<double> t_hat;
  std::vector<double> g_hat;
  std::vector<double> mr;
  std::vector<double> sr;
  std::vector<double> er;
};

inline CurveTable make_curve_table(const SideEstimates& s) {
  return {s.side, s.mode, s.curves.t_curve, s.curves.g_curve,
          s.mr.ratio_curve, s.sr.ratio_curve, s.er.ratio_curve};
}

inline std::string curves_file_name(Side side, Mode mode) {
  return "curves_" + to_string(side) + "_" + to_string(mode) + ".csv";
}

inline constexpr const char* kCurvesHeader = "i,T_hat,G_hat,MR,SR,ER";

inline void write_curves_csv(const std::string& path, const CurveTable& table) {
  auto out = open_for_write(path);
  out << kCurvesHeader << "\n";
  auto cell = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? format_number(v[i]) : std::string();
  };
  for (std::size_t i = 0; i < table.t_hat.size(); ++i) {
    out << (i + 1) << "," << cell(table.t_hat, i) << "," << cell(table.g_hat, i) << ","
        << cell(table.mr, i) << "," << cell(table.sr, i) << "," << cell(table.er, i) << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline CurveTable read_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCurvesHeader) {
    throw ParseError(path + ":1: expected header '" + std::string(kCurvesHeader) + "'");
  }
  CurveTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    auto need = [&](std::string_view s) {
      const auto v = parse_double(s);
      if (!v) throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
      return *v;
    };
    t.t_hat.push_back(need(f[1]));
    t.g_hat.push_back(need(f[2]));
    if (!f[3].empty()) t.mr.push_back(need(f[3]));
    if (!f[4].empty()) t.sr.push_back(need(f[4]));
    if (!f[5].empty()) t.er.push_back(need(f[5]));
  }
  return t;
}

/// Frequency-table cell in the x(under|over) style, x with three decimals.
inline std::string table_cell(const McTally& t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f(%zu|%zu)", t.x(), t.under, t.over);
  return buf;
}

inline constexpr const char* kMcHeader =
    "p,q,n,r,c,a,delta,omega,noise_case,loadings,replications,m,method,mode,side,label,"
    "exact,under,over,x,y,z,table";

inline void write_mc_csv(const std::string& path, const std::vector<McReport>& reports) {
  auto out = open_for_write(path);
  out << kMcHeader << "\n";
  for (const auto& rep : reports) {
    const auto& d = rep.cell.dgp;
    const std::string m = rep.cell.m ? std::to_string(*rep.cell.m)
                                     : std::to_string(kDefaultProjectionWidth);
    for (const auto& t : rep.tallies) {
      out << d.p << "," << d.q << "," << d.n << "," << d.r << "," << d.c << ","
          << format_number(d.a) << "," << format_number(d.delta) << "," << format_number(d.omega)
          << "," << to_string(d.noise_case) << "," << to_string(d.loadings) << ","
          << rep.cell.replications << "," << m << "," << to_string(t.method) << ","
          << to_string(t.mode) << "," << to_string(t.side) << "," << t.label() << "," << t.exact
          << "," << t.under << "," << t.over << "," << format_number(t.x()) << ","
          << format_number(t.y()) << "," << format_number(t.z()) << "," << table_cell(t) << "\n";
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline void write_cv_csv(const std::string& path, const CvReport& report) {
  auto out = open_for_write(path);
  out << "r,c,folds,rss\n";
  for (const auto& e : report.entries)
    out << e.r << "," << e.c << "," << report.folds << "," << format_number(e.rss) << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Parses "r:c,r:c,..." candidate lists.
inline std::vector<std::pair<std::size_t, std::size_t>> parse_candidates(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto item : split_fields(text)) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    auto as_size = [&](std::string_view s) {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || v == 0)
        throw ConfigError("candidates: bad entry '" + std::string(item) + "'");
      return v;
    };
    if (colon == std::string_view::npos)
      throw ConfigError("candidates: entry '" + std::string(item) + "' is not of the form r:c");
    out.emplace_back(as_size(trim(item.substr(0, colon))), as_size(trim(item.substr(colon + 1))));
  }
  if (out.empty()) throw ConfigError("candidates: empty list");
  return out;
}

}  // namespace mvfactor::io
