// Copyright 2026 the sparsekit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"

namespace sparsekit {

enum class MatrixFormat { kMatrixMarket, kCsv };

inline MatrixFormat parse_matrix_format(const std::string &name) {
  if (name == "matrix-market" || name == "mtx") return MatrixFormat::kMatrixMarket;
  if (name == "csv") return MatrixFormat::kCsv;
  throw ConfigError("unknown format '" + name + "' (expected matrix-market or csv)");
}

/// .csv means CSV; anything else is read as Matrix Market.
inline MatrixFormat format_from_path(const std::filesystem::path &path) {
  return path.extension() == ".csv" ? MatrixFormat::kCsv : MatrixFormat::kMatrixMarket;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string &what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view token, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    parse_fail(line, "expected a number, got '" + std::string(token) + "'");
  }
  return value;
}

inline std::size_t parse_count(std::string_view token, std::size_t line) {
  token = trim(token);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    parse_fail(line, "expected a non-negative integer, got '" + std::string(token) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline void write_double(std::ostream &out, double value) {
  char buffer[32];
  const auto res = std::to_chars(buffer, buffer + sizeof buffer, value);
  out.write(buffer, res.ptr - buffer);
}

}  // namespace detail

/// Reads a real Matrix Market matrix; row i becomes vector i. Coordinate files
/// give sparse rows, symmetric files are expanded.
inline VectorFamily read_matrix_market(std::istream &in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("line 1: empty input");
  ++line_no;
  const auto header = detail::split_whitespace(line);
  if (header.size() != 5 || detail::lower(header[0]) != "%%matrixmarket" ||
      detail::lower(header[1]) != "matrix") {
    detail::parse_fail(line_no, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'");
  }
  const std::string layout = detail::lower(header[2]);
  const std::string field = detail::lower(header[3]);
  const std::string symmetry = detail::lower(header[4]);
  if (layout != "array" && layout != "coordinate") {
    detail::parse_fail(line_no, "unsupported layout '" + layout + "'");
  }
  if (field != "real" && field != "integer" && field != "double") {
    detail::parse_fail(line_no, "unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    detail::parse_fail(line_no, "unsupported symmetry '" + symmetry + "'");
  }
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&](std::string &out) {
    while (std::getline(in, out)) {
      ++line_no;
      const auto t = detail::trim(out);
      if (!t.empty() && t.front() != '%') return true;
    }
    return false;
  };

  if (!next_data_line(line)) detail::parse_fail(line_no + 1, "missing size line");
  const auto size_tokens = detail::split_whitespace(line);
  const std::size_t expect = layout == "array" ? 2 : 3;
  if (size_tokens.size() != expect) {
    detail::parse_fail(line_no, "size line needs " + std::to_string(expect) + " integers");
  }
  const std::size_t rows = detail::parse_count(size_tokens[0], line_no);
  const std::size_t cols = detail::parse_count(size_tokens[1], line_no);
  if (symmetric && rows != cols) detail::parse_fail(line_no, "symmetric matrix must be square");

  if (layout == "array") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(cols));
    // Column-major; symmetric files store the lower triangle only.
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = symmetric ? j : 0; i < rows; ++i) {
        if (!next_data_line(line)) {
          detail::parse_fail(line_no + 1, "expected " + std::to_string(rows * cols) +
                                              " entries, input ended early");
        }
        const auto tokens = detail::split_whitespace(line);
        if (tokens.size() != 1) detail::parse_fail(line_no, "expected one value per line");
        const double v = detail::parse_double(tokens[0], line_no);
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        if (symmetric) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
    if (next_data_line(line)) detail::parse_fail(line_no, "more entries than the header declares");
    return VectorFamily::from_rows(m);
  }

  const std::size_t entries = detail::parse_count(size_tokens[2], line_no);
  std::vector<std::vector<std::size_t>> idx(rows);
  std::vector<std::vector<double>> val(rows);
  for (std::size_t k = 0; k < entries; ++k) {
    if (!next_data_line(line)) {
      detail::parse_fail(line_no + 1, "expected " + std::to_string(entries) +
                                          " entries, input ended early");
    }
    const auto tokens = detail::split_whitespace(line);
    if (tokens.size() != 3) detail::parse_fail(line_no, "expected 'row col value'");
    const std::size_t i = detail::parse_count(tokens[0], line_no);
    const std::size_t j = detail::parse_count(tokens[1], line_no);
    if (i < 1 || i > rows || j < 1 || j > cols) {
      detail::parse_fail(line_no, "entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") outside " + std::to_string(rows) + " x " +
                                      std::to_string(cols));
    }
    const double v = detail::parse_double(tokens[2], line_no);
    idx[i - 1].push_back(j - 1);
    val[i - 1].push_back(v);
    if (symmetric && i != j) {
      idx[j - 1].push_back(i - 1);
      val[j - 1].push_back(v);
    }
  }
  if (next_data_line(line)) detail::parse_fail(line_no, "more entries than the header declares");
  VectorFamily family(cols);
  for (std::size_t i = 0; i < rows; ++i) family.add_sparse(idx[i], val[i]);
  return family;
}

/// Comma-separated rows of equal length; blank lines and lines starting with '#' are skipped.
inline VectorFamily read_csv(std::istream &in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Vector> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = t.find(',', start);
      values.push_back(detail::parse_double(t.substr(start, comma - start), line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows.empty()) {
      width = values.size();
    } else if (values.size() != width) {
      detail::parse_fail(line_no, "row has " + std::to_string(values.size()) +
                                      " columns, expected " + std::to_string(width));
    }
    rows.emplace_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(width)));
  }
  VectorFamily family(width);
  for (const auto &r : rows) family.add(r);
  return family;
}

/// Array layout by default; coordinate layout lists only the nonzeros.
inline void write_matrix_market(std::ostream &out, const VectorFamily &family,
                                bool coordinate = false) {
  const std::size_t m = family.size();
  const std::size_t d = family.dim();
  out << "%%MatrixMarket matrix " << (coordinate ? "coordinate" : "array") << " real general\n";
  if (coordinate) {
    std::size_t nnz = 0;
    for (std::size_t i = 0; i < m; ++i) nnz += family.nnz(i);
    out << m << ' ' << d << ' ' << nnz << '\n';
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j : family.support(i)) {
        out << i + 1 << ' ' << j + 1 << ' ';
        detail::write_double(out, family[i][static_cast<Eigen::Index>(j)]);
        out << '\n';
      }
    }
    return;
  }
  out << m << ' ' << d << '\n';
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      detail::write_double(out, family[i][static_cast<Eigen::Index>(j)]);
      out << '\n';
    }
  }
}

inline void write_csv(std::ostream &out, const VectorFamily &family) {
  for (std::size_t i = 0; i < family.size(); ++i) {
    for (std::size_t j = 0; j < family.dim(); ++j) {
      if (j > 0) out << ',';
      detail::write_double(out, family[i][static_cast<Eigen::Index>(j)]);
    }
    out << '\n';
  }
}

inline VectorFamily parse_matrix_file(const std::filesystem::path &path, MatrixFormat format) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return format == MatrixFormat::kCsv ? read_csv(in) : read_matrix_market(in);
  } catch (const ParseError &e) {
    const std::size_t prefix = error_name(ErrorCode::kParse).size() + 2;
    throw ParseError(path.string() + ": " + std::string(e.what()).substr(prefix));
  }
}

inline void write_matrix_file(const std::filesystem::path &path, const VectorFamily &family,
                              MatrixFormat format) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  if (format == MatrixFormat::kCsv) {
    write_csv(out, family);
  } else {
    write_matrix_market(out, family);
  }
}

/// A weight vector stored as one value per line (a single-column matrix).
inline std::vector<double> parse_weight_file(const std::filesystem::path &path,
                                             MatrixFormat format) {
  const VectorFamily w = parse_matrix_file(path, format);
  if (w.dim() != 1) {
    throw DimensionMismatch("weight file must have one column, found " +
                            std::to_string(w.dim()));
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i][0];
  return out;
}

}  // namespace sparsekit
