// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossbar/errors.hpp"
#include "crossbar/problems.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

enum class MatrixSymmetry { General, Symmetric };

struct MatrixMarketData {
  SparseMatrix matrix;
  MatrixSymmetry symmetry = MatrixSymmetry::General;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool blank_or_comment(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '%';
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads a coordinate real general or symmetric MatrixMarket stream.
/// Symmetric files must list the lower triangle; it is mirrored on read.
inline MatrixMarketData read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("MatrixMarket: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || detail::lower(object) != "matrix") {
    throw FormatError("MatrixMarket: malformed header: " + line);
  }
  if (detail::lower(format) != "coordinate") {
    throw FormatError("MatrixMarket: only coordinate format is supported");
  }
  if (detail::lower(field) != "real") {
    throw FormatError("MatrixMarket: field '" + field + "' is not real");
  }
  MatrixMarketData out;
  const std::string sym = detail::lower(symmetry);
  if (sym == "symmetric") {
    out.symmetry = MatrixSymmetry::Symmetric;
  } else if (sym != "general") {
    throw FormatError("MatrixMarket: unsupported symmetry '" + symmetry + "'");
  }

  while (std::getline(in, line) && detail::blank_or_comment(line)) {
  }
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, entries = -1;
  if (!(size_line >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0) {
    throw FormatError("MatrixMarket: malformed size line: " + line);
  }
  if (out.symmetry == MatrixSymmetry::Symmetric && rows != cols) {
    throw FormatError("MatrixMarket: symmetric matrix must be square");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(entries) * (out.symmetry == MatrixSymmetry::Symmetric ? 2 : 1));
  long long read = 0;
  while (read < entries && std::getline(in, line)) {
    if (detail::blank_or_comment(line)) continue;
    std::istringstream entry(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(entry >> i >> j >> v)) throw FormatError("MatrixMarket: malformed entry: " + line);
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw FormatError("MatrixMarket: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") outside declared dimensions");
    }
    const auto r = static_cast<std::size_t>(i - 1);
    const auto c = static_cast<std::size_t>(j - 1);
    if (out.symmetry == MatrixSymmetry::Symmetric) {
      if (c > r) throw FormatError("MatrixMarket: symmetric file lists an upper-triangle entry");
      if (c != r) t.push_back({c, r, v});
    }
    t.push_back({r, c, v});
    ++read;
  }
  if (read != entries) {
    throw FormatError("MatrixMarket: expected " + std::to_string(entries) + " entries, found " +
                      std::to_string(read));
  }
  while (std::getline(in, line)) {
    if (!detail::blank_or_comment(line)) throw FormatError("MatrixMarket: trailing data after entries");
  }
  out.matrix = SparseMatrix::from_triplets(static_cast<std::size_t>(rows),
                                           static_cast<std::size_t>(cols), std::move(t));
  return out;
}

inline MatrixMarketData read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("MatrixMarket: cannot open " + path.string());
  return read_matrix_market(in);
}

inline void write_matrix_market(const SparseMatrix& a, std::ostream& out,
                                MatrixSymmetry symmetry = MatrixSymmetry::General) {
  if (symmetry == MatrixSymmetry::Symmetric && !a.is_symmetric()) {
    throw DimensionError("write_matrix_market: matrix is not symmetric");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (auto c : a.row_cols(i)) {
      if (symmetry == MatrixSymmetry::General || c <= i) ++count;
    }
  }
  out << "%%MatrixMarket matrix coordinate real "
      << (symmetry == MatrixSymmetry::Symmetric ? "symmetric" : "general") << '\n';
  out << a.rows() << ' ' << a.cols() << ' ' << count << '\n';
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto c = a.row_cols(i);
    const auto v = a.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (symmetry == MatrixSymmetry::Symmetric && c[k] > i) continue;
      out << i + 1 << ' ' << c[k] + 1 << ' ' << detail::format_double(v[k]) << '\n';
    }
  }
}

inline void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& path,
                                MatrixSymmetry symmetry = MatrixSymmetry::General) {
  std::ofstream out(path);
  if (!out) throw FormatError("MatrixMarket: cannot write " + path.string());
  write_matrix_market(a, out, symmetry);
}

/// Problem from a MatrixMarket file: b = ones, then Jacobi scaling.
inline ProblemInstance matrix_market_problem(const std::filesystem::path& path) {
  const MatrixMarketData data = read_matrix_market(path);
  if (!data.matrix.square()) throw DimensionError("matrix_market_problem: matrix is not square");
  const Vector ones(data.matrix.rows(), 1.0);
  return scaled_instance(data.matrix, ones, path.stem().string(),
                         {{"problem", "mm_file"},
                          {"source", path.filename().string()},
                          {"n", std::to_string(data.matrix.rows())}});
}

}  // namespace crossbar
