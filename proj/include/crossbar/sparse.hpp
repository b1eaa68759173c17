// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "crossbar/errors.hpp"

namespace crossbar {

using Vector = std::vector<double>;

/// Work tally for one solve. Digital FLOPs follow the fused-multiply-add
/// convention: an AXPY or a dot/norm on n entries costs n, a sparse
/// matrix-vector product costs 2 nnz.
struct FlopCounter {
  std::uint64_t digital_flops = 0;
  std::uint64_t analog_mvms = 0;

  void charge(std::uint64_t flops) noexcept { digital_flops += flops; }
  friend bool operator==(const FlopCounter&, const FlopCounter&) = default;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix.
///
/// Invariants: row offsets are nondecreasing with `rows()+1` entries ending at
/// nnz; column indices within a row are strictly increasing and below
/// `cols()`; no stored value is exactly zero.
class SparseMatrix {
 public:
  SparseMatrix() : row_offsets_(1, 0) {}

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  /// Builds from unordered triplets; duplicates are summed and exact zeros
  /// (including cancellations) are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) {
        throw DimensionError("triplet (" + std::to_string(t.row) + ", " +
                             std::to_string(t.col) + ") outside " + std::to_string(rows) +
                             "x" + std::to_string(cols));
      }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(rows + 1, 0);
    std::vector<std::size_t> cols_out;
    std::vector<double> vals;
    cols_out.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
      const auto r = triplets[k].row;
      const auto c = triplets[k].col;
      double sum = 0.0;
      for (; k < triplets.size() && triplets[k].row == r && triplets[k].col == c; ++k) {
        sum += triplets[k].value;
      }
      if (sum != 0.0) {
        cols_out.push_back(c);
        vals.push_back(sum);
        ++offsets[r + 1];
      }
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return SparseMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
  }

  static SparseMatrix identity(std::size_t n) { return diagonal(Vector(n, 1.0)); }

  static SparseMatrix diagonal(std::span<const double> d) {
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return from_triplets(d.size(), d.size(), std::move(t));
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& dense) {
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
      for (Eigen::Index j = 0; j < dense.cols(); ++j) {
        if (dense(i, j) != 0.0) {
          t.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dense(i, j)});
        }
      }
    }
    return from_triplets(static_cast<std::size_t>(dense.rows()),
                         static_cast<std::size_t>(dense.cols()), std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const noexcept {
    return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }

  /// Entry (i, j), zero when not stored.
  double at(std::size_t i, std::size_t j) const {
    const auto c = row_cols(i);
    const auto it = std::lower_bound(c.begin(), c.end(), j);
    if (it == c.end() || *it != j) return 0.0;
    return values_[row_offsets_[i] + static_cast<std::size_t>(it - c.begin())];
  }

  SparseMatrix transpose() const {
    std::vector<std::size_t> offsets(cols_ + 1, 0);
    for (auto c : col_indices_) ++offsets[c + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<std::size_t> next(offsets.begin(), offsets.end() - 1);
    std::vector<std::size_t> idx(nnz());
    std::vector<double> vals(nnz());
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const auto dst = next[col_indices_[k]]++;
        idx[dst] = i;
        vals[dst] = values_[k];
      }
    }
    return SparseMatrix(cols_, rows_, std::move(offsets), std::move(idx), std::move(vals));
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_),
                                              static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_indices_[k])) = values_[k];
      }
    }
    return d;
  }

  Vector diagonal_values() const {
    Vector d(std::min(rows_, cols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
    return d;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Exact structural and numerical symmetry.
  bool is_symmetric() const {
    if (!square()) return false;
    const SparseMatrix t = transpose();
    return t.row_offsets_ == row_offsets_ && t.col_indices_ == col_indices_ &&
           t.values_ == values_;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  void validate() const {
    if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
      throw DimensionError("inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1]) throw DimensionError("row offsets decrease");
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        if (col_indices_[k] >= cols_) throw DimensionError("column index out of range");
        if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1]) {
          throw DimensionError("column indices not strictly increasing in row " +
                               std::to_string(i));
        }
        if (values_[k] == 0.0) throw DimensionError("explicit zero stored");
      }
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

/// y = A x. Charges 2 nnz(A) when a counter is given.
inline Vector spmv(const SparseMatrix& a, std::span<const double> x,
                   FlopCounter* counter = nullptr) {
  detail::require_same_size(x.size(), a.cols(), "spmv");
  Vector y(a.rows(), 0.0);
  const auto off = a.row_offsets();
  const auto idx = a.col_indices();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) s += val[k] * x[idx[k]];
    y[i] = s;
  }
  if (counter) counter->charge(2 * a.nnz());
  return y;
}

/// y = A^T x without forming the transpose.
inline Vector spmv_transpose(const SparseMatrix& a, std::span<const double> x) {
  detail::require_same_size(x.size(), a.rows(), "spmv_transpose");
  Vector y(a.cols(), 0.0);
  const auto off = a.row_offsets();
  const auto idx = a.col_indices();
  const auto val = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) y[idx[k]] += val[k] * x[i];
  }
  return y;
}

/// alpha x + y. Charges n.
inline Vector axpy(double alpha, std::span<const double> x, std::span<const double> y,
                   FlopCounter* counter = nullptr) {
  detail::require_same_size(x.size(), y.size(), "axpy");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * x[i];
  if (counter) counter->charge(x.size());
  return out;
}

/// Euclidean norm. Charges n.
inline double norm2(std::span<const double> x, FlopCounter* counter = nullptr) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (counter) counter->charge(x.size());
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double ssq = 0.0;
  for (double v : x) ssq += (v / scale) * (v / scale);
  return scale * std::sqrt(ssq);
}

inline double norm_inf(std::span<const double> x) noexcept {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  detail::require_same_size(x.size(), y.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double frobenius_norm(const SparseMatrix& a) { return norm2(a.values()); }

/// Sparse product A B (Gustavson); used to form small operators in tests and
/// diagnostics, never inside a timed solve.
inline SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
  detail::require_same_size(a.cols(), b.rows(), "multiply");
  std::vector<Triplet> t;
  Vector acc(b.cols(), 0.0);
  std::vector<char> used(b.cols(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    touched.clear();
    const auto ac = a.row_cols(i);
    const auto av = a.row_values(i);
    for (std::size_t p = 0; p < ac.size(); ++p) {
      const auto bc = b.row_cols(ac[p]);
      const auto bv = b.row_values(ac[p]);
      for (std::size_t q = 0; q < bc.size(); ++q) {
        if (!used[bc[q]]) {
          used[bc[q]] = 1;
          touched.push_back(bc[q]);
        }
        acc[bc[q]] += av[p] * bv[q];
      }
    }
    for (auto j : touched) {
      t.push_back({i, j, acc[j]});
      acc[j] = 0.0;
      used[j] = 0;
    }
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(t));
}

}  // namespace crossbar
