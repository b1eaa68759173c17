// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "crossbar/errors.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

/// Incomplete LU factors with no fill: L is unit lower triangular (its unit
/// diagonal is stored), U is upper triangular, both on the pattern of A.
struct Ilu0Factors {
  SparseMatrix L;
  SparseMatrix U;
};

/// ILU(0) in IKJ order without pivoting. Throws ZeroPivotError naming the
/// row whose pivot is missing or vanishes.
inline Ilu0Factors ilu0_build(const SparseMatrix& a) {
  if (!a.square()) throw DimensionError("ilu0_build: matrix is not square");
  const std::size_t n = a.rows();
  const auto off = a.row_offsets();
  const auto idx = a.col_indices();
  std::vector<double> lu(a.values().begin(), a.values().end());
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = a.row_cols(i);
    const auto it = std::lower_bound(c.begin(), c.end(), i);
    if (it == c.end() || *it != i) throw ZeroPivotError(i);
    diag[i] = off[i] + static_cast<std::size_t>(it - c.begin());
  }
  std::vector<long> where(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) where[idx[p]] = static_cast<long>(p);
    for (std::size_t p = off[i]; p < diag[i]; ++p) {
      const std::size_t k = idx[p];
      const double pivot = lu[diag[k]];
      if (pivot == 0.0) throw ZeroPivotError(k);
      lu[p] /= pivot;
      const double lik = lu[p];
      for (std::size_t q = diag[k] + 1; q < off[k + 1]; ++q) {
        const long w = where[idx[q]];
        if (w >= 0) lu[static_cast<std::size_t>(w)] -= lik * lu[q];
      }
    }
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) where[idx[p]] = -1;
    if (lu[diag[i]] == 0.0) throw ZeroPivotError(i);
  }
  std::vector<Triplet> lt, ut;
  for (std::size_t i = 0; i < n; ++i) {
    lt.push_back({i, i, 1.0});
    for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
      if (idx[p] < i) {
        lt.push_back({i, idx[p], lu[p]});
      } else {
        ut.push_back({i, idx[p], lu[p]});
      }
    }
  }
  return {SparseMatrix::from_triplets(n, n, std::move(lt)),
          SparseMatrix::from_triplets(n, n, std::move(ut))};
}

/// Solves L U x = r. Charges 2 (nnz(L) + nnz(U)).
inline Vector ilu0_solve(const Ilu0Factors& f, std::span<const double> r,
                         FlopCounter* counter = nullptr) {
  const std::size_t n = f.L.rows();
  detail::require_same_size(r.size(), n, "ilu0_solve");
  Vector y(r.begin(), r.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = f.L.row_cols(i);
    const auto v = f.L.row_values(i);
    double s = y[i];
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] < i) s -= v[k] * y[c[k]];
    }
    y[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const auto c = f.U.row_cols(ii);
    const auto v = f.U.row_values(ii);
    double s = y[ii];
    double d = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] == ii) {
        d = v[k];
      } else {
        s -= v[k] * y[c[k]];
      }
    }
    y[ii] = s / d;
  }
  if (counter) counter->charge(2 * (f.L.nnz() + f.U.nnz()));
  return y;
}

}  // namespace crossbar
