// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "crossbar/errors.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

/// Controls for adaptive sparse-approximate-inverse construction.
struct SpaiParams {
  /// Target for |A M(:,j) - e_j|_2.
  double tol = 5.0e-2;
  /// Global fill budget as a multiple of nnz(A); each column may hold at most
  /// ceil(budget / n) entries.
  double budget_factor = 40.0;
  std::size_t max_new_per_step = 5;
  std::size_t max_steps_per_column = 64;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("spai: tol must be positive");
    if (!(budget_factor > 0.0)) throw std::invalid_argument("spai: budget factor must be positive");
    if (max_new_per_step == 0) throw std::invalid_argument("spai: max_new_per_step must be >= 1");
  }
};

struct SpaiResult {
  SparseMatrix M;
  /// Final |A M(:,j) - e_j|_2 per column.
  Vector column_residual;
  /// True when the column stopped on the fill cap or step limit above tol.
  std::vector<char> capped;
  /// Residual after every growth step, per column.
  std::vector<Vector> residual_history;
  std::size_t capped_columns = 0;
  std::size_t skipped_candidates = 0;
  /// Per-column entry limit actually applied.
  std::size_t column_cap = 0;
  /// Approximate digital work spent in the least-squares solves and scoring.
  double build_flops = 0.0;
  std::string warning;
};

/// Adaptive SPAI: for each column j start from pattern {j}, solve the
/// least-squares problem min |A(:,J) m - e_j| by QR, and enlarge J with the
/// candidates that promise the largest one-step residual reduction.
inline SpaiResult spai_build(const SparseMatrix& a, const SpaiParams& params = {}) {
  params.validate();
  if (!a.square()) throw DimensionError("spai_build: matrix is not square");
  const std::size_t n = a.rows();
  const double budget = params.budget_factor * static_cast<double>(a.nnz());
  if (n > 0 && budget < static_cast<double>(n)) {
    throw std::invalid_argument("spai_build: fill budget below n");
  }

  const SparseMatrix at = a.transpose();  // row k of at is column k of a
  Vector col_norm2(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (double v : at.row_values(k)) col_norm2[k] += v * v;
  }

  SpaiResult res;
  res.column_cap = n == 0 ? 0 : static_cast<std::size_t>(std::ceil(budget / static_cast<double>(n)));
  res.column_cap = std::max<std::size_t>(res.column_cap, 1);
  res.column_residual.assign(n, 0.0);
  res.capped.assign(n, 0);
  res.residual_history.resize(n);

  std::vector<Triplet> entries;
  std::vector<long> local_row(n, -1);
  std::vector<char> in_pattern(n, 0);
  std::vector<char> is_candidate(n, 0);
  Vector residual(n, 0.0);

  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::size_t> pattern{j};
    in_pattern[j] = 1;
    Eigen::VectorXd coef;
    std::vector<std::size_t> rows;
    double rnorm = 1.0;

    for (std::size_t step = 0;; ++step) {
      // Shadow rows: union of the row patterns of A(:, pattern).
      rows.clear();
      for (auto k : pattern) {
        for (auto i : at.row_cols(k)) {
          if (local_row[i] < 0) {
            local_row[i] = 0;
            rows.push_back(i);
          }
        }
      }
      std::sort(rows.begin(), rows.end());
      for (std::size_t p = 0; p < rows.size(); ++p) local_row[rows[p]] = static_cast<long>(p);

      // Least-squares solve; drop trailing candidates while rank deficient.
      for (;;) {
        const auto nr = static_cast<Eigen::Index>(rows.size());
        const auto nc = static_cast<Eigen::Index>(pattern.size());
        Eigen::MatrixXd sub = Eigen::MatrixXd::Zero(nr, nc);
        for (Eigen::Index q = 0; q < nc; ++q) {
          const auto k = pattern[static_cast<std::size_t>(q)];
          const auto c = at.row_cols(k);
          const auto v = at.row_values(k);
          for (std::size_t t = 0; t < c.size(); ++t) {
            if (local_row[c[t]] >= 0) sub(local_row[c[t]], q) = v[t];
          }
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nr);
        if (local_row[j] >= 0) rhs[local_row[j]] = 1.0;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        res.build_flops += 2.0 * static_cast<double>(nr) * static_cast<double>(nc) *
                           static_cast<double>(nc);
        if (qr.rank() == nc || nc == 1) {
          coef = qr.solve(rhs);
          Eigen::VectorXd r = sub * coef - rhs;
          for (std::size_t p = 0; p < rows.size(); ++p) residual[rows[p]] = r[static_cast<Eigen::Index>(p)];
          rnorm = r.norm();
          break;
        }
        in_pattern[pattern.back()] = 0;
        pattern.pop_back();
        ++res.skipped_candidates;
      }
      res.residual_history[j].push_back(rnorm);

      if (rnorm <= params.tol || pattern.size() >= res.column_cap ||
          step >= params.max_steps_per_column) {
        break;
      }

      // Candidates: columns of A touching the residual support.
      std::vector<std::size_t> cand;
      for (auto i : rows) {
        if (residual[i] == 0.0) continue;
        for (auto k : a.row_cols(i)) {
          if (!in_pattern[k] && !is_candidate[k]) {
            is_candidate[k] = 1;
            cand.push_back(k);
          }
        }
      }
      if (cand.empty()) break;
      std::sort(cand.begin(), cand.end());
      std::vector<std::pair<double, std::size_t>> scored;
      scored.reserve(cand.size());
      for (auto k : cand) {
        is_candidate[k] = 0;
        double ra = 0.0;
        const auto c = at.row_cols(k);
        const auto v = at.row_values(k);
        for (std::size_t t = 0; t < c.size(); ++t) ra += residual[c[t]] * v[t];
        res.build_flops += 2.0 * static_cast<double>(c.size());
        scored.emplace_back(rnorm * rnorm - ra * ra / col_norm2[k], k);
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& x, const auto& y) { return x.first < y.first; });
      const std::size_t add =
          std::min({params.max_new_per_step, res.column_cap - pattern.size(), scored.size()});
      for (std::size_t p = 0; p < add; ++p) {
        pattern.push_back(scored[p].second);
        in_pattern[scored[p].second] = 1;
      }
      for (auto i : rows) {
        residual[i] = 0.0;
        local_row[i] = -1;
      }
    }

    for (std::size_t q = 0; q < pattern.size(); ++q) {
      entries.push_back({pattern[q], j, coef[static_cast<Eigen::Index>(q)]});
      in_pattern[pattern[q]] = 0;
    }
    for (auto i : rows) {
      residual[i] = 0.0;
      local_row[i] = -1;
    }
    res.column_residual[j] = rnorm;
    if (rnorm > params.tol) {
      res.capped[j] = 1;
      ++res.capped_columns;
    }
  }
  res.M = SparseMatrix::from_triplets(n, n, std::move(entries));
  if (res.capped_columns > 0) {
    res.warning = std::to_string(res.capped_columns) + " of " + std::to_string(n) +
                  " columns stopped above tolerance";
  }
  return res;
}

}  // namespace crossbar
