// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string_view>

#include <json.hpp>

#include "crossbar/csv.hpp"
#include "crossbar/errors.hpp"
#include "crossbar/preconditioner.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

struct SolveOptions {
  /// Stop once |r_i|_2 <= tol |b|_2.
  double tol = 1.0e-5;
  std::size_t max_it = 50;
  double alpha = 1.0;
  /// Relative residual above which the run is declared divergent.
  double divergence_threshold = 1.0e8;

  void validate() const {
    if (!(tol >= 0.0)) throw std::invalid_argument("solve: tol must be >= 0");
    if (max_it < 1) throw std::invalid_argument("solve: max_it must be >= 1");
  }
};

enum class SolveStatus { Converged, MaxIterations, Diverged };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
  }
  return "unknown";
}

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  std::size_t iterations = 0;
  /// |r_i| / |b| for i = 0..iterations.
  Vector residual_history;
  /// Work inside the iteration loop only.
  FlopCounter counter;
  /// Initial residual and |b|, kept apart from the per-iteration tally.
  std::uint64_t setup_flops = 0;
  Vector x;
};

/// Preconditioned Richardson iteration x <- x + alpha P(b - A x).
inline SolveReport solve(const SparseMatrix& a, std::span<const double> b, Preconditioner& precond,
                         const SolveOptions& opts = {}, std::span<const double> x0 = {}) {
  opts.validate();
  if (!a.square()) throw DimensionError("solve: matrix is not square");
  detail::require_same_size(b.size(), a.rows(), "solve rhs");
  detail::require_same_size(precond.size(), a.rows(), "solve preconditioner");
  SolveReport rep;
  if (x0.empty()) {
    rep.x.assign(a.rows(), 0.0);
  } else {
    detail::require_same_size(x0.size(), a.rows(), "solve x0");
    rep.x.assign(x0.begin(), x0.end());
  }
  FlopCounter setup;
  const double bnorm = norm2(b, &setup);
  if (!(bnorm > 0.0)) throw NumericalError("solve: right-hand side has zero norm");
  Vector r = axpy(-1.0, spmv(a, rep.x, &setup), b, &setup);
  rep.residual_history.push_back(norm2(r, &setup) / bnorm);
  rep.setup_flops = setup.digital_flops;

  FlopCounter& c = rep.counter;
  rep.status = SolveStatus::MaxIterations;
  while (true) {
    const double rel = rep.residual_history.back();
    if (!std::isfinite(rel) || rel > opts.divergence_threshold) {
      rep.status = SolveStatus::Diverged;
      break;
    }
    if (rel <= opts.tol) {
      rep.status = SolveStatus::Converged;
      break;
    }
    if (rep.iterations >= opts.max_it) break;
    const Vector d = precond.apply(r, &c);
    rep.x = axpy(opts.alpha, d, rep.x, &c);
    r = axpy(-1.0, spmv(a, rep.x, &c), b, &c);
    rep.residual_history.push_back(norm2(r, &c) / bnorm);
    ++rep.iterations;
  }
  return rep;
}

enum class FlopMode { Digital, Hybrid };

/// Digital FLOPs of m Richardson iterations: m (3n + 2 nnz(A) + 2 nnz(M)),
/// the preconditioner term dropping out in hybrid mode.
inline std::uint64_t flops_digital_run(std::uint64_t m, std::uint64_t n, std::uint64_t nnz_a,
                                       std::uint64_t nnz_m, FlopMode mode) {
  const std::uint64_t per_it =
      3 * n + 2 * nnz_a + (mode == FlopMode::Digital ? 2 * nnz_m : 0);
  return m * per_it;
}

/// Same formula for non-integer (average-density) inputs.
inline double flops_digital_run_real(double m, double n, double nnz_a, double nnz_m,
                                     FlopMode mode) {
  return m * (3.0 * n + 2.0 * nnz_a + (mode == FlopMode::Digital ? 2.0 * nnz_m : 0.0));
}

/// Per-iteration speedup of offloading M: 1 + 2 nnz(M) / (3n + 2 nnz(A)).
inline double speedup_ideal(double n, double nnz_a, double nnz_m) {
  return 1.0 + 2.0 * nnz_m / (3.0 * n + 2.0 * nnz_a);
}

/// Whole-solve speedup when the hybrid run needs m_h iterations against m_d.
inline double speedup_total(double m_d, double m_h, double n, double nnz_a, double nnz_m) {
  if (!(m_h >= 1.0)) throw std::invalid_argument("speedup_total: m_h must be >= 1");
  return m_d / m_h * speedup_ideal(n, nnz_a, nnz_m);
}

inline nlohmann::json to_json(const SolveReport& r) {
  return nlohmann::json{{"status", std::string(to_string(r.status))},
                        {"iterations", r.iterations},
                        {"digital_flops", r.counter.digital_flops},
                        {"analog_mvms", r.counter.analog_mvms},
                        {"setup_flops", r.setup_flops},
                        {"residual_history", r.residual_history}};
}

/// Two-column CSV: iteration, relative_residual.
inline void write_residual_csv(const SolveReport& r, std::ostream& out) {
  out << "iteration,relative_residual\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
    out << i << ',' << format_number(r.residual_history[i]) << '\n';
  }
}

}  // namespace crossbar
