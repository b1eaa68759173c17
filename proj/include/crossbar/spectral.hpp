// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "crossbar/errors.hpp"
#include "crossbar/rng.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

struct PowerOptions {
  double tol = 1e-8;
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0;
};

/// Result of an iterative estimate. `converged` is false when the relative
/// change never fell below the tolerance within the iteration limit.
struct Estimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

namespace detail {

inline Vector random_unit(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  const double nv = norm2(v);
  for (auto& x : v) x /= nv;
  return v;
}

inline void scale_in_place(Vector& v, double s) {
  for (auto& x : v) x *= s;
}

inline Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& a) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto c = a.row_cols(i);
    const auto v = a.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      t.emplace_back(static_cast<int>(i), static_cast<int>(c[k]), v[k]);
    }
  }
  Eigen::SparseMatrix<double> out(static_cast<Eigen::Index>(a.rows()),
                                  static_cast<Eigen::Index>(a.cols()));
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

/// Dominant eigenvalue magnitude of a linear operator `apply(x) -> Vector`.
///
/// Steps two applications at a time and reports sqrt(|T^2 v|) so that real
/// eigenvalue pairs of equal magnitude and opposite sign (common for I - A
/// with symmetric A) do not stall the iteration.
template <class Apply>
Estimate spectral_radius_estimate(Apply&& apply, std::size_t n, const PowerOptions& opts = {}) {
  Estimate est;
  if (n == 0) {
    est.converged = true;
    return est;
  }
  Vector v = detail::random_unit(n, opts.seed);
  double previous = -1.0;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    Vector w = apply(std::span<const double>(v));
    detail::require_same_size(w.size(), n, "spectral_radius_estimate");
    Vector u = apply(std::span<const double>(w));
    const double nu = norm2(u);
    est.iterations = it;
    if (!std::isfinite(nu)) throw NumericalError("spectral_radius_estimate: non-finite iterate");
    if (nu == 0.0) {
      // T^2 v vanished: the start vector lies in a nilpotent subspace.
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    est.value = std::sqrt(nu);
    if (previous >= 0.0 && std::abs(est.value - previous) <= opts.tol * est.value) {
      est.converged = true;
      return est;
    }
    previous = est.value;
    detail::scale_in_place(u, 1.0 / nu);
    v = std::move(u);
  }
  return est;
}

/// Largest singular value of an operator given as `apply` and
/// `apply_transpose`, by power iteration on the normal operator. The value
/// reported is |A v| for the final unit vector, a lower bound of the norm.
template <class Apply, class ApplyT>
Estimate spectral_norm_estimate(Apply&& apply, ApplyT&& apply_transpose, std::size_t n,
                                const PowerOptions& opts = {}) {
  Estimate est;
  if (n == 0) {
    est.converged = true;
    return est;
  }
  Vector v = detail::random_unit(n, opts.seed);
  double previous = -1.0;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    Vector w = apply(std::span<const double>(v));
    est.value = norm2(w);
    est.iterations = it;
    if (!std::isfinite(est.value)) throw NumericalError("spectral_norm_estimate: non-finite iterate");
    if (est.value == 0.0) {
      // v landed in the null space; restart from a shifted seed once.
      if (it == 1) {
        v = detail::random_unit(n, mix64(opts.seed + 1));
        continue;
      }
      est.converged = true;
      return est;
    }
    if (previous >= 0.0 && std::abs(est.value - previous) <= opts.tol * est.value) {
      est.converged = true;
      return est;
    }
    previous = est.value;
    Vector u = apply_transpose(std::span<const double>(w));
    const double nu = norm2(u);
    if (nu == 0.0) {
      est.converged = true;
      return est;
    }
    detail::scale_in_place(u, 1.0 / nu);
    v = std::move(u);
  }
  return est;
}

inline Estimate spectral_norm_estimate(const SparseMatrix& a, const PowerOptions& opts = {}) {
  if (!a.square()) throw DimensionError("spectral_norm_estimate: matrix is not square");
  return spectral_norm_estimate([&](std::span<const double> x) { return spmv(a, x); },
                                [&](std::span<const double> x) { return spmv_transpose(a, x); },
                                a.cols(), opts);
}

inline Estimate spectral_norm_estimate(const Eigen::MatrixXd& a, const PowerOptions& opts = {}) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_norm_estimate: matrix is not square");
  const auto n = static_cast<std::size_t>(a.cols());
  auto mul = [&](const Eigen::MatrixXd& m, std::span<const double> x, bool trans) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Vector y(n);
    Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    if (trans) {
      yv.noalias() = m.transpose() * xv;
    } else {
      yv.noalias() = m * xv;
    }
    return y;
  };
  return spectral_norm_estimate([&](std::span<const double> x) { return mul(a, x, false); },
                                [&](std::span<const double> x) { return mul(a, x, true); }, n,
                                opts);
}

/// sigma_max / sigma_min. sigma_min comes from inverse power iteration on
/// A^T A using sparse LU factors of A and A^T.
inline Estimate condition_number_estimate(const SparseMatrix& a, const PowerOptions& opts = {}) {
  if (!a.square()) throw DimensionError("condition_number_estimate: matrix is not square");
  if (a.rows() == 0) throw NumericalError("condition_number_estimate: empty matrix");
  const Estimate smax = spectral_norm_estimate(a, opts);

  const Eigen::SparseMatrix<double> ea = detail::to_eigen(a);
  const Eigen::SparseMatrix<double> eat = ea.transpose();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lut;
  lu.compute(ea);
  lut.compute(eat);
  if (lu.info() != Eigen::Success || lut.info() != Eigen::Success) {
    throw NumericalError("condition_number_estimate: matrix is singular");
  }
  const auto n = static_cast<Eigen::Index>(a.rows());
  auto solve_with = [n](auto& solver, std::span<const double> x) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
    Eigen::VectorXd y = solver.solve(xv);
    return Vector(y.data(), y.data() + n);
  };
  const Estimate inv = spectral_norm_estimate(
      [&](std::span<const double> x) { return solve_with(lu, x); },
      [&](std::span<const double> x) { return solve_with(lut, x); }, a.rows(), opts);
  if (!std::isfinite(inv.value) || inv.value == 0.0 ||
      inv.value * std::numeric_limits<double>::epsilon() * smax.value > 1.0) {
    throw NumericalError("condition_number_estimate: matrix is singular to working precision");
  }
  Estimate out;
  out.value = smax.value * inv.value;
  out.converged = smax.converged && inv.converged;
  out.iterations = smax.iterations + inv.iterations;
  return out;
}

}  // namespace crossbar
