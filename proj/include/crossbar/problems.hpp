// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "crossbar/errors.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

/// A linear system A x = b with a label and free-form metadata
/// (grid size, scaling applied, source file).
struct ProblemInstance {
  SparseMatrix A;
  Vector b;
  std::string label;
  std::map<std::string, std::string> meta;
};

struct ScaledSystem {
  SparseMatrix A;
  Vector b;
  /// D^{-1/2}; the solution of the original system is weights .* y.
  Vector weights;
};

/// Symmetric diagonal scaling D^{-1/2} A D^{-1/2}, giving a unit diagonal.
inline ScaledSystem jacobi_scale(const SparseMatrix& a, std::span<const double> b) {
  if (!a.square()) throw DimensionError("jacobi_scale: matrix is not square");
  detail::require_same_size(b.size(), a.rows(), "jacobi_scale");
  Vector w(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double d = a.at(i, i);
    if (!(d > 0.0)) {
      throw NumericalError("jacobi_scale: nonpositive diagonal entry in row " + std::to_string(i));
    }
    w[i] = 1.0 / std::sqrt(d);
  }
  std::vector<Triplet> t;
  t.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto c = a.row_cols(i);
    const auto v = a.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      // Diagonal entries are set exactly so the unit diagonal has no rounding.
      const double s = c[k] == i ? 1.0 : w[i] * v[k] * w[c[k]];
      t.push_back({i, c[k], s});
    }
  }
  ScaledSystem out{SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t)), Vector(b.size()),
                   w};
  for (std::size_t i = 0; i < b.size(); ++i) out.b[i] = w[i] * b[i];
  return out;
}

inline ProblemInstance scaled_instance(const SparseMatrix& a, std::span<const double> b,
                                       std::string label,
                                       std::map<std::string, std::string> meta) {
  ScaledSystem s = jacobi_scale(a, b);
  meta["scaling"] = "jacobi";
  return {std::move(s.A), std::move(s.b), std::move(label), std::move(meta)};
}

/// 7-point finite-difference Laplacian on the unit cube with k interior
/// points per dimension, homogeneous Dirichlet boundary, f = 1.
inline ProblemInstance fd_laplacian_3d(std::size_t k) {
  if (k < 2) throw DimensionError("fd_laplacian_3d: k must be at least 2");
  const std::size_t n = k * k * k;
  const double h = 1.0 / static_cast<double>(k + 1);
  auto id = [k](std::size_t x, std::size_t y, std::size_t z) { return (z * k + y) * k + x; };
  std::vector<Triplet> t;
  t.reserve(7 * n);
  for (std::size_t z = 0; z < k; ++z) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t x = 0; x < k; ++x) {
        const auto i = id(x, y, z);
        t.push_back({i, i, 6.0});
        if (x > 0) t.push_back({i, id(x - 1, y, z), -1.0});
        if (x + 1 < k) t.push_back({i, id(x + 1, y, z), -1.0});
        if (y > 0) t.push_back({i, id(x, y - 1, z), -1.0});
        if (y + 1 < k) t.push_back({i, id(x, y + 1, z), -1.0});
        if (z > 0) t.push_back({i, id(x, y, z - 1), -1.0});
        if (z + 1 < k) t.push_back({i, id(x, y, z + 1), -1.0});
      }
    }
  }
  const SparseMatrix a = SparseMatrix::from_triplets(n, n, std::move(t));
  const Vector b(n, h * h);
  return scaled_instance(a, b, "fd3d_k" + std::to_string(k),
                         {{"problem", "fd3d"}, {"k", std::to_string(k)}, {"n", std::to_string(n)}});
}

/// Linear finite elements for -Laplace(u) = 1 on the unit square, uniform
/// mesh of right triangles, m interior nodes per side, Dirichlet boundary.
///
/// Element stiffness is exact; the load uses one-point centroid quadrature.
inline ProblemInstance fe_laplacian_square(std::size_t m) {
  if (m < 2) throw DimensionError("fe_laplacian_square: m must be at least 2");
  const std::size_t side = m + 2;
  const std::size_t n = m * m;
  const double h = 1.0 / static_cast<double>(m + 1);
  // Stiffness of a linear triangle is invariant under uniform scaling, so
  // integer node coordinates give exact entries (hypotenuse couplings are 0).
  auto interior = [m](std::size_t x, std::size_t y) -> long {
    if (x == 0 || y == 0 || x > m || y > m) return -1;
    return static_cast<long>((y - 1) * m + (x - 1));
  };
  std::vector<Triplet> t;
  Vector b(n, 0.0);
  const double element_load = 0.5 * h * h / 3.0;
  auto add_element = [&](const std::array<std::array<long, 2>, 3>& p) {
    std::array<long, 3> bx{}, cy{};
    for (int a = 0; a < 3; ++a) {
      const auto& q1 = p[(a + 1) % 3];
      const auto& q2 = p[(a + 2) % 3];
      bx[a] = q1[1] - q2[1];
      cy[a] = q2[0] - q1[0];
    }
    const long twice_area = std::abs(bx[0] * cy[1] - bx[1] * cy[0]);
    for (int a = 0; a < 3; ++a) {
      const long ia = interior(static_cast<std::size_t>(p[a][0]), static_cast<std::size_t>(p[a][1]));
      if (ia < 0) continue;
      b[static_cast<std::size_t>(ia)] += element_load;
      for (int c = 0; c < 3; ++c) {
        const long ic =
            interior(static_cast<std::size_t>(p[c][0]), static_cast<std::size_t>(p[c][1]));
        if (ic < 0) continue;
        const double kac = static_cast<double>(bx[a] * bx[c] + cy[a] * cy[c]) /
                           (2.0 * static_cast<double>(twice_area));
        t.push_back({static_cast<std::size_t>(ia), static_cast<std::size_t>(ic), kac});
      }
    }
  };
  for (std::size_t y = 0; y + 1 < side; ++y) {
    for (std::size_t x = 0; x + 1 < side; ++x) {
      const long X = static_cast<long>(x);
      const long Y = static_cast<long>(y);
      add_element({{{X, Y}, {X + 1, Y}, {X + 1, Y + 1}}});
      add_element({{{X, Y}, {X + 1, Y + 1}, {X, Y + 1}}});
    }
  }
  const SparseMatrix a = SparseMatrix::from_triplets(n, n, std::move(t));
  return scaled_instance(a, b, "fe_square_m" + std::to_string(m),
                         {{"problem", "fe_square"}, {"m", std::to_string(m)}, {"n", std::to_string(n)}});
}

}  // namespace crossbar
