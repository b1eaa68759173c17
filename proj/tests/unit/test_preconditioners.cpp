// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "crossbar/preconditioner.hpp"
#include "crossbar/problems.hpp"
#include "crossbar/spai.hpp"
#include "crossbar/spectral.hpp"
#include "test_helpers.hpp"

using namespace crossbar;

namespace {

// Dense ILU(0) written straight from the IKJ recurrence, masked by the
// pattern of A.
void dense_ilu0(const Eigen::MatrixXd& a, Eigen::MatrixXd& l, Eigen::MatrixXd& u) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd w = a;
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index k = 0; k < i; ++k) {
      if (a(i, k) == 0.0) continue;
      w(i, k) /= w(k, k);
      for (Eigen::Index j = k + 1; j < n; ++j) {
        if (a(i, j) != 0.0) w(i, j) -= w(i, k) * w(k, j);
      }
    }
  }
  l = Eigen::MatrixXd::Identity(n, n);
  u = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      if (j < i) l(i, j) = w(i, j);
      else u(i, j) = w(i, j);
    }
  }
}

SparseMatrix five_point(std::size_t m) {
  std::vector<Triplet> t;
  auto id = [m](std::size_t x, std::size_t y) { return y * m + x; };
  for (std::size_t y = 0; y < m; ++y) {
    for (std::size_t x = 0; x < m; ++x) {
      t.push_back({id(x, y), id(x, y), 4.0});
      if (x > 0) t.push_back({id(x, y), id(x - 1, y), -1.0});
      if (x + 1 < m) t.push_back({id(x, y), id(x + 1, y), -1.0});
      if (y > 0) t.push_back({id(x, y), id(x, y - 1), -1.0});
      if (y + 1 < m) t.push_back({id(x, y), id(x, y + 1), -1.0});
    }
  }
  return SparseMatrix::from_triplets(m * m, m * m, std::move(t));
}

}  // namespace

TEST(Spai, IdentityAndDiagonal) {
  const auto r = spai_build(SparseMatrix::identity(6));
  EXPECT_EQ(r.M, SparseMatrix::identity(6));
  EXPECT_EQ(r.capped_columns, 0u);
  const auto d = spai_build(SparseMatrix::diagonal(Vector{2, 4, 0.5}));
  EXPECT_NEAR(d.M.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(d.M.at(1, 1), 0.25, 1e-15);
  EXPECT_NEAR(d.M.at(2, 2), 2.0, 1e-15);
  EXPECT_EQ(d.M.nnz(), 3u);
}

TEST(Spai, ColumnResidualMeetsToleranceOrIsCapped) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = fixtures::random_spd(60, seed);
    SpaiParams params;
    params.tol = 0.1;
    const auto r = spai_build(p.A, params);
    const Eigen::MatrixXd am = p.A.to_dense() * r.M.to_dense();
    for (std::size_t j = 0; j < 60; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(60);
      e[static_cast<Eigen::Index>(j)] = 1.0;
      const double res = (am.col(static_cast<Eigen::Index>(j)) - e).norm();
      EXPECT_NEAR(res, r.column_residual[j], 1e-10);
      if (!r.capped[j]) {
        EXPECT_LE(res, params.tol + 1e-12);
      }
    }
  }
}

TEST(Spai, ResidualHistoryIsNonincreasing) {
  const auto p = fd_laplacian_3d(4);
  SpaiParams params;
  params.tol = 0.01;
  const auto r = spai_build(p.A, params);
  for (const auto& h : r.residual_history) {
    for (std::size_t s = 1; s < h.size(); ++s) EXPECT_LE(h[s], h[s - 1] * (1.0 + 1e-12));
  }
}

TEST(Spai, FillCapLimitsEveryColumn) {
  const auto p = fd_laplacian_3d(4);
  SpaiParams params;
  params.tol = 1e-8;
  params.budget_factor = 2.0;
  const auto r = spai_build(p.A, params);
  const std::size_t cap = static_cast<std::size_t>(std::ceil(2.0 * p.A.nnz() / 64.0));
  EXPECT_EQ(r.column_cap, cap);
  const auto mt = r.M.transpose();
  for (std::size_t j = 0; j < 64; ++j) EXPECT_LE(mt.row_cols(j).size(), cap);
  EXPECT_GT(r.capped_columns, 0u);
  EXPECT_FALSE(r.warning.empty());
}

TEST(Spai, RejectsBadParameters) {
  SpaiParams params;
  params.tol = 0.0;
  EXPECT_THROW(spai_build(SparseMatrix::identity(2), params), std::invalid_argument);
  EXPECT_THROW(spai_build(SparseMatrix::from_triplets(2, 3, {{0, 0, 1.0}})), DimensionError);
}

TEST(Spai, LaplacianDensityAndContraction) {
  const auto p = fd_laplacian_3d(8);
  const auto r = spai_build(p.A);
  const double density = static_cast<double>(r.M.nnz()) / 512.0;
  EXPECT_GE(density, 40.0);
  EXPECT_LE(density, 140.0);
  auto op = [&](std::span<const double> x) {
    const Vector y = spmv(p.A, spmv(r.M, x));
    return axpy(-1.0, y, Vector(x.begin(), x.end()));
  };
  EXPECT_LE(spectral_radius_estimate(op, 512).value, 0.6);
}

TEST(Ilu0, DiagonalMatrixIsItsOwnFactor) {
  const auto f = ilu0_build(SparseMatrix::diagonal(Vector{2, 3, 4}));
  EXPECT_EQ(f.L, SparseMatrix::identity(3));
  EXPECT_EQ(f.U, SparseMatrix::diagonal(Vector{2, 3, 4}));
}

TEST(Ilu0, ExactForLowerTriangular) {
  const auto a = SparseMatrix::from_triplets(3, 3, {{0, 0, 2.0}, {1, 0, 1.0}, {1, 1, 4.0}, {2, 1, -2.0}, {2, 2, 1.0}});
  const auto f = ilu0_build(a);
  EXPECT_LT((multiply(f.L, f.U).to_dense() - a.to_dense()).norm(), 1e-15);
  const Vector x = ilu0_solve(f, Vector{2, 5, -1});
  const Vector ax = spmv(a, x);
  EXPECT_NEAR(ax[0], 2.0, 1e-15);
  EXPECT_NEAR(ax[1], 5.0, 1e-15);
  EXPECT_NEAR(ax[2], -1.0, 1e-15);
}

TEST(Ilu0, MatchesDenseOracleOnGrid) {
  const auto a = five_point(3);
  const auto f = ilu0_build(a);
  Eigen::MatrixXd l, u;
  dense_ilu0(a.to_dense(), l, u);
  EXPECT_LT((f.L.to_dense() - l).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((f.U.to_dense() - u).cwiseAbs().maxCoeff(), 1e-14);
  // Product agrees with A on the pattern of A.
  const Eigen::MatrixXd lu = l * u;
  const Eigen::MatrixXd ad = a.to_dense();
  for (Eigen::Index i = 0; i < 9; ++i) {
    for (Eigen::Index j = 0; j < 9; ++j) {
      if (ad(i, j) != 0.0) {
        EXPECT_NEAR(lu(i, j), ad(i, j), 1e-14);
      }
    }
  }
}

TEST(Ilu0, FactorsStayOnPattern) {
  const auto a = five_point(6);
  const auto f = ilu0_build(a);
  const Eigen::MatrixXd ad = a.to_dense();
  const Eigen::MatrixXd combined = f.L.to_dense() + f.U.to_dense();
  for (Eigen::Index i = 0; i < ad.rows(); ++i) {
    for (Eigen::Index j = 0; j < ad.cols(); ++j) {
      if (ad(i, j) == 0.0) {
        EXPECT_EQ(combined(i, j), 0.0);
      }
    }
  }
  EXPECT_EQ(f.L.nnz() + f.U.nnz(), a.nnz() + a.rows());
}

TEST(Ilu0, ZeroPivotNamesRow) {
  const auto a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  try {
    ilu0_build(a);
    FAIL() << "expected ZeroPivotError";
  } catch (const ZeroPivotError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
  const auto missing = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 0, 1.0}});
  EXPECT_THROW(ilu0_build(missing), ZeroPivotError);
}

TEST(Preconditioner, KindNames) {
  for (auto k : {PrecondKind::Identity, PrecondKind::SpaiDigital, PrecondKind::SpaiHybrid, PrecondKind::Ilu0}) {
    EXPECT_EQ(parse_precond_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_precond_kind("jacobi"), std::invalid_argument);
}

TEST(Preconditioner, ApplyChargesMatchKind) {
  const auto p = fd_laplacian_3d(4);
  const auto m = spai_build(p.A).M;
  const Vector r(64, 1.0);

  FlopCounter c0;
  auto none = Preconditioner::identity(64);
  EXPECT_EQ(none.apply(r, &c0), r);
  EXPECT_EQ(c0.digital_flops, 0u);

  FlopCounter c1;
  auto dig = Preconditioner::spai_digital(m);
  dig.apply(r, &c1);
  EXPECT_EQ(c1.digital_flops, 2 * m.nnz());
  EXPECT_EQ(dig.digital_nnz(), m.nnz());

  FlopCounter c2;
  auto hyb = Preconditioner::spai_hybrid(m, DeviceConfig{});
  hyb.apply(r, &c2);
  EXPECT_EQ(c2.digital_flops, 0u);
  EXPECT_EQ(c2.analog_mvms, 1u);
  EXPECT_EQ(hyb.digital_nnz(), 0u);

  FlopCounter c3;
  auto ilu = Preconditioner::ilu0(p.A);
  ilu.apply(r, &c3);
  EXPECT_EQ(c3.digital_flops, 2 * (ilu.factors()->L.nnz() + ilu.factors()->U.nnz()));

  EXPECT_THROW(dig.apply(Vector(63, 1.0)), DimensionError);
}

TEST(Preconditioner, NoiselessHybridMatchesDigital) {
  const auto p = fd_laplacian_3d(4);
  const auto m = spai_build(p.A).M;
  auto dig = Preconditioner::spai_digital(m);
  auto hyb = Preconditioner::spai_hybrid(m, DeviceConfig::noiseless());
  for (std::uint64_t s = 0; s < 5; ++s) {
    RngStream rng(s);
    Vector r(64);
    for (auto& x : r) x = rng.normal();
    const Vector a = dig.apply(r);
    const Vector b = hyb.apply(r);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * norm_inf(a));
  }
}
