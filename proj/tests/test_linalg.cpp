#include <gtest/gtest.h>

#include <random>

#include "hamassim/error.hpp"
#include "hamassim/linalg.hpp"

using namespace hamassim;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix random_spd(std::mt19937_64& rng, int n, double eps) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  }
  return m.transpose() * m + eps * Matrix::Identity(n, n);
}

}  // namespace

TEST(Cholesky, IdentityIsItsOwnFactor) {
  EXPECT_EQ(linalg::cholesky_lower(Matrix::Identity(2, 2)), Matrix::Identity(2, 2));
}

TEST(Cholesky, DiagonalMatrix) {
  EXPECT_EQ(linalg::cholesky_lower(mat({{4, 0}, {0, 9}})), mat({{2, 0}, {0, 3}}));
}

TEST(Cholesky, FullMatrix) {
  EXPECT_EQ(linalg::cholesky_lower(mat({{4, 2}, {2, 5}})), mat({{2, 0}, {1, 2}}));
}

TEST(Cholesky, RejectsIndefinite) {
  try {
    linalg::cholesky_lower(mat({{1, 2}, {2, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(Cholesky, RejectsNonSquare) {
  try {
    linalg::cholesky_lower(Matrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Cholesky, RejectsAsymmetric) {
  EXPECT_THROW(linalg::cholesky_lower(mat({{4, 1}, {0, 4}})), Error);
}

TEST(Cholesky, ReconstructsRandomSpd) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    const Matrix a = random_spd(rng, n, 1e-3);
    const Matrix l = linalg::cholesky_lower(a);
    EXPECT_TRUE(l.isLowerTriangular());
    EXPECT_LE(linalg::relative_frobenius_error(l * l.transpose(), a), 1e-10);
  }
}

TEST(Symmetrize, Examples) {
  EXPECT_EQ(linalg::symmetrize(mat({{1, 2}, {2, 1}})), mat({{1, 2}, {2, 1}}));
  EXPECT_EQ(linalg::symmetrize(mat({{1, 4}, {2, 1}})), mat({{1, 3}, {3, 1}}));
  EXPECT_EQ(linalg::symmetrize(Matrix::Zero(3, 3)), Matrix::Zero(3, 3));
  EXPECT_THROW(linalg::symmetrize(Matrix::Zero(2, 3)), Error);
}

TEST(Symmetrize, Idempotent) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(4, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    const Matrix s = linalg::symmetrize(a);
    EXPECT_EQ(linalg::symmetrize(s), s);
  }
}

TEST(Products, Outer) {
  Vector a(2), b(2);
  a << 1, 2;
  b << 3, 4;
  EXPECT_EQ(linalg::outer(a, b), mat({{3, 4}, {6, 8}}));
}

TEST(Products, MatVecAndMatMul) {
  const Matrix a = mat({{1, 2}, {3, 4}});
  Vector x(2);
  x << 1, 1;
  Vector expected(2);
  expected << 3, 7;
  EXPECT_EQ(linalg::mat_vec(a, x), expected);
  EXPECT_EQ(linalg::mat_mat(a, Matrix::Identity(2, 2)), a);
  EXPECT_THROW(linalg::mat_vec(a, Vector::Zero(3)), Error);
  EXPECT_THROW(linalg::mat_mat(a, Matrix::Zero(3, 1)), Error);
}

TEST(SolveSpd, Identity) {
  Vector b(3);
  b << 1, -2, 3;
  EXPECT_EQ(linalg::solve_spd(Matrix::Identity(3, 3), b), b);
}

TEST(SolveSpd, Diagonal) {
  Vector b(2), x(2);
  b << 2, 8;
  x << 1, 2;
  EXPECT_LE((linalg::solve_spd(mat({{2, 0}, {0, 4}}), b) - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SolveSpd, RecoversSolutionOfConditionedSystems) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 6;
    // Condition number up to 1e6 through a graded spectrum.
    Eigen::HouseholderQR<Matrix> qr(random_spd(rng, n, 1.0));
    const Matrix q = qr.householderQ();
    Vector spectrum(n);
    for (int i = 0; i < n; ++i) spectrum[i] = std::pow(1e6, -static_cast<double>(i) / std::max(1, n - 1));
    const Matrix a = linalg::symmetrize(q * spectrum.asDiagonal() * q.transpose());
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = g(rng);
    const Vector b = a * x;
    const Vector got = linalg::solve_spd(a, b);
    EXPECT_LE((a * got - b).norm(), 1e-8 * b.norm());
    EXPECT_LE((got - x).norm(), 1e-8 * x.norm() * 1e2);
  }
}

TEST(SolveSpd, MatrixRightHandSide) {
  const Matrix a = mat({{4, 2}, {2, 5}});
  const Matrix b = mat({{1, 0}, {0, 1}});
  EXPECT_LE((a * linalg::solve_spd(a, b) - b).norm(), 1e-14);
  EXPECT_THROW(linalg::solve_spd(a, Vector(Vector::Zero(3))), Error);
}

TEST(AllFinite, DetectsNan) {
  Matrix a = Matrix::Zero(2, 2);
  EXPECT_TRUE(linalg::all_finite(a));
  a(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(linalg::all_finite(a));
}
