#include "hamassim/linalg.hpp"

#include <cmath>
#include <string>

namespace hamassim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::UnsupportedPrimitive: return "UnsupportedPrimitive";
    case ErrorCode::ScalarRequired: return "ScalarRequired";
    case ErrorCode::SingularRadius: return "SingularRadius";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::FixedPointDiverged: return "FixedPointDiverged";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedCheckpoint: return "MalformedCheckpoint";
    case ErrorCode::NegativeScaledCov: return "NegativeScaledCov";
    case ErrorCode::CovarianceCollapse: return "CovarianceCollapse";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace linalg {
namespace {

void require_square(const Matrix& a, const char* op) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    fail(ErrorCode::DimensionMismatch, std::string(op) + ": expected a non-empty square matrix, got " +
                                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

}  // namespace

bool all_finite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

Matrix cholesky_lower(const Matrix& a) {
  require_square(a, "cholesky_lower");
  const Eigen::Index n = a.rows();
  const double scale = a.cwiseAbs().maxCoeff();
  const double sym_tol = 1e-10 * (scale > 0.0 ? scale : 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > sym_tol) {
        fail(ErrorCode::NotPositiveDefinite, "cholesky_lower: input is not symmetric at (" + std::to_string(i) +
                                                 "," + std::to_string(j) + ")");
      }
    }
  }

  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) {
      fail(ErrorCode::NotPositiveDefinite,
           "cholesky_lower: pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

Matrix symmetrize(const Matrix& a) {
  require_square(a, "symmetrize");
  Matrix out = 0.5 * (a + a.transpose());
  return out;
}

Vector mat_vec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) fail(ErrorCode::DimensionMismatch, "mat_vec: inner dimensions differ");
  return a * x;
}

Matrix mat_mat(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::DimensionMismatch, "mat_mat: inner dimensions differ");
  return a * b;
}

Matrix outer(const Vector& a, const Vector& b) { return a * b.transpose(); }

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_spd");
  if (b.rows() != a.rows()) fail(ErrorCode::DimensionMismatch, "solve_spd: right-hand side has wrong row count");
  const Matrix l = cholesky_lower(a);
  Matrix y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  Matrix x = solve_spd(a, Matrix(b));
  return x.col(0);
}

double relative_frobenius_error(const Matrix& approx, const Matrix& exact) {
  const double denom = exact.norm();
  const double diff = (approx - exact).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace linalg
}  // namespace hamassim
