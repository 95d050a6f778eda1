#pragma once

#include <Eigen/Dense>

#include "hamassim/error.hpp"

namespace hamassim {

// All numerics are binary64. Problem dimensions stay below a dozen, so dense
// dynamic-size storage is used everywhere.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

bool all_finite(const Eigen::Ref<const Matrix>& a);

/// Lower-triangular L with L * L^T = A.
///
/// A must be square and symmetric to 1e-10 (relative to its largest entry).
/// Throws NotPositiveDefinite on the first non-positive pivot.
Matrix cholesky_lower(const Matrix& a);

/// (A + A^T) / 2.
Matrix symmetrize(const Matrix& a);

Vector mat_vec(const Matrix& a, const Vector& x);
Matrix mat_mat(const Matrix& a, const Matrix& b);
Matrix outer(const Vector& a, const Vector& b);

/// Solves A x = b for SPD A through cholesky_lower.
Vector solve_spd(const Matrix& a, const Vector& b);
/// Solves A X = B column by column for SPD A.
Matrix solve_spd(const Matrix& a, const Matrix& b);

double relative_frobenius_error(const Matrix& approx, const Matrix& exact);

}  // namespace linalg
}  // namespace hamassim
