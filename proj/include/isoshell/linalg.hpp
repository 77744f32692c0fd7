#pragma once

// Dense symmetric eigendecomposition backed by LAPACK (dsyevd). The
// operator matrices assembled in this library reach a few thousand rows;
// LAPACK is several times faster than Eigen's SelfAdjointEigenSolver at
// those sizes. BLAS is pinned to one thread so results are bit-stable
// run to run.

#include <isoshell/errors.hpp>

#include <Eigen/Dense>
#include <lapacke.h>

#include <mutex>

extern "C" void openblas_set_num_threads(int);

namespace isoshell {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

/// Eigendecomposition of a symmetric matrix (lower triangle referenced).
inline SymmetricEigen eigen_sym(const Eigen::MatrixXd& A) {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });

  const int n = static_cast<int>(A.rows());
  SymmetricEigen out;
  out.vectors = A;
  out.values.resize(n);
  if (n == 0) return out;
  const int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.values.data());
  if (info != 0) throw NumericError("symmetric eigensolve failed (dsyevd info=" + std::to_string(info) + ")");
  return out;
}

}  // namespace isoshell
