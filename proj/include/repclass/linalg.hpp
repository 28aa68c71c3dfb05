#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>

namespace repclass {

/// Column-major dense storage; one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws NonFiniteValue if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

/// Throws NonFiniteValue when any entry is NaN/Inf, DimensionMismatch when empty.
Matrix make_matrix(Eigen::Index rows, Eigen::Index cols, const double* column_major);

/// Cholesky factor of a symmetric positive-definite matrix (plus any ridge applied).
class SpdFactor {
 public:
  SpdFactor() = default;

  Eigen::Index dimension() const { return dim_; }

  /// Ridge actually added to the diagonal: the requested ridge plus any automatic
  /// fallback ridge applied after a failed first attempt.
  double applied_ridge() const { return applied_ridge_; }
  bool auto_ridged() const { return auto_ridged_; }

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  const Eigen::LLT<Matrix>& llt() const { return llt_; }

 private:
  friend SpdFactor spd_factorize(const Eigen::Ref<const Matrix>& a, double ridge);

  Eigen::LLT<Matrix> llt_;
  Eigen::Index dim_ = 0;
  double applied_ridge_ = 0.0;
  bool auto_ridged_ = false;
};

/// Factorizes (a + ridge*I).
///
/// If the first attempt fails, a ridge of 1e-10 * trace(a) / dim is added on top
/// and the factorization retried once; the retry is logged and recorded in the
/// returned factor. Throws NotPositiveDefinite if the retry fails too, and
/// DimensionMismatch if `a` is not square or not symmetric within 1e-10.
SpdFactor spd_factorize(const Eigen::Ref<const Matrix>& a, double ridge = 0.0);

struct PcaModel {
  Vector mean;          // d
  Matrix basis;         // d x k, orthonormal columns
  Vector eigenvalues;   // k, descending; variance captured along each basis vector
  Eigen::Index requested_k = 0;
  bool rank_deficient = false;

  Eigen::Index dimension() const { return mean.size(); }
  Eigen::Index k() const { return basis.cols(); }
};

/// Fits the top-k principal directions of the column-centered data.
///
/// Uses the n x n inner-product matrix when n < d and the d x d covariance
/// otherwise. Eigenvalues are those of the covariance with 1/(n-1) scaling
/// (1/n when n == 1). Each basis vector is signed so its largest-magnitude entry
/// is positive.
///
/// If fewer than k directions carry nonzero variance, the returned model holds
/// only those directions and sets `rank_deficient`. If none do, throws
/// RankDeficient.
PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, Eigen::Index k);

/// basis^T * (y - mean) per column.
Matrix pca_project(const PcaModel& model, const Eigen::Ref<const Matrix>& y);

/// basis * z + mean per column; inverse of pca_project on the span.
Matrix pca_reconstruct(const PcaModel& model, const Eigen::Ref<const Matrix>& z);

}  // namespace repclass
