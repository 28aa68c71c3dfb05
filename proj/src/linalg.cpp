#include "repclass/linalg.hpp"

#include "repclass/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace repclass {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw Error(ErrorKind::NonFiniteValue, std::string(what) + " has a non-finite entry at (" +
                                                   std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

Matrix make_matrix(Eigen::Index rows, Eigen::Index cols, const double* column_major) {
  if (rows < 1 || cols < 1) {
    throw Error(ErrorKind::DimensionMismatch, "matrix must have at least one row and one column");
  }
  Matrix m = Eigen::Map<const Matrix>(column_major, rows, cols);
  require_finite(m, "matrix");
  return m;
}

Vector SpdFactor::solve(const Vector& b) const {
  if (b.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "right-hand side length " + std::to_string(b.size()) +
                                                  " does not match factor dimension " + std::to_string(dim_));
  }
  return llt_.solve(b);
}

Matrix SpdFactor::solve(const Matrix& b) const {
  if (b.rows() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "right-hand side rows " + std::to_string(b.rows()) +
                                                  " do not match factor dimension " + std::to_string(dim_));
  }
  return llt_.solve(b);
}

SpdFactor spd_factorize(const Eigen::Ref<const Matrix>& a, double ridge) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "matrix to factorize must be square and nonempty");
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorKind::InvalidArgument, "ridge must be a finite nonnegative number");
  }
  require_finite(a, "matrix to factorize");
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw Error(ErrorKind::DimensionMismatch, "matrix to factorize is not symmetric (max asymmetry " +
                                                  std::to_string(asym) + ")");
  }

  const Eigen::Index n = a.rows();
  SpdFactor f;
  f.dim_ = n;

  Matrix work = a;
  work.diagonal().array() += ridge;
  f.llt_.compute(work);
  f.applied_ridge_ = ridge;
  if (f.llt_.info() == Eigen::Success) return f;

  const double trace = a.trace();
  const double fallback = 1e-10 * std::abs(trace) / static_cast<double>(n);
  if (fallback > 0.0) {
    work.diagonal().array() += fallback;
    f.llt_.compute(work);
    if (f.llt_.info() == Eigen::Success) {
      f.applied_ridge_ = ridge + fallback;
      f.auto_ridged_ = true;
      spdlog::debug("spd_factorize: factorization of {}x{} matrix failed; retried with ridge {:.3e}", n, n,
                    fallback);
      return f;
    }
  }
  throw Error(ErrorKind::NotPositiveDefinite,
              "Cholesky factorization of a " + std::to_string(n) + "x" + std::to_string(n) +
                  " matrix failed even with automatic ridge");
}

namespace {

// Orthonormalizes the columns of `u` while keeping each column's direction.
void reorthonormalize(Matrix& u) {
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix q = qr.householderQ() * Matrix::Identity(u.rows(), u.cols());
  const Matrix r = qr.matrixQR().topRows(u.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  u = std::move(q);
}

void fix_signs(Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) = -basis.col(j);
  }
}

}  // namespace

PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, Eigen::Index k) {
  const Eigen::Index d = x.rows();
  const Eigen::Index n = x.cols();
  if (d < 1 || n < 1) throw Error(ErrorKind::DimensionMismatch, "PCA input is empty");
  if (k < 1 || k > std::min(d, n)) {
    throw Error(ErrorKind::InvalidArgument, "PCA target dimension " + std::to_string(k) +
                                                " must lie in [1, min(d, n)] = [1, " +
                                                std::to_string(std::min(d, n)) + "]");
  }
  require_finite(x, "PCA input");

  PcaModel model;
  model.requested_k = k;
  model.mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - model.mean;
  const double scale = n > 1 ? static_cast<double>(n - 1) : 1.0;

  // Eigenpairs of the scatter matrix, descending.
  Vector values;
  Matrix directions;
  if (n < d) {
    const Matrix inner = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Matrix> es(inner);
    values = es.eigenvalues().reverse();
    const Matrix v = es.eigenvectors().rowwise().reverse();
    directions.resize(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = values(j) > 0.0 ? std::sqrt(values(j)) : 0.0;
      directions.col(j) = s > 0.0 ? Vector(centered * v.col(j) / s) : Vector::Zero(d);
    }
  } else {
    const Matrix scatter = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(scatter);
    values = es.eigenvalues().reverse();
    directions = es.eigenvectors().rowwise().reverse();
  }

  const double threshold = static_cast<double>(std::max(d, n)) * std::numeric_limits<double>::epsilon() *
                           x.squaredNorm();
  Eigen::Index usable = 0;
  while (usable < k && values(usable) > threshold) ++usable;
  if (usable == 0) {
    throw Error(ErrorKind::RankDeficient, "centered data has no nonzero variance direction");
  }
  if (usable < k) {
    model.rank_deficient = true;
    spdlog::warn("pca_fit: requested {} components but only {} have nonzero variance", k, usable);
  }

  model.basis = directions.leftCols(usable);
  if (n < d) reorthonormalize(model.basis);
  fix_signs(model.basis);
  model.eigenvalues = values.head(usable) / scale;
  return model;
}

Matrix pca_project(const PcaModel& model, const Eigen::Ref<const Matrix>& y) {
  if (y.rows() != model.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "PCA model expects " + std::to_string(model.dimension()) +
                                                  " rows, got " + std::to_string(y.rows()));
  }
  return model.basis.transpose() * (y.colwise() - model.mean);
}

Matrix pca_reconstruct(const PcaModel& model, const Eigen::Ref<const Matrix>& z) {
  if (z.rows() != model.k()) {
    throw Error(ErrorKind::DimensionMismatch, "PCA model has " + std::to_string(model.k()) +
                                                  " components, got " + std::to_string(z.rows()) + " rows");
  }
  return (model.basis * z).colwise() + model.mean;
}

}  // namespace repclass
