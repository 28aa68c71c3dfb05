#pragma once

#include "repclass/data.hpp"
#include "repclass/linalg.hpp"

#include <vector>

namespace repclass {

struct AdmmConfig {
  double lambda = 0.0;  // balancing weight of the class-specific residual term (l1 weight for SRC)
  double mu = 1.0;      // penalty parameter
  double tol = 1e-6;    // on ||z - c||_inf and ||z_t - z_{t-1}||_inf
  int max_iter = 500;

  /// Throws InvalidArgument unless lambda >= 0, mu > 0, tol > 0, max_iter >= 1.
  void validate() const;
};

struct SolveDiagnostics {
  int iterations = 0;
  double final_gap = 0.0;   // ||z - c||_inf at the returned iterate
  bool converged = false;   // false means the iteration cap was hit (non-fatal)
  double objective = 0.0;   // value of the method's objective at the returned coding
};

struct CodingResult {
  Vector coding;
  SolveDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// CRNR: min ||y - Xc||^2 + lambda * sum_i ||y - X_i c_i||^2  s.t. c >= 0

/// Precomputed structures shared by every test sample. The block-diagonal Gram
/// is kept as its per-class blocks X_i^T X_i; the zero-padded per-class
/// matrices are never materialized.
class CrnrModel {
 public:
  const Matrix& gram() const { return gram_; }
  const std::vector<Matrix>& class_blocks() const { return blocks_; }
  const std::vector<std::vector<Eigen::Index>>& class_index() const { return class_index_; }
  const SpdFactor& factor() const { return factor_; }
  const AdmmConfig& config() const { return config_; }
  double xty_scale() const { return 1.0 + config_.lambda; }
  Eigen::Index size() const { return gram_.rows(); }

  /// Dense n x n block-diagonal Gram, sum_i (X_i')^T X_i'.
  Matrix block_gram() const;

  /// X^T X + lambda * block_gram + (mu / 2) I.
  Matrix system_matrix() const;

  /// (X^T X + lambda * block_gram) * v without forming the dense block Gram.
  Vector quadratic_times(const Eigen::Ref<const Vector>& v) const;

 private:
  friend CrnrModel crnr_prepare(const Dataset& train, const AdmmConfig& config);

  Matrix gram_;
  std::vector<Matrix> blocks_;
  std::vector<std::vector<Eigen::Index>> class_index_;
  SpdFactor factor_;
  AdmmConfig config_;
};

/// Factorizes the c-update system once. `train` should have unit columns.
CrnrModel crnr_prepare(const Dataset& train, const AdmmConfig& config);

/// One c-update: solves (X^T X + lambda*B + mu/2 I) c = (1+lambda) X^T y + (mu z + delta)/2,
/// with `xty` = X^T y.
Vector crnr_c_update(const CrnrModel& model, const Eigen::Ref<const Vector>& xty,
                     const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& delta);

/// ADMM from z = c = delta = 0; returns the nonnegative iterate z.
CodingResult crnr_solve(const CrnrModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y,
                        const AdmmConfig& config);

/// Column-wise crnr_solve for a block of samples; each column runs its own
/// iteration and stops independently.
std::vector<CodingResult> crnr_solve_batch(const CrnrModel& model, const Dataset& train,
                                           const Eigen::Ref<const Matrix>& y, const AdmmConfig& config);

/// ||y - Xc||^2 + lambda * sum_i ||y - X_i c_i||^2.
double crnr_objective(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& c,
                      double lambda);

/// Gradient of crnr_objective with respect to c.
Vector crnr_gradient(const CrnrModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y,
                     const Eigen::Ref<const Vector>& c);

// ---------------------------------------------------------------------------
// CRC: c = (X^T X + lambda I)^{-1} X^T y through a precomputed projector

struct CrcModel {
  Matrix projector;  // n x d
  double lambda = 0.0;
};

CrcModel crc_prepare(const Dataset& train, double lambda);
Vector crc_solve(const CrcModel& model, const Eigen::Ref<const Vector>& y);
Vector crc_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double lambda);

// ---------------------------------------------------------------------------
// SRC: min ||y - Xc||^2 + lambda ||c||_1 by ADMM with a soft-thresholding z-update

struct SrcModel {
  SpdFactor factor;  // X^T X + (mu / 2) I
  double lambda = 0.0;
  AdmmConfig config;
};

SrcModel src_prepare(const Dataset& train, double lambda, const AdmmConfig& config);
CodingResult src_solve(const SrcModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y);
std::vector<CodingResult> src_solve_batch(const SrcModel& model, const Dataset& train,
                                          const Eigen::Ref<const Matrix>& y);
CodingResult src_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double lambda,
                       const AdmmConfig& config);

double src_objective(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& c,
                     double lambda);

// ---------------------------------------------------------------------------
// NSC: per class, c_i = argmin ||y - X_i c_i||^2 + ridge ||c_i||^2

struct NscModel {
  std::vector<Matrix> bases;       // X_i
  std::vector<SpdFactor> factors;  // X_i^T X_i + ridge I
  double ridge = 0.0;
};

NscModel nsc_prepare(const Dataset& train, double ridge);
std::vector<Vector> nsc_solve(const NscModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y);
std::vector<Vector> nsc_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double ridge);

}  // namespace repclass
