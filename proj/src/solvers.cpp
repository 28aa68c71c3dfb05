#include "repclass/solvers.hpp"

#include "repclass/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace repclass {

void AdmmConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument, "lambda must be a finite nonnegative number");
  }
  if (!(mu > 0.0) || !std::isfinite(mu)) throw Error(ErrorKind::InvalidArgument, "mu must be positive");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  if (max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be at least 1");
}

namespace {

void require_rows(Eigen::Index rows, const Dataset& train, const char* what) {
  if (rows != train.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has dimension " + std::to_string(rows) +
                                                  ", training data has " + std::to_string(train.dimension()));
  }
}

// Shared ADMM loop for problems of the form
//   min f(c) + g(z)  s.t. c = z,  with quadratic f,
// where the c-update solves factor * c = base_rhs + (mu z + delta) / 2 and the
// z-update is z = prox(c - delta / mu). Columns of `base_rhs` are independent
// problems; each column stops on its own once both ||z - c||_inf and the change
// in z fall below tol.
template <typename Prox>
std::vector<CodingResult> run_admm(const SpdFactor& factor, const Matrix& base_rhs, double mu, double tol,
                                   int max_iter, Prox prox) {
  const Eigen::Index n = base_rhs.rows();
  const Eigen::Index m = base_rhs.cols();
  std::vector<CodingResult> results(static_cast<std::size_t>(m));

  std::vector<Eigen::Index> active(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) active[static_cast<std::size_t>(j)] = j;

  Matrix rhs0 = base_rhs;
  Matrix z = Matrix::Zero(n, m);
  Matrix delta = Matrix::Zero(n, m);
  Matrix rhs, c, z_next;

  for (int iter = 1; iter <= max_iter && !active.empty(); ++iter) {
    rhs = rhs0 + 0.5 * (mu * z + delta);
    c = factor.solve(rhs);
    z_next = c - delta / mu;
    prox(z_next);
    delta += mu * (z_next - c);

    std::vector<Eigen::Index> keep;
    keep.reserve(active.size());
    for (Eigen::Index j = 0; j < z_next.cols(); ++j) {
      const double gap = (z_next.col(j) - c.col(j)).cwiseAbs().maxCoeff();
      const double change = (z_next.col(j) - z.col(j)).cwiseAbs().maxCoeff();
      const bool converged = gap <= tol && change <= tol;
      if (converged || iter == max_iter) {
        CodingResult& out = results[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])];
        out.coding = z_next.col(j);
        out.diagnostics.iterations = iter;
        out.diagnostics.final_gap = gap;
        out.diagnostics.converged = converged;
      } else {
        keep.push_back(j);
      }
    }
    z.swap(z_next);

    if (keep.size() != active.size()) {
      const auto kept = static_cast<Eigen::Index>(keep.size());
      Matrix rhs0_k(n, kept), z_k(n, kept), delta_k(n, kept);
      std::vector<Eigen::Index> active_k(keep.size());
      for (Eigen::Index k = 0; k < kept; ++k) {
        const Eigen::Index j = keep[static_cast<std::size_t>(k)];
        rhs0_k.col(k) = rhs0.col(j);
        z_k.col(k) = z.col(j);
        delta_k.col(k) = delta.col(j);
        active_k[static_cast<std::size_t>(k)] = active[static_cast<std::size_t>(j)];
      }
      rhs0.swap(rhs0_k);
      z.swap(z_k);
      delta.swap(delta_k);
      active.swap(active_k);
    }
  }
  return results;
}

void log_unconverged(const std::vector<CodingResult>& results, const char* method, int max_iter) {
  const auto misses = std::count_if(results.begin(), results.end(),
                                    [](const CodingResult& r) { return !r.diagnostics.converged; });
  if (misses > 0) {
    spdlog::debug("{}: {} of {} samples hit the {}-iteration cap", method, misses, results.size(), max_iter);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// CRNR

Matrix CrnrModel::block_gram() const {
  Matrix b = Matrix::Zero(size(), size());
  for (std::size_t c = 0; c < blocks_.size(); ++c) {
    const auto& idx = class_index_[c];
    for (std::size_t q = 0; q < idx.size(); ++q)
      for (std::size_t p = 0; p < idx.size(); ++p)
        b(idx[p], idx[q]) = blocks_[c](static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
  }
  return b;
}

Matrix CrnrModel::system_matrix() const {
  Matrix s = gram_;
  for (std::size_t c = 0; c < blocks_.size(); ++c) {
    const auto& idx = class_index_[c];
    for (std::size_t q = 0; q < idx.size(); ++q)
      for (std::size_t p = 0; p < idx.size(); ++p)
        s(idx[p], idx[q]) += config_.lambda * blocks_[c](static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
  }
  s.diagonal().array() += 0.5 * config_.mu;
  return s;
}

Vector CrnrModel::quadratic_times(const Eigen::Ref<const Vector>& v) const {
  Vector out = gram_ * v;
  if (config_.lambda == 0.0) return out;
  for (std::size_t c = 0; c < blocks_.size(); ++c) {
    const auto& idx = class_index_[c];
    Vector vc(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t p = 0; p < idx.size(); ++p) vc(static_cast<Eigen::Index>(p)) = v(idx[p]);
    const Vector bc = blocks_[c] * vc;
    for (std::size_t p = 0; p < idx.size(); ++p) out(idx[p]) += config_.lambda * bc(static_cast<Eigen::Index>(p));
  }
  return out;
}

CrnrModel crnr_prepare(const Dataset& train, const AdmmConfig& config) {
  config.validate();
  const Matrix& x = train.features();

  CrnrModel model;
  model.config_ = config;
  model.class_index_ = train.class_index();
  model.gram_ = x.transpose() * x;
  // Blocks are read out of the Gram so the block-diagonal part matches it entry for entry.
  model.blocks_.reserve(model.class_index_.size());
  for (const auto& idx : model.class_index_) {
    const auto ni = static_cast<Eigen::Index>(idx.size());
    Matrix block(ni, ni);
    for (Eigen::Index q = 0; q < ni; ++q)
      for (Eigen::Index p = 0; p < ni; ++p) block(p, q) = model.gram_(idx[p], idx[q]);
    model.blocks_.push_back(std::move(block));
  }
  model.factor_ = spd_factorize(model.system_matrix(), 0.0);
  if (model.factor_.auto_ridged()) {
    spdlog::warn("crnr_prepare: system matrix needed an automatic ridge of {:.3e}", model.factor_.applied_ridge());
  }
  return model;
}

Vector crnr_c_update(const CrnrModel& model, const Eigen::Ref<const Vector>& xty, const Eigen::Ref<const Vector>& z,
                     const Eigen::Ref<const Vector>& delta) {
  if (xty.size() != model.size() || z.size() != model.size() || delta.size() != model.size()) {
    throw Error(ErrorKind::DimensionMismatch, "c-update operands must have length " + std::to_string(model.size()));
  }
  const Vector rhs = model.xty_scale() * xty + 0.5 * (model.config().mu * z + delta);
  return model.factor().solve(rhs);
}

std::vector<CodingResult> crnr_solve_batch(const CrnrModel& model, const Dataset& train,
                                           const Eigen::Ref<const Matrix>& y, const AdmmConfig& config) {
  config.validate();
  require_rows(y.rows(), train, "test sample");
  if (train.size() != model.size()) {
    throw Error(ErrorKind::DimensionMismatch, "model was prepared for a different training set");
  }
  if (config.lambda != model.config().lambda || config.mu != model.config().mu) {
    throw Error(ErrorKind::InvalidArgument, "model was prepared with a different lambda or mu");
  }
  const Matrix& x = train.features();
  const Matrix base = model.xty_scale() * (x.transpose() * y);
  auto project = [](Matrix& v) { v = v.cwiseMax(0.0); };
  auto results = run_admm(model.factor(), base, config.mu, config.tol, config.max_iter, project);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    auto& r = results[static_cast<std::size_t>(j)];
    r.diagnostics.objective = crnr_objective(train, y.col(j), r.coding, config.lambda);
  }
  log_unconverged(results, "crnr_solve", config.max_iter);
  return results;
}

CodingResult crnr_solve(const CrnrModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y,
                        const AdmmConfig& config) {
  return crnr_solve_batch(model, train, Matrix(y), config).front();
}

double crnr_objective(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& c,
                      double lambda) {
  require_rows(y.size(), train, "test sample");
  if (c.size() != train.size()) throw Error(ErrorKind::DimensionMismatch, "coding vector length mismatch");
  const Matrix& x = train.features();
  double value = (y - x * c).squaredNorm();
  if (lambda == 0.0) return value;
  double per_class = 0.0;
  for (const auto& idx : train.class_index()) {
    Vector r = y;
    for (Eigen::Index j : idx) r -= c(j) * x.col(j);
    per_class += r.squaredNorm();
  }
  return value + lambda * per_class;
}

Vector crnr_gradient(const CrnrModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y,
                     const Eigen::Ref<const Vector>& c) {
  require_rows(y.size(), train, "test sample");
  const Vector xty = train.features().transpose() * y;
  return 2.0 * model.quadratic_times(c) - 2.0 * model.xty_scale() * xty;
}

// ---------------------------------------------------------------------------
// CRC

CrcModel crc_prepare(const Dataset& train, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument, "CRC lambda must be positive");
  }
  const Matrix& x = train.features();
  const SpdFactor factor = spd_factorize(x.transpose() * x, lambda);
  return CrcModel{factor.solve(Matrix(x.transpose())), lambda};
}

Vector crc_solve(const CrcModel& model, const Eigen::Ref<const Vector>& y) {
  if (y.size() != model.projector.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "test sample has dimension " + std::to_string(y.size()) +
                                                  ", projector expects " + std::to_string(model.projector.cols()));
  }
  return model.projector * y;
}

Vector crc_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double lambda) {
  return crc_solve(crc_prepare(train, lambda), y);
}

// ---------------------------------------------------------------------------
// SRC

SrcModel src_prepare(const Dataset& train, double lambda, const AdmmConfig& config) {
  config.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument, "SRC lambda must be nonnegative");
  }
  const Matrix& x = train.features();
  SrcModel model;
  model.factor = spd_factorize(x.transpose() * x, 0.5 * config.mu);
  model.lambda = lambda;
  model.config = config;
  return model;
}

std::vector<CodingResult> src_solve_batch(const SrcModel& model, const Dataset& train,
                                          const Eigen::Ref<const Matrix>& y) {
  require_rows(y.rows(), train, "test sample");
  if (train.size() != model.factor.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "model was prepared for a different training set");
  }
  const AdmmConfig& cfg = model.config;
  const Matrix base = train.features().transpose() * y;
  const double threshold = model.lambda / cfg.mu;
  auto shrink = [threshold](Matrix& v) {
    v = v.unaryExpr([threshold](double a) {
      return a > threshold ? a - threshold : (a < -threshold ? a + threshold : 0.0);
    });
  };
  auto results = run_admm(model.factor, base, cfg.mu, cfg.tol, cfg.max_iter, shrink);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    auto& r = results[static_cast<std::size_t>(j)];
    r.diagnostics.objective = src_objective(train, y.col(j), r.coding, model.lambda);
  }
  log_unconverged(results, "src_solve", cfg.max_iter);
  return results;
}

CodingResult src_solve(const SrcModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y) {
  return src_solve_batch(model, train, Matrix(y)).front();
}

CodingResult src_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double lambda,
                       const AdmmConfig& config) {
  return src_solve(src_prepare(train, lambda, config), train, y);
}

double src_objective(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& c,
                     double lambda) {
  require_rows(y.size(), train, "test sample");
  if (c.size() != train.size()) throw Error(ErrorKind::DimensionMismatch, "coding vector length mismatch");
  return (y - train.features() * c).squaredNorm() + lambda * c.lpNorm<1>();
}

// ---------------------------------------------------------------------------
// NSC

NscModel nsc_prepare(const Dataset& train, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorKind::InvalidArgument, "NSC ridge must be nonnegative");
  }
  NscModel model;
  model.ridge = ridge;
  model.factors.reserve(static_cast<std::size_t>(train.class_count()));
  int ridged = 0;
  for (int c = 0; c < train.class_count(); ++c) {
    Matrix xc = train.class_features(c);
    model.factors.push_back(spd_factorize(xc.transpose() * xc, ridge));
    model.bases.push_back(std::move(xc));
    if (model.factors.back().auto_ridged()) ++ridged;
  }
  if (ridged > 0) {
    spdlog::warn("nsc_prepare: {} of {} class Gram matrices are singular; automatic ridge applied", ridged,
                 train.class_count());
  }
  return model;
}

std::vector<Vector> nsc_solve(const NscModel& model, const Dataset& train, const Eigen::Ref<const Vector>& y) {
  require_rows(y.size(), train, "test sample");
  if (static_cast<int>(model.factors.size()) != train.class_count()) {
    throw Error(ErrorKind::DimensionMismatch, "model was prepared for a different training set");
  }
  std::vector<Vector> out;
  out.reserve(model.factors.size());
  for (std::size_t c = 0; c < model.factors.size(); ++c) {
    out.push_back(model.factors[c].solve(Vector(model.bases[c].transpose() * y)));
  }
  return out;
}

std::vector<Vector> nsc_solve(const Dataset& train, const Eigen::Ref<const Vector>& y, double ridge) {
  return nsc_solve(nsc_prepare(train, ridge), train, y);
}

}  // namespace repclass
