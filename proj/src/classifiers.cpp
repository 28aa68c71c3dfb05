#include "repclass/classifiers.hpp"

#include "repclass/digest.hpp"
#include "repclass/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace repclass {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::NSC: return "NSC";
    case Method::SRC: return "SRC";
    case Method::CRC: return "CRC";
    case Method::NRC: return "NRC";
    case Method::CRNRC: return "CRNRC";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  for (Method m : {Method::NSC, Method::SRC, Method::CRC, Method::NRC, Method::CRNRC}) {
    if (upper == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

void ClassifierSpec::validate() const {
  switch (method) {
    case Method::CRC:
      if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::InvalidArgument, display_name() + ": CRC needs lambda > 0");
      }
      break;
    case Method::SRC:
    case Method::CRNRC:
      if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::InvalidArgument, display_name() + ": lambda must be nonnegative");
      }
      break;
    case Method::NSC:
      if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
        throw Error(ErrorKind::InvalidArgument, display_name() + ": ridge must be nonnegative");
      }
      break;
    case Method::NRC:
      break;
  }
  if (method == Method::SRC || method == Method::NRC || method == Method::CRNRC) effective_admm().validate();
}

AdmmConfig ClassifierSpec::effective_admm() const {
  AdmmConfig cfg = admm;
  cfg.lambda = method == Method::NRC ? 0.0 : lambda;
  return cfg;
}

FittedModel fit(const ClassifierSpec& spec, const Dataset& train) {
  spec.validate();
  auto normalized = std::make_shared<const Dataset>(normalize_unit_columns(train));
  const Dataset& x = *normalized;
  switch (spec.method) {
    case Method::NSC:
      return FittedModel(spec, normalized, nsc_prepare(x, spec.ridge));
    case Method::SRC:
      return FittedModel(spec, normalized, src_prepare(x, spec.lambda, spec.effective_admm()));
    case Method::CRC:
      return FittedModel(spec, normalized, crc_prepare(x, spec.lambda));
    case Method::NRC:
    case Method::CRNRC:
      return FittedModel(spec, normalized, crnr_prepare(x, spec.effective_admm()));
  }
  throw Error(ErrorKind::InvalidArgument, "unhandled method");
}

Vector class_residuals(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& coding) {
  if (coding.size() != train.size() || y.size() != train.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "coding or sample does not match the training set");
  }
  const Matrix& x = train.features();
  Vector r(train.class_count());
  for (int c = 0; c < train.class_count(); ++c) {
    Vector e = y;
    for (Eigen::Index j : train.class_index()[c]) {
      if (coding(j) != 0.0) e -= coding(j) * x.col(j);
    }
    r(c) = e.norm();
  }
  return r;
}

Vector class_coefficient_mass(const Dataset& train, const Eigen::Ref<const Vector>& coding) {
  if (coding.size() != train.size()) throw Error(ErrorKind::DimensionMismatch, "coding length mismatch");
  Vector mass = Vector::Zero(train.class_count());
  for (int c = 0; c < train.class_count(); ++c)
    for (Eigen::Index j : train.class_index()[c]) mass(c) += coding(j);
  return mass;
}

int argmin_lowest(const Eigen::Ref<const Vector>& residuals) {
  int best = 0;
  for (Eigen::Index i = 1; i < residuals.size(); ++i) {
    if (residuals(i) < residuals(best)) best = static_cast<int>(i);
  }
  return best;
}

namespace {

void require_matching(const ClassifierSpec& spec, const FittedModel& model) {
  const ClassifierSpec& fitted = model.spec();
  const bool same = fitted.method == spec.method && fitted.lambda == spec.lambda && fitted.ridge == spec.ridge &&
                    fitted.admm.mu == spec.admm.mu;
  if (!same) {
    throw Error(ErrorKind::InvalidArgument,
                "classifier spec " + spec.display_name() + " does not match the fitted model " + fitted.display_name());
  }
}

Vector crc_residuals(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& coding) {
  Vector r = class_residuals(train, y, coding);
  for (int c = 0; c < train.class_count(); ++c) {
    double norm2 = 0.0;
    for (Eigen::Index j : train.class_index()[c]) norm2 += coding(j) * coding(j);
    r(c) = norm2 > 0.0 ? r(c) / std::sqrt(norm2) : std::numeric_limits<double>::infinity();
  }
  return r;
}

ResidualReport make_report(Vector residuals, Vector coding, std::optional<SolveDiagnostics> diag) {
  ResidualReport report;
  report.predicted = argmin_lowest(residuals);
  report.residuals = std::move(residuals);
  report.coding = std::move(coding);
  report.diagnostics = diag;
  return report;
}

}  // namespace

std::vector<ResidualReport> classify_batch(const ClassifierSpec& spec, const FittedModel& model,
                                           const Eigen::Ref<const Matrix>& y) {
  require_matching(spec, model);
  const Dataset& train = model.train();
  if (y.rows() != train.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "test sample has dimension " + std::to_string(y.rows()) +
                                                  ", training data has " + std::to_string(train.dimension()));
  }
  const Matrix yn = normalize_unit_columns(y);
  const Eigen::Index m = yn.cols();
  std::vector<ResidualReport> out;
  out.reserve(static_cast<std::size_t>(m));

  std::visit(
      [&](const auto& payload) {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, CrnrModel>) {
          auto codes = crnr_solve_batch(payload, train, yn, spec.effective_admm());
          for (Eigen::Index j = 0; j < m; ++j) {
            auto& r = codes[static_cast<std::size_t>(j)];
            Vector residuals = class_residuals(train, yn.col(j), r.coding);
            out.push_back(make_report(std::move(residuals), std::move(r.coding), r.diagnostics));
          }
        } else if constexpr (std::is_same_v<T, SrcModel>) {
          auto codes = src_solve_batch(payload, train, yn);
          for (Eigen::Index j = 0; j < m; ++j) {
            auto& r = codes[static_cast<std::size_t>(j)];
            Vector residuals = class_residuals(train, yn.col(j), r.coding);
            out.push_back(make_report(std::move(residuals), std::move(r.coding), r.diagnostics));
          }
        } else if constexpr (std::is_same_v<T, CrcModel>) {
          const Matrix codes = payload.projector * yn;
          for (Eigen::Index j = 0; j < m; ++j) {
            out.push_back(make_report(crc_residuals(train, yn.col(j), codes.col(j)), codes.col(j), std::nullopt));
          }
        } else {
          // NSC: per-class least squares, coefficients scattered back into training order.
          std::vector<Matrix> per_class;
          per_class.reserve(payload.factors.size());
          for (std::size_t c = 0; c < payload.factors.size(); ++c) {
            per_class.push_back(payload.factors[c].solve(Matrix(payload.bases[c].transpose() * yn)));
          }
          for (Eigen::Index j = 0; j < m; ++j) {
            Vector coding = Vector::Zero(train.size());
            Vector residuals(train.class_count());
            for (int c = 0; c < train.class_count(); ++c) {
              const auto& idx = train.class_index()[c];
              const auto coef = per_class[static_cast<std::size_t>(c)].col(j);
              for (std::size_t p = 0; p < idx.size(); ++p) coding(idx[p]) = coef(static_cast<Eigen::Index>(p));
              residuals(c) = (yn.col(j) - payload.bases[static_cast<std::size_t>(c)] * coef).norm();
            }
            out.push_back(make_report(std::move(residuals), std::move(coding), std::nullopt));
          }
        }
      },
      model.payload());
  return out;
}

ResidualReport classify(const ClassifierSpec& spec, const FittedModel& model, const Eigen::Ref<const Vector>& y) {
  return classify_batch(spec, model, Matrix(y)).front();
}

namespace {

void hash_matrix(Sha256& h, const Matrix& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  h.update(dims, sizeof dims);
  h.update(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

std::string model_summary(const FittedModel& model) {
  const ClassifierSpec& spec = model.spec();
  const Dataset& train = model.train();
  Sha256 h;
  hash_matrix(h, train.features());
  h.update(train.labels().data(), sizeof(int) * train.labels().size());

  std::ostringstream out;
  out.precision(17);
  out << "method=" << to_string(spec.method) << " n=" << train.size() << " d=" << train.dimension()
      << " K=" << train.class_count();
  std::visit(
      [&](const auto& payload) {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, CrnrModel>) {
          hash_matrix(h, payload.system_matrix());
          hash_matrix(h, payload.factor().llt().matrixLLT());
          out << " lambda=" << payload.config().lambda << " mu=" << payload.config().mu
              << " ridge=" << payload.factor().applied_ridge();
        } else if constexpr (std::is_same_v<T, SrcModel>) {
          hash_matrix(h, payload.factor.llt().matrixLLT());
          out << " lambda=" << payload.lambda << " mu=" << payload.config.mu;
        } else if constexpr (std::is_same_v<T, CrcModel>) {
          hash_matrix(h, payload.projector);
          out << " lambda=" << payload.lambda;
        } else {
          int ridged = 0;
          for (const auto& f : payload.factors) {
            hash_matrix(h, f.llt().matrixLLT());
            ridged += f.auto_ridged() ? 1 : 0;
          }
          out << " ridge=" << payload.ridge << " auto_ridged_classes=" << ridged;
        }
      },
      model.payload());
  out << " sha256=" << h.hex_digest();
  return out.str();
}

}  // namespace repclass
