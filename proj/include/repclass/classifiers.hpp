#pragma once

#include "repclass/data.hpp"
#include "repclass/solvers.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace repclass {

enum class Method { NSC, SRC, CRC, NRC, CRNRC };

std::string_view to_string(Method method);
/// Case-insensitive; throws InvalidArgument for unknown names.
Method parse_method(std::string_view name);

struct ClassifierSpec {
  Method method = Method::CRNRC;
  /// Class-residual weight (CRNRC), l1 weight (SRC) or ridge weight (CRC). Ignored by NSC and NRC.
  double lambda = 0.1;
  /// ADMM settings for SRC/NRC/CRNRC; its lambda field is overwritten by effective_admm().
  AdmmConfig admm;
  /// Tikhonov term for NSC's per-class least squares.
  double ridge = 0.0;
  /// Label used in reports; defaults to the method name.
  std::string name;

  void validate() const;
  std::string display_name() const { return name.empty() ? std::string(to_string(method)) : name; }
  /// The ADMM config handed to the solver; NRC forces lambda = 0.
  AdmmConfig effective_admm() const;
};

struct ResidualReport {
  Vector residuals;   // per class, length K
  int predicted = 0;  // dense class id
  Vector coding;      // length n, in training column order
  std::optional<SolveDiagnostics> diagnostics;
};

/// A fitted classifier: unit-normalized training data plus the method's
/// precomputed structures. Immutable; safe to share across threads.
class FittedModel {
 public:
  using Payload = std::variant<NscModel, SrcModel, CrcModel, CrnrModel>;

  FittedModel(ClassifierSpec spec, std::shared_ptr<const Dataset> train, Payload payload)
      : spec_(std::move(spec)), train_(std::move(train)), payload_(std::move(payload)) {}

  const ClassifierSpec& spec() const { return spec_; }
  const Dataset& train() const { return *train_; }
  const Payload& payload() const { return payload_; }

 private:
  ClassifierSpec spec_;
  std::shared_ptr<const Dataset> train_;
  Payload payload_;
};

/// Normalizes the training columns and runs all method-specific precomputation.
FittedModel fit(const ClassifierSpec& spec, const Dataset& train);

/// Unit-normalizes y, codes it with the method's solver and applies the
/// method's residual rule. Ties go to the lowest class id.
ResidualReport classify(const ClassifierSpec& spec, const FittedModel& model, const Eigen::Ref<const Vector>& y);

/// classify() for every column of `y`.
std::vector<ResidualReport> classify_batch(const ClassifierSpec& spec, const FittedModel& model,
                                           const Eigen::Ref<const Matrix>& y);

/// r_i = ||y - X_i c_i||_2 for every class.
Vector class_residuals(const Dataset& train, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& coding);

/// Sum of coding coefficients falling on each class.
Vector class_coefficient_mass(const Dataset& train, const Eigen::Ref<const Vector>& coding);

/// Lowest index of the minimum entry.
int argmin_lowest(const Eigen::Ref<const Vector>& residuals);

/// Human-readable description ending in a SHA-256 of the precomputed structures.
std::string model_summary(const FittedModel& model);

}  // namespace repclass
