#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dgk/types.hpp"

namespace dgk {

/// Dual soft-margin problem on a precomputed Gram matrix.
struct BinaryProblem {
  Matrix gram;
  std::vector<int> labels;  // +1 / -1
  double C = 1.0;
};

struct SolverOptions {
  double tolerance = 1e-3;          // stop when the max violating pair gap drops below this
  long max_updates = 10'000'000;
};

struct SvmModel {
  Vector alphas;
  /// Training labels (+1 / -1) aligned with `alphas`.
  std::vector<int> labels;
  double bias = 0.0;
  std::vector<Index> support_ids;
  /// Labels mapped to +1 and -1 respectively.
  std::pair<int, int> class_pair{+1, -1};
  double C = 1.0;
  /// Diagonal ridge added when the Gram matrix was indefinite beyond rounding.
  double ridge = 0.0;
  /// Dual objective sum(alpha) - 1/2 alpha^T Q alpha at the solution.
  double dual_objective = 0.0;
  /// Final max violating pair gap.
  double kkt_gap = 0.0;
  long updates = 0;
};

/// Thrown when the solver hits the update cap; carries the best-so-far state.
class SolverError : public ConvergenceError {
 public:
  SolverError(const std::string& what, SvmModel partial)
      : ConvergenceError(what), partial_(std::move(partial)) {}
  const SvmModel& partial() const { return partial_; }

 private:
  SvmModel partial_;
};

/// SMO with maximal violating pair selection.
SvmModel train_binary(const BinaryProblem& problem, const SolverOptions& options = {});

/// sum_i alpha_i y_i k(x_i, x) + bias, with k(x_i, x) = kernel_row[i].
double decision(const SvmModel& model, std::span<const double> kernel_row);
double decision(const SvmModel& model, const Vector& kernel_row);

/// Dual objective W(alpha) = sum(alpha) - 1/2 sum_ij a_i a_j y_i y_j K_ij.
double dual_objective(const Matrix& gram, std::span<const int> labels, const Vector& alphas);

/// Largest violation of the dual optimality conditions (max violating pair gap).
double kkt_violation(const Matrix& gram, std::span<const int> labels, const Vector& alphas, double C);

// ---------------------------------------------------------------------------
// One-vs-one multiclass

struct PairwiseModel {
  SvmModel model;
  std::vector<Index> members;  // training indices of this pair's sub-problem
};

struct MulticlassModel {
  std::vector<PairwiseModel> models;  // (classes[a], classes[b]) for a < b, row-major
  std::vector<int> classes;           // ascending
};

MulticlassModel train_multiclass(const Matrix& gram, std::span<const int> labels, double C,
                                 const SolverOptions& options = {});

/// kernel_row[i] = k(x_i, x) over the full training set.
int predict(const MulticlassModel& model, const Vector& kernel_row);

/// Rows of `kernel_rows` are test instances, columns training instances.
std::vector<int> predict(const MulticlassModel& model, const Matrix& kernel_rows);

nlohmann::json to_json(const SvmModel& model);
nlohmann::json to_json(const MulticlassModel& model);
SvmModel svm_model_from_json(const nlohmann::json& j);
MulticlassModel multiclass_from_json(const nlohmann::json& j);

}  // namespace dgk
