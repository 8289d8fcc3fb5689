#include "dgk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dgk {

namespace {

constexpr double kTau = 1e-12;
constexpr double kSupportThreshold = 1e-9;

void check_problem(const Matrix& gram, std::span<const int> labels, double C) {
  if (gram.rows() != gram.cols()) throw DimensionError("svm: Gram matrix is not square");
  if (static_cast<Index>(labels.size()) != gram.rows()) {
    throw DimensionError("svm: label count does not match the Gram matrix");
  }
  if (!(C > 0.0)) throw DimensionError("svm: C must be positive");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw DimensionError("svm: binary labels must be +1 or -1");
  }
  if (!pos || !neg) throw DegenerateError("svm: both classes must be present");
}

// Gradient of 1/2 a^T Q a - e^T a with Q_ij = y_i y_j K_ij.
Vector dual_gradient(const Matrix& gram, std::span<const int> labels, const Vector& alphas) {
  const Index n = gram.rows();
  Vector ya(n);
  for (Index i = 0; i < n; ++i) ya(i) = labels[i] * alphas(i);
  Vector g = gram * ya;
  for (Index i = 0; i < n; ++i) g(i) = labels[i] * g(i) - 1.0;
  return g;
}

struct Selection {
  Index i = -1;
  Index j = -1;
  double gap = 0.0;
};

// Maximal violating pair. i maximizes -y G over I_up, j minimizes it over I_low.
Selection select_pair(std::span<const int> y, const Vector& alpha, const Vector& grad, double C) {
  double up_max = -std::numeric_limits<double>::infinity();
  double low_min = std::numeric_limits<double>::infinity();
  Selection sel;
  for (Index t = 0; t < alpha.size(); ++t) {
    const double score = -y[t] * grad(t);
    const bool in_up = (y[t] == 1) ? alpha(t) < C : alpha(t) > 0.0;
    const bool in_low = (y[t] == 1) ? alpha(t) > 0.0 : alpha(t) < C;
    if (in_up && score > up_max) {
      up_max = score;
      sel.i = t;
    }
    if (in_low && score < low_min) {
      low_min = score;
      sel.j = t;
    }
  }
  sel.gap = (sel.i < 0 || sel.j < 0) ? 0.0 : up_max - low_min;
  return sel;
}

double compute_bias(std::span<const int> y, const Vector& alpha, const Vector& grad, double C) {
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  long free_count = 0;
  for (Index t = 0; t < alpha.size(); ++t) {
    const double yg = y[t] * grad(t);
    if (alpha(t) >= C) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  return -rho;
}

}  // namespace

double dual_objective(const Matrix& gram, std::span<const int> labels, const Vector& alphas) {
  const Vector g = dual_gradient(gram, labels, alphas);
  // W = e^T a - 1/2 a^T Q a = -1/2 a^T (g + e) + e^T a
  return alphas.sum() - 0.5 * alphas.dot(g + Vector::Ones(alphas.size()));
}

double kkt_violation(const Matrix& gram, std::span<const int> labels, const Vector& alphas, double C) {
  return select_pair(labels, alphas, dual_gradient(gram, labels, alphas), C).gap;
}

SvmModel train_binary(const BinaryProblem& problem, const SolverOptions& options) {
  check_problem(problem.gram, problem.labels, problem.C);
  const Index n = problem.gram.rows();
  const double C = problem.C;
  std::span<const int> y = problem.labels;

  SvmModel model;
  model.C = C;

  Matrix k = problem.gram;
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    const double bottom = eig.eigenvalues().minCoeff();
    if (top > 0.0 && bottom < -1e-8 * top) {
      model.ridge = 1e-8 * top;
      k.diagonal().array() += model.ridge;
    }
  }

  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);
  const Vector diag = k.diagonal();

  long updates = 0;
  Selection sel = select_pair(y, alpha, grad, C);
  while (sel.gap >= options.tolerance) {
    if (updates >= options.max_updates) {
      model.alphas = alpha;
      model.kkt_gap = sel.gap;
      model.updates = updates;
      throw SolverError("train_binary: no convergence after " + std::to_string(updates) +
                            " pair updates (gap " + std::to_string(sel.gap) + ")",
                        model);
    }
    const Index i = sel.i;
    const Index j = sel.j;
    const double qij = y[i] * y[j] * k(i, j);
    const double ai_old = alpha(i);
    const double aj_old = alpha(j);

    // Two-variable subproblem, clipped to the box along the constraint line.
    if (y[i] != y[j]) {
      double quad = diag(i) + diag(j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = -diff; }
      }
      if (diff > 0.0) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = C - diff; }
      } else {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = C + diff; }
      }
    } else {
      double quad = diag(i) + diag(j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = sum - C; }
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = sum - C; }
      } else {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = sum; }
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = sum; }
      }
    }

    const double dai = alpha(i) - ai_old;
    const double daj = alpha(j) - aj_old;
    for (Index t = 0; t < n; ++t) {
      grad(t) += y[t] * (y[i] * k(t, i) * dai + y[j] * k(t, j) * daj);
    }
    ++updates;
    sel = select_pair(y, alpha, grad, C);
  }

  model.alphas = alpha.cwiseMax(0.0).cwiseMin(C);
  model.bias = compute_bias(y, model.alphas, grad, C);
  for (Index t = 0; t < n; ++t) {
    if (model.alphas(t) > kSupportThreshold) model.support_ids.push_back(t);
  }
  model.kkt_gap = sel.gap;
  model.updates = updates;
  model.dual_objective = dual_objective(k, y, model.alphas);
  model.labels.assign(y.begin(), y.end());
  return model;
}

double decision(const SvmModel& model, std::span<const double> kernel_row) {
  if (static_cast<Index>(kernel_row.size()) != model.alphas.size()) {
    throw DimensionError("decision: kernel row has " + std::to_string(kernel_row.size()) +
                         " entries, model has " + std::to_string(model.alphas.size()));
  }
  double value = model.bias;
  for (Index i : model.support_ids) value += model.alphas(i) * model.labels[i] * kernel_row[i];
  return value;
}

double decision(const SvmModel& model, const Vector& kernel_row) {
  return decision(model, std::span<const double>(kernel_row.data(), kernel_row.size()));
}

MulticlassModel train_multiclass(const Matrix& gram, std::span<const int> labels, double C,
                                 const SolverOptions& options) {
  if (gram.rows() != gram.cols() || static_cast<Index>(labels.size()) != gram.rows()) {
    throw DimensionError("train_multiclass: Gram matrix and labels disagree in size");
  }
  MulticlassModel mm;
  mm.classes.assign(labels.begin(), labels.end());
  std::sort(mm.classes.begin(), mm.classes.end());
  mm.classes.erase(std::unique(mm.classes.begin(), mm.classes.end()), mm.classes.end());
  if (mm.classes.size() < 2) throw DegenerateError("train_multiclass: need at least two classes");

  for (std::size_t a = 0; a < mm.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < mm.classes.size(); ++b) {
      PairwiseModel pm;
      BinaryProblem sub;
      sub.C = C;
      for (Index t = 0; t < static_cast<Index>(labels.size()); ++t) {
        if (labels[t] == mm.classes[a] || labels[t] == mm.classes[b]) {
          pm.members.push_back(t);
          sub.labels.push_back(labels[t] == mm.classes[a] ? 1 : -1);
        }
      }
      const Index n = static_cast<Index>(pm.members.size());
      sub.gram.resize(n, n);
      for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < n; ++c) sub.gram(r, c) = gram(pm.members[r], pm.members[c]);
      }
      pm.model = train_binary(sub, options);
      pm.model.class_pair = {mm.classes[a], mm.classes[b]};
      mm.models.push_back(std::move(pm));
    }
  }
  return mm;
}

int predict(const MulticlassModel& model, const Vector& kernel_row) {
  const std::size_t k = model.classes.size();
  auto slot = [&](int label) {
    return static_cast<std::size_t>(
        std::lower_bound(model.classes.begin(), model.classes.end(), label) - model.classes.begin());
  };
  std::vector<int> votes(k, 0);
  std::vector<double> margin(k, 0.0);
  for (const auto& pm : model.models) {
    Vector row(static_cast<Index>(pm.members.size()));
    for (Index t = 0; t < row.size(); ++t) {
      const Index src = pm.members[t];
      if (src >= kernel_row.size()) {
        throw DimensionError("predict: kernel row is shorter than the training set");
      }
      row(t) = kernel_row(src);
    }
    const double value = decision(pm.model, row);
    const std::size_t winner = slot(value >= 0.0 ? pm.model.class_pair.first : pm.model.class_pair.second);
    ++votes[winner];
    margin[winner] += std::fabs(value);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best])) best = c;
  }
  return model.classes[best];
}

std::vector<int> predict(const MulticlassModel& model, const Matrix& kernel_rows) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(kernel_rows.rows()));
  for (Index r = 0; r < kernel_rows.rows(); ++r) out.push_back(predict(model, Vector(kernel_rows.row(r).transpose())));
  return out;
}

nlohmann::json to_json(const SvmModel& model) {
  nlohmann::json j;
  j["alphas"] = std::vector<double>(model.alphas.begin(), model.alphas.end());
  j["labels"] = model.labels;
  j["bias"] = model.bias;
  j["support_ids"] = model.support_ids;
  j["class_pair"] = {model.class_pair.first, model.class_pair.second};
  j["C"] = model.C;
  j["ridge"] = model.ridge;
  j["dual_objective"] = model.dual_objective;
  j["kkt_gap"] = model.kkt_gap;
  j["updates"] = model.updates;
  return j;
}

SvmModel svm_model_from_json(const nlohmann::json& j) {
  try {
    SvmModel m;
    const auto alphas = j.at("alphas").get<std::vector<double>>();
    m.alphas = Eigen::Map<const Vector>(alphas.data(), static_cast<Index>(alphas.size()));
    m.labels = j.at("labels").get<std::vector<int>>();
    m.bias = j.at("bias").get<double>();
    m.support_ids = j.at("support_ids").get<std::vector<Index>>();
    m.class_pair = {j.at("class_pair").at(0).get<int>(), j.at("class_pair").at(1).get<int>()};
    m.C = j.value("C", 1.0);
    m.ridge = j.value("ridge", 0.0);
    m.dual_objective = j.value("dual_objective", 0.0);
    m.kkt_gap = j.value("kkt_gap", 0.0);
    m.updates = j.value("updates", 0L);
    if (static_cast<Index>(m.labels.size()) != m.alphas.size()) {
      throw FormatError("svm model: labels and alphas differ in length");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("svm model: ") + e.what());
  }
}

nlohmann::json to_json(const MulticlassModel& model) {
  nlohmann::json j;
  j["classes"] = model.classes;
  j["models"] = nlohmann::json::array();
  for (const auto& pm : model.models) {
    nlohmann::json e = to_json(pm.model);
    e["members"] = pm.members;
    j["models"].push_back(std::move(e));
  }
  return j;
}

MulticlassModel multiclass_from_json(const nlohmann::json& j) {
  try {
    MulticlassModel mm;
    mm.classes = j.at("classes").get<std::vector<int>>();
    for (const auto& e : j.at("models")) {
      PairwiseModel pm;
      pm.model = svm_model_from_json(e);
      pm.members = e.at("members").get<std::vector<Index>>();
      mm.models.push_back(std::move(pm));
    }
    const std::size_t k = mm.classes.size();
    if (mm.models.size() != k * (k - 1) / 2) throw FormatError("multiclass model: wrong pair count");
    return mm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("multiclass model: ") + e.what());
  }
}

}  // namespace dgk
