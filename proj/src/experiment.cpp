#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "dgk/harness.hpp"
#include "dgk/parallel.hpp"
#include "dgk/svm.hpp"

namespace dgk {

namespace {

// One kernel hyperparameter setting at one rank; C is scanned inside.
struct Cell {
  Index r = 1;
  KernelFamily family;
  CellParams params;
};

Matrix sub_block(const Matrix& k, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = k(static_cast<Index>(rows[i]), static_cast<Index>(cols[j]));
    }
  }
  return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

// Trains on a Gram block and returns predictions for the given test rows.
std::vector<int> fit_predict(const Matrix& k_train, const std::vector<int>& y_train, const Matrix& k_test,
                             double C) {
  const std::set<int> classes(y_train.begin(), y_train.end());
  if (classes.size() < 2) return std::vector<int>(static_cast<std::size_t>(k_test.rows()), *classes.begin());
  const MulticlassModel model = train_multiclass(k_train, y_train, C);
  return predict(model, k_test);
}

double error_rate(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return truth.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(truth.size());
}

// Inner cross-validation. Receives only the training block of the Gram
// matrix and the training labels; returns the mean CV error for every C.
std::vector<double> cross_validate(const Matrix& k_train, const std::vector<int>& y_train,
                                   const std::vector<int>& folds, int n_folds,
                                   const std::vector<double>& C_values) {
  std::vector<double> errors(C_values.size(), 0.0);
  std::size_t total = 0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> fit, held;
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? held : fit).push_back(i);
    if (held.empty() || fit.empty()) continue;
    const Matrix k_fit = sub_block(k_train, fit, fit);
    const Matrix k_held = sub_block(k_train, held, fit);
    const auto y_fit = pick(y_train, fit);
    const auto y_held = pick(y_train, held);
    for (std::size_t c = 0; c < C_values.size(); ++c) {
      const auto pred = fit_predict(k_fit, y_fit, k_held, C_values[c]);
      errors[c] += error_rate(pred, y_held) * static_cast<double>(held.size());
    }
    total += held.size();
  }
  for (auto& e : errors) e /= static_cast<double>(std::max<std::size_t>(total, 1));
  return errors;
}

// Subspaces with one common rank: min(r, shortest sequence, smallest
// numerical rank) over the evaluation set.
std::vector<SubspaceRep> uniform_subspaces(const std::vector<SequenceMatrix>& seqs, Index r) {
  std::vector<SubspaceRep> reps;
  reps.reserve(seqs.size());
  Index common = r;
  for (const auto& s : seqs) {
    reps.push_back(build_subspace(s, std::min(r, std::min(s.dim(), s.frames()))));
    common = std::min(common, reps.back().rank());
  }
  for (auto& rep : reps) {
    if (rep.rank() > common) {
      rep.basis = rep.basis.leftCols(common).eval();
      rep.singvals = rep.singvals.head(common).eval();
    }
  }
  return reps;
}

Index feasible_rank(const std::vector<SequenceMatrix>& seqs, Index r) {
  for (const auto& s : seqs) r = std::min(r, std::min(s.dim(), s.frames()));
  return r;
}

std::vector<Cell> grid_cells(const std::string& kernel, const ParamGrid& grid) {
  std::vector<Cell> cells;
  for (Index r : grid.r_values) {
    if (kernel == "dg-pg") {
      for (double e : grid.epsilon_values) cells.push_back({r, DgPgFamily{e}, {0.0, r, e, std::nullopt}});
    } else if (kernel == "dg-dir") {
      for (double l : grid.lambda_m_values) cells.push_back({r, DgDirFamily{l}, {0.0, r, std::nullopt, l}});
    } else {
      cells.push_back({r, parse_kernel(kernel), {0.0, r, std::nullopt, std::nullopt}});
    }
  }
  return cells;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

const KernelResult& Report::result(const std::string& kernel) const {
  for (const auto& k : kernels) {
    if (k.kernel == kernel) return k;
  }
  throw FormatError("report has no results for kernel '" + kernel + "'");
}

Report run_experiment(const ExperimentPlan& plan, const Dataset& data) {
  plan.validate();
  if (data.size() == 0) throw DimensionError("run_experiment: empty dataset");

  // Evaluation set and ANA noise pool.
  std::set<int> noise_ids;
  if (plan.noise) {
    for (const auto& name : plan.noise->noise_classes) noise_ids.insert(data.class_index(name));
  }
  std::vector<std::size_t> eval_pos;
  std::vector<SequenceMatrix> pool;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!noise_ids.count(data.labels[i])) {
      eval_pos.push_back(i);
    } else {
      pool.push_back(plan.anchor_joint ? anchor_to_joint(data.sequences[i], *plan.anchor_joint)
                                       : data.sequences[i]);
    }
  }
  const auto eval_labels = pick(data.labels, eval_pos);
  const auto eval_subjects = pick(data.subjects, eval_pos);
  const std::set<int> eval_classes(eval_labels.begin(), eval_labels.end());
  if (eval_classes.size() < 2) throw DegenerateError("run_experiment: need at least two evaluation classes");
  if (plan.noise && pool.empty()) throw DegenerateError("run_experiment: noise classes have no sequences");

  Report report;
  report.plan = to_json(plan);
  report.seed = plan.seed;
  if (plan.noise) report.noise_classes = plan.noise->noise_classes;
  for (int c : eval_classes) report.evaluation_classes.push_back(data.class_names[static_cast<std::size_t>(c)]);
  for (const auto& k : plan.kernels) report.kernels.push_back({k, {}, 0.0, 0.0, {}});

  for (int rep = 0; rep < plan.repeats; ++rep) {
    const std::uint64_t rep_seed = derive_seed(plan.seed, static_cast<std::uint64_t>(rep));
    report.repeat_seeds.push_back(rep_seed);
    Rng transform_rng(derive_seed(rep_seed, 1));
    Rng split_rng(derive_seed(rep_seed, 2));

    std::vector<SequenceMatrix> seqs;
    seqs.reserve(eval_pos.size());
    for (auto p : eval_pos) {
      SequenceMatrix s = plan.anchor_joint ? anchor_to_joint(data.sequences[p], *plan.anchor_joint)
                                           : data.sequences[p];
      if (plan.noise) s = append_noise(s, pool, transform_rng);
      if (plan.latency_cap) s = truncate_latency(s, *plan.latency_cap);
      seqs.push_back(std::move(s));
    }

    const auto splits = make_splits(plan.split, eval_labels, eval_subjects, split_rng);
    auto& recorded = report.splits.emplace_back();
    for (const auto& s : splits) recorded.push_back({pick(eval_pos, s.train), pick(eval_pos, s.test)});
    std::vector<std::vector<int>> inner_folds;
    for (std::size_t u = 0; u < splits.size(); ++u) {
      Rng fold_rng(derive_seed(rep_seed, 3, u));
      inner_folds.push_back(stratified_folds(pick(eval_labels, splits[u].train), plan.inner_folds, fold_rng));
    }

    // Subspaces per distinct feasible rank, shared across kernel families.
    std::map<Index, std::vector<SubspaceRep>> reps_by_rank;
    for (Index r : plan.grid.r_values) {
      const Index r_eff = feasible_rank(seqs, r);
      if (!reps_by_rank.count(r_eff)) reps_by_rank.emplace(r_eff, uniform_subspaces(seqs, r_eff));
    }
    auto reps_for = [&](Index r) -> const std::vector<SubspaceRep>& {
      return reps_by_rank.at(feasible_rank(seqs, r));
    };

    for (std::size_t kix = 0; kix < plan.kernels.size(); ++kix) {
      const std::string& kernel = plan.kernels[kix];
      const auto cells = grid_cells(kernel, plan.grid);

      // cv[cell][unit][C]; empty when the cell is infeasible (DG-PG with m = D).
      std::vector<std::vector<std::vector<double>>> cv(cells.size());
      parallel_for(cells.size(), plan.threads, [&](std::size_t ci) {
        const auto& reps = reps_for(cells[ci].r);
        if (std::holds_alternative<DgPgFamily>(cells[ci].family) &&
            reps.front().rank() >= reps.front().ambient_dim()) {
          return;
        }
        const Matrix k_all = gram(reps, KernelSpec{cells[ci].family, true}).values;
        for (std::size_t u = 0; u < splits.size(); ++u) {
          const auto& train = splits[u].train;
          cv[ci].push_back(cross_validate(sub_block(k_all, train, train), pick(eval_labels, train),
                                          inner_folds[u], plan.inner_folds, plan.grid.C_values));
        }
      });

      KernelResult& result = report.kernels[kix];
      std::vector<double> unit_errors;
      for (std::size_t u = 0; u < splits.size(); ++u) {
        std::size_t best_cell = cells.size();
        std::size_t best_c = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
          if (cv[ci].empty()) continue;
          for (std::size_t c = 0; c < plan.grid.C_values.size(); ++c) {
            CellParams params = cells[ci].params;
            params.C = plan.grid.C_values[c];
            report.rows.push_back({kernel, params, rep, static_cast<int>(u), "cv", cv[ci][u][c]});
            if (cv[ci][u][c] < best_err) {
              best_err = cv[ci][u][c];
              best_cell = ci;
              best_c = c;
            }
          }
        }
        if (best_cell == cells.size()) {
          throw DimensionError("run_experiment: no feasible grid cell for kernel '" + kernel + "'");
        }

        // Refit on the whole training split with the selected setting.
        const Cell& cell = cells[best_cell];
        const double C = plan.grid.C_values[best_c];
        const Matrix k_all = gram(reps_for(cell.r), KernelSpec{cell.family, true}).values;
        const auto& train = splits[u].train;
        const auto& test = splits[u].test;
        const auto pred = fit_predict(sub_block(k_all, train, train), pick(eval_labels, train),
                                      sub_block(k_all, test, train), C);
        const double test_err = error_rate(pred, pick(eval_labels, test));
        unit_errors.push_back(test_err);

        CellParams chosen = cell.params;
        chosen.C = C;
        report.rows.push_back({kernel, chosen, rep, static_cast<int>(u), "test", test_err});
        result.selections.push_back({rep, static_cast<int>(u), chosen, best_err, test_err});
      }
      result.repeat_errors.push_back(mean(unit_errors));
    }
  }

  for (auto& k : report.kernels) {
    k.mean_error = mean(k.repeat_errors);
    k.std_error = sample_std(k.repeat_errors);
  }
  return report;
}

}  // namespace dgk
