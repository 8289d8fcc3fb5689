#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dgk/harness.hpp"

namespace dgk {

SequenceMatrix append_noise(const SequenceMatrix& sample, const std::vector<SequenceMatrix>& noise_pool,
                            Rng& rng) {
  if (noise_pool.empty()) throw DimensionError("append_noise: empty noise pool");
  std::uniform_int_distribution<std::size_t> pick(0, noise_pool.size() - 1);
  const SequenceMatrix& noise = noise_pool[pick(rng)];
  if (noise.dim() != sample.dim()) {
    throw DimensionError("append_noise: noise sequence '" + noise.source_id + "' has dimension " +
                         std::to_string(noise.dim()) + ", sample has " + std::to_string(sample.dim()));
  }
  SequenceMatrix out;
  out.source_id = sample.source_id + "+" + noise.source_id;
  out.data.resize(sample.dim(), sample.frames() + noise.frames());
  out.data << sample.data, noise.data;
  return out;
}

SequenceMatrix truncate_latency(const SequenceMatrix& sample, Index max_frames) {
  if (max_frames < 1) throw DimensionError("truncate_latency: frame cap must be >= 1");
  SequenceMatrix out;
  out.source_id = sample.source_id;
  out.data = sample.data.leftCols(std::min(max_frames, sample.frames()));
  return out;
}

SequenceMatrix anchor_to_joint(const SequenceMatrix& sample, Index joint) {
  if (sample.dim() % 3 != 0 || joint < 0 || 3 * joint + 3 > sample.dim()) {
    throw DimensionError("anchor_to_joint: features are not xyz triples or joint out of range");
  }
  SequenceMatrix out = sample;
  const Matrix anchor = sample.data.middleRows(3 * joint, 3);
  for (Index j = 0; j < sample.dim() / 3; ++j) out.data.middleRows(3 * j, 3) -= anchor;
  return out;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, Rng& rng) {
  if (k < 2) throw DimensionError("stratified_folds: need at least two folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<int> fold(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t p = 0; p < members.size(); ++p) {
      fold[members[p]] = static_cast<int>((offset + p) % static_cast<std::size_t>(k));
    }
    offset += members.size();
  }
  return fold;
}

namespace {

constexpr int kSplitRetries = 20;

std::vector<Split> draw_splits(const SplitRule& rule, const std::vector<int>& labels,
                               const std::vector<std::string>& subjects, Rng& rng) {
  if (const auto* kf = std::get_if<KFold>(&rule)) {
    const auto fold = stratified_folds(labels, kf->k, rng);
    std::vector<Split> splits(static_cast<std::size_t>(kf->k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (int f = 0; f < kf->k; ++f) {
        auto& s = splits[static_cast<std::size_t>(f)];
        (fold[i] == f ? s.test : s.train).push_back(i);
      }
    }
    return splits;
  }

  // Group positions, shuffle each group, send a leading share to training.
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  const bool per_subject = std::holds_alternative<PerSubjectFraction>(rule);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[{per_subject ? subjects[i] : std::string(), labels[i]}].push_back(i);
  }
  Split split;
  for (auto& [key, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t n = members.size();
    std::size_t n_train = 0;
    if (per_subject) {
      const double f = std::get<PerSubjectFraction>(rule).train_fraction;
      n_train = static_cast<std::size_t>(std::lround(f * static_cast<double>(n)));
    } else {
      n_train = n / 2;
    }
    for (std::size_t p = 0; p < n; ++p) (p < n_train ? split.train : split.test).push_back(members[p]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return {split};
}

}  // namespace

std::vector<Split> make_splits(const SplitRule& rule, const std::vector<int>& labels,
                               const std::vector<std::string>& subjects, Rng& rng) {
  if (subjects.size() != labels.size()) throw DimensionError("make_splits: subjects and labels differ");
  if (const auto* f = std::get_if<PerSubjectFraction>(&rule);
      f && !(f->train_fraction > 0.0 && f->train_fraction < 1.0)) {
    throw DimensionError("make_splits: train fraction must lie in (0, 1)");
  }
  if (const auto* kf = std::get_if<KFold>(&rule); kf && kf->k < 2) {
    throw DimensionError("make_splits: k-fold needs k >= 2");
  }
  const std::set<int> classes(labels.begin(), labels.end());

  for (int attempt = 0; attempt < kSplitRetries; ++attempt) {
    auto splits = draw_splits(rule, labels, subjects, rng);
    bool ok = true;
    for (const auto& s : splits) {
      std::set<int> seen;
      for (auto i : s.train) seen.insert(labels[i]);
      if (seen != classes || s.test.empty()) ok = false;
    }
    if (ok) return splits;
  }
  throw DegenerateError("make_splits: a class is missing from a training split after " +
                        std::to_string(kSplitRetries) + " attempts");
}

ParamGrid ParamGrid::defaults() {
  ParamGrid g;
  for (int e = -4; e <= 5; ++e) g.C_values.push_back(std::pow(10.0, e));
  for (Index r = 1; r <= 15; ++r) g.r_values.push_back(r);
  g.epsilon_values = {1e-6, 1e-2, 0.05};
  for (int t = 1; t <= 10; ++t) g.epsilon_values.push_back(t / 10.0);
  for (double e : {1.2, 1.7, 2.0, 5.0, 40.0}) g.epsilon_values.push_back(e);
  g.lambda_m_values = {0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9};
  return g;
}

void ParamGrid::validate() const {
  if (C_values.empty() || r_values.empty() || epsilon_values.empty() || lambda_m_values.empty()) {
    throw FormatError("parameter grid: every list must be nonempty");
  }
  for (double c : C_values) {
    if (!(c > 0.0)) throw FormatError("parameter grid: C values must be positive");
  }
  for (Index r : r_values) {
    if (r < 1) throw FormatError("parameter grid: r values must be >= 1");
  }
  for (double e : epsilon_values) {
    if (!(e >= 0.0)) throw FormatError("parameter grid: epsilon values must be >= 0");
  }
  for (double l : lambda_m_values) {
    if (!(l >= 0.0 && l < 1.0)) throw FormatError("parameter grid: lambda_m values must lie in [0, 1)");
  }
}

void ExperimentPlan::validate() const {
  grid.validate();
  if (repeats < 1) throw FormatError("plan: repeats must be >= 1");
  if (inner_folds < 2) throw FormatError("plan: inner folds must be >= 2");
  if (kernels.empty()) throw FormatError("plan: no kernel families selected");
  for (const auto& k : kernels) parse_kernel(k);
  if (const auto* f = std::get_if<PerSubjectFraction>(&split);
      f && !(f->train_fraction > 0.0 && f->train_fraction < 1.0)) {
    throw FormatError("plan: train fraction must lie in (0, 1)");
  }
  if (const auto* kf = std::get_if<KFold>(&split); kf && kf->k < 2) {
    throw FormatError("plan: k-fold needs k >= 2");
  }
  if (latency_cap && *latency_cap < 1) throw FormatError("plan: latency cap must be >= 1");
  if (noise && noise->noise_classes.empty()) throw FormatError("plan: ANA needs at least one noise class");
}

}  // namespace dgk
