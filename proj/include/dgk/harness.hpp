#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dgk/kernels.hpp"
#include "dgk/subspace.hpp"

namespace dgk {

// ---------------------------------------------------------------------------
// Datasets

struct ManifestEntry {
  std::filesystem::path path;
  std::string label;
  std::string subject_id;
  std::string trial_id;
};

/// CSV with header `path,label,subject,trial`. Relative paths are resolved
/// against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<Index> feature_dim;
};

struct Dataset {
  std::vector<SequenceMatrix> sequences;
  std::vector<int> labels;               // index into class_names
  std::vector<std::string> class_names;  // ascending
  std::vector<std::string> subjects;
  std::vector<std::string> trials;
  Index feature_dim = 0;

  std::size_t size() const { return sequences.size(); }
  /// Index of a class name; throws FormatError if unknown.
  int class_index(const std::string& name) const;
};

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads every sequence named by the manifest and checks the feature
/// dimension (taken from the first file when not given).
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     std::optional<Index> feature_dim = std::nullopt, int skip_header_rows = 0);
Dataset load_dataset(const DatasetManifest& manifest, int skip_header_rows = 0);

/// Writes one CSV per sequence plus `manifest.csv` into `dir`.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data);

// ---------------------------------------------------------------------------
// Sequence transforms

/// Concatenates the frames of one uniformly drawn pool sequence after the
/// sample's frames.
SequenceMatrix append_noise(const SequenceMatrix& sample, const std::vector<SequenceMatrix>& noise_pool,
                            Rng& rng);

/// First min(K, N) frames.
SequenceMatrix truncate_latency(const SequenceMatrix& sample, Index max_frames);

/// Subtracts the xyz triple of `joint` from every joint triple of each frame.
SequenceMatrix anchor_to_joint(const SequenceMatrix& sample, Index joint);

// ---------------------------------------------------------------------------
// Protocols

/// Per subject and class, a fraction of the trials goes to training.
struct PerSubjectFraction {
  double train_fraction = 1.0 / 3.0;
};
/// Per class, a random half goes to training.
struct RandomHalf {};
/// Stratified k-fold; every fold serves once as the test set.
struct KFold {
  int k = 4;
};
using SplitRule = std::variant<PerSubjectFraction, RandomHalf, KFold>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Splits over positions 0..labels.size()-1. Retries a bounded number of
/// times when a class is missing from some training side, then throws.
std::vector<Split> make_splits(const SplitRule& rule, const std::vector<int>& labels,
                               const std::vector<std::string>& subjects, Rng& rng);

/// Stratified fold assignment (values in [0, k)).
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, Rng& rng);

struct ParamGrid {
  std::vector<double> C_values;
  std::vector<Index> r_values;
  std::vector<double> epsilon_values;
  std::vector<double> lambda_m_values;

  /// C in {1e-4 .. 1e5}, r in {1 .. 15}, the 18 epsilon values and the sparse
  /// lambda_m set.
  static ParamGrid defaults();
  void validate() const;
};

struct AnaSpec {
  std::vector<std::string> noise_classes;
};

struct ExperimentPlan {
  SplitRule split = PerSubjectFraction{};
  int repeats = 10;
  std::optional<AnaSpec> noise;
  std::optional<Index> latency_cap;
  ParamGrid grid = ParamGrid::defaults();
  std::vector<std::string> kernels{"proj", "bc", "scproj", "dg-pg", "dg-dir"};
  std::uint64_t seed = 0;
  int inner_folds = 3;
  std::optional<Index> anchor_joint;
  unsigned threads = 1;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Reports

struct CellParams {
  double C = 1.0;
  Index r = 1;
  std::optional<double> epsilon;
  std::optional<double> lambda_m;
};

struct ReportRow {
  std::string kernel;
  CellParams params;
  int repeat = 0;
  int fold = 0;
  std::string stage;  // "cv" or "test"
  double error = 0.0;
};

struct ModelSelection {
  int repeat = 0;
  int fold = 0;
  CellParams params;
  double cv_error = 0.0;
  double test_error = 0.0;
};

struct KernelResult {
  std::string kernel;
  std::vector<double> repeat_errors;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::vector<ModelSelection> selections;
};

struct Report {
  nlohmann::json plan;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> repeat_seeds;
  std::vector<std::string> noise_classes;
  std::vector<std::string> evaluation_classes;
  std::vector<KernelResult> kernels;
  std::vector<ReportRow> rows;
  /// Outer splits per repeat, as dataset positions.
  std::vector<std::vector<Split>> splits;

  const KernelResult& result(const std::string& kernel) const;
};

/// split -> transforms -> subspaces -> inner CV on the training block only ->
/// refit -> test error, for every repeat and kernel family.
Report run_experiment(const ExperimentPlan& plan, const Dataset& data);

nlohmann::json to_json(const Report& report);
void write_report(const std::filesystem::path& json_path, const Report& report);
void write_report_csv(const std::filesystem::path& csv_path, const Report& report);

nlohmann::json to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const nlohmann::json& j);
ParamGrid grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParamGrid& grid);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  int classes = 4;
  Index latent_dim = 3;
  int samples_per_class = 12;
  Index dim = 20;
  Index frames = 60;
  double noise = 0.1;
  int subjects = 4;
  /// All classes draw from one latent subspace (no class signal).
  bool shared_latent = false;
  std::uint64_t seed = 0;
};

/// Per class a latent orthonormal basis; each sample is a smooth latent
/// trajectory mapped through the basis plus isotropic Gaussian noise.
Dataset synth_generate(const SynthSpec& spec);

SynthSpec synth_from_json(const nlohmann::json& j);

}  // namespace dgk
