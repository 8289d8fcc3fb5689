#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dgk/grassmann.hpp"
#include "dgk/harness.hpp"
#include "dgk/kernels.hpp"
#include "dgk/svm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KernelOptions {
  std::string kernel = "proj";
  double epsilon = 0.1;
  double lambda_m = 0.1;
  dgk::Index rank = 5;
};

void add_kernel_options(CLI::App* cmd, KernelOptions& k) {
  cmd->add_option("--kernel", k.kernel, "Kernel family")
      ->check(CLI::IsMember({"proj", "bc", "scproj", "dg-pg", "dg-dir"}));
  cmd->add_option("--epsilon", k.epsilon, "DG-PG disturbance level")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda-m", k.lambda_m, "DG-Dir truncation threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--rank", k.rank, "Subspace rank r")->check(CLI::PositiveNumber);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw dgk::FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw dgk::FormatError(path.string() + ": " + e.what());
  }
}

std::vector<dgk::SubspaceRep> subspaces(const dgk::Dataset& data, dgk::Index r) {
  std::vector<dgk::SubspaceRep> reps;
  for (const auto& s : data.sequences) reps.push_back(dgk::build_subspace(s, std::min({r, s.dim(), s.frames()})));
  dgk::Index common = r;
  for (const auto& rep : reps) common = std::min(common, rep.rank());
  for (auto& rep : reps) {
    rep.basis = rep.basis.leftCols(common).eval();
    rep.singvals = rep.singvals.head(common).eval();
  }
  return reps;
}

std::vector<std::string> sequence_ids(const dgk::Dataset& data) {
  std::vector<std::string> ids;
  for (const auto& s : data.sequences) ids.push_back(s.source_id);
  return ids;
}

int run_build_gram(const fs::path& manifest, const KernelOptions& k, const fs::path& out, unsigned threads) {
  const auto data = dgk::load_dataset(manifest);
  const auto reps = subspaces(data, k.rank);
  const auto g = dgk::gram(reps, {dgk::parse_kernel(k.kernel, k.epsilon, k.lambda_m), true}, sequence_ids(data),
                           threads);
  dgk::write_gram_csv(out, g);
  return 0;
}

int run_train(const fs::path& manifest, const KernelOptions& k, double C, const fs::path& out) {
  const auto data = dgk::load_dataset(manifest);
  const auto reps = subspaces(data, k.rank);
  const auto family = dgk::parse_kernel(k.kernel, k.epsilon, k.lambda_m);
  const auto g = dgk::gram(reps, {family, true});
  const auto model = dgk::train_multiclass(g.values, data.labels, C);
  const auto pred = dgk::predict(model, g.values);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != data.labels[i];

  json j;
  j["kernel"] = k.kernel;
  j["epsilon"] = k.kernel == "dg-pg" ? json(k.epsilon) : json(nullptr);
  j["lambda_m"] = k.kernel == "dg-dir" ? json(k.lambda_m) : json(nullptr);
  j["rank"] = reps.front().rank();
  j["C"] = C;
  j["class_names"] = data.class_names;
  j["model"] = dgk::to_json(model);
  j["training_error"] = static_cast<double>(wrong) / static_cast<double>(pred.size());
  std::ofstream os(out);
  if (!os) throw dgk::FormatError("cannot write " + out.string());
  os << j.dump(2) << '\n';
  std::cout << "training error " << j["training_error"].get<double>() << '\n';
  return 0;
}

int run_experiment_cmd(const fs::path& manifest, dgk::ExperimentPlan plan, const fs::path& out) {
  const auto data = dgk::load_dataset(manifest);
  const auto report = dgk::run_experiment(plan, data);
  dgk::write_report(out, report);
  fs::path csv = out;
  csv.replace_extension(".csv");
  dgk::write_report_csv(csv, report);
  for (const auto& k : report.kernels) {
    std::cout << k.kernel << " mean error " << k.mean_error << " (std " << k.std_error << ")\n";
  }
  return 0;
}

// Monte-Carlo checks of the closed-form expectations behind the kernels.
json validate_math(std::uint64_t seed, long samples) {
  json checks = json::array();
  const double bound = 5.0 / std::sqrt(static_cast<double>(samples));
  auto record = [&](const std::string& name, double deviation, double tolerance) {
    checks.push_back({{"check", name}, {"max_deviation", deviation}, {"tolerance", tolerance},
                      {"pass", deviation <= tolerance}});
  };

  dgk::Rng rng(dgk::derive_seed(seed, 1));
  dgk::SequenceMatrix x;
  x.data = dgk::Matrix::Random(8, 30);
  const auto rep = dgk::build_subspace(x, 3);
  const auto nullb = dgk::null_complement(rep);
  const dgk::Vector u = rep.basis.col(0);
  const double d = 8.0, m = 3.0;

  // Fixed angle: E[u~ u~^T] = cos^2 uu^T + sin^2/(D-m) U_perp U_perp^T.
  const double theta = 0.6;
  const auto fixed = dgk::mc_expectation(u, nullb, 0.5, dgk::FixedAngle{theta}, samples, rng);
  const dgk::Matrix expect_fixed = std::pow(std::cos(theta), 2) * u * u.transpose() +
                                   std::pow(std::sin(theta), 2) / (d - m) * dgk::projector(nullb.basis);
  record("fixed-angle second moment", (fixed.mean_matrix - expect_fixed).cwiseAbs().maxCoeff(), bound);

  // Calibrated pseudo-Gaussian: U (S - Delta) U^T + Delta I.
  const double eps = 0.5;
  const auto pg = dgk::mc_expectation(rep, {dgk::PseudoGaussian{eps, dgk::CalibratedAngle{}}, seed}, samples);
  const auto coef = dgk::dg_pg_coefficients(rep, eps);
  dgk::Vector w = coef.sigma_diag.array() - coef.delta;
  const dgk::Matrix expect_pg = rep.basis * w.asDiagonal() * rep.basis.transpose() +
                                coef.delta * dgk::Matrix::Identity(8, 8);
  record("pseudo-gaussian expectation", (pg.mean_matrix - expect_pg).cwiseAbs().maxCoeff(), bound);

  // Dirichlet fluctuation: sum_l p_l u_l u_l^T.
  const double lambda_m = 0.2;
  const auto dir = dgk::mc_expectation(rep, {dgk::DirichletFluctuation{lambda_m}, seed + 1}, samples);
  dgk::Matrix expect_dir = dgk::Matrix::Zero(8, 8);
  for (dgk::Index l = 0; l < rep.rank(); ++l) {
    const dgk::Vector ul = rep.basis.col(l);
    expect_dir += dgk::retention_prob(rep.singvals(l), lambda_m) * ul * ul.transpose();
  }
  record("dirichlet retention expectation", (dir.mean_matrix - expect_dir).cwiseAbs().maxCoeff(), bound);

  bool all = true;
  for (const auto& c : checks) all = all && c["pass"].get<bool>();
  return {{"seed", seed}, {"samples", samples}, {"checks", checks}, {"pass", all}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace kernels for sequence classification"};
  app.require_subcommand(1);

  KernelOptions kopt;
  fs::path manifest, out;
  unsigned threads = 1;
  std::uint64_t seed = 0;

  auto* build = app.add_subcommand("build-gram", "Write the Gram matrix of a dataset");
  build->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out, "Output CSV")->required();
  build->add_option("--threads", threads, "Worker threads (0 = all cores)");
  add_kernel_options(build, kopt);

  double C = 1.0;
  auto* train = app.add_subcommand("train", "Train a one-vs-one SVM on a whole dataset");
  train->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output model JSON")->required();
  train->add_option("--C", C, "Box constraint")->check(CLI::PositiveNumber);
  add_kernel_options(train, kopt);

  fs::path plan_path, grid_path;
  std::vector<std::string> kernels, ana_classes;
  std::optional<dgk::Index> latency;
  std::optional<int> repeats;
  std::string split;
  std::optional<std::uint64_t> exp_seed;
  auto* exp = app.add_subcommand("experiment", "Run the split / grid search / test protocol");
  exp->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Report JSON (rows go to the same name with .csv)")->required();
  exp->add_option("--plan", plan_path, "Plan JSON")->check(CLI::ExistingFile);
  exp->add_option("--grid", grid_path, "Parameter grid JSON")->check(CLI::ExistingFile);
  exp->add_option("--kernel", kernels, "Kernel families (repeatable)")
      ->check(CLI::IsMember({"proj", "bc", "scproj", "dg-pg", "dg-dir"}));
  exp->add_option("--latency", latency, "Keep the first K frames")->check(CLI::PositiveNumber);
  exp->add_option("--ana-class", ana_classes, "Noise class for appended-noise corruption (repeatable)");
  exp->add_option("--repeats", repeats, "Number of repeats")->check(CLI::PositiveNumber);
  exp->add_option("--seed", exp_seed, "Master seed");
  exp->add_option("--split", split, "Split rule")->check(CLI::IsMember({"per-subject", "random-half", "kfold"}));
  exp->add_option("--threads", threads, "Worker threads (0 = all cores)");

  dgk::SynthSpec synth;
  fs::path synth_config;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset");
  syn->add_option("--out", out, "Output directory")->required();
  auto* config_opt = syn->add_option("--config", synth_config, "Generator JSON")->check(CLI::ExistingFile);
  syn->add_option("--classes", synth.classes, "Number of classes");
  syn->add_option("--samples-per-class", synth.samples_per_class, "Sequences per class");
  syn->add_option("--dim", synth.dim, "Feature dimension");
  syn->add_option("--latent-dim", synth.latent_dim, "Latent subspace dimension");
  syn->add_option("--frames", synth.frames, "Frames per sequence");
  syn->add_option("--noise", synth.noise, "Noise standard deviation");
  syn->add_option("--subjects", synth.subjects, "Number of subjects");
  syn->add_option("--seed", synth.seed, "Generator seed");
  for (auto* opt : syn->get_options()) {
    if (opt != config_opt && opt->get_name() != "--out" && opt->get_name() != "--help") opt->excludes(config_opt);
  }

  long samples = 100000;
  auto* val = app.add_subcommand("validate-math", "Monte-Carlo checks of the closed-form expectations");
  val->add_option("--seed", seed, "Seed");
  val->add_option("--samples", samples, "Samples per check")->check(CLI::PositiveNumber);
  val->add_option("--out", out, "Write the JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) return run_build_gram(manifest, kopt, out, threads);
    if (*train) return run_train(manifest, kopt, C, out);
    if (*exp) {
      dgk::ExperimentPlan plan = plan_path.empty() ? dgk::ExperimentPlan{} : dgk::plan_from_json(read_json(plan_path));
      if (!grid_path.empty()) plan.grid = dgk::grid_from_json(read_json(grid_path));
      if (!kernels.empty()) plan.kernels = kernels;
      if (!ana_classes.empty()) plan.noise = dgk::AnaSpec{ana_classes};
      if (latency) plan.latency_cap = latency;
      if (repeats) plan.repeats = *repeats;
      if (exp_seed) plan.seed = *exp_seed;
      if (split == "per-subject") plan.split = dgk::PerSubjectFraction{};
      if (split == "random-half") plan.split = dgk::RandomHalf{};
      if (split == "kfold") plan.split = dgk::KFold{};
      if (exp->count("--threads")) plan.threads = threads;
      return run_experiment_cmd(manifest, plan, out);
    }
    if (*syn) {
      if (!synth_config.empty()) synth = dgk::synth_from_json(read_json(synth_config));
      const auto path = dgk::write_dataset(out, dgk::synth_generate(synth));
      std::cout << path.string() << '\n';
      return 0;
    }
    if (*val) {
      const json result = validate_math(seed, samples);
      if (out.empty()) {
        std::cout << result.dump(2) << '\n';
      } else {
        std::ofstream(out) << result.dump(2) << '\n';
      }
      return result["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const dgk::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
