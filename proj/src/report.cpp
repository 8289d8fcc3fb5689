#include <cmath>
#include <fstream>
#include <sstream>

#include "dgk/harness.hpp"

namespace dgk {

using nlohmann::json;

namespace {

json params_json(const CellParams& p) {
  json j;
  j["C"] = p.C;
  j["r"] = p.r;
  j["epsilon"] = p.epsilon ? json(*p.epsilon) : json(nullptr);
  j["lambda_m"] = p.lambda_m ? json(*p.lambda_m) : json(nullptr);
  return j;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

json to_json(const ParamGrid& grid) {
  return json{{"C", grid.C_values},
              {"r", grid.r_values},
              {"epsilon", grid.epsilon_values},
              {"lambda_m", grid.lambda_m_values}};
}

ParamGrid grid_from_json(const json& j) {
  try {
    ParamGrid g = ParamGrid::defaults();
    if (!j.is_object()) throw FormatError("parameter grid must be a JSON object");
    g.C_values = get_or(j, "C", g.C_values);
    g.r_values = get_or(j, "r", g.r_values);
    g.epsilon_values = get_or(j, "epsilon", g.epsilon_values);
    g.lambda_m_values = get_or(j, "lambda_m", g.lambda_m_values);
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("parameter grid: ") + e.what());
  }
}

json to_json(const ExperimentPlan& plan) {
  json j;
  if (const auto* f = std::get_if<PerSubjectFraction>(&plan.split)) {
    j["split"] = {{"type", "per-subject"}, {"train_fraction", f->train_fraction}};
  } else if (std::holds_alternative<RandomHalf>(plan.split)) {
    j["split"] = {{"type", "random-half"}};
  } else {
    j["split"] = {{"type", "kfold"}, {"k", std::get<KFold>(plan.split).k}};
  }
  j["repeats"] = plan.repeats;
  j["seed"] = plan.seed;
  j["ana_classes"] = plan.noise ? json(plan.noise->noise_classes) : json(nullptr);
  j["latency_cap"] = plan.latency_cap ? json(*plan.latency_cap) : json(nullptr);
  j["anchor_joint"] = plan.anchor_joint ? json(*plan.anchor_joint) : json(nullptr);
  j["inner_folds"] = plan.inner_folds;
  j["kernels"] = plan.kernels;
  j["grid"] = to_json(plan.grid);
  return j;
}

ExperimentPlan plan_from_json(const json& j) {
  try {
    ExperimentPlan plan;
    if (j.contains("split")) {
      const json& s = j.at("split");
      const std::string type = s.at("type").get<std::string>();
      if (type == "per-subject") {
        plan.split = PerSubjectFraction{get_or(s, "train_fraction", 1.0 / 3.0)};
      } else if (type == "random-half") {
        plan.split = RandomHalf{};
      } else if (type == "kfold") {
        plan.split = KFold{get_or(s, "k", 4)};
      } else {
        throw FormatError("plan: unknown split type '" + type + "'");
      }
    }
    plan.repeats = get_or(j, "repeats", plan.repeats);
    plan.seed = get_or<std::uint64_t>(j, "seed", plan.seed);
    if (j.contains("ana_classes") && !j.at("ana_classes").is_null()) {
      plan.noise = AnaSpec{j.at("ana_classes").get<std::vector<std::string>>()};
    }
    if (j.contains("latency_cap") && !j.at("latency_cap").is_null()) {
      plan.latency_cap = j.at("latency_cap").get<Index>();
    }
    if (j.contains("anchor_joint") && !j.at("anchor_joint").is_null()) {
      plan.anchor_joint = j.at("anchor_joint").get<Index>();
    }
    plan.inner_folds = get_or(j, "inner_folds", plan.inner_folds);
    plan.kernels = get_or(j, "kernels", plan.kernels);
    if (j.contains("grid")) plan.grid = grid_from_json(j.at("grid"));
    plan.threads = get_or(j, "threads", plan.threads);
    plan.validate();
    return plan;
  } catch (const json::exception& e) {
    throw FormatError(std::string("plan: ") + e.what());
  }
}

json to_json(const Report& report) {
  json j;
  j["plan"] = report.plan;
  j["seed"] = report.seed;
  j["repeat_seeds"] = report.repeat_seeds;
  j["noise_classes"] = report.noise_classes;
  j["evaluation_classes"] = report.evaluation_classes;
  j["kernels"] = json::array();
  for (const auto& k : report.kernels) {
    json kj;
    kj["kernel"] = k.kernel;
    kj["mean_error"] = k.mean_error;
    kj["std_error"] = k.std_error;
    kj["repeat_errors"] = k.repeat_errors;
    kj["selections"] = json::array();
    for (const auto& s : k.selections) {
      kj["selections"].push_back({{"repeat", s.repeat},
                                  {"fold", s.fold},
                                  {"params", params_json(s.params)},
                                  {"cv_error", s.cv_error},
                                  {"test_error", s.test_error}});
    }
    j["kernels"].push_back(std::move(kj));
  }
  return j;
}

void write_report(const std::filesystem::path& json_path, const Report& report) {
  std::ofstream out(json_path);
  if (!out) throw FormatError("cannot write report: " + json_path.string());
  out << to_json(report).dump(2) << '\n';
}

void write_report_csv(const std::filesystem::path& csv_path, const Report& report) {
  std::ofstream out(csv_path);
  if (!out) throw FormatError("cannot write report rows: " + csv_path.string());
  out << "kernel,C,r,epsilon,lambda_m,repeat,fold,stage,error\n";
  for (const auto& row : report.rows) {
    out << row.kernel << ',' << csv_number(row.params.C) << ',' << row.params.r << ','
        << (row.params.epsilon ? csv_number(*row.params.epsilon) : "") << ','
        << (row.params.lambda_m ? csv_number(*row.params.lambda_m) : "") << ',' << row.repeat << ','
        << row.fold << ',' << row.stage << ',' << csv_number(row.error) << '\n';
  }
}

SynthSpec synth_from_json(const json& j) {
  try {
    SynthSpec s;
    s.classes = get_or(j, "classes", s.classes);
    s.latent_dim = get_or(j, "latent_dim", s.latent_dim);
    s.samples_per_class = get_or(j, "samples_per_class", s.samples_per_class);
    s.dim = get_or(j, "dim", s.dim);
    s.frames = get_or(j, "frames", s.frames);
    s.noise = get_or(j, "noise", s.noise);
    s.subjects = get_or(j, "subjects", s.subjects);
    s.shared_latent = get_or(j, "shared_latent", s.shared_latent);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
}

}  // namespace dgk
