#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "dgk/harness.hpp"

namespace dgk {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

int Dataset::class_index(const std::string& name) const {
  const auto it = std::lower_bound(class_names.begin(), class_names.end(), name);
  if (it == class_names.end() || *it != name) throw FormatError("unknown class '" + name + "'");
  return static_cast<int>(it - class_names.begin());
}

DatasetManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open manifest: " + manifest_path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest: " + manifest_path.string());
  const auto header = split_fields(line);
  const std::vector<std::string> expected{"path", "label", "subject", "trial"};
  if (header != expected) {
    throw FormatError(manifest_path.string() + ": header must be 'path,label,subject,trial'");
  }

  DatasetManifest manifest;
  const fs::path base = manifest_path.parent_path();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) +
                        ": path and label must be nonempty");
    }
    fs::path p(fields[0]);
    if (p.is_relative()) p = base / p;
    manifest.entries.push_back({p, fields[1], fields[2], fields[3]});
  }
  if (manifest.entries.empty()) throw FormatError("manifest has no entries: " + manifest_path.string());
  return manifest;
}

Dataset load_dataset(const DatasetManifest& manifest, int skip_header_rows) {
  if (manifest.entries.empty()) throw FormatError("manifest has no entries");

  Dataset data;
  std::vector<std::string> names;
  for (const auto& e : manifest.entries) names.push_back(e.label);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  data.class_names = names;

  std::optional<Index> dim = manifest.feature_dim;
  for (const auto& e : manifest.entries) {
    if (!fs::exists(e.path)) throw FormatError("missing sequence file: " + e.path.string());
    SequenceMatrix seq = read_sequence_csv(e.path, skip_header_rows);
    if (!dim) dim = seq.dim();
    if (seq.dim() != *dim) {
      throw DimensionError("dimension mismatch in " + e.path.string() + ": " + std::to_string(seq.dim()) +
                           " columns, expected " + std::to_string(*dim));
    }
    data.sequences.push_back(std::move(seq));
    data.labels.push_back(data.class_index(e.label));
    data.subjects.push_back(e.subject_id);
    data.trials.push_back(e.trial_id);
  }
  data.feature_dim = *dim;
  return data;
}

Dataset load_dataset(const fs::path& manifest_path, std::optional<Index> feature_dim, int skip_header_rows) {
  DatasetManifest manifest = read_manifest(manifest_path);
  manifest.feature_dim = feature_dim;
  return load_dataset(manifest, skip_header_rows);
}

fs::path write_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  const fs::path manifest_path = dir / "manifest.csv";
  std::ofstream out(manifest_path);
  if (!out) throw FormatError("cannot write manifest: " + manifest_path.string());
  out << "path,label,subject,trial\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string file = "seq_" + std::to_string(i) + ".csv";
    write_sequence_csv(dir / file, data.sequences[i]);
    out << file << ',' << data.class_names[static_cast<std::size_t>(data.labels[i])] << ','
        << data.subjects[i] << ',' << data.trials[i] << '\n';
  }
  return manifest_path;
}

}  // namespace dgk
