#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "dgk/harness.hpp"

namespace dgk {

namespace {

Matrix random_orthonormal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.classes < 1 || spec.samples_per_class < 1 || spec.subjects < 1) {
    throw DimensionError("synth: classes, samples per class and subjects must be >= 1");
  }
  if (spec.latent_dim < 1 || spec.latent_dim > spec.dim || spec.frames < 1) {
    throw DimensionError("synth: need 1 <= latent_dim <= dim and frames >= 1");
  }
  if (!(spec.noise >= 0.0)) throw DimensionError("synth: noise must be >= 0");

  Rng rng(derive_seed(spec.seed, 0x5e));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;

  std::vector<Matrix> bases;
  const Matrix shared = random_orthonormal(spec.dim, spec.latent_dim, rng);
  for (int c = 0; c < spec.classes; ++c) {
    bases.push_back(spec.shared_latent ? shared : random_orthonormal(spec.dim, spec.latent_dim, rng));
  }

  Dataset data;
  for (int c = 0; c < spec.classes; ++c) data.class_names.push_back("c" + std::to_string(c));
  std::sort(data.class_names.begin(), data.class_names.end());
  data.feature_dim = spec.dim;

  const double n = static_cast<double>(spec.frames);
  for (int c = 0; c < spec.classes; ++c) {
    const int label = data.class_index("c" + std::to_string(c));
    for (int s = 0; s < spec.samples_per_class; ++s) {
      // Each latent coordinate runs through one slow oscillation.
      Matrix z(spec.latent_dim, spec.frames);
      for (Index j = 0; j < spec.latent_dim; ++j) {
        const double amp = 1.0 + 0.25 * normal(rng);
        const double freq = 0.5 + unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (Index t = 0; t < spec.frames; ++t) {
          z(j, t) = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / n + phase);
        }
      }
      SequenceMatrix seq;
      seq.source_id = "c" + std::to_string(c) + "_" + std::to_string(s);
      seq.data = bases[static_cast<std::size_t>(c)] * z;
      for (Index t = 0; t < spec.frames; ++t) {
        for (Index i = 0; i < spec.dim; ++i) seq.data(i, t) += spec.noise * normal(rng);
      }
      data.sequences.push_back(std::move(seq));
      data.labels.push_back(label);
      data.subjects.push_back("s" + std::to_string(s % spec.subjects));
      data.trials.push_back("t" + std::to_string(s / spec.subjects));
    }
  }
  return data;
}

}  // namespace dgk
