#include "dgk/grassmann.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dgk/kernels.hpp"

namespace dgk {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

// Accumulates entrywise first and second moments of sampled matrices.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Index d) : sum_(Matrix::Zero(d, d)), sum_sq_(Matrix::Zero(d, d)) {}

  void add(const Matrix& sample) {
    sum_ += sample;
    sum_sq_ += sample.cwiseAbs2();
    ++count_;
  }

  McEstimate finish() const {
    McEstimate est;
    est.samples = count_;
    const double k = static_cast<double>(count_);
    est.mean_matrix = sum_ / k;
    est.mean_matrix = (0.5 * (est.mean_matrix + est.mean_matrix.transpose())).eval();
    if (count_ > 1) {
      const Matrix var = ((sum_sq_ / k) - (sum_ / k).cwiseAbs2()).cwiseMax(0.0) * (k / (k - 1.0));
      est.stderr_max = std::sqrt(var.maxCoeff() / k);
    }
    return est;
  }

 private:
  Matrix sum_;
  Matrix sum_sq_;
  long count_ = 0;
};

// Top-m left singular vectors.
Matrix leading_left_vectors(const Matrix& x, Index m) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(m);
}

}  // namespace

SubspaceRep exp_map(const SubspaceRep& base, const TangentVector& tangent) {
  const Matrix& u = base.basis;
  const Matrix& h = tangent.matrix;
  if (h.rows() != u.rows() || h.cols() != u.cols()) {
    throw DimensionError("exp_map: tangent shape does not match the base point");
  }
  const double vertical = (u.transpose() * h).cwiseAbs().maxCoeff();
  if (vertical > 1e-8) {
    throw DimensionError("exp_map: tangent is not horizontal (|U^T H| = " + std::to_string(vertical) +
                         ")");
  }

  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix& v = svd.matrixV();
  const Vector& s = svd.singularValues();
  const Vector cos_s = s.array().cos();
  const Vector sin_s = s.array().sin();

  SubspaceRep out;
  out.basis = (u * v * cos_s.asDiagonal() + svd.matrixU() * sin_s.asDiagonal()) * v.transpose();
  out.singvals = base.singvals;
  return out;
}

Matrix tangent_compose(const Matrix& basis, const Matrix& direction, const Vector& angles) {
  if (direction.rows() != basis.rows() || direction.cols() != basis.cols() ||
      angles.size() != basis.cols()) {
    throw DimensionError("tangent_compose: shape mismatch");
  }
  const Vector c = angles.array().cos();
  const Vector s = angles.array().sin();
  return basis * c.asDiagonal() + direction * s.asDiagonal();
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("principal_angles: ambient dimension mismatch");
  }
  if (a.cols() != b.cols()) {
    throw DimensionError("principal_angles: subspace dimension mismatch");
  }
  const Matrix align = a.transpose() * b;
  // Cosines descending; sines of the residual (I - AA^T)B descending, i.e.
  // paired with the cosines in reverse.
  const Vector cosines = Eigen::JacobiSVD<Matrix>(align).singularValues();
  const Vector sines = Eigen::JacobiSVD<Matrix>(b - a * align).singularValues();
  const Index m = a.cols();
  Vector theta(m);
  for (Index i = 0; i < m; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    const double s = std::clamp(sines(m - 1 - i), 0.0, 1.0);
    theta(i) = std::clamp(std::atan2(s, c), 0.0, kHalfPi);
  }
  std::sort(theta.begin(), theta.end());
  return theta;
}

double sample_angle(const ThetaLaw& law, double sigma, Index d, Index m, Rng& rng) {
  if (const auto* fixed = std::get_if<FixedAngle>(&law)) return fixed->theta;
  if (std::holds_alternative<CalibratedAngle>(law)) {
    return std::acos(std::sqrt(c_sigma(sigma, d, m)));
  }
  const double scale = std::get<FoldedNormalAngle>(law).scale * sigma;
  if (scale == 0.0) return 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  while (true) {
    const double theta = std::fabs(scale * normal(rng));
    if (theta <= kHalfPi) return theta;
  }
}

Vector sample_basis_disturbance(const Vector& u, const NullBasis& nullb, double sigma,
                                const ThetaLaw& law, Rng& rng) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) {
    throw DimensionError("sample_basis_disturbance: sigma must lie in [0, 1]");
  }
  if (const auto* fixed = std::get_if<FixedAngle>(&law);
      fixed && !(fixed->theta >= 0.0 && fixed->theta <= kHalfPi)) {
    throw DimensionError("sample_basis_disturbance: fixed angle outside [0, pi/2]");
  }
  const Index d = nullb.basis.rows();
  const Index codim = nullb.basis.cols();
  if (u.size() != d || codim < 1) {
    throw DimensionError("sample_basis_disturbance: null basis does not match the vector");
  }
  if (std::fabs(u.norm() - 1.0) > 1e-8) {
    throw DimensionError("sample_basis_disturbance: basis vector is not unit norm");
  }

  Vector x = standard_normal(codim, rng);
  x.normalize();
  const Vector w = nullb.basis * x;
  const double theta = sample_angle(law, sigma, d, d - codim, rng);
  return u * std::cos(theta) + w * std::sin(theta);
}

McEstimate mc_expectation(const Vector& u, const NullBasis& nullb, double sigma,
                          const ThetaLaw& law, long samples, Rng& rng) {
  if (samples < 1) throw DimensionError("mc_expectation: need at least one sample");
  MomentAccumulator acc(u.size());
  for (long k = 0; k < samples; ++k) {
    const Vector v = sample_basis_disturbance(u, nullb, sigma, law, rng);
    acc.add(v * v.transpose());
  }
  return acc.finish();
}

McEstimate mc_expectation(const SubspaceRep& rep, const DisturbanceSpec& spec, long samples) {
  if (samples < 1) throw DimensionError("mc_expectation: need at least one sample");
  Rng rng(spec.seed);
  const Index d = rep.ambient_dim();
  const Index m = rep.rank();
  MomentAccumulator acc(d);

  if (const auto* pg = std::get_if<PseudoGaussian>(&spec.kind)) {
    const NullBasis nullb = null_complement(rep);
    Vector sigmas(m);
    for (Index l = 0; l < m; ++l) sigmas(l) = sigma_lambda(rep.singvals(l), pg->epsilon, d);
    for (long k = 0; k < samples; ++k) {
      Matrix sample = Matrix::Zero(d, d);
      for (Index l = 0; l < m; ++l) {
        const Vector v = sample_basis_disturbance(rep.basis.col(l), nullb, sigmas(l), pg->theta_law, rng);
        sample.noalias() += v * v.transpose();
      }
      acc.add(sample);
    }
    return acc.finish();
  }

  const double lambda_m = std::get<DirichletFluctuation>(spec.kind).lambda_m;
  // The kept spectrum may not exhaust the simplex; the remainder is one more
  // Dirichlet component so each kept marginal stays Beta(l, 1 - l).
  const double kept = rep.singvals.sum();
  const bool remainder = kept < 1.0 - 1e-12;
  Vector params(m + (remainder ? 1 : 0));
  params.head(m) = rep.singvals;
  if (remainder) params(m) = 1.0 - kept;

  for (long k = 0; k < samples; ++k) {
    const Vector draw = sample_dirichlet(params, rng);
    Matrix sample = Matrix::Zero(d, d);
    for (Index l = 0; l < m; ++l) {
      if (draw(l) > lambda_m) sample.noalias() += rep.basis.col(l) * rep.basis.col(l).transpose();
    }
    acc.add(sample);
  }
  return acc.finish();
}

Vector sample_dirichlet(const Vector& lambdas, Rng& rng) {
  if (lambdas.size() < 1) throw DimensionError("sample_dirichlet: empty parameter vector");
  if ((lambdas.array() <= 0.0).any()) {
    throw DegenerateError("sample_dirichlet: parameters must be positive");
  }
  if (std::fabs(lambdas.sum() - 1.0) > 1e-8) {
    throw DegenerateError("sample_dirichlet: parameters must sum to one");
  }
  if (lambdas.size() == 1) return Vector::Ones(1);

  // Normalized Gamma(lambda_l, 1) draws, kept in log space so that tiny
  // shapes do not underflow. Shapes below one use G(a) = G(a + 1) U^(1/a).
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector log_g(lambdas.size());
  for (Index l = 0; l < lambdas.size(); ++l) {
    const double a = lambdas(l);
    if (a < 1.0) {
      std::gamma_distribution<double> gamma(a + 1.0, 1.0);
      const double g = gamma(rng);
      const double u = 1.0 - uniform(rng);
      log_g(l) = std::log(g) + std::log(u) / a;
    } else {
      std::gamma_distribution<double> gamma(a, 1.0);
      log_g(l) = std::log(gamma(rng));
    }
  }
  const double top = log_g.maxCoeff();
  Vector x = (log_g.array() - top).exp();
  return x / x.sum();
}

PerturbationReport gaussian_perturbation_check(const SequenceMatrix& x, Index m, double eps_x,
                                               long trials, Rng& rng) {
  const Index d = x.dim();
  const Index n = x.frames();
  if (m < 1 || m >= d || m > n) {
    throw DimensionError("gaussian_perturbation_check: need 1 <= m < D and m <= N");
  }
  if (trials < 1) throw DimensionError("gaussian_perturbation_check: need at least one trial");

  Eigen::JacobiSVD<Matrix> svd(x.data, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  for (Index i = 0; i < m; ++i) {
    const double next = i + 1 < s.size() ? s(i + 1) : 0.0;
    if (s(i) - next <= 1e-6) {
      throw DegenerateError("gaussian_perturbation_check: perturbation theory inapplicable "
                            "(repeated or vanishing singular values)");
    }
  }

  const Matrix u = svd.matrixU().leftCols(m);
  const Matrix v = svd.matrixV().leftCols(m);
  const Vector inv_s = s.head(m).cwiseInverse();
  const Matrix null_basis = null_complement(u).basis;

  auto aligned_error = [&](const Matrix& w, double eps) {
    const Matrix truth = leading_left_vectors(x.data + eps * w, m);
    const Matrix w0 = null_basis.transpose() * w * v;
    const Matrix predicted = u + eps * null_basis * w0 * inv_s.asDiagonal();
    // Orthogonal Procrustes: Q = A B^T from truth^T predicted = A S B^T.
    Eigen::JacobiSVD<Matrix> polar(truth.transpose() * predicted,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix q = polar.matrixU() * polar.matrixV().transpose();
    return (truth * q - predicted).norm();
  };

  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  PerturbationReport report;
  report.trials = trials;
  for (long t = 0; t < trials; ++t) {
    Matrix w(d, n);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < n; ++j) w(i, j) = noise(rng);
    }
    report.mean_error_at_eps += aligned_error(w, eps_x);
    report.mean_error_at_half_eps += aligned_error(w, 0.5 * eps_x);
  }
  report.mean_error_at_eps /= static_cast<double>(trials);
  report.mean_error_at_half_eps /= static_cast<double>(trials);
  return report;
}

}  // namespace dgk
