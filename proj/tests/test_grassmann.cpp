#include <doctest.h>

#include <numbers>

#include "dgk/grassmann.hpp"
#include "dgk/kernels.hpp"
#include "oracle.hpp"

using namespace dgk;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

SubspaceRep rep_of(const Matrix& basis) {
  SubspaceRep rep;
  rep.basis = basis;
  rep.singvals = Vector::Constant(basis.cols(), 1.0 / static_cast<double>(basis.cols() + 1));
  return rep;
}

// Horizontal tangent at `base`: project a random matrix off the base.
Matrix horizontal(const Matrix& base, Rng& rng) {
  const Matrix g = oracle::gaussian(base.rows(), base.cols(), rng);
  return g - base * (base.transpose() * g);
}

}  // namespace

TEST_CASE("exp_map with a zero step stays put") {
  Rng rng(1);
  const auto base = rep_of(oracle::orthonormal(7, 3, rng));
  const auto out = exp_map(base, {Matrix::Zero(7, 3), &base});
  CHECK(max_abs(oracle::projector(out.basis) - oracle::projector(base.basis)) <= 1e-10);
  CHECK(out.singvals == base.singvals);
}

TEST_CASE("exp_map on G(1,2) rotates by the step length") {
  Matrix e1(2, 1), e2(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  const auto base = rep_of(e1);
  const auto out = exp_map(base, {(kPi / 4) * e2, &base});
  CHECK(out.basis(0, 0) == doctest::Approx(std::cos(kPi / 4)).epsilon(1e-14));
  CHECK(out.basis(1, 0) == doctest::Approx(std::sin(kPi / 4)).epsilon(1e-14));
}

TEST_CASE("exp_map to the cut locus is orthogonal to the base") {
  Rng rng(2);
  const auto base = rep_of(oracle::orthonormal(9, 3, rng));
  // Orthonormal horizontal direction scaled so every angle equals pi/2.
  const Matrix dir = oracle::orthonormal(9, 9, rng).rightCols(6);
  Matrix h_hat = (dir - base.basis * (base.basis.transpose() * dir)).leftCols(3);
  h_hat = Eigen::HouseholderQR<Matrix>(h_hat).householderQ() * Matrix::Identity(9, 3);
  const auto out = exp_map(base, {(kPi / 2) * h_hat, &base});
  Eigen::JacobiSVD<Matrix> svd(out.basis.transpose() * base.basis);
  CHECK(svd.singularValues().maxCoeff() <= 1e-10);
}

TEST_CASE("exp_map output is orthonormal and rejects vertical tangents") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto base = rep_of(oracle::orthonormal(10, 4, rng));
    const Matrix h = horizontal(base.basis, rng);
    const auto out = exp_map(base, {h, &base});
    CHECK(max_abs(out.basis.transpose() * out.basis - Matrix::Identity(4, 4)) <= 1e-10);
  }
  const auto base = rep_of(oracle::orthonormal(5, 2, rng));
  CHECK_THROWS_AS(exp_map(base, {base.basis, &base}), DimensionError);
}

TEST_CASE("exp_map agrees with the rescaled compact-SVD form") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto base = rep_of(oracle::orthonormal(8, 3, rng));
    const Matrix h = 0.4 * horizontal(base.basis, rng);
    Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    // Direction U_H with angles S_H, applied on the rotated base U V_H.
    const Matrix rotated = base.basis * svd.matrixV();
    const Matrix composed = tangent_compose(rotated, svd.matrixU(), svd.singularValues());
    const auto out = exp_map(base, {h, &base});
    CHECK(max_abs(oracle::projector(out.basis) - oracle::projector(composed)) <= 1e-10);
  }
}

TEST_CASE("principal angles recover the composition angles") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix full = oracle::orthogonal(10, rng);
    const Matrix u = full.leftCols(3);
    const Matrix h_hat = full.middleCols(3, 3);
    std::uniform_real_distribution<double> angle(0.0, kPi / 2 - 1e-3);
    Vector theta(3);
    for (Index i = 0; i < 3; ++i) theta(i) = angle(rng);
    const Vector got = principal_angles(u, tangent_compose(u, h_hat, theta));
    std::sort(theta.begin(), theta.end());
    CHECK(max_abs(got - theta) <= 1e-8);
  }
}

TEST_CASE("principal angle examples") {
  Matrix e1(2, 1), e2(2, 1), diag(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  diag << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  CHECK(principal_angles(e1, e1)(0) == doctest::Approx(0.0));
  CHECK(principal_angles(e1, e2)(0) == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(principal_angles(e1, diag)(0) == doctest::Approx(kPi / 4).epsilon(1e-14));

  Rng rng(6);
  const Matrix a = oracle::orthonormal(6, 3, rng);
  CHECK(principal_angles(a, a).maxCoeff() <= 1e-7);
  CHECK_THROWS_AS(principal_angles(a, oracle::orthonormal(6, 2, rng)), DimensionError);
  CHECK_THROWS_AS(principal_angles(a, oracle::orthonormal(7, 3, rng)), DimensionError);
}

TEST_CASE("basis disturbance edge laws") {
  Rng rng(7);
  const auto rep = oracle::random_rep(6, 2, rng);
  const auto nb = null_complement(rep);
  const Vector u = rep.basis.col(0);

  CHECK((sample_basis_disturbance(u, nb, 0.0, CalibratedAngle{}, rng) - u).norm() == 0.0);
  for (int i = 0; i < 20; ++i) {
    const Vector v = sample_basis_disturbance(u, nb, 0.3, FixedAngle{kPi / 2}, rng);
    CHECK(std::abs(u.dot(v)) <= 1e-12);
    CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
    const Vector f = sample_basis_disturbance(u, nb, 0.7, FoldedNormalAngle{1.0}, rng);
    CHECK(std::abs(f.norm() - 1.0) <= 1e-12);
    CHECK(u.dot(f) >= -1e-12);
  }
  CHECK_THROWS_AS(sample_basis_disturbance(u, nb, 1.5, CalibratedAngle{}, rng), DimensionError);
  CHECK_THROWS_AS(sample_basis_disturbance(u, nb, -0.1, CalibratedAngle{}, rng), DimensionError);
}

TEST_CASE("fixed angle pi/6 second moment on D=5, m=1") {
  Rng rng(8);
  const auto rep = oracle::random_rep(5, 1, rng);
  const auto nb = null_complement(rep);
  const Vector u = rep.basis.col(0);
  const long k = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (long i = 0; i < k; ++i) {
    const double c = std::pow(u.dot(sample_basis_disturbance(u, nb, 0.5, FixedAngle{kPi / 6}, rng)), 2);
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / k;
  const double se = std::sqrt(std::max(sum2 / k - mean * mean, 0.0) / k);
  // With a fixed angle the value is deterministic, so the bound is tight.
  CHECK(std::abs(mean - 0.75) <= 3 * se + 1e-12);
}

TEST_CASE("calibrated angle realizes the designed coefficient") {
  Rng rng(9);
  const auto rep = oracle::random_rep(10, 3, rng);
  const auto nb = null_complement(rep);
  const Vector u = rep.basis.col(0);
  for (double sigma : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    const auto est = mc_expectation(u, nb, sigma, CalibratedAngle{}, 20000, rng);
    const double c = 1.0 / (sigma * sigma * 7.0 + 1.0);
    CHECK(u.dot(est.mean_matrix * u) == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("mc_expectation with zero sigma is exact") {
  Rng rng(10);
  const auto rep = oracle::random_rep(6, 2, rng);
  const Vector u = rep.basis.col(1);
  const auto est = mc_expectation(u, null_complement(rep), 0.0, CalibratedAngle{}, 50, rng);
  CHECK(max_abs(est.mean_matrix - u * u.transpose()) <= 1e-15);
  CHECK(est.samples == 50);
  CHECK_THROWS_AS(mc_expectation(u, null_complement(rep), 0.0, CalibratedAngle{}, 0, rng), DimensionError);
}

TEST_CASE("fixed-angle mean matrix matches the isotropic null-space form") {
  Rng rng(11);
  const Index d = 7, m = 2;
  const auto rep = oracle::random_rep(d, m, rng);
  const auto nb = null_complement(rep);
  const Vector u = rep.basis.col(0);
  const double theta = 0.8;
  const long k = 40000;
  const auto est = mc_expectation(u, nb, 0.5, FixedAngle{theta}, k, rng);
  const Matrix expect = std::pow(std::cos(theta), 2) * u * u.transpose() +
                        std::pow(std::sin(theta), 2) / static_cast<double>(d - m) * oracle::projector(nb.basis);
  CHECK(max_abs(est.mean_matrix - expect) <= 5.0 / std::sqrt(static_cast<double>(k)));
  CHECK(max_abs(est.mean_matrix - est.mean_matrix.transpose()) <= 1e-12);

  // Structure: U^T M U diagonal-dominant, U_perp^T M U_perp close to scalar I.
  const Matrix in = rep.basis.transpose() * est.mean_matrix * rep.basis;
  CHECK(std::abs(in(0, 0)) > std::abs(in(0, 1)) + std::abs(in(1, 0)));
  const Matrix out = nb.basis.transpose() * est.mean_matrix * nb.basis;
  const double scalar = out.trace() / static_cast<double>(d - m);
  CHECK(max_abs(out - scalar * Matrix::Identity(d - m, d - m)) <= 5.0 / std::sqrt(static_cast<double>(k)));
}

TEST_CASE("whole-subspace pseudo-Gaussian mean matches the dense map") {
  Rng rng(12);
  const auto rep = oracle::random_rep(8, 3, rng);
  const long k = 40000;
  const auto est = mc_expectation(rep, {PseudoGaussian{0.8, CalibratedAngle{}}, 99}, k);
  CHECK(max_abs(est.mean_matrix - oracle::dense_pg_map(rep, 0.8)) <= 5.0 / std::sqrt(static_cast<double>(k)));
}

TEST_CASE("whole-subspace Dirichlet mean matches retention weights") {
  Rng rng(13);
  const auto rep = oracle::random_rep(6, 3, rng, 1);
  const long k = 40000;
  const double lm = 0.15;
  const auto est = mc_expectation(rep, {DirichletFluctuation{lm}, 5}, k);
  Matrix expect = Matrix::Zero(6, 6);
  for (Index l = 0; l < 3; ++l) {
    expect += retention_prob(rep.singvals(l), lm) * rep.basis.col(l) * rep.basis.col(l).transpose();
  }
  CHECK(max_abs(est.mean_matrix - expect) <= 5.0 / std::sqrt(static_cast<double>(k)));
}

TEST_CASE("samplers are deterministic under a seed") {
  Rng rng(14);
  const auto rep = oracle::random_rep(6, 2, rng);
  const DisturbanceSpec spec{PseudoGaussian{0.5, FoldedNormalAngle{2.0}}, 1234};
  const auto a = mc_expectation(rep, spec, 500);
  const auto b = mc_expectation(rep, spec, 500);
  CHECK(max_abs(a.mean_matrix - b.mean_matrix) == 0.0);

  Rng r1(55), r2(55);
  const Vector lam = Vector::Map(std::vector<double>{0.6, 0.3, 0.1}.data(), 3);
  CHECK((sample_dirichlet(lam, r1) - sample_dirichlet(lam, r2)).norm() == 0.0);
}

TEST_CASE("Dirichlet sampling") {
  Rng rng(15);
  CHECK(sample_dirichlet(Vector::Ones(1), rng)(0) == 1.0);

  const long k = 100000;
  Vector half = Vector::Constant(2, 0.5);
  Vector sum = Vector::Zero(2), sum2 = Vector::Zero(2);
  for (long i = 0; i < k; ++i) {
    const Vector s = sample_dirichlet(half, rng);
    CHECK_MESSAGE(std::abs(s.sum() - 1.0) <= 1e-12, "off simplex");
    sum += s;
    sum2 += s.cwiseProduct(s);
  }
  for (Index j = 0; j < 2; ++j) {
    const double mean = sum(j) / k;
    const double se = std::sqrt((sum2(j) / k - mean * mean) / k);
    CHECK(std::abs(mean - 0.5) <= 3 * se);
  }

  const Vector lam = Vector::Map(std::vector<double>{0.7, 0.2, 0.1}.data(), 3);
  long hits = 0;
  for (long i = 0; i < k; ++i) hits += sample_dirichlet(lam, rng)(0) > 0.5;
  const double p = retention_prob(0.7, 0.5);
  CHECK(std::abs(static_cast<double>(hits) / k - p) <= 3 * std::sqrt(p * (1 - p) / k));

  CHECK_THROWS_AS(sample_dirichlet(Vector::Map(std::vector<double>{1.2, -0.2}.data(), 2), rng), DegenerateError);
  CHECK_THROWS_AS(sample_dirichlet(Vector::Map(std::vector<double>{0.5, 0.4}.data(), 2), rng), DegenerateError);
}

TEST_CASE("perturbation check") {
  Rng rng(16);
  Matrix x = Matrix::Zero(20, 40);
  const Matrix left = oracle::orthonormal(20, 5, rng);
  const Matrix right = oracle::orthonormal(40, 5, rng);
  const Vector spectrum = Vector::Map(std::vector<double>{5, 4, 3, 2, 1}.data(), 5);
  x = left * spectrum.asDiagonal() * right.transpose();
  const SequenceMatrix seq{x, "x"};

  SUBCASE("zero step has zero error") {
    const auto r = gaussian_perturbation_check(seq, 5, 0.0, 5, rng);
    CHECK(r.mean_error_at_eps <= 1e-12);
  }
  SUBCASE("residual shrinks faster than the step") {
    const auto r = gaussian_perturbation_check(seq, 5, 1e-3, 50, rng);
    CHECK(r.mean_error_at_half_eps / r.mean_error_at_eps <= 0.6);
  }
  SUBCASE("smaller spectral gap gives a larger error") {
    const Vector close = Vector::Map(std::vector<double>{5, 4, 3, 2, 1.0}.data(), 5) * 0.2;
    const SequenceMatrix tight{left * close.asDiagonal() * right.transpose(), "tight"};
    Rng r1(77), r2(77);
    const auto wide = gaussian_perturbation_check(seq, 5, 1e-3, 40, r1);
    const auto narrow = gaussian_perturbation_check(tight, 5, 1e-3, 40, r2);
    CHECK(narrow.mean_error_at_eps > wide.mean_error_at_eps);
  }
  SUBCASE("repeated singular values are rejected") {
    const Vector flat = Vector::Map(std::vector<double>{3, 3, 1, 0.5, 0.2}.data(), 5);
    const SequenceMatrix rep{left * flat.asDiagonal() * right.transpose(), "flat"};
    CHECK_THROWS_AS(gaussian_perturbation_check(rep, 3, 1e-3, 5, rng), DegenerateError);
  }
}
