#include <doctest.h>

#include "dgk/kernels.hpp"
#include "dgk/svm.hpp"
#include "oracle.hpp"

using namespace dgk;

namespace {

Matrix two_point(double k) {
  Matrix g(2, 2);
  g << 1, k, k, 1;
  return g;
}

void check_feasible(const SvmModel& m, double C) {
  double eq = 0.0;
  for (Index i = 0; i < m.alphas.size(); ++i) {
    CHECK(m.alphas(i) >= 0.0);
    CHECK(m.alphas(i) <= C);
    eq += m.alphas(i) * m.labels[static_cast<std::size_t>(i)];
  }
  CHECK(std::abs(eq) <= 1e-8);
  for (Index i : m.support_ids) CHECK(m.alphas(i) > 1e-9);
}

}  // namespace

TEST_CASE("two-point analytic solutions") {
  struct Case {
    double k, C, alpha, bias, objective;
  };
  for (const Case& c : {Case{0.0, 10, 1, 0, 1}, Case{0.5, 10, 2, 0, 2}, Case{0.5, 1, 1, 0, 1.5}}) {
    const auto m = train_binary({two_point(c.k), {+1, -1}, c.C});
    CHECK(std::abs(m.alphas(0) - c.alpha) <= 1e-6);
    CHECK(std::abs(m.alphas(1) - c.alpha) <= 1e-6);
    CHECK(std::abs(m.bias - c.bias) <= 1e-6);
    CHECK(std::abs(m.dual_objective - c.objective) <= 1e-6);
    CHECK(std::abs(dual_objective(two_point(c.k), std::vector<int>{1, -1}, m.alphas) - c.objective) <= 1e-6);
    check_feasible(m, c.C);
    // Decision at the first training point.
    const Vector row = two_point(c.k).col(0);
    CHECK(decision(m, row) == doctest::Approx(c.C >= 2 || c.k == 0 ? 1.0 : 0.5).epsilon(1e-6));
  }
}

TEST_CASE("decision function contracts") {
  const auto m = train_binary({two_point(0.0), {+1, -1}, 10});
  CHECK_THROWS_AS(decision(m, Vector::Ones(3)), DimensionError);

  SvmModel zero = m;
  zero.alphas.setZero();
  zero.bias = 0.37;
  CHECK(decision(zero, Vector::Ones(2)) == 0.37);
}

TEST_CASE("random PSD problems satisfy KKT") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<Index> un(4, 60);
    const Index n = un(rng);
    const Matrix g = oracle::random_psd(n, std::max<Index>(2, n / 3), rng);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[i] = i % 2 ? 1 : -1;
    const double C = std::pow(10.0, std::uniform_real_distribution<double>(-2, 2)(rng));
    const auto m = train_binary({g, y, C});
    CHECK(kkt_violation(g, y, m.alphas, C) < 1e-3);
    check_feasible(m, C);

    // Free support vectors sit on the margin.
    for (Index i = 0; i < n; ++i) {
      if (m.alphas(i) > 1e-6 && m.alphas(i) < C - 1e-6 && m.ridge == 0.0) {
        CHECK(std::abs(y[i] * decision(m, Vector(g.col(i))) - 1.0) <= 1e-3);
      }
    }

    // Coordinate sweep: no feasible pair step improves the objective beyond
    // the tolerance.
    const double w = dual_objective(g, y, m.alphas);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        for (double step : {1e-4, -1e-4}) {
          Vector a = m.alphas;
          a(i) += step * y[i];
          a(j) -= step * y[j];
          if (a(i) < 0 || a(i) > C || a(j) < 0 || a(j) > C) continue;
          CHECK(dual_objective(g, y, a) <= w + 1e-6 * std::max(1.0, std::abs(w)));
        }
      }
    }
  }
}

TEST_CASE("indefinite Gram gets a small ridge") {
  Matrix g = two_point(0.2);
  g(0, 0) = 1.0;
  g(1, 1) = -0.1;
  const auto m = train_binary({g, {+1, -1}, 1});
  CHECK(m.ridge > 0.0);
}

TEST_CASE("scaling the Gram with C preserves signs") {
  Rng rng(2);
  const Matrix g = oracle::random_psd(30, 8, rng);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[i] = (i * 7) % 3 ? 1 : -1;
  const double s = 4.0;
  const auto a = train_binary({g, y, 1.0}, {1e-6});
  const auto b = train_binary({s * g, y, 1.0 / s}, {1e-6});
  for (Index i = 0; i < 30; ++i) {
    const double da = decision(a, Vector(g.col(i)));
    const double db = decision(b, Vector((s * g).col(i)));
    if (std::abs(da) > 1e-3) CHECK((da > 0) == (db > 0));
  }
}

TEST_CASE("training is deterministic") {
  Rng rng(3);
  const Matrix g = oracle::random_psd(25, 6, rng);
  std::vector<int> y(25);
  for (int i = 0; i < 25; ++i) y[i] = i < 12 ? 1 : -1;
  const auto a = train_binary({g, y, 2.0});
  const auto b = train_binary({g, y, 2.0});
  CHECK((a.alphas - b.alphas).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.bias == b.bias);
}

TEST_CASE("solver errors") {
  CHECK_THROWS_AS(train_binary({two_point(0), {1, 1}, 1}), DegenerateError);
  CHECK_THROWS_AS(train_binary({two_point(0), {1, 2}, 1}), DimensionError);
  CHECK_THROWS_AS(train_binary({two_point(0), {1, -1}, 0}), DimensionError);
  CHECK_THROWS_AS(train_binary({Matrix::Identity(2, 3), {1, -1}, 1}), DimensionError);

  Rng rng(4);
  const Matrix g = oracle::random_psd(40, 5, rng);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) y[i] = i % 2 ? 1 : -1;
  try {
    train_binary({g, y, 100.0}, {1e-12, 3});
    FAIL("expected the update cap to trigger");
  } catch (const SolverError& e) {
    CHECK(e.partial().updates == 3);
  }
}

TEST_CASE("multiclass on G(1,3) clusters") {
  Rng rng(5);
  std::vector<SubspaceRep> reps;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 8; ++s) {
      Vector v = Vector::Unit(3, c) + 0.1 * oracle::gaussian(3, 1, rng).col(0);
      reps.push_back({v.normalized(), Vector::Constant(1, 0.5)});
      labels.push_back(c * 10);
    }
  }
  const Matrix g = gram(reps, {ProjectionFamily{}}).values;
  const auto mm = train_multiclass(g, labels, 10.0);
  CHECK(mm.models.size() == 3);
  CHECK(mm.classes == std::vector<int>{0, 10, 20});
  CHECK(predict(mm, g) == labels);
}

TEST_CASE("two-class multiclass matches the binary sign") {
  Rng rng(6);
  const Matrix g = oracle::random_psd(20, 5, rng);
  std::vector<int> labels(20), pm(20);
  for (int i = 0; i < 20; ++i) {
    labels[i] = i % 3 ? 4 : 9;
    pm[i] = labels[i] == 4 ? 1 : -1;
  }
  const auto mm = train_multiclass(g, labels, 1.0);
  const auto bin = train_binary({g, pm, 1.0});
  for (Index i = 0; i < 20; ++i) {
    CHECK(predict(mm, Vector(g.row(i).transpose())) == (decision(bin, Vector(g.col(i))) >= 0 ? 4 : 9));
  }
}

TEST_CASE("three-way vote ties are broken deterministically") {
  // Pairwise models that only carry a bias, arranged as a voting cycle
  // 0 > 1, 1 > 2, 2 > 0 so every class gets exactly one vote.
  auto cycle = [](double b01, double b02, double b12) {
    MulticlassModel mm;
    mm.classes = {0, 1, 2};
    const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 2}};
    const double biases[] = {b01, b02, b12};
    for (int p = 0; p < 3; ++p) {
      PairwiseModel pm;
      pm.model.alphas = Vector::Zero(1);
      pm.model.labels = {1};
      pm.model.bias = biases[p];
      pm.model.class_pair = pairs[p];
      pm.members = {0};
      mm.models.push_back(pm);
    }
    return mm;
  };
  const Vector row = Vector::Ones(1);
  // Largest summed margin wins: class 2 won its vote by 2.
  CHECK(predict(cycle(1.0, -2.0, 0.5), row) == 2);
  // Equal margins fall back to the smallest label.
  for (int i = 0; i < 5; ++i) CHECK(predict(cycle(1.0, -1.0, 1.0), row) == 0);
}

TEST_CASE("model JSON round trip") {
  Rng rng(7);
  const Matrix g = oracle::random_psd(12, 4, rng);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[i] = i % 3;
  const auto mm = train_multiclass(g, labels, 3.0);
  const auto back = multiclass_from_json(nlohmann::json::parse(to_json(mm).dump()));
  CHECK(back.classes == mm.classes);
  CHECK(predict(back, g) == predict(mm, g));
  CHECK_THROWS_AS(svm_model_from_json(nlohmann::json{{"alphas", 3}}), FormatError);
}
