#pragma once

// Test-only oracles: dense D x D feature maps and random generators. Nothing
// here reuses the library's closed forms.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dgk/subspace.hpp"

namespace oracle {

using dgk::Index;
using dgk::Matrix;
using dgk::Rng;
using dgk::Vector;

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) g(i, j) = n(rng);
  }
  return g;
}

inline Matrix orthonormal(Index d, Index m, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(d, m, rng));
  return qr.householderQ() * Matrix::Identity(d, m);
}

inline Matrix orthogonal(Index n, Rng& rng) { return orthonormal(n, n, rng); }

/// Random point on G(m, D) with a descending spectrum whose kept share is
/// strictly below one (a hidden tail of `tail` extra values).
inline dgk::SubspaceRep random_rep(Index d, Index m, Rng& rng, Index tail = 2) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> s(static_cast<std::size_t>(m + tail));
  for (auto& v : s) v = u(rng);
  std::sort(s.begin(), s.end(), std::greater<>());
  double total = 0.0;
  for (double v : s) total += v;
  dgk::SubspaceRep rep;
  rep.basis = orthonormal(d, m, rng);
  rep.singvals.resize(m);
  for (Index i = 0; i < m; ++i) rep.singvals(i) = s[static_cast<std::size_t>(i)] / total;
  return rep;
}

inline Matrix projector(const Matrix& u) { return u * u.transpose(); }

inline double frob_inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

/// U (S - delta I) U^T + delta I written out densely from the raw formulas.
inline Matrix dense_pg_map(const dgk::SubspaceRep& rep, double epsilon) {
  const Index d = rep.ambient_dim();
  const Index m = rep.rank();
  Vector sigma(m);
  for (Index i = 0; i < m; ++i) {
    const double lam = rep.singvals(i);
    const double s2 = 1.0 - std::exp(-(epsilon / static_cast<double>(d)) * (1.0 / lam - 1.0));
    sigma(i) = 1.0 / (s2 * static_cast<double>(d - m) + 1.0);
  }
  const double delta = (static_cast<double>(m) - sigma.sum()) / static_cast<double>(d - m);
  Matrix out = delta * Matrix::Identity(d, d);
  for (Index i = 0; i < m; ++i) out += (sigma(i) - delta) * rep.basis.col(i) * rep.basis.col(i).transpose();
  return out;
}

/// Regularized incomplete beta by composite Simpson quadrature of the
/// density after the substitution t = s^(1/a) (removes the endpoint
/// singularity at 0 for a < 1). Adequate to ~1e-7 for moderate parameters.
inline double inc_beta_quadrature(double x, double a, double b, int panels = 20000) {
  auto integral = [&](double upper, double aa, double bb) {
    // int_0^upper t^(aa-1) (1-t)^(bb-1) dt with t = s^(1/aa): (1/aa) int_0^{upper^aa} (1 - s^(1/aa))^(bb-1) ds
    const double top = std::pow(upper, aa);
    const double h = top / panels;
    double acc = 0.0;
    for (int k = 0; k <= panels; ++k) {
      const double s = k * h;
      const double t = std::pow(s, 1.0 / aa);
      const double f = t >= 1.0 ? 0.0 : std::pow(1.0 - t, bb - 1.0);
      acc += f * (k == 0 || k == panels ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    return acc * h / 3.0 / aa;
  };
  // Split at 1/2 so each half integrates away from its own singular end.
  if (x <= 0.5) {
    const double full_left = integral(0.5, a, b);
    const double full_right = integral(0.5, b, a);
    return integral(x, a, b) / (full_left + full_right);
  }
  const double full_left = integral(0.5, a, b);
  const double full_right = integral(0.5, b, a);
  return 1.0 - integral(1.0 - x, b, a) / (full_left + full_right);
}

inline Matrix random_psd(Index n, Index rank, Rng& rng) {
  const Matrix f = gaussian(n, rank, rng);
  return f * f.transpose();
}

}  // namespace oracle
