#pragma once

#include <cstdint>
#include <variant>

#include "dgk/subspace.hpp"

namespace dgk {

/// Horizontal tangent vector H at `base` (base^T H = 0).
struct TangentVector {
  Matrix matrix;
  const SubspaceRep* base = nullptr;
};

// Laws for the geodesic angle of a disturbed basis.

/// theta = arccos(sqrt(c(sigma))): realizes E[cos^2 theta] = c(sigma) exactly.
struct CalibratedAngle {};
/// A fixed angle in [0, pi/2], independent of sigma.
struct FixedAngle {
  double theta = 0.0;
};
/// theta = |scale * sigma * z|, z ~ N(0,1), redrawn until theta <= pi/2.
struct FoldedNormalAngle {
  double scale = 1.0;
};
using ThetaLaw = std::variant<CalibratedAngle, FixedAngle, FoldedNormalAngle>;

struct PseudoGaussian {
  double epsilon = 0.0;
  ThetaLaw theta_law = CalibratedAngle{};
};
struct DirichletFluctuation {
  double lambda_m = 0.0;
};

struct DisturbanceSpec {
  std::variant<PseudoGaussian, DirichletFluctuation> kind;
  std::uint64_t seed = 0;
};

/// Monte-Carlo estimate of E[U~ U~^T].
struct McEstimate {
  Matrix mean_matrix;
  long samples = 0;
  /// Largest per-entry standard error of the mean.
  double stderr_max = 0.0;
};

/// Geodesic step from `base` along `tangent`:
///   U~ = (U V_H cos S_H + U_H sin S_H) V_H^T  with  H = U_H S_H V_H^T.
/// The spectrum metadata is copied from the base.
SubspaceRep exp_map(const SubspaceRep& base, const TangentVector& tangent);

/// U cos(Theta) + H_hat sin(Theta) for a direction with orthonormal horizontal
/// columns and per-column angles.
Matrix tangent_compose(const Matrix& basis, const Matrix& direction, const Vector& angles);

/// Principal angles in ascending order, each in [0, pi/2].
Vector principal_angles(const Matrix& a, const Matrix& b);
inline Vector principal_angles(const SubspaceRep& a, const SubspaceRep& b) {
  return principal_angles(a.basis, b.basis);
}

/// Draws theta from `law` for disturbance level `sigma` on G(m, D).
double sample_angle(const ThetaLaw& law, double sigma, Index d, Index m, Rng& rng);

/// u cos(theta) + w sin(theta) with w uniform on the unit sphere of span(nullb).
Vector sample_basis_disturbance(const Vector& u, const NullBasis& nullb, double sigma,
                                const ThetaLaw& law, Rng& rng);

/// Mean of K draws of u~ u~^T for a single disturbed basis.
McEstimate mc_expectation(const Vector& u, const NullBasis& nullb, double sigma,
                          const ThetaLaw& law, long samples, Rng& rng);

/// Mean of K draws of U~ U~^T for a whole subspace under `spec`.
///
/// PseudoGaussian disturbs every column independently with sigma taken from
/// its normalized singular value. DirichletFluctuation perturbs the spectrum
/// with Dir(lambda) and drops the columns that fall to or below lambda_m.
McEstimate mc_expectation(const SubspaceRep& rep, const DisturbanceSpec& spec, long samples);

/// One draw from Dir(lambdas). The entries must be positive and sum to one.
Vector sample_dirichlet(const Vector& lambdas, Rng& rng);

struct PerturbationReport {
  double mean_error_at_eps = 0.0;
  double mean_error_at_half_eps = 0.0;
  long trials = 0;
};

/// Compares the true top-m left subspace of X + eps W (W_ij ~ N(0, 1/D)) with
/// the first-order prediction U + eps U_perp W0 S^-1 where W0 = U_perp^T W V.
/// Errors are Frobenius distances after orthogonal Procrustes alignment.
PerturbationReport gaussian_perturbation_check(const SequenceMatrix& x, Index m, double eps_x,
                                               long trials, Rng& rng);

}  // namespace dgk
