#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dgk/subspace.hpp"

namespace dgk {

// ---------------------------------------------------------------------------
// Kernel selection

struct ProjectionFamily {};
struct BinetCauchyFamily {};
struct ScaledProjectionFamily {};
struct DgPgFamily {
  double epsilon = 0.0;
};
struct DgDirFamily {
  double lambda_m = 0.0;
};

using KernelFamily =
    std::variant<ProjectionFamily, BinetCauchyFamily, ScaledProjectionFamily, DgPgFamily, DgDirFamily>;

struct KernelSpec {
  KernelFamily family = ProjectionFamily{};
  bool symmetrize = true;
};

/// Short CLI name: proj, bc, scproj, dg-pg, dg-dir.
std::string kernel_name(const KernelFamily& family);

/// Parses a CLI name; the hyperparameters are filled in from the arguments.
KernelFamily parse_kernel(const std::string& name, double epsilon = 0.0, double lambda_m = 0.0);

// ---------------------------------------------------------------------------
// Coefficient functions

/// Designed coefficient c(sigma) = 1 / (sigma^2 (D - m) + 1).
double c_sigma(double sigma, Index d, Index m);

/// sigma(lambda) = sqrt(1 - exp(-(epsilon / D) (1 / lambda - 1))).
double sigma_lambda(double lambda, double epsilon, Index d);

struct DgCoefficients {
  Vector sigma_diag;
  double delta = 0.0;
};

/// Per-basis coefficients c(sigma(lambda_i)) and the null-space share
/// delta = (m - tr Sigma) / (D - m).
DgCoefficients dg_pg_coefficients(const SubspaceRep& rep, double epsilon);

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double reg_inc_beta(double x, double a, double b);

/// Probability that a basis with normalized singular value lambda_l stays
/// above lambda_m when the spectrum follows Dir(lambda):
///   p = I_{1 - lambda_m}(1 - lambda_l, lambda_l).
double retention_prob(double lambda_l, double lambda_m);

// ---------------------------------------------------------------------------
// Pairwise kernels. All cost O(m^2 D) and never form a D x D matrix.

double projection_kernel(const SubspaceRep& a, const SubspaceRep& b);
double binet_cauchy_kernel(const SubspaceRep& a, const SubspaceRep& b);
double scaled_projection_kernel(const SubspaceRep& a, const SubspaceRep& b);
double dg_pg_kernel(const SubspaceRep& a, const SubspaceRep& b, double epsilon);
double dg_dir_kernel(const SubspaceRep& a, const SubspaceRep& b, double lambda_m);

double evaluate(const KernelFamily& family, const SubspaceRep& a, const SubspaceRep& b);

/// A subspace together with the per-instance diagonal weights of its family.
///
/// Every family except Binet-Cauchy has the form
///   k(A, B) = sum_ij w_A[i] w_B[j] (A^T B)_ij^2 + residual(A, B)
/// so the weights are computed once per instance for Gram assembly.
struct PreparedRep {
  const SubspaceRep* rep = nullptr;
  Vector weights;
  double delta = 0.0;
  double trace_sigma = 0.0;
};

PreparedRep prepare(const KernelFamily& family, const SubspaceRep& rep);
double evaluate_prepared(const KernelFamily& family, const PreparedRep& a, const PreparedRep& b);

// ---------------------------------------------------------------------------
// Gram matrices

struct GramMatrix {
  Matrix values;
  std::vector<std::string> ids;
};

/// Symmetric Gram matrix over `set`. Throws on an empty set or mixed ambient
/// dimension. `threads` = 0 uses the hardware concurrency.
GramMatrix gram(std::span<const SubspaceRep> set, const KernelSpec& spec,
                std::vector<std::string> ids = {}, unsigned threads = 1);

/// Rectangular block k(rows[i], cols[j]).
Matrix cross_gram(std::span<const SubspaceRep> rows, std::span<const SubspaceRep> cols,
                  const KernelFamily& family, unsigned threads = 1);

/// CSV with an `id` header row and a leading id column, 17 significant digits.
void write_gram_csv(const std::filesystem::path& path, const GramMatrix& g);

}  // namespace dgk
