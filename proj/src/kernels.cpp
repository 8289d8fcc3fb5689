#include "dgk/kernels.hpp"

#include <cmath>
#include <fstream>

#include "dgk/parallel.hpp"

namespace dgk {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_same_ambient(const SubspaceRep& a, const SubspaceRep& b, const char* who) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw DimensionError(std::string(who) + ": ambient dimension mismatch (" +
                         std::to_string(a.ambient_dim()) + " vs " +
                         std::to_string(b.ambient_dim()) + ")");
  }
}

// sum_ij wa[i] wb[j] (A^T B)_ij^2
double weighted_alignment(const SubspaceRep& a, const Vector& wa, const SubspaceRep& b,
                          const Vector& wb) {
  const Matrix align = a.basis.transpose() * b.basis;
  return wa.dot(align.cwiseAbs2() * wb);
}

Vector retention_weights(const SubspaceRep& rep, double lambda_m) {
  Vector p(rep.rank());
  for (Index l = 0; l < rep.rank(); ++l) p(l) = retention_prob(rep.singvals(l), lambda_m);
  return p;
}

}  // namespace

std::string kernel_name(const KernelFamily& family) {
  return std::visit(overloaded{
                        [](const ProjectionFamily&) { return std::string("proj"); },
                        [](const BinetCauchyFamily&) { return std::string("bc"); },
                        [](const ScaledProjectionFamily&) { return std::string("scproj"); },
                        [](const DgPgFamily&) { return std::string("dg-pg"); },
                        [](const DgDirFamily&) { return std::string("dg-dir"); },
                    },
                    family);
}

KernelFamily parse_kernel(const std::string& name, double epsilon, double lambda_m) {
  if (name == "proj") return ProjectionFamily{};
  if (name == "bc") return BinetCauchyFamily{};
  if (name == "scproj") return ScaledProjectionFamily{};
  if (name == "dg-pg") {
    if (!(epsilon >= 0.0)) throw FormatError("dg-pg: epsilon must be >= 0");
    return DgPgFamily{epsilon};
  }
  if (name == "dg-dir") {
    if (!(lambda_m >= 0.0 && lambda_m < 1.0)) throw FormatError("dg-dir: lambda_m must be in [0, 1)");
    return DgDirFamily{lambda_m};
  }
  throw FormatError("unknown kernel '" + name + "' (expected proj|bc|scproj|dg-pg|dg-dir)");
}

double c_sigma(double sigma, Index d, Index m) {
  return 1.0 / (sigma * sigma * static_cast<double>(d - m) + 1.0);
}

double sigma_lambda(double lambda, double epsilon, Index d) {
  if (!(lambda > 0.0)) throw DegenerateError("sigma_lambda: lambda must be positive");
  const double rate = epsilon / static_cast<double>(d) * (1.0 / lambda - 1.0);
  return std::sqrt(std::max(0.0, -std::expm1(-rate)));
}

DgCoefficients dg_pg_coefficients(const SubspaceRep& rep, double epsilon) {
  const Index d = rep.ambient_dim();
  const Index m = rep.rank();
  if (m >= d) {
    throw DimensionError("dg_pg_coefficients: subspace fills the ambient space (m = D = " +
                         std::to_string(d) + ")");
  }
  DgCoefficients out;
  out.sigma_diag.resize(m);
  for (Index i = 0; i < m; ++i) {
    out.sigma_diag(i) = c_sigma(sigma_lambda(rep.singvals(i), epsilon, d), d, m);
  }
  out.delta = (static_cast<double>(m) - out.sigma_diag.sum()) / static_cast<double>(d - m);
  return out;
}

double retention_prob(double lambda_l, double lambda_m) {
  if (!(lambda_m >= 0.0 && lambda_m < 1.0)) {
    throw DimensionError("retention_prob: lambda_m must lie in [0, 1)");
  }
  if (lambda_m == 0.0) return 1.0;
  if (lambda_l <= 0.0) return 0.0;
  if (lambda_l >= 1.0) return 1.0;
  return reg_inc_beta(1.0 - lambda_m, 1.0 - lambda_l, lambda_l);
}

double projection_kernel(const SubspaceRep& a, const SubspaceRep& b) {
  require_same_ambient(a, b, "projection_kernel");
  return (a.basis.transpose() * b.basis).squaredNorm();
}

double binet_cauchy_kernel(const SubspaceRep& a, const SubspaceRep& b) {
  require_same_ambient(a, b, "binet_cauchy_kernel");
  if (a.rank() != b.rank()) {
    throw DimensionError("binet_cauchy_kernel: subspace dimension mismatch (" +
                         std::to_string(a.rank()) + " vs " + std::to_string(b.rank()) + ")");
  }
  const double det = (a.basis.transpose() * b.basis).determinant();
  return det * det;
}

double scaled_projection_kernel(const SubspaceRep& a, const SubspaceRep& b) {
  require_same_ambient(a, b, "scaled_projection_kernel");
  return weighted_alignment(a, a.singvals, b, b.singvals);
}

double dg_pg_kernel(const SubspaceRep& a, const SubspaceRep& b, double epsilon) {
  const DgPgFamily family{epsilon};
  return evaluate_prepared(family, prepare(family, a), prepare(family, b));
}

double dg_dir_kernel(const SubspaceRep& a, const SubspaceRep& b, double lambda_m) {
  require_same_ambient(a, b, "dg_dir_kernel");
  return weighted_alignment(a, retention_weights(a, lambda_m), b, retention_weights(b, lambda_m));
}

double evaluate(const KernelFamily& family, const SubspaceRep& a, const SubspaceRep& b) {
  return std::visit(overloaded{
                        [&](const ProjectionFamily&) { return projection_kernel(a, b); },
                        [&](const BinetCauchyFamily&) { return binet_cauchy_kernel(a, b); },
                        [&](const ScaledProjectionFamily&) { return scaled_projection_kernel(a, b); },
                        [&](const DgPgFamily& f) { return dg_pg_kernel(a, b, f.epsilon); },
                        [&](const DgDirFamily& f) { return dg_dir_kernel(a, b, f.lambda_m); },
                    },
                    family);
}

PreparedRep prepare(const KernelFamily& family, const SubspaceRep& rep) {
  PreparedRep out;
  out.rep = &rep;
  std::visit(overloaded{
                 [&](const ProjectionFamily&) { out.weights = Vector::Ones(rep.rank()); },
                 [&](const BinetCauchyFamily&) {},
                 [&](const ScaledProjectionFamily&) { out.weights = rep.singvals; },
                 [&](const DgPgFamily& f) {
                   DgCoefficients c = dg_pg_coefficients(rep, f.epsilon);
                   out.delta = c.delta;
                   out.trace_sigma = c.sigma_diag.sum();
                   out.weights = c.sigma_diag.array() - c.delta;
                 },
                 [&](const DgDirFamily& f) { out.weights = retention_weights(rep, f.lambda_m); },
             },
             family);
  return out;
}

double evaluate_prepared(const KernelFamily& family, const PreparedRep& a, const PreparedRep& b) {
  if (std::holds_alternative<BinetCauchyFamily>(family)) {
    return binet_cauchy_kernel(*a.rep, *b.rep);
  }
  require_same_ambient(*a.rep, *b.rep, "kernel");
  double value = weighted_alignment(*a.rep, a.weights, *b.rep, b.weights);
  if (std::holds_alternative<DgPgFamily>(family)) {
    // Cross terms of the isotropic null-space parts; with unequal ranks the
    // identity overlap is D - m_A - m_B.
    const double d = static_cast<double>(a.rep->ambient_dim());
    const double overlap = d - static_cast<double>(a.rep->rank() + b.rep->rank());
    value += a.delta * b.trace_sigma + b.delta * a.trace_sigma + a.delta * b.delta * overlap;
  }
  return value;
}

GramMatrix gram(std::span<const SubspaceRep> set, const KernelSpec& spec,
                std::vector<std::string> ids, unsigned threads) {
  if (set.empty()) throw DimensionError("gram: empty instance set");
  const Index n = static_cast<Index>(set.size());
  for (const auto& rep : set) require_same_ambient(set.front(), rep, "gram");
  if (ids.empty()) {
    for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  } else if (static_cast<Index>(ids.size()) != n) {
    throw DimensionError("gram: id count does not match instance count");
  }

  std::vector<PreparedRep> prepared;
  prepared.reserve(set.size());
  for (const auto& rep : set) prepared.push_back(prepare(spec.family, rep));

  GramMatrix g;
  g.ids = std::move(ids);
  g.values.resize(n, n);
  parallel_for(set.size(), threads, [&](std::size_t i) {
    for (Index j = 0; j < n; ++j) {
      g.values(static_cast<Index>(i), j) = evaluate_prepared(spec.family, prepared[i], prepared[j]);
    }
  });
  if (spec.symmetrize) {
    g.values = (0.5 * (g.values + g.values.transpose())).eval();
  }
  return g;
}

Matrix cross_gram(std::span<const SubspaceRep> rows, std::span<const SubspaceRep> cols,
                  const KernelFamily& family, unsigned threads) {
  std::vector<PreparedRep> prow, pcol;
  for (const auto& rep : rows) prow.push_back(prepare(family, rep));
  for (const auto& rep : cols) pcol.push_back(prepare(family, rep));
  Matrix k(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      k(static_cast<Index>(i), static_cast<Index>(j)) = evaluate_prepared(family, prow[i], pcol[j]);
    }
  });
  return k;
}

void write_gram_csv(const std::filesystem::path& path, const GramMatrix& g) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write Gram matrix: " + path.string());
  out.precision(17);
  out << "id";
  for (const auto& id : g.ids) out << ',' << id;
  out << '\n';
  for (Index i = 0; i < g.values.rows(); ++i) {
    out << g.ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < g.values.cols(); ++j) out << ',' << g.values(i, j);
    out << '\n';
  }
}

}  // namespace dgk
