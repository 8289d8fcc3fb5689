#include "dgk/subspace.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace dgk {

SubspaceRep build_subspace(const SequenceMatrix& seq, Index r) {
  const Matrix& x = seq.data;
  if (x.rows() < 1 || x.cols() < 1) {
    throw DimensionError("build_subspace: empty sequence '" + seq.source_id + "'");
  }
  if (!x.allFinite()) {
    throw DegenerateError("build_subspace: non-finite entries in '" + seq.source_id + "'");
  }
  const Index full = std::min(x.rows(), x.cols());
  if (r < 1 || r > full) {
    throw DimensionError("build_subspace: rank " + std::to_string(r) + " outside [1, " +
                         std::to_string(full) + "] for '" + seq.source_id + "'");
  }

  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double total = s.sum();
  if (!(total > 0.0)) {
    throw DegenerateError("build_subspace: degenerate sequence '" + seq.source_id + "'");
  }

  // Numerical rank, LAPACK-style threshold.
  const double tol = static_cast<double>(std::max(x.rows(), x.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;

  const Index keep = std::min(r, rank);
  SubspaceRep rep;
  rep.basis = svd.matrixU().leftCols(keep);
  rep.singvals = s.head(keep) / total;
  return rep;
}

SubspaceRep truncate(const SubspaceRep& rep, double lambda_m) {
  std::vector<Index> kept;
  for (Index l = 0; l < rep.singvals.size(); ++l) {
    if (rep.singvals(l) > lambda_m) kept.push_back(l);
  }
  if (kept.empty()) kept.push_back(0);

  SubspaceRep out;
  out.basis.resize(rep.basis.rows(), static_cast<Index>(kept.size()));
  out.singvals.resize(static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    out.basis.col(static_cast<Index>(j)) = rep.basis.col(kept[j]);
    out.singvals(static_cast<Index>(j)) = rep.singvals(kept[j]);
  }
  return out;
}

NullBasis null_complement(const Matrix& basis) {
  const Index d = basis.rows();
  const Index m = basis.cols();
  if (m >= d) {
    throw DimensionError("null_complement: no null space (m = D = " + std::to_string(d) + ")");
  }
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return NullBasis{q.rightCols(d - m)};
}

NullBasis null_complement(const SubspaceRep& rep) { return null_complement(rep.basis); }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

SequenceMatrix read_sequence_csv(const std::filesystem::path& path, int skip_header_rows) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sequence file: " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= skip_header_rows) continue;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;

    std::vector<double> row;
    while (true) {
      const auto comma = rest.find(',');
      std::string_view field = trim(rest.substr(0, comma));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                          std::string(field) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": ragged row (" +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("sequence file has no frames: " + path.string());

  SequenceMatrix seq;
  seq.source_id = path.string();
  seq.data.resize(static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t f = 0; f < rows[t].size(); ++f) {
      seq.data(static_cast<Index>(f), static_cast<Index>(t)) = rows[t][f];
    }
  }
  return seq;
}

void write_sequence_csv(const std::filesystem::path& path, const SequenceMatrix& seq) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write sequence file: " + path.string());
  out.precision(17);
  for (Index t = 0; t < seq.frames(); ++t) {
    for (Index f = 0; f < seq.dim(); ++f) {
      if (f) out << ',';
      out << seq.data(f, t);
    }
    out << '\n';
  }
}

}  // namespace dgk
