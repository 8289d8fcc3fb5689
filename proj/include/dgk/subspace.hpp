#pragma once

#include <filesystem>
#include <string>

#include "dgk/types.hpp"

namespace dgk {

/// A multivariate sequence stored feature-major: D rows, one column per frame.
struct SequenceMatrix {
  Matrix data;
  std::string source_id;

  Index dim() const { return data.rows(); }
  Index frames() const { return data.cols(); }
};

/// A point on G(m, D) together with its normalized spectrum.
///
/// `basis` has orthonormal columns ordered by descending singular value and
/// `singvals` holds the matching singular values divided by the sum of the
/// full (pre-truncation) spectrum of the source sequence. The kept values can
/// therefore sum to less than one.
struct SubspaceRep {
  Matrix basis;
  Vector singvals;

  Index ambient_dim() const { return basis.rows(); }
  Index rank() const { return basis.cols(); }
};

/// Orthonormal basis of the orthogonal complement of a subspace.
struct NullBasis {
  Matrix basis;
};

/// Thin SVD of the raw (uncentered) sequence, keeping the top min(r, rank)
/// singular triplets. Throws DegenerateError for an all-zero or non-finite
/// sequence and DimensionError when r is out of range.
SubspaceRep build_subspace(const SequenceMatrix& seq, Index r);

/// Keeps the columns whose normalized singular value is strictly greater than
/// `lambda_m`. When nothing qualifies the single leading column is kept.
SubspaceRep truncate(const SubspaceRep& rep, double lambda_m);

/// Completes `rep.basis` to an orthogonal D x D matrix. Throws DimensionError
/// when the subspace is the whole ambient space.
NullBasis null_complement(const SubspaceRep& rep);

/// Same as above for a bare orthonormal basis.
NullBasis null_complement(const Matrix& basis);

/// Reads a frame-per-row CSV of decimal reals and returns it transposed to
/// D x N. `skip_header_rows` leading lines are ignored.
SequenceMatrix read_sequence_csv(const std::filesystem::path& path, int skip_header_rows = 0);

/// Writes frames as rows (the inverse of read_sequence_csv).
void write_sequence_csv(const std::filesystem::path& path, const SequenceMatrix& seq);

/// UU^T, used by oracles and tests.
inline Matrix projector(const Matrix& basis) { return basis * basis.transpose(); }

}  // namespace dgk
