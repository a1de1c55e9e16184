#include "kolmo/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

BlockStructure::BlockStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw ValidationError("m_empty", "block sizes must be non-empty");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] < 1) {
      throw ValidationError("m_positive", "block size m" + std::to_string(i) +
                                              " must be at least 1");
    }
    if (i > 0 && sizes_[i] > sizes_[i - 1]) {
      std::ostringstream msg;
      msg << "block sizes must be non-increasing: m" << i - 1 << "=" << sizes_[i - 1]
          << " < m" << i << "=" << sizes_[i];
      throw ValidationError("m_monotonicity", msg.str());
    }
    offsets_.push_back(d_);
    d_ += sizes_[i];
  }
}

int BlockStructure::block_of(int coordinate) const {
  if (coordinate < 0 || coordinate >= d_) {
    throw std::out_of_range("BlockStructure::block_of: coordinate out of range");
  }
  int block = 0;
  while (block + 1 < blocks() && offsets_[block + 1] <= coordinate) ++block;
  return block;
}

int numerical_rank(const Matrix& m, double relative_threshold) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > relative_threshold * s(0)) ++rank;
  }
  return rank;
}

SystemMatrix::SystemMatrix(Matrix b, BlockStructure structure)
    : b_(std::move(b)), structure_(std::move(structure)) {
  const int d = structure_.d();
  if (b_.rows() != b_.cols()) {
    throw ValidationError("non_square", "B must be square");
  }
  if (b_.rows() != d) {
    std::ostringstream msg;
    msg << "B is " << b_.rows() << "x" << b_.cols() << " but block sizes sum to " << d;
    throw ValidationError("dimension_mismatch", msg.str());
  }
  if (!b_.allFinite()) throw ValidationError("non_finite", "B has non-finite entries");
  const int n = structure_.blocks();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j + 2 <= i; ++j) {
      if (block(i, j).cwiseAbs().maxCoeff() != 0.0) {
        std::ostringstream msg;
        msg << "block (" << i << "," << j << ") below the first subdiagonal is nonzero";
        throw ValidationError("zero_block", msg.str());
      }
    }
  }
  for (int i = 1; i < n; ++i) {
    const int rank = numerical_rank(block(i, i - 1));
    if (rank != structure_.size(i)) {
      std::ostringstream msg;
      msg << "subdiagonal block B" << i << " has rank " << rank << ", expected "
          << structure_.size(i);
      throw ValidationError("rank_deficient", msg.str());
    }
  }
}

Matrix SystemMatrix::sigma() const {
  Matrix s = Matrix::Zero(d(), m0());
  s.topRows(m0()).setIdentity();
  return s;
}

Matrix SystemMatrix::block(int i, int j) const {
  return b_.block(structure_.offset(i), structure_.offset(j), structure_.size(i),
                  structure_.size(j));
}

bool SystemMatrix::star_free() const {
  for (int i = 0; i < structure_.blocks(); ++i) {
    for (int j = i; j < structure_.blocks(); ++j) {
      if (block(i, j).cwiseAbs().maxCoeff() != 0.0) return false;
    }
  }
  return true;
}

SystemMatrix validate_structure(const Matrix& b, const std::vector<int>& m) {
  return SystemMatrix(b, BlockStructure(m));
}

int kalman_rank(const Matrix& b, int m0) {
  if (b.rows() != b.cols()) throw std::invalid_argument("kalman_rank: B not square");
  const auto d = b.rows();
  if (m0 < 1 || m0 > d) throw std::invalid_argument("kalman_rank: bad m0");
  Matrix reach(d, d * m0);
  Matrix column = Matrix::Zero(d, m0);
  column.topRows(m0).setIdentity();
  for (Eigen::Index k = 0; k < d; ++k) {
    reach.middleCols(k * m0, m0) = column;
    column = b * column;
  }
  return numerical_rank(reach);
}

int kalman_rank(const SystemMatrix& system) { return kalman_rank(system.B(), system.m0()); }

int homogeneous_dimension(const BlockStructure& structure) {
  int q = 0;
  for (int j = 0; j < structure.blocks(); ++j) q += (2 * j + 1) * structure.size(j);
  return q;
}

Vector dilation_diagonal(const BlockStructure& structure, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("dilation: r must be positive");
  Vector diag(structure.d());
  for (int j = 0; j < structure.blocks(); ++j) {
    diag.segment(structure.offset(j), structure.size(j)).setConstant(std::pow(r, 2 * j + 1));
  }
  return diag;
}

Matrix dilation_matrix(const BlockStructure& structure, double r) {
  return dilation_diagonal(structure, r).asDiagonal();
}

SpaceTimePoint dilate(const SpaceTimePoint& z, const BlockStructure& structure, double r) {
  return {r * r * z.t, dilation_diagonal(structure, r).cwiseProduct(z.x)};
}

SpaceTimePoint group_compose(const SpaceTimePoint& zeta, const SpaceTimePoint& z,
                             const SystemMatrix& system) {
  if (zeta.x.size() != system.d() || z.x.size() != system.d()) {
    throw std::invalid_argument("group_compose: dimension mismatch");
  }
  return {z.t + zeta.t, z.x + matrix_exponential(system.B(), z.t) * zeta.x};
}

SpaceTimePoint group_inverse(const SpaceTimePoint& zeta, const SystemMatrix& system) {
  if (zeta.x.size() != system.d()) {
    throw std::invalid_argument("group_inverse: dimension mismatch");
  }
  // ζ⁻¹ = (−τ, ξ') with ξ + e^{τB} ξ' = 0.
  const Matrix e = matrix_exponential(system.B(), zeta.t);
  return {-zeta.t, e.partialPivLu().solve(-zeta.x)};
}

SystemMatrix scaled_system(const SystemMatrix& system, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("scaled_system: r must be positive");
  const BlockStructure& s = system.structure();
  Matrix b = system.B();
  for (int i = 0; i < s.blocks(); ++i) {
    for (int j = i; j < s.blocks(); ++j) {
      b.block(s.offset(i), s.offset(j), s.size(i), s.size(j)) *= std::pow(r, 2 + 2 * (j - i));
    }
  }
  return SystemMatrix(std::move(b), s);
}

SystemMatrix homogeneous_part(const SystemMatrix& system) {
  const BlockStructure& s = system.structure();
  Matrix b = Matrix::Zero(s.d(), s.d());
  for (int i = 1; i < s.blocks(); ++i) {
    b.block(s.offset(i), s.offset(i - 1), s.size(i), s.size(i - 1)) = system.block(i, i - 1);
  }
  return SystemMatrix(std::move(b), s);
}

}  // namespace kolmo
