#pragma once

#include <vector>

#include "kolmo/numerics.hpp"

namespace kolmo {

/// Stratification m₀ ≥ m₁ ≥ … ≥ m_ν ≥ 1 of ℝᵈ. Block j carries dilation
/// weight 2j+1.
class BlockStructure {
 public:
  /// Throws ValidationError ("m_empty", "m_positive", "m_monotonicity").
  explicit BlockStructure(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int size(int block) const { return sizes_.at(block); }
  int d() const { return d_; }
  int nu() const { return static_cast<int>(sizes_.size()) - 1; }
  int m0() const { return sizes_.front(); }
  int blocks() const { return static_cast<int>(sizes_.size()); }

  /// First coordinate of `block`.
  int offset(int block) const { return offsets_.at(block); }
  /// Block index containing `coordinate`.
  int block_of(int coordinate) const;

  bool operator==(const BlockStructure& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int d_ = 0;
};

/// Drift matrix B in block form: zero below the first block subdiagonal and
/// full-row-rank subdiagonal blocks Bⱼ (mⱼ × mⱼ₋₁).
class SystemMatrix {
 public:
  /// Validates and throws ValidationError naming the violated clause.
  SystemMatrix(Matrix b, BlockStructure structure);

  const Matrix& B() const { return b_; }
  const BlockStructure& structure() const { return structure_; }
  int d() const { return structure_.d(); }
  int m0() const { return structure_.m0(); }

  /// σ = (I_{m₀}; 0), d × m₀.
  Matrix sigma() const;

  /// Block (i, j) of B, an mᵢ × mⱼ view copy.
  Matrix block(int i, int j) const;

  /// True when every block on or above the diagonal is zero.
  bool star_free() const;

 private:
  Matrix b_;
  BlockStructure structure_;
};

struct SpaceTimePoint {
  double t = 0.0;
  Vector x;
};

/// Numerical rank with singular values above 1e-10 · σ_max.
int numerical_rank(const Matrix& m, double relative_threshold = 1e-10);

SystemMatrix validate_structure(const Matrix& b, const std::vector<int>& m);

/// Rank of [σ, Bσ, …, B^{d−1}σ] with σ the first m₀ unit columns.
int kalman_rank(const Matrix& b, int m0);
int kalman_rank(const SystemMatrix& system);

/// Q = m₀ + 3m₁ + … + (2ν+1)m_ν.
int homogeneous_dimension(const BlockStructure& structure);

/// diag(r I_{m₀}, r³ I_{m₁}, …, r^{2ν+1} I_{m_ν}) as a vector of diagonal entries.
Vector dilation_diagonal(const BlockStructure& structure, double r);
Matrix dilation_matrix(const BlockStructure& structure, double r);

/// δ_r(t, x) = (r²t, D(r)x).
SpaceTimePoint dilate(const SpaceTimePoint& z, const BlockStructure& structure,
                      double r);

/// (τ, ξ) ∘ (t, x) = (t + τ, x + e^{tB} ξ).
SpaceTimePoint group_compose(const SpaceTimePoint& zeta, const SpaceTimePoint& z,
                             const SystemMatrix& system);

/// ζ⁻¹ such that ζ⁻¹ ∘ ζ = (0, 0). Solves e^{τB} ξ' = −ξ instead of inverting
/// the exponential in closed form.
SpaceTimePoint group_inverse(const SpaceTimePoint& zeta, const SystemMatrix& system);

/// B^{(r)}: subdiagonal blocks unchanged, the block in position (i, j), j ≥ i,
/// multiplied by r^{2 + 2(j − i)}. This is the drift of u ∘ δ_r.
SystemMatrix scaled_system(const SystemMatrix& system, double r);

/// The same system with every block on or above the diagonal set to zero.
SystemMatrix homogeneous_part(const SystemMatrix& system);

}  // namespace kolmo
