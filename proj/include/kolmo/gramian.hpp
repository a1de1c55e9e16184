#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kolmo/model.hpp"

namespace kolmo {

/// A positive-definite covariance C over a horizon, kept with its Cholesky
/// factor. Quadratic forms go through triangular solves only.
class Gramian {
 public:
  /// Symmetrizes `c` and factors it; throws NumericalError when c is not
  /// positive definite.
  Gramian(SystemMatrix system, double horizon, Matrix c);

  double horizon() const { return horizon_; }
  const Matrix& C() const { return c_; }
  const Matrix& chol() const { return l_; }
  double logdet() const { return logdet_; }
  const SystemMatrix& system() const { return system_; }

  /// ⟨C⁻¹z, z⟩.
  double quadratic_form(const Vector& z) const;
  /// C⁻¹z.
  Vector solve(const Vector& z) const;

 private:
  SystemMatrix system_;
  double horizon_;
  Matrix c_;
  Matrix l_;
  double logdet_;
};

/// ∫₀ᵗ e^{sB}σσᵀe^{sBᵀ} ds from the exponential of [[−B, σσᵀ], [0, Bᵀ]]
/// (Van Loan). Accepts t = 0 and rank-deficient pairs; no factorization.
Matrix controllability_gramian(const Matrix& b, int m0, double t);

/// The same integral by adaptive Simpson quadrature.
Matrix controllability_gramian_quadrature(const Matrix& b, int m0, double t,
                                          const SimpsonOptions& options = {});

/// C(t) for a validated system. Throws std::invalid_argument for t ≤ 0 and
/// NumericalError when C(t) is singular.
Gramian gramian(const SystemMatrix& system, double t);

/// ∫ₜᵀ λ(s) (e^{(T−s)B}σ)(e^{(T−s)B}σ)ᵀ ds.
Gramian gramian_weighted(const SystemMatrix& system, const std::function<double(double)>& lambda,
                         double t, double T, const SimpsonOptions& options = {});

/// ∫ₜᵀ e^{(T−s)B}σ Σ(s) σᵀe^{(T−s)Bᵀ} ds for an m₀ × m₀ rate Σ(s) ≻ 0.
Gramian gramian_weighted(const SystemMatrix& system,
                         const std::function<Matrix(double)>& rate, double t, double T,
                         const SimpsonOptions& options = {});

/// C₀(t): the Gramian of the system with all ∗-blocks removed.
Gramian gramian_homogeneous(const SystemMatrix& system, double t);

double quadratic_form(const Gramian& g, const Vector& z);

struct EquivalenceReport {
  std::vector<double> tau_grid;
  std::vector<double> det_ratio;        ///< det C(τ) / det C₀(τ)
  std::vector<double> k_min_per_tau;    ///< min over directions of ⟨C⁻¹z,z⟩/⟨C₀⁻¹z,z⟩
  std::vector<double> k_max_per_tau;
  double k5 = 0.0;
  double k6 = 0.0;
  double k1 = 0.0;  ///< least eigenvalue of C₀⁻¹(1)
  double k2 = 0.0;  ///< greatest eigenvalue of C₀⁻¹(1)
  double det_slope = 0.0;  ///< max over τ of |det ratio − 1| / τ
  std::size_t direction_count = 0;
};

EquivalenceReport equivalence_constants(const SystemMatrix& system,
                                        const std::vector<double>& tau_grid,
                                        const std::vector<Vector>& directions);

/// Seeded unit vectors in ℝᵈ (normalized Gaussians), for direction sampling.
std::vector<Vector> sample_unit_directions(int d, int count, std::uint64_t seed);

}  // namespace kolmo
