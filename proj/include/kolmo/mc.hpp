#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kolmo/kernel.hpp"
#include "kolmo/operator.hpp"

namespace kolmo {

struct SimConfig {
  long n_paths = 100000;
  int n_steps = 100;
  std::uint64_t seed = 0;
  std::string scheme = "euler-maruyama";
  /// Worker threads; 0 reads KOLMO_THREADS, then falls back to the hardware.
  int threads = 0;

  /// Throws std::invalid_argument for n_paths < 1, n_steps < 1 or an unknown scheme.
  void validate() const;
};

int resolve_threads(int requested);

struct SimulationResult {
  Matrix endpoints;     ///< n_paths × d
  Vector log_weights;   ///< Feynman–Kac log-weights; empty when the potential vanishes
  double horizon = 0.0;

  bool weighted() const { return log_weights.size() > 0; }
};

/// Euler–Maruyama in exponential-integrator form for
/// dX = [BX + σ·drift(s, X)]ds + σ·(2a(s, X))^{1/2} dW.
/// Over each step the linear part is propagated exactly; the drift and
/// diffusion are frozen at the step midpoint in time and the left endpoint in
/// space. With constant coefficients one step is already exact in law.
/// A nonzero potential c + div a_low accumulates into the log-weights.
/// Throws NumericalError when 2a is not positive definite at a visited point.
SimulationResult simulate_paths(const OperatorSpec& spec, double t, const Vector& x, double T,
                                const SimConfig& config);

struct DensityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_hits = 0;
  double bandwidth = 0.0;
};

/// Box estimator on y + D(√horizon)·[−h/2, h/2]ᵈ; the volume is hᵈ·horizon^{Q/2}.
/// Throws std::invalid_argument on zero paths or h ≤ 0.
DensityEstimate estimate_density(const SimulationResult& sim, const Vector& y, double h,
                                 const BlockStructure& structure);
DensityEstimate estimate_density(const Matrix& endpoints, const Vector& y, double h,
                                 const BlockStructure& structure, double horizon);

struct MassFraction {
  double fraction = 0.0;
  double std_error = 0.0;
};

/// Fraction of endpoints with |D(horizon^{−1/2})(Y − e^{horizon·B}x)| ≤ R.
MassFraction mass_concentration(const Matrix& endpoints, const Vector& x, double R,
                                const SystemMatrix& system, double horizon);

/// ∫ Γ(t, x; T, y) dx over |D((T−t)^{−1/2})(y − e^{(T−t)B}x)| ≤ R, by
/// quadrature in polar coordinates of the dilated offset. Requires d ≤ 2.
double dual_mass_concentration(const GaussianKernel& kernel, double t, double T, const Vector& y,
                               double R, const QuadratureSpec& quad = {});

/// 25 arrival points with dilated offset |D(horizon^{−1/2})(y − e^{horizon·B}x)| ≤ radius:
/// a line for d = 1, a 5 × 5 square inscribed in the disk of the first two
/// coordinates otherwise.
std::vector<Vector> default_bound_grid(const SystemMatrix& system, const Vector& x, double horizon,
                                       double radius = 3.0);

struct BoundOptions {
  double bandwidth = 0.1;  ///< estimator bandwidth for Monte Carlo points
  std::vector<double> diagonal_horizons{0.25, 0.5, 1.0};
};

struct DiagonalEntry {
  double horizon = 0.0;
  double gamma = 0.0;
  double std_error = 0.0;
  double c = 0.0;  ///< Γ(T−h, y; T, y) · h^{Q/2}
};

struct BoundReport {
  bool exact = false;
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
  std::vector<Vector> points;
  std::vector<double> gamma;
  std::vector<double> std_error;
  std::vector<double> gamma_minus;
  std::vector<double> gamma_plus;
  std::vector<double> ratio_minus;  ///< Γ / Γ^{λ⁻}
  std::vector<double> ratio_plus;   ///< Γ / Γ^{λ⁺}
  std::vector<bool> zero_hits;
  double C_minus = 0.0;       ///< min of Γ / Γ^{λ⁻}
  double C_plus = 0.0;        ///< max of Γ / Γ^{λ⁺}
  double C_minus_low = 0.0;   ///< min of (Γ − 3·stderr) / Γ^{λ⁻}, floored at 0
  double C_plus_high = 0.0;   ///< max of (Γ + 3·stderr) / Γ^{λ⁺}
  bool psd_checked = false;
  double psd_lower_margin = 0.0;  ///< least eigenvalue of C_a − λ⁻C
  double psd_upper_margin = 0.0;  ///< least eigenvalue of λ⁺C − C_a
  bool psd_ok = false;
  std::vector<DiagonalEntry> diagonal;
  double diagonal_c = 0.0;       ///< min over horizons
  double diagonal_spread = 0.0;  ///< max c / min c
  SimConfig config;
};

/// Compares Γ of `spec` with C±Γ^{λ±} on `y_grid`. Γ is the exact Gaussian
/// when the diffusion depends on time only and there are no lower-order
/// terms, and a Monte Carlo estimate otherwise. Throws ValidationError
/// ("lambda_range") unless λ⁻ ≤ 2·min eig a and 2·max eig a ≤ λ⁺ on the
/// default samples.
BoundReport verify_bounds(const OperatorSpec& spec, double t, const Vector& x, double T,
                          const std::vector<Vector>& y_grid, double lambda_minus,
                          double lambda_plus, const SimConfig& config,
                          const BoundOptions& options = {});

}  // namespace kolmo
