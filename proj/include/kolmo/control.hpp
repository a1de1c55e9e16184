#pragma once

#include <vector>

#include "kolmo/gramian.hpp"

namespace kolmo {

/// Steer γ' = Bγ + σv from γ(t) = x to γ(T) = y.
struct ControlProblem {
  SystemMatrix system;
  double t = 0.0;
  double T = 1.0;
  Vector x;
  Vector y;

  /// Throws std::invalid_argument for T ≤ t or mismatched dimensions.
  void validate() const;
  double horizon() const { return T - t; }
};

/// Minimum-energy control v̄(s) = σᵀe^{(T−s)Bᵀ}w with C(T−t)w = y − e^{(T−t)B}x.
struct OptimalControl {
  ControlProblem problem;
  Vector w;
  double cost = 0.0;
};

OptimalControl optimal_control(const ControlProblem& problem);

/// V(t,x;T,y) = ⟨C⁻¹(T−t)z, z⟩, z = y − e^{(T−t)B}x.
double optimal_cost(const ControlProblem& problem);

/// v̄(s), an m₀-vector.
Vector control_value(const OptimalControl& ctrl, double s);
/// |v̄(s)|².
double control_rate(const OptimalControl& ctrl, double s);

/// γ(s) = e^{(s−t)B}x + C(s−t)e^{(T−s)Bᵀ}w. Throws for s outside [t, T].
Vector trajectory(const OptimalControl& ctrl, double s);

/// γ(s) with the Duhamel integral done by adaptive quadrature.
Vector trajectory_quadrature(const OptimalControl& ctrl, double s,
                             const SimpsonOptions& options = {});

/// ∫ₐᵇ |v̄|² = wᵀ[C(T−a) − C(T−b)]w for t ≤ a ≤ b ≤ T.
double partial_cost(const OptimalControl& ctrl, double a, double b);

/// Cost of the least-norm piecewise-constant control on n equal steps,
/// using the exact zero-order-hold discretization of the dynamics. The
/// minimum-norm solution is computed by complete orthogonal decomposition.
/// Throws NumericalError when the discrete reachability map is rank deficient.
double discrete_least_norm_control(const ControlProblem& problem, int n_steps);

struct KappaEstimate {
  double raw = 0.0;        ///< max over s and j of ‖(e^{sB}σ)⁽ʲ⁾‖₂ / sʲ
  double per_block = 0.0;  ///< 1.1 · raw
  /// Radius factor for the Euclidean cone: per_block · (Σⱼ 1/(2j+1))^{1/2}.
  double cone = 0.0;
};

/// Uniform grid s = k/count, k = 1..count.
std::vector<double> default_kappa_grid(int count = 1024);

KappaEstimate kappa_estimate(const SystemMatrix& system, const std::vector<double>& s_grid);
KappaEstimate kappa_estimate(const SystemMatrix& system);

/// P_{β,r,R}(base) = {base ∘ δ_λ(β, ξ) : |ξ| < r, 0 < λ ≤ R}.
struct ConeSpec {
  double beta = 0.5;
  double r = 1.0;
  double R = 1.0;
  SpaceTimePoint base;

  /// 0 < β ≤ 1, r > 0, R > 0.
  void validate() const;
};

bool cone_membership(const ConeSpec& cone, const SpaceTimePoint& p, const SystemMatrix& system);

/// p ∈ center ∘ δ_ρ(Q₁⁺), Q₁⁺ = [0, 1) × {|x| < 1}.
bool cylinder_membership(const SpaceTimePoint& center, double rho, const SpaceTimePoint& p,
                         const SystemMatrix& system);

}  // namespace kolmo
