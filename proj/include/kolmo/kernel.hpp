#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <utility>
#include <variant>
#include <vector>

#include "kolmo/gramian.hpp"
#include "kolmo/operator.hpp"

namespace kolmo {

/// Everything needed to evaluate Γ(t, ·; T, ·) for fixed (t, T).
struct Transition {
  double t = 0.0;
  double T = 0.0;
  Matrix flow;  ///< e^{(T−t)B}
  std::shared_ptr<const Gramian> covariance;
  double log_normalization = 0.0;  ///< −½(d log 2π + log det S)
};

/// Gaussian transition density of dX = BX ds + σ Σ(s)^{1/2} dW, i.e. the
/// fundamental solution of ½ Σ_{ij} Σ_ij(t) ∂_ij + ⟨Bx, D⟩ + ∂_t. With
/// Σ ≡ λI this is Γ^λ, with covariance λC(T−t).
class GaussianKernel {
 public:
  GaussianKernel(SystemMatrix system, double lambda);
  /// Time-dependent diffusion rate Σ(s) (m₀ × m₀, positive definite).
  GaussianKernel(SystemMatrix system, std::function<Matrix(double)> rate);

  /// Exact kernel of an operator whose diffusion depends on time only and
  /// which has no lower-order terms: Σ(s) = 2a(s).
  static GaussianKernel from_operator(const OperatorSpec& spec);

  const SystemMatrix& system() const { return system_; }
  bool constant_rate() const { return !rate_; }
  /// λ for constant-rate kernels.
  double lambda() const { return lambda_; }
  /// Σ(s).
  Matrix rate(double s) const;

  /// Cached per (t, T); constant-rate kernels key on T − t only.
  Transition transition(double t, double T) const;

  double log_density(const Transition& tr, const Vector& x, const Vector& y) const;

 private:
  SystemMatrix system_;
  double lambda_ = 1.0;
  std::function<Matrix(double)> rate_;

  struct Cache {
    std::shared_mutex mutex;
    std::map<std::pair<double, double>, Transition> entries;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

double eval_kernel(const GaussianKernel& kernel, double t, const Vector& x, double T,
                   const Vector& y);
double eval_log_kernel(const GaussianKernel& kernel, double t, const Vector& x, double T,
                       const Vector& y);

/// Box quadrature around a Gaussian: each coordinate spans ±radius standard
/// deviations of the covariance, which for these kernels is the dilation box
/// |D((T−t)^{−1/2})(z − mean)| ≲ radius up to block constants.
struct QuadratureSpec {
  double radius = 8.0;
  int panels = 24;
  int order = 8;
};

/// |∫Γ(t,x;s,z)Γ(s,z;T,y)dz − Γ(t,x;T,y)| / Γ(t,x;T,y). Requires d ≤ 3.
double chapman_kolmogorov_residual(const GaussianKernel& kernel, double t, const Vector& x,
                                   double T, const Vector& y, double s,
                                   const QuadratureSpec& quad = {});

/// ∫Γ(t,x;T,y)dy.
double kernel_mass(const GaussianKernel& kernel, double t, const Vector& x, double T,
                   const QuadratureSpec& quad = {});

struct PdeResidualOptions {
  /// Base step; block j uses h·(T−t)^j in space and h² in time. Zero means
  /// the default 1e-3·(T−t)^{1/2}.
  double h = 0.0;
  /// Drift used in the differential operator (defaults to the kernel's B).
  std::optional<Matrix> operator_drift;
};

/// |(½ Σ_ij Σ_ij(t) ∂²_{x_i x_j} + ⟨Bx, D_x⟩ + ∂_t) Γ| / Γ at (t, x; T, y) by
/// centered differences. Throws std::invalid_argument when T − t ≤ 10h².
double pde_residual(const GaussianKernel& kernel, double t, const Vector& x, double T,
                    const Vector& y, const PdeResidualOptions& options = {});

/// Observed convergence orders log₂(r(hₖ)/r(hₖ₊₁)) / log₂(hₖ/hₖ₊₁).
std::vector<double> pde_convergence_orders(const GaussianKernel& kernel, double t,
                                           const Vector& x, double T, const Vector& y,
                                           const std::vector<double>& steps);

// Bounded payoffs for the Cauchy problem.

/// Σ coef · Π y_i^{k_i}, clamped to [−cap, cap].
struct PolynomialPayoff {
  struct Term {
    double coefficient = 1.0;
    std::vector<int> exponents;
  };
  std::vector<Term> terms;
  double cap = 1e6;
};

struct GaussianBump {
  Vector center;
  double width = 1.0;
  double height = 1.0;
};

/// Logistic approximation of the indicator of the ball |y − center| < radius.
struct SmoothedIndicator {
  Vector center;
  double radius = 1.0;
  double smoothing = 0.05;
};

using Payoff = std::variant<PolynomialPayoff, GaussianBump, SmoothedIndicator>;

double evaluate_payoff(const Payoff& phi, const Vector& y);

/// u(t, x) = ∫Γ(t,x;T,y)φ(y)dy. Throws NumericalError when halving the panel
/// count changes the result by more than 1e-8 · (1 + |u|).
double cauchy_solution(const GaussianKernel& kernel, const Payoff& phi, double t,
                       const Vector& x, double T, const QuadratureSpec& quad = {});

struct BoundEnvelope {
  double lambda_minus = 1.0;
  double lambda_plus = 1.0;
  double C_minus = 1.0;
  double C_plus = 1.0;

  /// Throws std::invalid_argument unless λ⁻ ≤ λ⁺ and all entries are positive.
  void validate() const;
};

/// (C⁻Γ^{λ⁻}, C⁺Γ^{λ⁺}) at (t, x; T, y).
std::pair<double, double> bound_envelope_eval(const BoundEnvelope& env, const SystemMatrix& system,
                                              double t, const Vector& x, double T,
                                              const Vector& y);

/// c_A (T−t)^{−Q/2} exp(−|D((T−t)^{−1/2})(y − e^{(T−t)B}x)|² / c_A), 0 < T−t ≤ 1.
double aronson_upper_form(double c_A, const SystemMatrix& system, double t, const Vector& x,
                          double T, const Vector& y);

/// c_D (T−t)^{−Q/2} exp(−⟨C⁻¹(T−t) z, z⟩ / c_D), z = y − e^{(T−t)B}x.
double lower_bound_form(double c_D, const SystemMatrix& system, double t, const Vector& x,
                        double T, const Vector& y);

/// c_L det C(T−t)^{−1/2} exp(−⟨C⁻¹(T−t) z, z⟩ / c_L).
double covariance_upper_form(double c_L, const SystemMatrix& system, double t, const Vector& x,
                             double T, const Vector& y);

struct KernelArgs {
  double t = 0.0;
  Vector x;
  double T = 1.0;
  Vector y;
};

/// Smallest c_A with Γ ≤ aronson_upper_form(c_A) on every point.
double fit_aronson_constant(const GaussianKernel& kernel, const std::vector<KernelArgs>& points);
/// Largest c_D with lower_bound_form(c_D) ≤ Γ on every point.
double fit_lower_constant(const GaussianKernel& kernel, const std::vector<KernelArgs>& points);

}  // namespace kolmo
