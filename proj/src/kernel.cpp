#include "kolmo/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_forward(double t, double T) {
  if (!(T > t)) throw std::invalid_argument("kernel: need T > t");
}

void require_unit_horizon(double t, double T) {
  if (!(T - t > 0.0 && T - t <= 1.0)) {
    throw std::invalid_argument("bound form: T - t must lie in (0, 1]");
  }
}

// Smallest positive c with log c − a/c ≥ target; the left side is increasing in c.
double solve_form_constant(double a, double target) {
  auto h = [a](double log_c) { return log_c - a * std::exp(-log_c); };
  double lo = -1.0, hi = 1.0;
  while (h(lo) > target) lo *= 2.0;
  while (h(hi) < target) hi *= 2.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < target ? lo : hi) = mid;
  }
  return std::exp(hi);
}

// Box of ±radius standard deviations around a Gaussian (mean, covariance).
std::pair<Vector, Vector> gaussian_box(const Vector& mean, const Matrix& cov, double radius) {
  const Vector half = radius * cov.diagonal().cwiseSqrt();
  return {mean - half, mean + half};
}

}  // namespace

GaussianKernel::GaussianKernel(SystemMatrix system, double lambda)
    : system_(std::move(system)), lambda_(lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("GaussianKernel: lambda must be positive");
}

GaussianKernel::GaussianKernel(SystemMatrix system, std::function<Matrix(double)> rate)
    : system_(std::move(system)), rate_(std::move(rate)) {
  if (!rate_) throw std::invalid_argument("GaussianKernel: empty rate function");
}

GaussianKernel GaussianKernel::from_operator(const OperatorSpec& spec) {
  if (!spec.time_only_gaussian()) {
    throw std::invalid_argument(
        "GaussianKernel::from_operator: diffusion must depend on time only with no "
        "lower-order terms");
  }
  if (const auto* c = std::get_if<ConstantProfile>(&spec.a.profile.form())) {
    const Matrix a = c->value * spec.a.base;
    if ((a - a(0, 0) * Matrix::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff() == 0.0) {
      return GaussianKernel(spec.system, 2.0 * a(0, 0));
    }
  }
  const DiffusionField field = spec.a;
  const Vector origin = Vector::Zero(spec.d());
  return GaussianKernel(spec.system,
                        [field, origin](double s) -> Matrix { return 2.0 * field.value(s, origin); });
}

Matrix GaussianKernel::rate(double s) const {
  if (rate_) return rate_(s);
  return lambda_ * Matrix::Identity(system_.m0(), system_.m0());
}

Transition GaussianKernel::transition(double t, double T) const {
  require_forward(t, T);
  const auto key = rate_ ? std::make_pair(t, T) : std::make_pair(0.0, T - t);
  {
    std::shared_lock lock(cache_->mutex);
    if (auto it = cache_->entries.find(key); it != cache_->entries.end()) {
      Transition tr = it->second;
      tr.t = t;
      tr.T = T;
      return tr;
    }
  }
  Transition tr;
  tr.t = t;
  tr.T = T;
  tr.flow = matrix_exponential(system_.B(), T - t);
  if (rate_) {
    tr.covariance = std::make_shared<const Gramian>(gramian_weighted(system_, rate_, t, T));
  } else {
    const Matrix c = controllability_gramian(system_.B(), system_.m0(), T - t);
    tr.covariance = std::make_shared<const Gramian>(system_, T - t, lambda_ * c);
  }
  tr.log_normalization = -0.5 * (system_.d() * kLog2Pi + tr.covariance->logdet());
  std::unique_lock lock(cache_->mutex);
  cache_->entries.emplace(key, tr);
  return tr;
}

double GaussianKernel::log_density(const Transition& tr, const Vector& x, const Vector& y) const {
  if (x.size() != system_.d() || y.size() != system_.d()) {
    throw std::invalid_argument("kernel: dimension mismatch");
  }
  const Vector z = y - tr.flow * x;
  return tr.log_normalization - 0.5 * tr.covariance->quadratic_form(z);
}

double eval_log_kernel(const GaussianKernel& kernel, double t, const Vector& x, double T,
                       const Vector& y) {
  return kernel.log_density(kernel.transition(t, T), x, y);
}

double eval_kernel(const GaussianKernel& kernel, double t, const Vector& x, double T,
                   const Vector& y) {
  return std::exp(eval_log_kernel(kernel, t, x, T, y));
}

double chapman_kolmogorov_residual(const GaussianKernel& kernel, double t, const Vector& x,
                                   double T, const Vector& y, double s,
                                   const QuadratureSpec& quad) {
  if (!(s > t && s < T)) throw std::invalid_argument("chapman_kolmogorov: need t < s < T");
  if (kernel.system().d() > 3) {
    throw std::invalid_argument("chapman_kolmogorov: quadrature limited to d <= 3");
  }
  const Transition first = kernel.transition(t, s);
  const Transition second = kernel.transition(s, T);
  const Transition whole = kernel.transition(t, T);

  // The integrand in z is proportional to a Gaussian with precision
  // S₁⁻¹ + F₂ᵀS₂⁻¹F₂; the box is laid around that bridge distribution.
  const auto d = x.size();
  const Matrix& f2 = second.flow;
  Matrix precision(d, d);
  for (Eigen::Index k = 0; k < d; ++k) precision.col(k) = first.covariance->solve(Vector::Unit(d, k));
  Matrix s2_inv_f2(d, d);
  for (Eigen::Index k = 0; k < d; ++k) s2_inv_f2.col(k) = second.covariance->solve(f2.col(k));
  precision += f2.transpose() * s2_inv_f2;
  const Eigen::LLT<Matrix> llt(precision);
  const Matrix bridge_cov = llt.solve(Matrix::Identity(d, d));
  const Vector bridge_mean =
      llt.solve(first.covariance->solve(first.flow * x) + f2.transpose() * second.covariance->solve(y));
  const auto [lo, hi] = gaussian_box(bridge_mean, bridge_cov, quad.radius);

  auto integrand = [&](const Vector& z) {
    return std::exp(kernel.log_density(first, x, z) + kernel.log_density(second, z, y));
  };
  const double convolved = integrate_box(integrand, lo, hi, {quad.panels, quad.order});
  const double direct = std::exp(kernel.log_density(whole, x, y));
  return std::abs(convolved - direct) / direct;
}

double kernel_mass(const GaussianKernel& kernel, double t, const Vector& x, double T,
                   const QuadratureSpec& quad) {
  const Transition tr = kernel.transition(t, T);
  const auto [lo, hi] = gaussian_box(tr.flow * x, tr.covariance->C(), quad.radius);
  auto integrand = [&](const Vector& y) { return std::exp(kernel.log_density(tr, x, y)); };
  return integrate_box(integrand, lo, hi, {quad.panels, quad.order});
}

double pde_residual(const GaussianKernel& kernel, double t, const Vector& x, double T,
                    const Vector& y, const PdeResidualOptions& options) {
  require_forward(t, T);
  const double horizon = T - t;
  const double h = options.h > 0.0 ? options.h : 1e-3 * std::sqrt(horizon);
  const double ht = h * h;
  if (!(horizon > 10.0 * ht)) {
    throw std::invalid_argument("pde_residual: step too large for the horizon (need T-t > 10h^2)");
  }
  const SystemMatrix& system = kernel.system();
  const BlockStructure& blocks = system.structure();
  const int d = system.d();
  const int m0 = system.m0();
  const Matrix drift = options.operator_drift.value_or(system.B());
  if (drift.rows() != d || drift.cols() != d) {
    throw std::invalid_argument("pde_residual: operator drift has the wrong size");
  }

  const Transition tr = kernel.transition(t, T);
  auto gamma = [&](const Vector& xx) { return std::exp(kernel.log_density(tr, xx, y)); };
  const double g0 = gamma(x);
  const Matrix rate = kernel.rate(t);

  double second_order = 0.0;
  for (int i = 0; i < m0; ++i) {
    const Vector ei = h * Vector::Unit(d, i);
    second_order += rate(i, i) * (gamma(x + ei) - 2.0 * g0 + gamma(x - ei)) / (h * h);
    for (int j = i + 1; j < m0; ++j) {
      if (rate(i, j) == 0.0) continue;
      const Vector ej = h * Vector::Unit(d, j);
      const double mixed = (gamma(x + ei + ej) - gamma(x + ei - ej) - gamma(x - ei + ej) +
                            gamma(x - ei - ej)) /
                           (4.0 * h * h);
      second_order += 2.0 * rate(i, j) * mixed;
    }
  }

  const Vector velocity = drift * x;
  double transport = 0.0;
  for (int k = 0; k < d; ++k) {
    if (velocity(k) == 0.0) continue;
    const double hk = h * std::pow(horizon, blocks.block_of(k));
    const Vector ek = hk * Vector::Unit(d, k);
    transport += velocity(k) * (gamma(x + ek) - gamma(x - ek)) / (2.0 * hk);
  }

  const double g_plus = eval_kernel(kernel, t + ht, x, T, y);
  const double g_minus = eval_kernel(kernel, t - ht, x, T, y);
  const double time_derivative = (g_plus - g_minus) / (2.0 * ht);

  return std::abs(0.5 * second_order + transport + time_derivative) / g0;
}

std::vector<double> pde_convergence_orders(const GaussianKernel& kernel, double t,
                                           const Vector& x, double T, const Vector& y,
                                           const std::vector<double>& steps) {
  std::vector<double> residuals;
  for (double h : steps) residuals.push_back(pde_residual(kernel, t, x, T, y, {h, std::nullopt}));
  std::vector<double> orders;
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    orders.push_back(std::log(residuals[k] / residuals[k + 1]) / std::log(steps[k] / steps[k + 1]));
  }
  return orders;
}

double evaluate_payoff(const Payoff& phi, const Vector& y) {
  return std::visit(
      Overloaded{
          [&y](const PolynomialPayoff& p) {
            double sum = 0.0;
            for (const auto& term : p.terms) {
              double v = term.coefficient;
              for (std::size_t i = 0; i < term.exponents.size(); ++i) {
                if (term.exponents[i] != 0) v *= std::pow(y(static_cast<Eigen::Index>(i)), term.exponents[i]);
              }
              sum += v;
            }
            return std::clamp(sum, -p.cap, p.cap);
          },
          [&y](const GaussianBump& p) {
            return p.height * std::exp(-0.5 * (y - p.center).squaredNorm() / (p.width * p.width));
          },
          [&y](const SmoothedIndicator& p) {
            const double signed_distance = p.radius - (y - p.center).norm();
            return 1.0 / (1.0 + std::exp(-signed_distance / p.smoothing));
          },
      },
      phi);
}

double cauchy_solution(const GaussianKernel& kernel, const Payoff& phi, double t,
                       const Vector& x, double T, const QuadratureSpec& quad) {
  if (kernel.system().d() > 3) throw std::invalid_argument("cauchy_solution: limited to d <= 3");
  const Transition tr = kernel.transition(t, T);
  const auto [lo, hi] = gaussian_box(tr.flow * x, tr.covariance->C(), quad.radius);
  auto integrand = [&](const Vector& y) {
    return std::exp(kernel.log_density(tr, x, y)) * evaluate_payoff(phi, y);
  };
  const double fine = integrate_box(integrand, lo, hi, {quad.panels, quad.order});
  const double coarse = integrate_box(integrand, lo, hi, {std::max(1, quad.panels / 2), quad.order});
  if (std::abs(fine - coarse) > 1e-8 * (1.0 + std::abs(fine))) {
    throw NumericalError("cauchy_solution: quadrature did not converge");
  }
  return fine;
}

void BoundEnvelope::validate() const {
  if (!(lambda_minus > 0.0 && lambda_plus > 0.0 && C_minus > 0.0 && C_plus > 0.0)) {
    throw std::invalid_argument("BoundEnvelope: all constants must be positive");
  }
  if (lambda_minus > lambda_plus) {
    throw std::invalid_argument("BoundEnvelope: need lambda_minus <= lambda_plus");
  }
}

std::pair<double, double> bound_envelope_eval(const BoundEnvelope& env, const SystemMatrix& system,
                                              double t, const Vector& x, double T,
                                              const Vector& y) {
  env.validate();
  const GaussianKernel lower(system, env.lambda_minus);
  const GaussianKernel upper(system, env.lambda_plus);
  return {std::exp(std::log(env.C_minus) + eval_log_kernel(lower, t, x, T, y)),
          std::exp(std::log(env.C_plus) + eval_log_kernel(upper, t, x, T, y))};
}

namespace {

double dilated_offset_squared(const SystemMatrix& system, double t, const Vector& x, double T,
                              const Vector& y) {
  const double tau = T - t;
  const Vector z = y - matrix_exponential(system.B(), tau) * x;
  return dilation_diagonal(system.structure(), 1.0 / std::sqrt(tau)).cwiseProduct(z).squaredNorm();
}

double optimal_cost_form(const SystemMatrix& system, double t, const Vector& x, double T,
                         const Vector& y) {
  const double tau = T - t;
  return gramian(system, tau).quadratic_form(y - matrix_exponential(system.B(), tau) * x);
}

}  // namespace

double aronson_upper_form(double c_A, const SystemMatrix& system, double t, const Vector& x,
                          double T, const Vector& y) {
  require_unit_horizon(t, T);
  if (!(c_A > 0.0)) throw std::invalid_argument("aronson_upper_form: c_A must be positive");
  const double q = homogeneous_dimension(system.structure());
  const double r2 = dilated_offset_squared(system, t, x, T, y);
  return std::exp(std::log(c_A) - 0.5 * q * std::log(T - t) - r2 / c_A);
}

double lower_bound_form(double c_D, const SystemMatrix& system, double t, const Vector& x,
                        double T, const Vector& y) {
  require_unit_horizon(t, T);
  if (!(c_D > 0.0)) throw std::invalid_argument("lower_bound_form: c_D must be positive");
  const double q = homogeneous_dimension(system.structure());
  const double v = optimal_cost_form(system, t, x, T, y);
  return std::exp(std::log(c_D) - 0.5 * q * std::log(T - t) - v / c_D);
}

double covariance_upper_form(double c_L, const SystemMatrix& system, double t, const Vector& x,
                             double T, const Vector& y) {
  require_unit_horizon(t, T);
  if (!(c_L > 0.0)) throw std::invalid_argument("covariance_upper_form: c_L must be positive");
  const Gramian g = gramian(system, T - t);
  const double v = g.quadratic_form(y - matrix_exponential(system.B(), T - t) * x);
  return std::exp(std::log(c_L) - 0.5 * g.logdet() - v / c_L);
}

double fit_aronson_constant(const GaussianKernel& kernel, const std::vector<KernelArgs>& points) {
  const SystemMatrix& system = kernel.system();
  const double q = homogeneous_dimension(system.structure());
  double c = 0.0;
  for (const auto& p : points) {
    require_unit_horizon(p.t, p.T);
    const double target = eval_log_kernel(kernel, p.t, p.x, p.T, p.y) + 0.5 * q * std::log(p.T - p.t);
    c = std::max(c, solve_form_constant(dilated_offset_squared(system, p.t, p.x, p.T, p.y), target));
  }
  return c;
}

double fit_lower_constant(const GaussianKernel& kernel, const std::vector<KernelArgs>& points) {
  const SystemMatrix& system = kernel.system();
  const double q = homogeneous_dimension(system.structure());
  double c = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    require_unit_horizon(p.t, p.T);
    const double target = eval_log_kernel(kernel, p.t, p.x, p.T, p.y) + 0.5 * q * std::log(p.T - p.t);
    c = std::min(c, solve_form_constant(optimal_cost_form(system, p.t, p.x, p.T, p.y), target));
  }
  return c;
}

}  // namespace kolmo
