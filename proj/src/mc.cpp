#include "kolmo/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "kolmo/errors.hpp"

namespace kolmo {

void SimConfig::validate() const {
  if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
  if (n_steps < 1) throw std::invalid_argument("SimConfig: n_steps must be >= 1");
  if (scheme != "euler-maruyama") throw std::invalid_argument("SimConfig: unknown scheme " + scheme);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KOLMO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// ∫₀ʰ e^{uB} S e^{uBᵀ} du for any symmetric S (Van Loan).
Matrix integrated_covariance(const Matrix& b, const Matrix& s, double h) {
  const auto d = b.rows();
  Matrix m = Matrix::Zero(2 * d, 2 * d);
  m.topLeftCorner(d, d) = -b;
  m.topRightCorner(d, d) = s;
  m.bottomRightCorner(d, d) = b.transpose();
  const Matrix e = matrix_exponential(m, h);
  const Matrix c = e.bottomRightCorner(d, d).transpose() * e.topRightCorner(d, d);
  return 0.5 * (c + c.transpose());
}

// Per-step noise covariance as a linear map of the m₀ × m₀ rate.
class StepNoise {
 public:
  StepNoise(const SystemMatrix& system, double h)
      : m0_(system.m0()), scale_(dilation_diagonal(system.structure(), std::sqrt(h))) {
    const Matrix sigma = system.sigma();
    for (int i = 0; i < m0_; ++i) {
      for (int j = i; j < m0_; ++j) {
        Matrix s = Matrix::Zero(m0_, m0_);
        s(i, j) = 1.0;
        s(j, i) = 1.0;
        basis_.push_back(integrated_covariance(system.B(), sigma * s * sigma.transpose(), h));
      }
    }
  }

  // Lower factor L with LLᵀ = Q(rate). Factored in dilated coordinates, where
  // Q is O(1), then mapped back.
  Matrix factor(const Matrix& rate) const {
    Matrix q = Matrix::Zero(scale_.size(), scale_.size());
    std::size_t k = 0;
    for (int i = 0; i < m0_; ++i) {
      for (int j = i; j < m0_; ++j) q += rate(i, j) * basis_[k++];
    }
    const Vector inv = scale_.cwiseInverse();
    const Matrix scaled = inv.asDiagonal() * q * inv.asDiagonal();
    const Eigen::LLT<Matrix> llt(scaled);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("simulate_paths: diffusion matrix is not positive definite");
    }
    return scale_.asDiagonal() * Matrix(llt.matrixL());
  }

 private:
  int m0_;
  Vector scale_;
  std::vector<Matrix> basis_;
};

template <class Fn>
void parallel_for(long n, int threads, Fn&& body) {
  threads = static_cast<int>(std::min<long>(threads, n));
  if (threads <= 1) {
    body(0L, n);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const long chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n, lo + chunk);
    workers.emplace_back([&, w, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

SimulationResult simulate_paths(const OperatorSpec& spec, double t, const Vector& x, double T,
                                const SimConfig& config) {
  config.validate();
  if (!(T > t)) throw std::invalid_argument("simulate_paths: need T > t");
  const SystemMatrix& system = spec.system;
  const int d = system.d();
  const int m0 = system.m0();
  if (x.size() != d) throw std::invalid_argument("simulate_paths: start point has the wrong size");
  if (!spec.a.profile.spatially_differentiable() && !spec.a.profile.time_only()) {
    throw std::invalid_argument(
        "simulate_paths: spatial diffusion needs an analytic divergence (tabulated in space)");
  }

  const int n_steps = config.n_steps;
  const double h = (T - t) / n_steps;
  Matrix aug = Matrix::Zero(d + m0, d + m0);
  aug.topLeftCorner(d, d) = system.B();
  aug.topRightCorner(d, m0) = system.sigma();
  const Matrix e = matrix_exponential(aug, h);
  const Matrix step = e.topLeftCorner(d, d);
  const Matrix input = e.topRightCorner(d, m0);  // ∫₀ʰ e^{uB}σ du
  const StepNoise noise(system, h);

  const bool time_only = spec.a.profile.time_only();
  const bool has_drift = !time_only || !spec.a_low.is_zero() || !spec.b_low.is_zero();
  const bool weighted = !spec.c.is_zero() || !spec.a_low.is_zero();

  std::vector<Matrix> factors;
  if (time_only) {
    factors.reserve(n_steps);
    for (int k = 0; k < n_steps; ++k) {
      factors.push_back(noise.factor(2.0 * spec.diffusion(t + (k + 0.5) * h, x)));
    }
  }

  SimulationResult out;
  out.horizon = T - t;
  out.endpoints.resize(config.n_paths, d);
  if (weighted) out.log_weights = Vector::Zero(config.n_paths);

  parallel_for(config.n_paths, resolve_threads(config.threads), [&](long lo, long hi) {
    Vector xi(d);
    Vector state(d);
    for (long p = lo; p < hi; ++p) {
      SplitMix64 rng = SplitMix64::substream(config.seed, static_cast<std::uint64_t>(p));
      std::normal_distribution<double> normal;
      state = x;
      double log_weight = 0.0;
      for (int k = 0; k < n_steps; ++k) {
        const double s = t + (k + 0.5) * h;
        for (int i = 0; i < d; ++i) xi(i) = normal(rng);
        Vector next = step * state;
        if (has_drift) next += input * spec.drift_correction(s, state);
        if (time_only) {
          next += factors[k] * xi;
        } else {
          next += noise.factor(2.0 * spec.diffusion(s, state)) * xi;
        }
        if (weighted) log_weight += h * spec.potential(s, state);
        state = next;
      }
      out.endpoints.row(p) = state.transpose();
      if (weighted) out.log_weights(p) = log_weight;
    }
  });
  if (!all_finite(out.endpoints)) throw NumericalError("simulate_paths: non-finite endpoint");
  return out;
}

namespace {

DensityEstimate estimate_density_impl(const Matrix& endpoints, const Vector* log_weights,
                                      const Vector& y, double h, const BlockStructure& structure,
                                      double horizon) {
  const long n = endpoints.rows();
  if (n == 0) throw std::invalid_argument("estimate_density: no paths");
  if (!(h > 0.0)) throw std::invalid_argument("estimate_density: bandwidth must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("estimate_density: horizon must be positive");
  if (y.size() != endpoints.cols()) throw std::invalid_argument("estimate_density: dimension mismatch");
  const Vector inv = dilation_diagonal(structure, std::sqrt(horizon)).cwiseInverse();
  const double volume =
      std::pow(h, static_cast<double>(y.size())) *
      std::pow(horizon, 0.5 * homogeneous_dimension(structure));

  DensityEstimate out;
  out.bandwidth = h;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long p = 0; p < n; ++p) {
    const Vector u = (endpoints.row(p).transpose() - y).cwiseProduct(inv);
    if (u.cwiseAbs().maxCoeff() > 0.5 * h) continue;
    ++out.n_hits;
    const double w = log_weights ? std::exp((*log_weights)(p)) : 1.0;
    sum += w;
    sum_sq += w * w;
  }
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  double variance;
  if (log_weights) {
    variance = n > 1 ? std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
  } else {
    variance = mean * (1.0 - mean);
  }
  out.value = mean / volume;
  out.std_error = std::sqrt(variance / nn) / volume;
  return out;
}

}  // namespace

DensityEstimate estimate_density(const SimulationResult& sim, const Vector& y, double h,
                                 const BlockStructure& structure) {
  return estimate_density_impl(sim.endpoints, sim.weighted() ? &sim.log_weights : nullptr, y, h,
                               structure, sim.horizon);
}

DensityEstimate estimate_density(const Matrix& endpoints, const Vector& y, double h,
                                 const BlockStructure& structure, double horizon) {
  return estimate_density_impl(endpoints, nullptr, y, h, structure, horizon);
}

MassFraction mass_concentration(const Matrix& endpoints, const Vector& x, double R,
                                const SystemMatrix& system, double horizon) {
  if (!(R > 0.0)) throw std::invalid_argument("mass_concentration: R must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("mass_concentration: horizon must be positive");
  const long n = endpoints.rows();
  if (n == 0) throw std::invalid_argument("mass_concentration: no paths");
  const Vector center = matrix_exponential(system.B(), horizon) * x;
  const Vector inv = dilation_diagonal(system.structure(), 1.0 / std::sqrt(horizon));
  long inside = 0;
  for (long p = 0; p < n; ++p) {
    if ((endpoints.row(p).transpose() - center).cwiseProduct(inv).norm() <= R) ++inside;
  }
  MassFraction out;
  out.fraction = static_cast<double>(inside) / static_cast<double>(n);
  out.std_error = std::sqrt(out.fraction * (1.0 - out.fraction) / static_cast<double>(n));
  return out;
}

double dual_mass_concentration(const GaussianKernel& kernel, double t, double T, const Vector& y,
                               double R, const QuadratureSpec& quad) {
  if (!(R > 0.0)) throw std::invalid_argument("dual_mass_concentration: R must be positive");
  const SystemMatrix& system = kernel.system();
  const int d = system.d();
  if (d > 2) throw std::invalid_argument("dual_mass_concentration: limited to d <= 2");
  const double tau = T - t;
  const Transition tr = kernel.transition(t, T);
  const Matrix back = matrix_exponential(system.B(), -tau);
  const Vector scale = dilation_diagonal(system.structure(), std::sqrt(tau));
  // x = e^{−τB}(y − D(√τ)z), dx = e^{−τ tr B} τ^{Q/2} dz.
  const double jacobian =
      std::exp(-tau * system.B().trace()) *
      std::pow(tau, 0.5 * homogeneous_dimension(system.structure()));
  auto at = [&](const Vector& z) {
    const Vector source = back * (y - scale.cwiseProduct(z));
    return std::exp(kernel.log_density(tr, source, y));
  };
  const BoxQuadrature rule{quad.panels, quad.order};
  if (d == 1) {
    auto f = [&](const Vector& z) { return at(z); };
    return jacobian * integrate_box(f, Vector::Constant(1, -R), Vector::Constant(1, R), rule);
  }
  auto polar = [&](const Vector& p) {
    const Vector z{{p(0) * std::cos(p(1)), p(0) * std::sin(p(1))}};
    return p(0) * at(z);
  };
  return jacobian * integrate_box(polar, Vector{{0.0, 0.0}},
                                  Vector{{R, 2.0 * std::numbers::pi}}, rule);
}

std::vector<Vector> default_bound_grid(const SystemMatrix& system, const Vector& x, double horizon,
                                       double radius) {
  const Vector center = matrix_exponential(system.B(), horizon) * x;
  const Vector scale = dilation_diagonal(system.structure(), std::sqrt(horizon));
  const int d = system.d();
  std::vector<Vector> grid;
  if (d == 1) {
    for (int k = 0; k < 25; ++k) {
      const Vector u = Vector::Constant(1, -radius + 2.0 * radius * k / 24.0);
      grid.push_back(center + scale.cwiseProduct(u));
    }
    return grid;
  }
  const double a = radius / std::sqrt(2.0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      Vector u = Vector::Zero(d);
      u(0) = -a + 2.0 * a * i / 4.0;
      u(1) = -a + 2.0 * a * j / 4.0;
      grid.push_back(center + scale.cwiseProduct(u));
    }
  }
  return grid;
}

BoundReport verify_bounds(const OperatorSpec& spec, double t, const Vector& x, double T,
                          const std::vector<Vector>& y_grid, double lambda_minus,
                          double lambda_plus, const SimConfig& config,
                          const BoundOptions& options) {
  if (!(T > t)) throw std::invalid_argument("verify_bounds: need T > t");
  if (y_grid.empty()) throw std::invalid_argument("verify_bounds: empty grid");
  if (!(lambda_minus > 0.0) || !(lambda_minus <= lambda_plus)) {
    throw ValidationError("lambda_range", "need 0 < lambda_minus <= lambda_plus");
  }
  config.validate();
  const EllipticityBounds ell =
      ellipticity_check(spec, default_sample_points(spec), default_directions(spec.m0()));
  if (lambda_minus > 2.0 * ell.min_eigenvalue * (1.0 + 1e-12) ||
      lambda_plus < 2.0 * ell.max_eigenvalue * (1.0 - 1e-12)) {
    throw ValidationError("lambda_range",
                          "comparison range must contain the sampled spectrum of 2a");
  }

  const SystemMatrix& system = spec.system;
  const BlockStructure& structure = system.structure();
  const double q = homogeneous_dimension(structure);
  const GaussianKernel lower(system, lambda_minus);
  const GaussianKernel upper(system, lambda_plus);

  BoundReport report;
  report.exact = spec.time_only_gaussian();
  report.lambda_minus = lambda_minus;
  report.lambda_plus = lambda_plus;
  report.points = y_grid;
  report.config = config;

  std::optional<GaussianKernel> exact;
  std::optional<SimulationResult> sim;
  if (report.exact) {
    exact.emplace(GaussianKernel::from_operator(spec));
    const Matrix ca = exact->transition(t, T).covariance->C();
    const Matrix c = controllability_gramian(system.B(), system.m0(), T - t);
    using Solver = Eigen::SelfAdjointEigenSolver<Matrix>;
    report.psd_lower_margin =
        Solver(ca - lambda_minus * c, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    report.psd_upper_margin =
        Solver(lambda_plus * c - ca, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    report.psd_checked = true;
    report.psd_ok = report.psd_lower_margin >= -1e-10 && report.psd_upper_margin >= -1e-10;
  } else {
    sim.emplace(simulate_paths(spec, t, x, T, config));
  }

  report.C_minus = std::numeric_limits<double>::infinity();
  report.C_minus_low = std::numeric_limits<double>::infinity();
  for (const Vector& y : y_grid) {
    double g = 0.0;
    double se = 0.0;
    bool zero = false;
    if (exact) {
      g = eval_kernel(*exact, t, x, T, y);
    } else {
      const DensityEstimate est = estimate_density(*sim, y, options.bandwidth, structure);
      g = est.value;
      se = est.std_error;
      zero = est.n_hits == 0;
    }
    const double gm = eval_kernel(lower, t, x, T, y);
    const double gp = eval_kernel(upper, t, x, T, y);
    report.gamma.push_back(g);
    report.std_error.push_back(se);
    report.gamma_minus.push_back(gm);
    report.gamma_plus.push_back(gp);
    report.ratio_minus.push_back(g / gm);
    report.ratio_plus.push_back(g / gp);
    report.zero_hits.push_back(zero);
    report.C_minus = std::min(report.C_minus, g / gm);
    report.C_plus = std::max(report.C_plus, g / gp);
    report.C_minus_low = std::min(report.C_minus_low, std::max(0.0, (g - 3.0 * se) / gm));
    report.C_plus_high = std::max(report.C_plus_high, (g + 3.0 * se) / gp);
  }

  double c_max = 0.0;
  report.diagonal_c = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < options.diagonal_horizons.size(); ++k) {
    const double horizon = options.diagonal_horizons[k];
    if (!(horizon > 0.0)) throw std::invalid_argument("verify_bounds: diagonal horizon must be positive");
    DiagonalEntry entry;
    entry.horizon = horizon;
    if (exact) {
      entry.gamma = eval_kernel(*exact, T - horizon, x, T, x);
    } else {
      SimConfig diag = config;
      diag.seed = SplitMix64::substream(config.seed, 1000 + k)();
      const SimulationResult run = simulate_paths(spec, T - horizon, x, T, diag);
      const DensityEstimate est = estimate_density(run, x, options.bandwidth, structure);
      entry.gamma = est.value;
      entry.std_error = est.std_error;
    }
    entry.c = entry.gamma * std::pow(horizon, 0.5 * q);
    report.diagonal_c = std::min(report.diagonal_c, entry.c);
    c_max = std::max(c_max, entry.c);
    report.diagonal.push_back(entry);
  }
  report.diagonal_spread = report.diagonal_c > 0.0 ? c_max / report.diagonal_c
                                                   : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace kolmo
