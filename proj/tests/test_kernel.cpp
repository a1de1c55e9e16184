#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kolmo/errors.hpp"
#include "kolmo/kernel.hpp"

using namespace kolmo;

namespace {

SystemMatrix heat() { return SystemMatrix(Matrix::Zero(1, 1), BlockStructure({1})); }
SystemMatrix langevin() { return SystemMatrix(Matrix{{0.0, 0.0}, {1.0, 0.0}}, BlockStructure({1, 1})); }
SystemMatrix drifted() { return SystemMatrix(Matrix{{1.0, 0.0}, {1.0, 0.0}}, BlockStructure({1, 1})); }
SystemMatrix system21() {
  return SystemMatrix(Matrix{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {1.0, 2.0, 0.0}}, BlockStructure({2, 1}));
}

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) { return Vector{{a, b}}; }

// Independent density: N(mean, λC) written out from scratch.
double gaussian_oracle(const Vector& z, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Vector r = z - mean;
  const double q = r.dot(llt.solve(r));
  const double d = static_cast<double>(z.size());
  return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * M_PI, d) * cov.determinant());
}

}  // namespace

TEST_CASE("kernel values") {
  const GaussianKernel h1(heat(), 1.0);
  const GaussianKernel h2(heat(), 2.0);
  const GaussianKernel lv(langevin(), 1.0);
  const double a = eval_kernel(h1, 0.0, v1(0.0), 1.0, v1(0.0));
  const double b = eval_kernel(lv, 0.0, v2(0, 0), 1.0, v2(0, 0));
  const double c = eval_kernel(h2, 0.0, v1(0.0), 1.0, v1(1.0));
  CHECK(a == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-13));
  CHECK(b == doctest::Approx(std::sqrt(12.0) / (2.0 * M_PI)).epsilon(1e-12));
  CHECK(c == doctest::Approx(std::exp(-0.25) / std::sqrt(4.0 * M_PI)).epsilon(1e-13));
  CHECK(a == doctest::Approx(0.398942).epsilon(1e-6));
  CHECK(b == doctest::Approx(0.551329).epsilon(1e-6));
  CHECK(c == doctest::Approx(0.219696).epsilon(1e-6));

  CHECK(std::abs(eval_log_kernel(h1, 0.0, v1(0.0), 1.0, v1(0.0)) - std::log(a)) < 1e-10);
  CHECK(std::abs(eval_log_kernel(lv, 0.0, v2(0, 0), 1.0, v2(0, 0)) - std::log(b)) < 1e-10);
  CHECK(std::abs(eval_log_kernel(h2, 0.0, v1(0.0), 1.0, v1(1.0)) - std::log(c)) < 1e-10);

  CHECK_THROWS_AS(eval_kernel(h1, 1.0, v1(0.0), 1.0, v1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(eval_kernel(h1, 1.0, v1(0.0), 0.5, v1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(GaussianKernel(heat(), 0.0), std::invalid_argument);
}

TEST_CASE("kernel agrees with a direct Gaussian density") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (const SystemMatrix& s : {langevin(), drifted(), system21()}) {
    for (double lambda : {0.5, 1.0, 3.0}) {
      const GaussianKernel k(s, lambda);
      for (int trial = 0; trial < 10; ++trial) {
        Vector x(s.d()), y(s.d());
        for (int i = 0; i < s.d(); ++i) {
          x(i) = n(rng);
          y(i) = n(rng);
        }
        const double t = 0.3 * trial;
        const double T = t + 0.1 + 0.2 * trial;
        const Matrix cov = lambda * controllability_gramian(s.B(), s.m0(), T - t);
        const Vector mean = matrix_exponential(s.B(), T - t) * x;
        CHECK(eval_kernel(k, t, x, T, y) == doctest::Approx(gaussian_oracle(y, mean, cov)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("log kernel in the tail") {
  const GaussianKernel h1(heat(), 1.0);
  const double log_norm = -0.5 * std::log(2.0 * M_PI);
  CHECK(eval_log_kernel(h1, 0.0, v1(0.0), 1.0, v1(0.0)) == doctest::Approx(log_norm).epsilon(1e-14));
  // Quadratic form 10⁴ and 10⁶.
  CHECK(eval_log_kernel(h1, 0.0, v1(0.0), 1.0, v1(100.0)) == doctest::Approx(-5000.0 + log_norm).epsilon(1e-14));
  const double deep = eval_log_kernel(h1, 0.0, v1(0.0), 1.0, v1(1000.0));
  CHECK(std::isfinite(deep));
  CHECK(deep == doctest::Approx(-5e5 + log_norm).epsilon(1e-14));
  CHECK(eval_kernel(h1, 0.0, v1(0.0), 1.0, v1(1000.0)) == 0.0);

  const GaussianKernel lv(langevin(), 1.0);
  const Vector x = v2(0.4, -0.3);
  const Vector on_flow = matrix_exponential(langevin().B(), 0.7) * x;
  const double expected = -std::log(2.0 * M_PI) - 0.5 * gramian(langevin(), 0.7).logdet();
  CHECK(eval_log_kernel(lv, 0.1, x, 0.8, on_flow) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Chapman-Kolmogorov") {
  const GaussianKernel h1(heat(), 1.0);
  CHECK(chapman_kolmogorov_residual(h1, 0.0, v1(0.2), 1.0, v1(-0.5), 0.5) <= 1e-6);
  const GaussianKernel lv(langevin(), 1.0);
  CHECK(chapman_kolmogorov_residual(lv, 0.0, v2(0, 0), 1.0, v2(0.3, 0.1), 0.5) <= 1e-5);
  CHECK(chapman_kolmogorov_residual(lv, 0.0, v2(0, 0), 1.0, v2(0.3, 0.1), 1e-3, {10.0, 48, 8}) <= 1e-4);
  CHECK(chapman_kolmogorov_residual(lv, 0.0, v2(0, 0), 1.0, v2(0.3, 0.1), 1.0 - 1e-3, {10.0, 48, 8}) <= 1e-4);
  const GaussianKernel dr(drifted(), 2.0);
  CHECK(chapman_kolmogorov_residual(dr, 0.0, v2(0.1, 0.2), 0.6, v2(0.4, 0.1), 0.25) <= 1e-5);
  const GaussianKernel k3(system21(), 1.0);
  CHECK(chapman_kolmogorov_residual(k3, 0.0, Vector::Zero(3), 1.0, Vector{{0.2, -0.1, 0.3}}, 0.5,
                                    {8.0, 16, 8}) <= 1e-5);

  const GaussianKernel wave(heat(), [](double s) { return Matrix::Constant(1, 1, 1.25 + 0.75 * std::sin(2.0 * M_PI * s)); });
  CHECK(chapman_kolmogorov_residual(wave, 0.0, v1(0.0), 1.0, v1(0.7), 0.3) <= 1e-6);

  CHECK_THROWS_AS(chapman_kolmogorov_residual(lv, 0.0, v2(0, 0), 1.0, v2(0, 0), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(chapman_kolmogorov_residual(lv, 0.0, v2(0, 0), 1.0, v2(0, 0), -0.1), std::invalid_argument);
}

TEST_CASE("normalization") {
  for (const SystemMatrix& s : {heat(), langevin(), drifted()}) {
    for (double lambda : {0.5, 1.0, 2.0}) {
      const GaussianKernel k(s, lambda);
      CHECK(std::abs(kernel_mass(k, 0.0, Vector::Constant(s.d(), 0.3), 0.8) - 1.0) <= 1e-7);
      CHECK(std::abs(kernel_mass(k, 0.2, Vector::Constant(s.d(), -1.0), 0.21) - 1.0) <= 1e-7);
    }
  }
}

TEST_CASE("PDE residual") {
  const GaussianKernel h1(heat(), 1.0);
  CHECK(pde_residual(h1, 0.0, v1(0.3), 1.0, v1(-0.2), {1e-3, std::nullopt}) <= 1e-5);

  const GaussianKernel lv(langevin(), 1.0);
  const std::vector<double> steps{1e-2, 5e-3, 2.5e-3};
  for (double order : pde_convergence_orders(lv, 0.0, v2(0.2, -0.1), 1.0, v2(0, 0), steps)) {
    CHECK(order >= 1.7);
    CHECK(order <= 2.3);
  }
  const GaussianKernel dr(drifted(), 0.5);
  for (double order : pde_convergence_orders(dr, 0.0, v2(0.2, -0.1), 1.0, v2(0.5, 0.3), steps)) {
    CHECK(order >= 1.7);
    CHECK(order <= 2.3);
  }
  CHECK(pde_residual(lv, 0.0, v2(0.2, -0.1), 1.0, v2(0, 0)) <= 1e-5);

  // Kernel built on 2B, operator on B.
  const SystemMatrix doubled(2.0 * langevin().B(), langevin().structure());
  const GaussianKernel wrong(doubled, 1.0);
  PdeResidualOptions opts{1e-3, langevin().B()};
  const double bad = pde_residual(wrong, 0.0, v2(0.5, -0.2), 1.0, v2(0.1, 0.1), opts);
  CHECK(bad > 1e-2);
  opts.h = 5e-4;
  CHECK(pde_residual(wrong, 0.0, v2(0.5, -0.2), 1.0, v2(0.1, 0.1), opts) == doctest::Approx(bad).epsilon(1e-3));

  CHECK_THROWS_AS(pde_residual(h1, 0.0, v1(0.0), 1e-3, v1(0.0), {0.1, std::nullopt}), std::invalid_argument);
}

TEST_CASE("Cauchy problem") {
  const GaussianKernel h1(heat(), 1.0);
  const GaussianKernel lv(langevin(), 1.0);
  const Payoff one = PolynomialPayoff{{{1.0, {0}}}, 1e6};
  CHECK(cauchy_solution(h1, one, 0.0, v1(0.4), 1.0) == doctest::Approx(1.0).epsilon(1e-8));
  const Payoff one2 = PolynomialPayoff{{{1.0, {0, 0}}}, 1e6};
  CHECK(cauchy_solution(lv, one2, 0.0, v2(0.4, 1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-8));

  const Payoff identity = PolynomialPayoff{{{1.0, {1}}}, 1e6};
  for (double x : {-1.0, 0.0, 0.7}) {
    CHECK(std::abs(cauchy_solution(h1, identity, 0.2, v1(x), 1.0) - x) <= 1e-8);
  }
  const Payoff second = PolynomialPayoff{{{1.0, {0, 1}}}, 1e6};
  for (double T : {0.5, 1.0}) {
    const double v = 0.6, x = -0.2;
    CHECK(std::abs(cauchy_solution(lv, second, 0.0, v2(v, x), T) - (x + v * T)) <= 1e-8);
  }

  // Terminal condition is recovered as t → T⁻.
  const Payoff bump = GaussianBump{v2(0.3, 0.0), 0.5, 2.0};
  const Vector x0 = v2(0.1, 0.2);
  const double u = cauchy_solution(lv, bump, 1.0 - 1e-4, x0, 1.0);
  CHECK(std::abs(u - evaluate_payoff(bump, x0)) < 1e-3);
  const Payoff ball = SmoothedIndicator{v1(0.0), 1.0, 0.05};
  CHECK(std::abs(cauchy_solution(h1, ball, 1.0 - 1e-4, v1(0.2), 1.0) - evaluate_payoff(ball, v1(0.2))) < 1e-3);
  // Smoothed indicator against the exact Gaussian ball probability.
  const double p = std::erf(1.0 / std::sqrt(2.0));
  CHECK(std::abs(cauchy_solution(h1, ball, 0.0, v1(0.0), 1.0, {8.0, 128, 8}) - p) < 2e-3);
}

TEST_CASE("bound envelope") {
  const BoundEnvelope same{1.3, 1.3, 1.0, 1.0};
  const GaussianKernel k(langevin(), 1.3);
  const auto [lo, hi] = bound_envelope_eval(same, langevin(), 0.0, v2(0.1, 0), 1.0, v2(0.2, 0.3));
  const double g = eval_kernel(k, 0.0, v2(0.1, 0), 1.0, v2(0.2, 0.3));
  CHECK(lo == doctest::Approx(g).epsilon(1e-14));
  CHECK(hi == doctest::Approx(g).epsilon(1e-14));

  const BoundEnvelope wide{0.5, 2.0, 1.0, 1.0};
  const auto [peak_lo, peak_hi] = bound_envelope_eval(wide, heat(), 0.0, v1(0.0), 1.0, v1(0.0));
  CHECK(peak_lo == doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-13));
  CHECK(peak_hi == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)).epsilon(1e-13));
  CHECK(peak_lo == doctest::Approx(0.564190).epsilon(1e-6));
  CHECK(peak_hi == doctest::Approx(0.282095).epsilon(1e-6));
  CHECK(peak_lo > peak_hi);
  const auto [tail_lo, tail_hi] = bound_envelope_eval(wide, heat(), 0.0, v1(0.0), 1.0, v1(4.0));
  CHECK(tail_hi > tail_lo);

  CHECK_THROWS_AS((BoundEnvelope{2.0, 1.0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BoundEnvelope{1.0, 1.0, 0.0, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("bound forms") {
  CHECK(aronson_upper_form(1.0, heat(), 0.0, v1(0.0), 1.0, v1(0.0)) == doctest::Approx(1.0));
  CHECK(aronson_upper_form(2.0, langevin(), 0.0, v2(0.3, 0.1), 0.25, matrix_exponential(langevin().B(), 0.25) * v2(0.3, 0.1)) ==
        doctest::Approx(2.0 * std::pow(0.25, -2.0)).epsilon(1e-12));
  CHECK(aronson_upper_form(3.0, langevin(), 0.0, v2(0, 0), 1.0, v2(1, 1)) ==
        doctest::Approx(3.0 * std::exp(-2.0 / 3.0)).epsilon(1e-13));

  CHECK(lower_bound_form(0.5, langevin(), 0.0, v2(0.3, 0.1), 0.5, matrix_exponential(langevin().B(), 0.5) * v2(0.3, 0.1)) ==
        doctest::Approx(0.5 * std::pow(0.5, -2.0)).epsilon(1e-12));
  CHECK(lower_bound_form(1.0, langevin(), 0.0, v2(0, 0), 1.0, v2(1, 0)) == doctest::Approx(std::exp(-4.0)).epsilon(1e-11));
  CHECK(lower_bound_form(1.0, heat(), 0.0, v1(0.0), 1.0, v1(1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));

  CHECK(covariance_upper_form(1.0, langevin(), 0.0, v2(0, 0), 1.0, v2(0, 0)) == doctest::Approx(std::sqrt(12.0)).epsilon(1e-12));
  // B = 0, d = 1: both forms are c · s^{−1/2} exp(−y²/(c s)).
  for (double s : {0.1, 0.5, 1.0}) {
    CHECK(covariance_upper_form(2.0, heat(), 0.0, v1(0.0), s, v1(0.3)) ==
          doctest::Approx(aronson_upper_form(2.0, heat(), 0.0, v1(0.0), s, v1(0.3))).epsilon(1e-12));
  }
  CHECK(covariance_upper_form(1.0, langevin(), 0.0, v2(0, 0), 1.0, v2(0.1, 0)) < std::sqrt(12.0));

  CHECK_THROWS_AS(aronson_upper_form(1.0, heat(), 0.0, v1(0.0), 1.5, v1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(lower_bound_form(1.0, heat(), 0.0, v1(0.0), 0.0, v1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(covariance_upper_form(1.0, heat(), 0.0, v1(0.0), 2.0, v1(0.0)), std::invalid_argument);
}

TEST_CASE("translation invariance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  for (const SystemMatrix& s : {langevin(), drifted(), system21()}) {
    const GaussianKernel k(s, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      SpaceTimePoint zeta{n(rng), Vector(s.d())}, z{0.0, Vector(s.d())}, w{0.6, Vector(s.d())};
      for (int i = 0; i < s.d(); ++i) {
        zeta.x(i) = n(rng);
        z.x(i) = 0.5 * n(rng);
        w.x(i) = 0.5 * n(rng);
      }
      const SpaceTimePoint zz = group_compose(zeta, z, s);
      const SpaceTimePoint ww = group_compose(zeta, w, s);
      const double base = eval_log_kernel(k, z.t, z.x, w.t, w.x);
      const double moved = eval_log_kernel(k, zz.t, zz.x, ww.t, ww.x);
      CHECK(std::abs(std::exp(moved - base) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("homogeneity") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n;
  for (const SystemMatrix& s : {langevin(), system21()}) {
    const GaussianKernel k(s, 1.5);
    const double q = homogeneous_dimension(s.structure());
    for (double r : {0.1, 0.5, 2.0}) {
      SpaceTimePoint z{0.0, Vector(s.d())}, w{0.8, Vector(s.d())};
      for (int i = 0; i < s.d(); ++i) {
        z.x(i) = n(rng);
        w.x(i) = n(rng);
      }
      const SpaceTimePoint rz = dilate(z, s.structure(), r);
      const SpaceTimePoint rw = dilate(w, s.structure(), r);
      const double lhs = eval_log_kernel(k, rz.t, rz.x, rw.t, rw.x);
      const double rhs = -q * std::log(r) + eval_log_kernel(k, z.t, z.x, w.t, w.x);
      CHECK(std::abs(std::exp(lhs - rhs) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("fitted constants sandwich the kernel") {
  const GaussianKernel lv(langevin(), 1.0);
  std::vector<KernelArgs> fit;
  for (double s : {0.125, 0.25, 0.5, 1.0}) {
    for (int i = -3; i <= 3; ++i) {
      for (int j = -3; j <= 3; ++j) {
        const Vector off = dilation_diagonal(langevin().structure(), std::sqrt(s)).cwiseProduct(v2(i, j));
        fit.push_back({0.0, v2(0.2, -0.1), s, matrix_exponential(langevin().B(), s) * v2(0.2, -0.1) + off});
      }
    }
  }
  const double c_a = fit_aronson_constant(lv, fit);
  const double c_d = fit_lower_constant(lv, fit);
  CHECK(c_a > 0.0);
  CHECK(c_d > 0.0);
  CHECK(c_d <= c_a);
  for (const auto& p : fit) {
    const double g = eval_kernel(lv, p.t, p.x, p.T, p.y);
    CHECK(lower_bound_form(c_d, langevin(), p.t, p.x, p.T, p.y) <= g * (1.0 + 1e-9));
    CHECK(aronson_upper_form(c_a, langevin(), p.t, p.x, p.T, p.y) >= g * (1.0 - 1e-9));
  }
  // The fit is tight: some point is nearly active for each constant.
  double lo_gap = 1e300, hi_gap = 1e300;
  for (const auto& p : fit) {
    const double g = eval_kernel(lv, p.t, p.x, p.T, p.y);
    lo_gap = std::min(lo_gap, std::abs(lower_bound_form(c_d, langevin(), p.t, p.x, p.T, p.y) / g - 1.0));
    hi_gap = std::min(hi_gap, std::abs(aronson_upper_form(c_a, langevin(), p.t, p.x, p.T, p.y) / g - 1.0));
  }
  CHECK(lo_gap < 1e-6);
  CHECK(hi_gap < 1e-6);
}

TEST_CASE("weighted kernel from an operator") {
  OperatorSpec spec = constant_operator(heat(), 1.0);
  spec.a.profile = ScalarProfile(TimeSinusoid{1.25, 0.75, 1.0, 0.0});
  spec.a.base = Matrix::Constant(1, 1, 0.5);
  spec.mu = 4.0;
  const GaussianKernel k = GaussianKernel::from_operator(spec);
  CHECK_FALSE(k.constant_rate());
  // Variance ∫₀¹ (1.25 + 0.75 sin 2πs) ds = 1.25.
  CHECK(eval_kernel(k, 0.0, v1(0.0), 1.0, v1(0.5)) ==
        doctest::Approx(std::exp(-0.125 / 1.25) / std::sqrt(2.0 * M_PI * 1.25)).epsilon(1e-9));
  for (double order : pde_convergence_orders(k, 0.1, v1(0.3), 0.9, v1(-0.2), {1e-2, 5e-3, 2.5e-3})) {
    CHECK(order >= 1.7);
    CHECK(order <= 2.3);
  }
  const GaussianKernel c = GaussianKernel::from_operator(constant_operator(langevin(), 2.0));
  CHECK(c.constant_rate());
  CHECK(c.lambda() == doctest::Approx(2.0));
}
