#include "kolmo/gramian.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

Gramian::Gramian(SystemMatrix system, double horizon, Matrix c)
    : system_(std::move(system)), horizon_(horizon), c_(0.5 * (c + c.transpose())) {
  if (c_.rows() != system_.d() || c_.cols() != system_.d()) {
    throw std::invalid_argument("Gramian: matrix size does not match system");
  }
  const Eigen::LLT<Matrix> llt(c_);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Gramian is not positive definite");
  }
  l_ = llt.matrixL();
  logdet_ = 0.0;
  for (Eigen::Index i = 0; i < l_.rows(); ++i) {
    if (!(l_(i, i) > 0.0)) throw NumericalError("Gramian is singular");
    logdet_ += 2.0 * std::log(l_(i, i));
  }
}

double Gramian::quadratic_form(const Vector& z) const {
  if (z.size() != c_.rows()) throw std::invalid_argument("quadratic_form: dimension mismatch");
  const Vector u = l_.triangularView<Eigen::Lower>().solve(z);
  return u.squaredNorm();
}

Vector Gramian::solve(const Vector& z) const {
  if (z.size() != c_.rows()) throw std::invalid_argument("Gramian::solve: dimension mismatch");
  const Vector u = l_.triangularView<Eigen::Lower>().solve(z);
  return l_.transpose().triangularView<Eigen::Upper>().solve(u);
}

Matrix controllability_gramian(const Matrix& b, int m0, double t) {
  const auto d = b.rows();
  if (t < 0.0) throw std::invalid_argument("controllability_gramian: t < 0");
  if (t == 0.0) return Matrix::Zero(d, d);
  Matrix m = Matrix::Zero(2 * d, 2 * d);
  m.topLeftCorner(d, d) = -b;
  m.block(0, d, m0, m0).setIdentity();
  m.bottomRightCorner(d, d) = b.transpose();
  const Matrix e = matrix_exponential(m, t);
  // e = [[e^{−tB}, e^{−tB} C(t)], [0, e^{tBᵀ}]]
  const Matrix c = e.bottomRightCorner(d, d).transpose() * e.topRightCorner(d, d);
  return 0.5 * (c + c.transpose());
}

Matrix controllability_gramian_quadrature(const Matrix& b, int m0, double t,
                                          const SimpsonOptions& options) {
  const auto d = b.rows();
  if (t == 0.0) return Matrix::Zero(d, d);
  auto integrand = [&b, m0](double s) -> Matrix {
    const Matrix e = matrix_exponential(b, s).leftCols(m0);
    return e * e.transpose();
  };
  return adaptive_simpson(integrand, 0.0, t, options).value;
}

Gramian gramian(const SystemMatrix& system, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gramian: t must be positive");
  return Gramian(system, t, controllability_gramian(system.B(), system.m0(), t));
}

Gramian gramian_weighted(const SystemMatrix& system, const std::function<double(double)>& lambda,
                         double t, double T, const SimpsonOptions& options) {
  const int m0 = system.m0();
  auto rate = [&lambda, m0](double s) -> Matrix {
    const double l = lambda(s);
    if (!(l > 0.0)) {
      throw std::invalid_argument("gramian_weighted: lambda is not positive at a node");
    }
    return l * Matrix::Identity(m0, m0);
  };
  return gramian_weighted(system, rate, t, T, options);
}

Gramian gramian_weighted(const SystemMatrix& system, const std::function<Matrix(double)>& rate,
                         double t, double T, const SimpsonOptions& options) {
  if (!(T > t)) throw std::invalid_argument("gramian_weighted: need T > t");
  const int m0 = system.m0();
  const Matrix& b = system.B();
  auto integrand = [&](double s) -> Matrix {
    const Matrix e = matrix_exponential(b, T - s).leftCols(m0);
    return e * rate(s) * e.transpose();
  };
  const QuadratureResult q = adaptive_simpson(integrand, t, T, options);
  if (!q.converged) throw NumericalError("gramian_weighted: quadrature did not converge");
  return Gramian(system, T - t, q.value);
}

Gramian gramian_homogeneous(const SystemMatrix& system, double t) {
  return gramian(homogeneous_part(system), t);
}

double quadratic_form(const Gramian& g, const Vector& z) { return g.quadratic_form(z); }

EquivalenceReport equivalence_constants(const SystemMatrix& system,
                                        const std::vector<double>& tau_grid,
                                        const std::vector<Vector>& directions) {
  if (tau_grid.empty()) throw std::invalid_argument("equivalence_constants: empty tau grid");
  if (directions.empty()) throw std::invalid_argument("equivalence_constants: no directions");
  EquivalenceReport out;
  out.tau_grid = tau_grid;
  out.direction_count = directions.size();
  out.k5 = std::numeric_limits<double>::infinity();
  out.k6 = 0.0;
  for (double tau : tau_grid) {
    if (!(tau > 0.0 && tau <= 1.0)) {
      throw std::invalid_argument("equivalence_constants: tau must lie in (0, 1]");
    }
    const Gramian c = gramian(system, tau);
    const Gramian c0 = gramian_homogeneous(system, tau);
    const double ratio = std::exp(c.logdet() - c0.logdet());
    out.det_ratio.push_back(ratio);
    out.det_slope = std::max(out.det_slope, std::abs(ratio - 1.0) / tau);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& z : directions) {
      const double r = c.quadratic_form(z) / c0.quadratic_form(z);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    out.k_min_per_tau.push_back(lo);
    out.k_max_per_tau.push_back(hi);
    out.k5 = std::min(out.k5, lo);
    out.k6 = std::max(out.k6, hi);
  }
  // Eigenvalues of C₀⁻¹(1) are reciprocals of those of C₀(1).
  const Gramian c01 = gramian_homogeneous(system, 1.0);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(c01.C(), Eigen::EigenvaluesOnly);
  out.k1 = 1.0 / eig.eigenvalues().maxCoeff();
  out.k2 = 1.0 / eig.eigenvalues().minCoeff();
  return out;
}

std::vector<Vector> sample_unit_directions(int d, int count, std::uint64_t seed) {
  std::vector<Vector> out;
  out.reserve(count);
  std::normal_distribution<double> normal;
  for (int k = 0; k < count; ++k) {
    SplitMix64 rng = SplitMix64::substream(seed, static_cast<std::uint64_t>(k));
    Vector v(d);
    do {
      for (int i = 0; i < d; ++i) v(i) = normal(rng);
    } while (v.norm() == 0.0);
    out.push_back(v.normalized());
    normal.reset();
  }
  return out;
}

}  // namespace kolmo
