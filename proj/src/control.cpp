#include "kolmo/control.hpp"

#include <cmath>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

void ControlProblem::validate() const {
  if (!(T > t)) throw std::invalid_argument("control problem: need T > t");
  if (x.size() != system.d() || y.size() != system.d()) {
    throw std::invalid_argument("control problem: endpoint dimension does not match system");
  }
}

OptimalControl optimal_control(const ControlProblem& problem) {
  problem.validate();
  const Gramian c = gramian(problem.system, problem.horizon());
  const Vector z = problem.y - matrix_exponential(problem.system.B(), problem.horizon()) * problem.x;
  OptimalControl out{problem, c.solve(z), 0.0};
  out.cost = c.quadratic_form(z);
  return out;
}

double optimal_cost(const ControlProblem& problem) {
  problem.validate();
  const Vector z = problem.y - matrix_exponential(problem.system.B(), problem.horizon()) * problem.x;
  return gramian(problem.system, problem.horizon()).quadratic_form(z);
}

Vector control_value(const OptimalControl& ctrl, double s) {
  const auto& p = ctrl.problem;
  const Matrix e = matrix_exponential(p.system.B(), p.T - s);
  return e.leftCols(p.system.m0()).transpose() * ctrl.w;
}

double control_rate(const OptimalControl& ctrl, double s) {
  return control_value(ctrl, s).squaredNorm();
}

Vector trajectory(const OptimalControl& ctrl, double s) {
  const auto& p = ctrl.problem;
  if (!(s >= p.t && s <= p.T)) throw std::invalid_argument("trajectory: s outside [t, T]");
  const Matrix& b = p.system.B();
  const Matrix c = controllability_gramian(b, p.system.m0(), s - p.t);
  return matrix_exponential(b, s - p.t) * p.x +
         c * (matrix_exponential(b.transpose(), p.T - s) * ctrl.w);
}

Vector trajectory_quadrature(const OptimalControl& ctrl, double s, const SimpsonOptions& options) {
  const auto& p = ctrl.problem;
  if (!(s >= p.t && s <= p.T)) throw std::invalid_argument("trajectory: s outside [t, T]");
  const Matrix& b = p.system.B();
  const int m0 = p.system.m0();
  const Vector free = matrix_exponential(b, s - p.t) * p.x;
  if (s == p.t) return free;
  auto integrand = [&](double tau) -> Matrix {
    return matrix_exponential(b, s - tau).leftCols(m0) * control_value(ctrl, tau);
  };
  return free + adaptive_simpson(integrand, p.t, s, options).value.col(0);
}

double partial_cost(const OptimalControl& ctrl, double a, double b) {
  const auto& p = ctrl.problem;
  if (!(p.t <= a && a <= b && b <= p.T)) {
    throw std::invalid_argument("partial_cost: need t <= a <= b <= T");
  }
  const Matrix& bm = p.system.B();
  const int m0 = p.system.m0();
  const Matrix diff =
      controllability_gramian(bm, m0, p.T - a) - controllability_gramian(bm, m0, p.T - b);
  return std::max(0.0, ctrl.w.dot(diff * ctrl.w));
}

double discrete_least_norm_control(const ControlProblem& problem, int n_steps) {
  problem.validate();
  if (n_steps < 1) throw std::invalid_argument("discrete_least_norm_control: n_steps < 1");
  const SystemMatrix& system = problem.system;
  const int d = system.d();
  const int m0 = system.m0();
  const double h = problem.horizon() / n_steps;

  // exp(h [[B, σ], [0, 0]]) = [[e^{hB}, ∫₀ʰ e^{uB}σ du], [0, I]]
  Matrix aug = Matrix::Zero(d + m0, d + m0);
  aug.topLeftCorner(d, d) = system.B();
  aug.topRightCorner(d, m0) = system.sigma();
  const Matrix e = matrix_exponential(aug, h);
  const Matrix step = e.topLeftCorner(d, d);
  const Matrix input = e.topRightCorner(d, m0);

  // Column block k holds e^{hB(n−1−k)}G/√h so that the cost is |u|².
  Matrix reach(d, static_cast<Eigen::Index>(n_steps) * m0);
  Matrix power = input / std::sqrt(h);
  for (int k = n_steps - 1; k >= 0; --k) {
    reach.middleCols(static_cast<Eigen::Index>(k) * m0, m0) = power;
    power = step * power;
  }
  Vector target = problem.y;
  Vector state = problem.x;
  for (int k = 0; k < n_steps; ++k) state = step * state;
  target -= state;

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(reach);
  cod.setThreshold(1e-12);
  if (cod.rank() < d) throw NumericalError("discrete reachability map is rank deficient");
  const Vector u = cod.solve(target);
  return u.squaredNorm();
}

std::vector<double> default_kappa_grid(int count) {
  std::vector<double> grid;
  grid.reserve(count);
  for (int k = 1; k <= count; ++k) grid.push_back(static_cast<double>(k) / count);
  return grid;
}

KappaEstimate kappa_estimate(const SystemMatrix& system, const std::vector<double>& s_grid) {
  if (s_grid.empty()) throw std::invalid_argument("kappa_estimate: empty grid");
  const BlockStructure& blocks = system.structure();
  const int m0 = system.m0();
  double raw = 0.0;
  for (double s : s_grid) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("kappa_estimate: grid must lie in (0, 1]");
    const Matrix e = matrix_exponential(system.B(), s).leftCols(m0);
    for (int j = 0; j < blocks.blocks(); ++j) {
      const Matrix rows = e.middleRows(blocks.offset(j), blocks.size(j));
      const double norm = Eigen::JacobiSVD<Matrix>(rows).singularValues()(0);
      raw = std::max(raw, norm / std::pow(s, j));
    }
  }
  double weight = 0.0;
  for (int j = 0; j < blocks.blocks(); ++j) weight += 1.0 / (2 * j + 1);
  KappaEstimate out;
  out.raw = raw;
  out.per_block = 1.1 * raw;
  out.cone = out.per_block * std::sqrt(weight);
  return out;
}

KappaEstimate kappa_estimate(const SystemMatrix& system) {
  return kappa_estimate(system, default_kappa_grid());
}

void ConeSpec::validate() const {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("cone: beta must lie in (0, 1]");
  if (!(r > 0.0) || !(R > 0.0)) throw std::invalid_argument("cone: r and R must be positive");
}

bool cone_membership(const ConeSpec& cone, const SpaceTimePoint& p, const SystemMatrix& system) {
  cone.validate();
  const double dt = p.t - cone.base.t;
  if (!(dt > 0.0)) return false;
  const double lambda = std::sqrt(dt / cone.beta);
  if (lambda > cone.R) return false;
  const Vector offset = p.x - matrix_exponential(system.B(), dt) * cone.base.x;
  const Vector xi = dilation_diagonal(system.structure(), 1.0 / lambda).cwiseProduct(offset);
  return xi.norm() < cone.r;
}

bool cylinder_membership(const SpaceTimePoint& center, double rho, const SpaceTimePoint& p,
                         const SystemMatrix& system) {
  if (!(rho > 0.0)) throw std::invalid_argument("cylinder: rho must be positive");
  const SpaceTimePoint local = group_compose(group_inverse(center, system), p, system);
  const SpaceTimePoint unit = dilate(local, system.structure(), 1.0 / rho);
  return unit.t >= 0.0 && unit.t < 1.0 && unit.x.norm() < 1.0;
}

}  // namespace kolmo
