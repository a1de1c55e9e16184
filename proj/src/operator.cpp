#include "kolmo/operator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double tabulated_value(const TabulatedProfile& p, double position) {
  if (p.values.empty()) throw std::invalid_argument("tabulated profile has no values");
  const double k = std::round((position - p.origin) / p.step);
  const auto last = static_cast<double>(p.values.size() - 1);
  return p.values[static_cast<std::size_t>(std::clamp(k, 0.0, last))];
}

}  // namespace

ScalarProfile::ScalarProfile(Form form) : form_(std::move(form)) {
  if (const auto* s = std::get_if<SpaceSinusoid>(&form_); s && s->coordinate < 0) {
    throw std::invalid_argument("space sinusoid coordinate must be non-negative");
  }
  if (const auto* tab = std::get_if<TabulatedProfile>(&form_)) {
    if (tab->values.empty() || !(tab->step > 0.0)) {
      throw std::invalid_argument("tabulated profile needs values and a positive step");
    }
  }
}

double ScalarProfile::value(double t, const Vector& x) const {
  return std::visit(
      Overloaded{
          [](const ConstantProfile& p) { return p.value; },
          [t](const TimeSinusoid& p) {
            return p.mean + p.amplitude * std::sin(kTwoPi * p.frequency * t + p.phase);
          },
          [&x](const SpaceSinusoid& p) {
            return p.mean + p.amplitude * std::sin(kTwoPi * p.frequency * x(p.coordinate) + p.phase);
          },
          [t, &x](const TabulatedProfile& p) {
            return tabulated_value(p, p.axis < 0 ? t : x(p.axis));
          },
      },
      form_);
}

double ScalarProfile::partial(int k, double /*t*/, const Vector& x) const {
  return std::visit(
      Overloaded{
          [](const ConstantProfile&) { return 0.0; },
          [](const TimeSinusoid&) { return 0.0; },
          [k, &x](const SpaceSinusoid& p) {
            if (p.coordinate != k) return 0.0;
            return p.amplitude * kTwoPi * p.frequency *
                   std::cos(kTwoPi * p.frequency * x(p.coordinate) + p.phase);
          },
          [k](const TabulatedProfile& p) -> double {
            if (p.axis == k) {
              throw NumericalError("tabulated spatial profile has no pointwise derivative");
            }
            return 0.0;
          },
      },
      form_);
}

bool ScalarProfile::time_only() const {
  return std::visit(Overloaded{
                        [](const ConstantProfile&) { return true; },
                        [](const TimeSinusoid&) { return true; },
                        [](const SpaceSinusoid& p) { return p.amplitude == 0.0; },
                        [](const TabulatedProfile& p) { return p.axis < 0; },
                    },
                    form_);
}

bool ScalarProfile::is_zero() const {
  return std::visit(Overloaded{
                        [](const ConstantProfile& p) { return p.value == 0.0; },
                        [](const TimeSinusoid& p) { return p.mean == 0.0 && p.amplitude == 0.0; },
                        [](const SpaceSinusoid& p) { return p.mean == 0.0 && p.amplitude == 0.0; },
                        [](const TabulatedProfile& p) {
                          return std::all_of(p.values.begin(), p.values.end(),
                                             [](double v) { return v == 0.0; });
                        },
                    },
                    form_);
}

bool ScalarProfile::spatially_differentiable() const {
  const auto* tab = std::get_if<TabulatedProfile>(&form_);
  return tab == nullptr || tab->axis < 0;
}

std::vector<double> ScalarProfile::nodes() const {
  std::vector<double> out;
  if (const auto* tab = std::get_if<TabulatedProfile>(&form_)) {
    for (std::size_t k = 0; k < tab->values.size(); ++k) out.push_back(tab->origin + k * tab->step);
  }
  return out;
}

Vector DiffusionField::divergence(double t, const Vector& x) const {
  const auto m0 = base.rows();
  Vector div = Vector::Zero(m0);
  for (Eigen::Index j = 0; j < m0; ++j) {
    const double dj = profile.partial(static_cast<int>(j), t, x);
    if (dj != 0.0) div += dj * base.col(j);
  }
  return div;
}

double VectorField::divergence(double t, const Vector& x) const {
  double div = 0.0;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    if (base(i) != 0.0) div += profile.partial(static_cast<int>(i), t, x) * base(i);
  }
  return div;
}

Vector OperatorSpec::drift_correction(double t, const Vector& x) const {
  Vector drift = a.divergence(t, x);
  if (!a_low.is_zero()) drift += a_low.value(t, x);
  if (!b_low.is_zero()) drift += b_low.value(t, x);
  return drift;
}

double OperatorSpec::potential(double t, const Vector& x) const {
  double v = c.value(t, x);
  if (!a_low.is_zero()) v += a_low.divergence(t, x);
  return v;
}

bool OperatorSpec::lower_order_free() const {
  return a_low.is_zero() && b_low.is_zero() && c.is_zero();
}

bool OperatorSpec::time_only_gaussian() const {
  return a.profile.time_only() && lower_order_free();
}

OperatorSpec constant_operator(const SystemMatrix& system, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("principal_part: lambda must be positive");
  const int m0 = system.m0();
  return OperatorSpec{
      system,
      DiffusionField{ScalarProfile::constant(1.0), 0.5 * lambda * Matrix::Identity(m0, m0)},
      VectorField{ScalarProfile::constant(0.0), Vector::Zero(m0)},
      VectorField{ScalarProfile::constant(0.0), Vector::Zero(m0)},
      ScalarProfile::constant(0.0),
      std::max(0.5 * lambda, 2.0 / lambda),
      1.0,
  };
}

OperatorSpec principal_part(const OperatorSpec& spec, double lambda) {
  OperatorSpec out = constant_operator(spec.system, lambda);
  out.M_bound = spec.M_bound;
  return out;
}

EllipticityBounds ellipticity_check(const OperatorSpec& spec,
                                    const std::vector<SpaceTimePoint>& samples,
                                    const std::vector<Vector>& directions) {
  if (samples.empty()) throw std::invalid_argument("ellipticity_check: no sample points");
  if (directions.empty()) throw std::invalid_argument("ellipticity_check: no directions");
  EllipticityBounds out;
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  out.max_eigenvalue = -std::numeric_limits<double>::infinity();
  for (const auto& z : samples) {
    const Matrix a = spec.diffusion(z.t, z.x);
    if (!a.allFinite()) {
      throw ValidationError("non_finite", "diffusion coefficient is not finite at a sample");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ValidationError("nonsymmetric", "diffusion coefficient is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    if (!(lo > 0.0)) {
      std::ostringstream msg;
      msg << "diffusion coefficient has eigenvalue " << lo << " at t=" << z.t;
      throw ValidationError("ellipticity", msg.str());
    }
    out.min_eigenvalue = std::min(out.min_eigenvalue, lo);
    out.max_eigenvalue = std::max(out.max_eigenvalue, eig.eigenvalues().maxCoeff());
    for (const auto& xi : directions) {
      const double q = xi.dot(a * xi) / xi.squaredNorm();
      out.mu_low = std::max(out.mu_low, 1.0 / q);
      out.mu_high = std::max(out.mu_high, q);
    }
  }
  return out;
}

std::vector<SpaceTimePoint> default_sample_points(const OperatorSpec& spec, int count) {
  const int d = spec.d();
  std::vector<double> times, offsets;
  for (int k = 0; k < count; ++k) {
    times.push_back(static_cast<double>(k) / count);
    offsets.push_back(static_cast<double>(k) / count);
  }
  for (const ScalarProfile* p : {&spec.a.profile, &spec.a_low.profile, &spec.b_low.profile, &spec.c}) {
    const auto* tab = std::get_if<TabulatedProfile>(&p->form());
    if (tab == nullptr) continue;
    const auto nodes = p->nodes();
    (tab->axis < 0 ? times : offsets).insert((tab->axis < 0 ? times : offsets).end(),
                                             nodes.begin(), nodes.end());
  }
  std::vector<SpaceTimePoint> out;
  out.reserve(times.size() * offsets.size());
  for (double t : times) {
    for (double s : offsets) out.push_back({t, Vector::Constant(d, s)});
  }
  return out;
}

std::vector<Vector> default_directions(int m0, int count) {
  std::vector<Vector> out;
  if (m0 == 1) {
    out.push_back(Vector::Ones(1));
    return out;
  }
  if (m0 == 2) {
    for (int k = 0; k < count; ++k) {
      const double angle = std::numbers::pi * k / count;
      Vector v(2);
      v << std::cos(angle), std::sin(angle);
      out.push_back(v);
    }
    return out;
  }
  for (int i = 0; i < m0; ++i) out.push_back(Vector::Unit(m0, i));
  SplitMix64 rng(0x5eed);
  std::normal_distribution<double> normal;
  while (static_cast<int>(out.size()) < std::max(count, m0)) {
    Vector v(m0);
    for (int i = 0; i < m0; ++i) v(i) = normal(rng);
    out.push_back(v.normalized());
  }
  return out;
}

double lower_order_sup(const OperatorSpec& spec, const std::vector<SpaceTimePoint>& samples) {
  double sup = 0.0;
  for (const auto& z : samples) {
    if (!spec.a_low.is_zero()) sup = std::max(sup, spec.a_low.value(z.t, z.x).cwiseAbs().maxCoeff());
    if (!spec.b_low.is_zero()) sup = std::max(sup, spec.b_low.value(z.t, z.x).cwiseAbs().maxCoeff());
    sup = std::max(sup, std::abs(spec.c.value(z.t, z.x)));
  }
  return sup;
}

EllipticityBounds validate_operator(const OperatorSpec& spec) {
  const int m0 = spec.m0();
  if (spec.a.base.rows() != m0 || spec.a.base.cols() != m0) {
    throw ValidationError("dimension_mismatch", "diffusion matrix must be m0 x m0");
  }
  if (spec.a_low.base.size() != m0 || spec.b_low.base.size() != m0) {
    throw ValidationError("dimension_mismatch", "lower-order vectors must have length m0");
  }
  for (const ScalarProfile* p : {&spec.a.profile, &spec.a_low.profile, &spec.b_low.profile, &spec.c}) {
    if (const auto* s = std::get_if<SpaceSinusoid>(&p->form()); s && s->coordinate >= spec.d()) {
      throw ValidationError("dimension_mismatch", "space profile coordinate out of range");
    }
    if (const auto* tab = std::get_if<TabulatedProfile>(&p->form()); tab && tab->axis >= spec.d()) {
      throw ValidationError("dimension_mismatch", "tabulated profile axis out of range");
    }
  }
  if (!(spec.mu > 0.0) || !(spec.M_bound > 0.0)) {
    throw ValidationError("constants", "mu and M must be positive");
  }
  const auto samples = default_sample_points(spec);
  const EllipticityBounds bounds = ellipticity_check(spec, samples, default_directions(m0));
  if (!bounds.passes(spec.mu)) {
    std::ostringstream msg;
    msg << "sampled ellipticity constants (" << bounds.mu_low << ", " << bounds.mu_high
        << ") exceed declared mu=" << spec.mu;
    throw ValidationError("ellipticity", msg.str());
  }
  const double sup = lower_order_sup(spec, samples);
  if (sup > spec.M_bound + 1e-12) {
    std::ostringstream msg;
    msg << "lower-order coefficient sup " << sup << " exceeds declared M=" << spec.M_bound;
    throw ValidationError("coefficient_bound", msg.str());
  }
  return bounds;
}

}  // namespace kolmo
