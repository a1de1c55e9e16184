#pragma once

#include <variant>
#include <vector>

#include "kolmo/model.hpp"

namespace kolmo {

// Enumerated scalar profiles. Every coefficient of the operator is one of
// these profiles multiplying a constant matrix or vector.

struct ConstantProfile {
  double value = 1.0;
};

/// mean + amplitude · sin(2π · frequency · t + phase)
struct TimeSinusoid {
  double mean = 1.0;
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
};

/// mean + amplitude · sin(2π · frequency · x_coordinate + phase)
struct SpaceSinusoid {
  double mean = 1.0;
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
  int coordinate = 0;
};

/// Nearest-node interpolation of `values` on origin + k·step along one axis.
/// axis == -1 means time; otherwise a space coordinate.
struct TabulatedProfile {
  int axis = -1;
  double origin = 0.0;
  double step = 1.0;
  std::vector<double> values;
};

class ScalarProfile {
 public:
  using Form = std::variant<ConstantProfile, TimeSinusoid, SpaceSinusoid, TabulatedProfile>;

  ScalarProfile() : form_(ConstantProfile{0.0}) {}
  ScalarProfile(Form form);  // NOLINT(google-explicit-constructor)

  static ScalarProfile constant(double v) { return ScalarProfile(ConstantProfile{v}); }

  double value(double t, const Vector& x) const;
  /// ∂/∂x_k. Tabulated spatial profiles have no pointwise derivative and throw.
  double partial(int k, double t, const Vector& x) const;

  bool time_only() const;
  bool is_zero() const;
  /// True unless the profile is tabulated along a space coordinate.
  bool spatially_differentiable() const;
  /// Node positions of a tabulated profile along its axis (empty otherwise).
  std::vector<double> nodes() const;

  const Form& form() const { return form_; }

 private:
  Form form_;
};

/// a(t, x) = profile(t, x) · base, base symmetric m₀ × m₀.
struct DiffusionField {
  ScalarProfile profile = ScalarProfile::constant(1.0);
  Matrix base;

  Matrix value(double t, const Vector& x) const { return profile.value(t, x) * base; }
  /// (Σ_j ∂_j a_ij)_i over the first m₀ coordinates.
  Vector divergence(double t, const Vector& x) const;
};

/// v(t, x) = profile(t, x) · base, base an m₀-vector.
struct VectorField {
  ScalarProfile profile;
  Vector base;

  Vector value(double t, const Vector& x) const { return profile.value(t, x) * base; }
  /// Σ_i ∂_i v_i.
  double divergence(double t, const Vector& x) const;
  bool is_zero() const { return profile.is_zero() || base.cwiseAbs().maxCoeff() == 0.0; }
};

/// An operator div(A Du + a u) + ⟨b, Du⟩ + c u + ⟨Bx, Du⟩ + ∂_t u of the class.
struct OperatorSpec {
  SystemMatrix system;
  DiffusionField a;
  VectorField a_low;
  VectorField b_low;
  ScalarProfile c;
  double mu = 1.0;
  double M_bound = 1.0;

  int d() const { return system.d(); }
  int m0() const { return system.m0(); }

  Matrix diffusion(double t, const Vector& x) const { return a.value(t, x); }
  /// Drift on the first m₀ coordinates produced by writing the operator in
  /// non-divergence form: div a + a_low + b_low.
  Vector drift_correction(double t, const Vector& x) const;
  /// Zeroth-order term c + div a_low.
  double potential(double t, const Vector& x) const;

  bool lower_order_free() const;
  /// Diffusion depends on time only and there are no lower-order terms; the
  /// fundamental solution is then an explicit Gaussian.
  bool time_only_gaussian() const;
};

/// Constant-coefficient comparison operator with a = (λ/2) I and no
/// lower-order terms.
OperatorSpec principal_part(const OperatorSpec& spec, double lambda);

/// Operator (λ/2)Δ_{m₀} + ⟨Bx, D⟩ + ∂_t on a given system, μ = max(λ/2, 2/λ).
OperatorSpec constant_operator(const SystemMatrix& system, double lambda);

struct EllipticityBounds {
  double mu_low = 0.0;   ///< max over samples of 1 / ⟨aξ, ξ⟩
  double mu_high = 0.0;  ///< max over samples of ⟨aξ, ξ⟩
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;

  bool passes(double mu) const { return mu_low <= mu + 1e-12 && mu_high <= mu + 1e-12; }
};

/// Sampled ellipticity constants. Throws ValidationError ("nonsymmetric",
/// "non_finite", "ellipticity") when a sample is not symmetric positive
/// definite.
EllipticityBounds ellipticity_check(const OperatorSpec& spec,
                                    const std::vector<SpaceTimePoint>& samples,
                                    const std::vector<Vector>& directions);

/// Default 32 × 32 space-time lattice: t = k/32 on [0, 1), x = (i/32)·𝟙, plus
/// the nodes of tabulated profiles.
std::vector<SpaceTimePoint> default_sample_points(const OperatorSpec& spec, int count = 32);

/// 32 unit directions in ℝ^{m₀}: ±1 when m₀ = 1, a half circle when m₀ = 2,
/// otherwise coordinate axes plus seeded Gaussian directions.
std::vector<Vector> default_directions(int m0, int count = 32);

/// Largest sampled |aᵢ|, |bᵢ|, |c| (componentwise sup norm).
double lower_order_sup(const OperatorSpec& spec, const std::vector<SpaceTimePoint>& samples);

/// Runs ellipticity and boundedness checks against the declared μ and M.
/// Throws ValidationError ("ellipticity", "coefficient_bound").
EllipticityBounds validate_operator(const OperatorSpec& spec);

}  // namespace kolmo
