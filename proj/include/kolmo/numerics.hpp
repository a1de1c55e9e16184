#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace kolmo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// e^{tA} by scaling and squaring with diagonal Padé approximants of degree
/// 3, 5, 7, 9 or 13 (Higham 2005). The degree and the number of squarings are
/// chosen from the 1-norm of tA.
Matrix matrix_exponential(const Matrix& a, double t = 1.0);

struct SimpsonOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_depth = 40;
  int initial_panels = 8;
};

struct QuadratureResult {
  Matrix value;
  long evaluations = 0;
  bool converged = true;
};

/// Adaptive Simpson quadrature of a matrix-valued integrand. Each entry must
/// meet max(abs_tol, rel_tol * ∫|f_ij|) against the Richardson error estimate.
QuadratureResult adaptive_simpson(const std::function<Matrix(double)>& f,
                                  double a, double b,
                                  const SimpsonOptions& options = {});

double adaptive_simpson_scalar(const std::function<double(double)>& f,
                               double a, double b,
                               const SimpsonOptions& options = {});

/// Gauss–Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int order);

/// Composite tensor-product Gauss–Legendre rule on an axis-aligned box.
struct BoxQuadrature {
  int panels = 24;
  int order = 8;
};

double integrate_box(const std::function<double(const Vector&)>& f,
                     const Vector& lower, const Vector& upper,
                     const BoxQuadrature& rule);

/// SplitMix64. Used both as a seed mixer and as the per-path generator; it
/// satisfies UniformRandomBitGenerator so std distributions accept it.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  /// Independent stream for `index` under `seed`.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

 private:
  std::uint64_t state_;
};

bool all_finite(const Matrix& m);

}  // namespace kolmo
