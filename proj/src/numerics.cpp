#include "kolmo/numerics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

namespace {

// Padé numerator/denominator split: r(A) = (V - U)^{-1} (V + U).
template <std::size_t N>
void pade_low(const Matrix& a, const std::array<double, N>& b, Matrix& u,
              Matrix& v) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix power = id;
  Matrix odd = b[1] * id;
  Matrix even = b[0] * id;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < N) odd += b[k + 1] * power;
  }
  u = a * odd;
  v = even;
}

void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix tmp = b[13] * a6 + b[11] * a4 + b[9] * a2;
  u = a * (a6 * tmp + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  tmp = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * tmp + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix matrix_exponential(const Matrix& a_in, double t) {
  if (a_in.rows() != a_in.cols()) {
    throw std::invalid_argument("matrix_exponential: matrix is not square");
  }
  if (!std::isfinite(t) || !a_in.allFinite()) {
    throw std::invalid_argument("matrix_exponential: non-finite input");
  }
  const auto n = a_in.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix a = t * a_in;
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm == 0.0) return Matrix::Identity(n, n);

  Matrix u, v;
  int squarings = 0;
  if (norm <= 1.495585217958292e-2) {
    pade_low(a, std::array<double, 4>{120.0, 60.0, 12.0, 1.0}, u, v);
  } else if (norm <= 2.539398330063230e-1) {
    pade_low(a,
             std::array<double, 6>{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0},
             u, v);
  } else if (norm <= 9.504178996162932e-1) {
    pade_low(a,
             std::array<double, 8>{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                   25200.0, 1512.0, 56.0, 1.0},
             u, v);
  } else if (norm <= 2.097847961257068) {
    pade_low(a,
             std::array<double, 10>{17643225600.0, 8821612800.0, 2075673600.0,
                                    302702400.0, 30270240.0, 2162160.0,
                                    110880.0, 3960.0, 90.0, 1.0},
             u, v);
  } else {
    constexpr double theta13 = 5.371920351148152;
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
    pade13(a / std::ldexp(1.0, squarings), u, v);
  }
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

namespace {

struct SimpsonState {
  const std::function<Matrix(double)>& f;
  Matrix tol;  // per-entry tolerance on the whole interval
  int max_depth;
  long evaluations = 0;
  bool converged = true;

  Matrix eval(double x) {
    ++evaluations;
    Matrix v = f(x);
    if (!v.allFinite()) {
      throw NumericalError("adaptive_simpson: integrand is not finite");
    }
    return v;
  }

  Matrix recurse(double a, double b, const Matrix& fa, const Matrix& fm,
                 const Matrix& fb, const Matrix& whole, double scale,
                 int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const Matrix flm = eval(lm);
    const Matrix frm = eval(rm);
    const double h = b - a;
    const Matrix left = (h / 12.0) * (fa + 4.0 * flm + fm);
    const Matrix right = (h / 12.0) * (fm + 4.0 * frm + fb);
    const Matrix delta = left + right - whole;
    const bool ok = ((delta.cwiseAbs().array()) <= 15.0 * scale * tol.array()).all();
    if (ok) return left + right + delta / 15.0;
    if (depth >= max_depth) {
      converged = false;
      return left + right + delta / 15.0;
    }
    return recurse(a, m, fa, flm, fm, left, 0.5 * scale, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * scale, depth + 1);
  }
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<Matrix(double)>& f,
                                  double a, double b,
                                  const SimpsonOptions& options) {
  if (!(b > a)) throw std::invalid_argument("adaptive_simpson: need b > a");
  const int panels = std::max(1, options.initial_panels);
  const double width = (b - a) / panels;

  // Magnitude reference from a coarse composite rule on |f|.
  std::vector<Matrix> samples;
  samples.reserve(2 * panels + 1);
  SimpsonState state{f, Matrix(), options.max_depth};
  for (int k = 0; k <= 2 * panels; ++k) {
    samples.push_back(state.eval(a + 0.5 * width * k));
  }
  Matrix magnitude = Matrix::Zero(samples[0].rows(), samples[0].cols());
  for (int p = 0; p < panels; ++p) {
    magnitude += (width / 6.0) *
                 (samples[2 * p].cwiseAbs() + 4.0 * samples[2 * p + 1].cwiseAbs() +
                  samples[2 * p + 2].cwiseAbs());
  }
  state.tol = (options.rel_tol * magnitude.array())
                  .max(options.abs_tol)
                  .matrix();

  Matrix total = Matrix::Zero(magnitude.rows(), magnitude.cols());
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const Matrix whole = (width / 6.0) * (samples[2 * p] + 4.0 * samples[2 * p + 1] +
                                          samples[2 * p + 2]);
    total += state.recurse(lo, lo + width, samples[2 * p], samples[2 * p + 1],
                           samples[2 * p + 2], whole, 1.0 / panels, 0);
  }
  return {total, state.evaluations, state.converged};
}

double adaptive_simpson_scalar(const std::function<double(double)>& f, double a,
                               double b, const SimpsonOptions& options) {
  auto wrapped = [&f](double x) {
    Matrix m(1, 1);
    m(0, 0) = f(x);
    return m;
  };
  return adaptive_simpson(wrapped, a, b, options).value(0, 0);
}

GaussLegendre gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order < 1");
  GaussLegendre rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

double integrate_box(const std::function<double(const Vector&)>& f,
                     const Vector& lower, const Vector& upper,
                     const BoxQuadrature& rule) {
  const auto dim = lower.size();
  if (upper.size() != dim) throw std::invalid_argument("integrate_box: bounds differ");
  const GaussLegendre gl = gauss_legendre(rule.order);
  const int per_axis = rule.panels * rule.order;

  // 1D composite nodes/weights per axis.
  std::vector<std::vector<double>> nodes(dim), weights(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double width = (upper(k) - lower(k)) / rule.panels;
    for (int p = 0; p < rule.panels; ++p) {
      const double mid = lower(k) + (p + 0.5) * width;
      for (int q = 0; q < rule.order; ++q) {
        nodes[k].push_back(mid + 0.5 * width * gl.nodes[q]);
        weights[k].push_back(0.5 * width * gl.weights[q]);
      }
    }
  }

  std::vector<int> idx(dim, 0);
  Vector point(dim);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      point(k) = nodes[k][idx[k]];
      w *= weights[k][idx[k]];
    }
    sum += w * f(point);
    Eigen::Index k = 0;
    while (k < dim && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == dim) break;
  }
  return sum;
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mixer(seed ^ 0x6a09e667f3bcc909ULL);
  const std::uint64_t a = mixer();
  SplitMix64 second(a ^ (index * 0x9e3779b97f4a7c15ULL + 0xbb67ae8584caa73bULL));
  return SplitMix64(second());
}

SplitMix64::result_type SplitMix64::operator()() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace kolmo
