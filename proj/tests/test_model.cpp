#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kolmo/errors.hpp"
#include "kolmo/gramian.hpp"
#include "kolmo/model.hpp"
#include "kolmo/operator.hpp"

using namespace kolmo;

namespace {

Matrix langevin() { return Matrix{{0.0, 0.0}, {1.0, 0.0}}; }

std::string clause_of(const Matrix& b, const std::vector<int>& m) {
  try {
    validate_structure(b, m);
  } catch (const ValidationError& e) {
    return e.clause();
  }
  return "";
}

Vector random_vector(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n;
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = n(rng);
  return v;
}

// A valid [2,2,1] system with nonzero ∗-blocks.
SystemMatrix three_block() {
  Matrix b = Matrix::Zero(5, 5);
  b(0, 0) = 0.3;
  b(0, 3) = -0.2;
  b(2, 0) = 1.0;
  b(3, 1) = 1.0;
  b(2, 2) = 0.1;
  b(4, 2) = 1.0;
  b(4, 3) = 0.5;
  b(1, 4) = 0.7;
  return SystemMatrix(b, BlockStructure({2, 2, 1}));
}

}  // namespace

TEST_CASE("block structure rejects bad stratifications") {
  CHECK_NOTHROW(BlockStructure({2, 1}));
  CHECK_THROWS_AS(BlockStructure({}), ValidationError);
  CHECK_THROWS_AS(BlockStructure({1, 0}), ValidationError);
  try {
    BlockStructure({1, 2});
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(e.clause() == "m_monotonicity");
  }
  const BlockStructure s({2, 2, 1});
  CHECK(s.d() == 5);
  CHECK(s.nu() == 2);
  CHECK(s.offset(2) == 4);
  CHECK(s.block_of(3) == 1);
}

TEST_CASE("structure validation names the violated clause") {
  CHECK(clause_of(langevin(), {1, 1}).empty());
  CHECK(clause_of(Matrix::Zero(2, 2), {1, 1}) == "rank_deficient");
  CHECK(clause_of(Matrix{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {1, 1, 1}) == "zero_block");
  CHECK(clause_of(langevin(), {1, 1, 1}) == "dimension_mismatch");
  CHECK(clause_of(Matrix::Zero(2, 3), {1, 1}) == "non_square");
  Matrix nan = langevin();
  nan(0, 0) = std::nan("");
  CHECK(clause_of(nan, {1, 1}) == "non_finite");
  // Subdiagonal blocks of full row rank but not square are fine.
  CHECK(clause_of(Matrix{{0, 0, 0}, {0, 0, 0}, {1, 1, 0}}, {2, 1}).empty());
}

TEST_CASE("kalman rank") {
  CHECK(kalman_rank(validate_structure(langevin(), {1, 1})) == 2);
  CHECK(kalman_rank(Matrix::Zero(2, 2), 2) == 2);
  CHECK(kalman_rank(Matrix::Zero(2, 2), 1) == 1);
  CHECK(kalman_rank(three_block()) == 5);
}

TEST_CASE("kalman rank is full exactly when the Gramian is positive definite") {
  const std::vector<std::pair<Matrix, int>> cases{
      {langevin(), 1},
      {Matrix::Zero(2, 2), 1},
      {Matrix{{1.0, 0.0}, {0.0, 2.0}}, 1},
      {Matrix{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, 1},
      {Matrix{{0, 0, 0}, {1, 0, 0}, {0, 0, 0}}, 1},
      {three_block().B(), 2},
  };
  for (const auto& [b, m0] : cases) {
    const Matrix c = controllability_gramian(b, m0, 1.0);
    const double least = Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff();
    CHECK((kalman_rank(b, m0) == b.rows()) == (least > 1e-10));
  }
}

TEST_CASE("homogeneous dimension") {
  CHECK(homogeneous_dimension(BlockStructure({1, 1})) == 4);
  CHECK(homogeneous_dimension(BlockStructure({3})) == 3);
  CHECK(homogeneous_dimension(BlockStructure({2, 1})) == 5);
  CHECK(homogeneous_dimension(BlockStructure({2, 2, 1})) == 13);
}

TEST_CASE("dilations") {
  const BlockStructure s11({1, 1});
  const BlockStructure s21({2, 1});
  CHECK(dilation_matrix(s11, 2.0).isApprox(Matrix(Vector{{2.0, 8.0}}.asDiagonal())));
  CHECK(dilation_matrix(s21, 3.0).isApprox(Matrix(Vector{{3.0, 3.0, 27.0}}.asDiagonal())));
  CHECK(dilation_matrix(s21, 1.0) == Matrix::Identity(3, 3));
  CHECK_THROWS_AS(dilation_matrix(s11, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dilation_matrix(s11, -1.0), std::invalid_argument);

  const BlockStructure s({2, 2, 1});
  for (double r1 : {0.5, 2.0}) {
    for (double r2 : {0.25, 4.0}) {
      CHECK(dilation_matrix(s, r1) * dilation_matrix(s, r2) == dilation_matrix(s, r1 * r2));
    }
  }
  for (double r : {0.3, 1.7, 5.0}) {
    const double q = homogeneous_dimension(s);
    CHECK(dilation_matrix(s, r).determinant() == doctest::Approx(std::pow(r, q)).epsilon(1e-12));
  }
}

TEST_CASE("group law") {
  const SystemMatrix zero(Matrix::Zero(1, 1), BlockStructure({1}));
  const SpaceTimePoint a{0.3, Vector{{1.0}}};
  const SpaceTimePoint b{1.1, Vector{{-2.0}}};
  const auto ab = group_compose(a, b, zero);
  CHECK(ab.t == doctest::Approx(1.4));
  CHECK(ab.x(0) == doctest::Approx(-1.0));

  const SystemMatrix lv(langevin(), BlockStructure({1, 1}));
  const auto c = group_compose({1.0, Vector{{1.0, 0.0}}}, {1.0, Vector{{0.0, 0.0}}}, lv);
  CHECK(c.t == doctest::Approx(2.0));
  CHECK((c.x - Vector{{1.0, 1.0}}).norm() < 1e-14);

  const SpaceTimePoint origin{0.0, Vector::Zero(2)};
  const SpaceTimePoint z{0.7, Vector{{0.2, -0.4}}};
  const auto same = group_compose(origin, z, lv);
  CHECK(same.t == z.t);
  CHECK((same.x - z.x).norm() == 0.0);

  const auto inv0 = group_inverse(origin, lv);
  CHECK(inv0.t == 0.0);
  CHECK(inv0.x.norm() == 0.0);
  const auto inv_zero = group_inverse(a, zero);
  CHECK(inv_zero.t == doctest::Approx(-0.3));
  CHECK(inv_zero.x(0) == doctest::Approx(-1.0));
}

TEST_CASE("group inverse and associativity on random points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const SystemMatrix& sys : {SystemMatrix(langevin(), BlockStructure({1, 1})), three_block()}) {
    const int d = sys.d();
    for (int k = 0; k < 50; ++k) {
      const SpaceTimePoint z1{u(rng), random_vector(rng, d)};
      const SpaceTimePoint z2{u(rng), random_vector(rng, d)};
      const SpaceTimePoint z3{u(rng), random_vector(rng, d)};
      const auto id = group_compose(group_inverse(z1, sys), z1, sys);
      CHECK(std::abs(id.t) < 1e-12);
      CHECK(id.x.norm() < 1e-12);
      const auto left = group_compose(group_compose(z1, z2, sys), z3, sys);
      const auto right = group_compose(z1, group_compose(z2, z3, sys), sys);
      CHECK(std::abs(left.t - right.t) < 1e-12);
      CHECK((left.x - right.x).norm() < 1e-12 * (1.0 + left.x.norm()));
    }
  }
}

TEST_CASE("scaled system") {
  const SystemMatrix lv(langevin(), BlockStructure({1, 1}));
  CHECK(scaled_system(lv, 3.0).B() == lv.B());

  const SystemMatrix b(Matrix{{1.0, 0.0}, {1.0, 0.0}}, BlockStructure({1, 1}));
  CHECK(scaled_system(b, 2.0).B().isApprox(Matrix{{4.0, 0.0}, {1.0, 0.0}}));
  CHECK(scaled_system(b, 1.0).B() == b.B());
  CHECK_THROWS_AS(scaled_system(b, 0.0), std::invalid_argument);

  const SystemMatrix s = three_block();
  for (double r : {0.5, 2.0, 7.0}) {
    CHECK((scaled_system(scaled_system(s, r), 1.0 / r).B() - s.B()).cwiseAbs().maxCoeff() < 1e-12);
    // r² D(1/r) B D(r) in matrix form.
    const Matrix expected = r * r * dilation_matrix(s.structure(), 1.0 / r) * s.B() *
                            dilation_matrix(s.structure(), r);
    CHECK((scaled_system(s, r).B() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("homogeneous part keeps only subdiagonal blocks") {
  const SystemMatrix h = homogeneous_part(three_block());
  CHECK(h.star_free());
  CHECK(h.block(1, 0) == three_block().block(1, 0));
  CHECK(h.block(2, 1) == three_block().block(2, 1));
  CHECK(h.block(0, 0).isZero());
}

TEST_CASE("principal part and ellipticity") {
  const SystemMatrix lv(langevin(), BlockStructure({1, 1}));
  OperatorSpec spec = constant_operator(lv, 1.0);
  const OperatorSpec p1 = principal_part(spec, 1.0);
  CHECK(p1.a.value(0.0, Vector::Zero(2))(0, 0) == doctest::Approx(0.5));
  const OperatorSpec p2 = principal_part(spec, 2.0);
  CHECK(p2.a.value(0.0, Vector::Zero(2))(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(principal_part(spec, 0.0), std::invalid_argument);
  for (double lambda : {0.3, 1.0, 2.0, 5.0}) {
    const OperatorSpec p = principal_part(spec, lambda);
    const auto bounds = validate_operator(p);
    CHECK(bounds.passes(std::max(0.5 * lambda, 2.0 / lambda)));
  }

  OperatorSpec identity = spec;
  identity.a = DiffusionField{ScalarProfile::constant(1.0), Matrix::Identity(1, 1)};
  const auto unit = ellipticity_check(identity, default_sample_points(identity), default_directions(1));
  CHECK(unit.mu_low == doctest::Approx(1.0));
  CHECK(unit.mu_high == doctest::Approx(1.0));

  OperatorSpec wave = spec;
  wave.a = DiffusionField{ScalarProfile(TimeSinusoid{1.25, 0.75, 1.0, 0.0}), Matrix::Identity(1, 1)};
  const auto sampled = ellipticity_check(wave, default_sample_points(wave), default_directions(1));
  CHECK(sampled.mu_low == doctest::Approx(2.0));
  CHECK(sampled.mu_high == doctest::Approx(2.0));

  OperatorSpec negative = spec;
  negative.a = DiffusionField{ScalarProfile::constant(1.0), Matrix{{-1.0}}};
  CHECK_THROWS_AS(ellipticity_check(negative, default_sample_points(negative), default_directions(1)),
                  ValidationError);

  const SystemMatrix two(Matrix::Zero(2, 2), BlockStructure({2}));
  OperatorSpec skew = constant_operator(two, 1.0);
  skew.a.base = Matrix{{1.0, 0.2}, {0.0, 1.0}};
  try {
    ellipticity_check(skew, default_sample_points(skew), default_directions(2));
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(e.clause() == "nonsymmetric");
  }
}

TEST_CASE("coefficient bound is enforced") {
  const SystemMatrix lv(langevin(), BlockStructure({1, 1}));
  OperatorSpec spec = constant_operator(lv, 1.0);
  spec.c = ScalarProfile::constant(3.0);
  spec.M_bound = 1.0;
  try {
    validate_operator(spec);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(e.clause() == "coefficient_bound");
  }
  spec.M_bound = 3.0;
  CHECK_NOTHROW(validate_operator(spec));
}
