#include <doctest.h>

#include <cmath>
#include <random>

#include "crnreal/benchmark.hpp"
#include "crnreal/kinetic.hpp"

using namespace crnreal;

namespace {

ComplexMatrix RandomComplexes(std::mt19937_64& rng, int n, int m) {
  std::uniform_int_distribution<int> coef(0, 2);
  for (;;) {
    IntMatrix Y(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) Y(i, j) = coef(rng);
    try {
      return ComplexMatrix(Y);
    } catch (const ContractError&) {
      // duplicate columns, redraw
    }
  }
}

Matrix RandomKineticM(std::mt19937_64& rng, const ComplexMatrix& cm) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution zero(0.3);
  Matrix M(cm.num_species(), cm.num_complexes());
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) {
      double v = zero(rng) ? 0.0 : u(rng);
      if (v < 0.0 && cm.Y()(i, j) == 0) v = -v;
      M(i, j) = v;
    }
  }
  return M;
}

}  // namespace

TEST_CASE("monomial evaluation") {
  const ComplexMatrix Y = benchmark::Complexes();
  CHECK(MonomialEval(Y, Vector::Ones(5)).isApprox(Vector::Ones(5)));

  Vector x(5);
  x << 1, 3, 1, 1, 1;
  CHECK(MonomialEval(Y, x)(1) == doctest::Approx(9.0));

  x << 2, 0, 5, 0, 0;
  const Vector psi = MonomialEval(Y, x);
  CHECK(psi(2) == doctest::Approx(10.0));
  CHECK(psi(0) == doctest::Approx(2.0));
  CHECK(psi(1) == 0.0);

  // 0^0 = 1: the zero complex is the constant monomial.
  IntMatrix Z(2, 2);
  Z << 0, 1,
       0, 0;
  CHECK(MonomialEval(ComplexMatrix(Z), Vector::Zero(2))(0) == 1.0);

  CHECK_THROWS_AS(MonomialEval(Y, Vector::Ones(3)), ContractError);
}

TEST_CASE("complex matrix invariants") {
  IntMatrix dup(2, 2);
  dup << 1, 1,
         0, 0;
  CHECK_THROWS_AS(ComplexMatrix{dup}, ContractError);
  IntMatrix neg(1, 2);
  neg << -1, 1;
  CHECK_THROWS_AS(ComplexMatrix{neg}, ContractError);
  const ComplexMatrix Y = benchmark::Complexes();
  CHECK(Y.Formula(0) == "X1");
  CHECK(Y.Formula(1) == "2X2");
  CHECK(Y.Formula(2) == "X1+X3");
  CHECK(Y.Formula(4) == "X2+X5");
}

TEST_CASE("kinetic sign condition") {
  CHECK(IsKinetic(benchmark::Complexes(), benchmark::Coefficients()).kinetic);

  Matrix M = Matrix::Zero(5, 5);
  M(0, 1) = -1.0;  // species 1 is absent from complex 2
  const auto check = IsKinetic(benchmark::Complexes(), M);
  CHECK_FALSE(check.kinetic);
  REQUIRE(check.violations.size() == 1);
  CHECK(check.violations[0].species == 0);
  CHECK(check.violations[0].complex == 1);

  IntMatrix Y1(1, 1);
  Y1 << 0;
  Matrix M1(1, 1);
  M1 << -1.0;
  CHECK_FALSE(IsKinetic(ComplexMatrix(Y1), M1).kinetic);
  CHECK_THROWS_AS(KineticSystem(ComplexMatrix(Y1), M1), NonKineticError);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(0.01, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix cm = RandomComplexes(rng, 3, 4);
    Matrix P(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) P(i, j) = pos(rng);
    CHECK(IsKinetic(cm, P).kinetic);
  }

  // Zero coefficients need no monomial support (strict reading).
  CHECK(IsKinetic(ComplexMatrix(Y1), Matrix::Zero(1, 1)).kinetic);
}

TEST_CASE("assemble coefficients") {
  Matrix expected(5, 5);
  expected << -0.3386, 0, -0.7364, 0.5631, 0.8492,
               0.6772, 0,  0.7364, 0,     -0.4202,
               0.8244, 0, -0.7364, 0.5631, 0,
               0,      0,  0,     -0.5631, 0,
               0,      0,  0.7364, 0,     -1.2782;
  CHECK((benchmark::Coefficients() - expected).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(AssembleCoefficients(benchmark::Complexes(), KirchhoffMatrix(5)).isZero());

  IntMatrix I2(2, 2);
  I2 << 1, 0,
        0, 1;
  Matrix A(2, 2);
  A << -2, 1,
        2, -1;
  const Matrix M = AssembleCoefficients(ComplexMatrix(I2), KirchhoffMatrix::FromMatrix(A));
  CHECK(M.isApprox(A));

  CHECK_THROWS_AS(AssembleCoefficients(ComplexMatrix(I2), KirchhoffMatrix(3)), ContractError);
}

TEST_CASE("Kirchhoff matrix validation") {
  Matrix bad(2, 2);
  bad << -1, 0.5,
          1, -0.5;
  bad(1, 0) = -0.1;
  CHECK_THROWS_AS(KirchhoffMatrix::FromMatrix(bad), ContractError);

  Matrix unbalanced(2, 2);
  unbalanced << -1, 0,
                 0.5, 0;
  CHECK_THROWS_AS(KirchhoffMatrix::FromMatrix(unbalanced), ContractError);

  const KirchhoffMatrix K = benchmark::Kirchhoff();
  CHECK(K.Support() == benchmark::TrueSupport());
  CHECK(K.rate({0, 1}) == doctest::Approx(0.3386));
  CHECK(K.A().colwise().sum().cwiseAbs().maxCoeff() < 1e-10);

  // Kinetic closure: any Kirchhoff matrix yields a kinetic coefficient matrix.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMatrix cm = RandomComplexes(rng, 3, 4);
    std::vector<std::pair<Edge, double>> rates;
    for (int s = 0; s < 4; ++s)
      for (int t = 0; t < 4; ++t)
        if (s != t && u(rng) < 0.5) rates.push_back({{s, t}, u(rng)});
    const KirchhoffMatrix A = KirchhoffMatrix::FromRates(4, rates);
    CHECK(A.A().colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(IsKinetic(cm, AssembleCoefficients(cm, A)).kinetic);
  }
}

TEST_CASE("canonical realization") {
  const ComplexMatrix Y = benchmark::Complexes();
  CHECK(CanonicalRealization(Y, Matrix::Zero(5, 5)).kirchhoff.Support().empty());

  IntMatrix Y1(1, 1);
  Y1 << 1;
  Matrix M1(1, 1);
  M1 << -1.0;
  const CanonicalNetwork decay = CanonicalRealization(ComplexMatrix(Y1), M1);
  REQUIRE(decay.complexes.num_complexes() == 2);
  CHECK(decay.complexes.Formula(1) == "0");
  CHECK(decay.kirchhoff.Support() == EdgeSet{{0, 1}});
  CHECK(decay.kirchhoff.rate({0, 1}) == doctest::Approx(1.0));

  auto roundtrip_error = [](const ComplexMatrix& cm, const Matrix& M) {
    const CanonicalNetwork net = CanonicalRealization(cm, M);
    const Matrix R = AssembleCoefficients(net.complexes, net.kirchhoff);
    double err = (R.leftCols(M.cols()) - M).cwiseAbs().maxCoeff();
    if (R.cols() > M.cols()) err = std::max(err, R.rightCols(R.cols() - M.cols()).cwiseAbs().maxCoeff());
    return err;
  };
  CHECK(roundtrip_error(Y, benchmark::Coefficients()) < 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng);
    const int m = std::min(dim(rng), n == 1 ? 3 : 5);
    const ComplexMatrix cm = RandomComplexes(rng, n, m);
    CHECK(roundtrip_error(cm, RandomKineticM(rng, cm)) < 1e-12);
  }

  Matrix bad = Matrix::Zero(5, 5);
  bad(0, 1) = -1.0;
  CHECK_THROWS_AS(CanonicalRealization(Y, bad), NonKineticError);
}

TEST_CASE("forward Euler simulation") {
  const KineticSystem sys = benchmark::System();
  const Trajectory zero = Simulate(sys, Vector::Zero(5), 1.0, 0.1);
  CHECK(zero.num_samples() == 11);
  CHECK(zero.states.isZero());

  IntMatrix Y1(1, 1);
  Y1 << 1;
  Matrix M1(1, 1);
  M1 << -1.0;
  const Trajectory decay = Simulate(KineticSystem(ComplexMatrix(Y1), M1), Vector::Ones(1), 1.0, 0.01);
  REQUIRE(decay.num_samples() == 101);
  CHECK(decay.states(100, 0) == doctest::Approx(std::pow(0.99, 100)).epsilon(1e-12));
  CHECK(decay.states(100, 0) == doctest::Approx(0.3660).epsilon(1e-4));
  for (int k = 1; k < decay.num_samples(); ++k) {
    CHECK(decay.times(k) - decay.times(k - 1) == doctest::Approx(0.01));
  }

  // Self-convergence against a 100x finer Euler integration.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x0(5);
  for (int i = 0; i < 5; ++i) x0(i) = u(rng);
  const Trajectory coarse = Simulate(sys, x0, 10.0, 0.01);
  const Trajectory fine = Simulate(sys, x0, 10.0, 0.0001);
  double err = 0.0;
  for (int k = 0; k < coarse.num_samples(); ++k) {
    err = std::max(err, (coarse.states.row(k) - fine.states.row(100 * k)).cwiseAbs().maxCoeff());
  }
  CHECK(err < 1e-2);
  CHECK((coarse.states.array() >= 0.0).all());

  CHECK_THROWS_AS(Simulate(sys, x0, 1.0, 0.0), ContractError);
  CHECK_THROWS_AS(Simulate(sys, -x0, 1.0, 0.1), ContractError);

  Matrix grow(1, 1);
  grow << 1.0;
  IntMatrix Y2(1, 1);
  Y2 << 3;
  CHECK_THROWS_AS(Simulate(KineticSystem(ComplexMatrix(Y2), grow), Vector::Constant(1, 10.0), 100.0, 0.5),
                  DivergenceError);
}

TEST_CASE("unclamped Euler undershoot shrinks with the step") {
  const KineticSystem sys = benchmark::System();
  Vector x0(5);
  x0 << 1.0, 0.0, 0.0, 0.0, 1.0;
  auto undershoot = [&](double h) {
    const Trajectory t = Simulate(sys, x0, 10.0, h, {.clamp_nonnegative = false});
    return std::max(0.0, -t.states.minCoeff());
  };
  const double coarse = undershoot(1.0);
  const double mid = undershoot(0.5);
  const double fine = undershoot(0.01);
  CHECK(coarse > 0.0);
  CHECK(mid <= coarse);
  CHECK(fine <= mid);
  const Trajectory clamped = Simulate(sys, x0, 10.0, 1.0);
  CHECK(clamped.states.minCoeff() >= 0.0);
}

TEST_CASE("combinatorial bound") {
  CHECK(RMax(9) == 511);
  CHECK(RMax(1) == 1);
  CHECK(RMax(6, 6) == 1);
  CHECK_THROWS_AS(RMax(3, 4), ContractError);

  // Direct binomial summation via Pascal's triangle.
  std::vector<std::vector<BigInt>> pascal(31);
  for (int r = 0; r <= 30; ++r) {
    pascal[r].assign(r + 1, 1);
    for (int k = 1; k < r; ++k) pascal[r][k] = pascal[r - 1][k - 1] + pascal[r - 1][k];
  }
  for (int r = 1; r <= 30; ++r) {
    BigInt sum = 0;
    for (int k = 1; k <= r; ++k) sum += pascal[r][k];
    CHECK(RMax(r) == sum);
    CHECK(RMax(r) == (BigInt(1) << r) - 1);
  }
  CHECK(RMax(100) == (BigInt(1) << 100) - 1);
}

TEST_CASE("information ratio") {
  CHECK(InfoRatio(56, 9) == doctest::Approx(56.0 / 511.0));
  CHECK(InfoRatio(56, 9) == doctest::Approx(0.1096).epsilon(1e-3));
  CHECK(InfoRatio(511, 9) == doctest::Approx(1.0));
  CHECK(InfoRatio(1, 6) == doctest::Approx(1.0 / 63.0));
}
