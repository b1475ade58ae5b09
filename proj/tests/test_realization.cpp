#include <doctest.h>

#include <random>

#include "crnreal/benchmark.hpp"
#include "crnreal/realization.hpp"

using namespace crnreal;

namespace {

RealizationProblem ExactBenchmark() {
  return {benchmark::Complexes(), UncertaintyRegion::Exact(benchmark::Coefficients()), {}};
}

RealizationProblem SphericalBenchmark(double rho) {
  return {benchmark::Complexes(), UncertaintyRegion::Spherical(benchmark::Coefficients(), rho), {}};
}

void CheckRealization(const RealizationProblem& problem, const Realization& r) {
  const Matrix& A = r.kirchhoff.A();
  CHECK((A.colwise().sum()).cwiseAbs().maxCoeff() <= 1e-10);
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (i != j) CHECK(A(i, j) >= 0.0);
  CHECK((problem.complexes.AsReal() * A - r.m_used).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(problem.region.Contains(r.m_used, 1e-7));
  for (const Edge& e : problem.excluded) CHECK_FALSE(r.support.count(e));
}

}  // namespace

TEST_CASE("program layout") {
  const RealizationProblem exact = ExactBenchmark();
  EdgeSet all;
  for (const Edge& e : AllEdges(5)) all.insert(e);
  const ConicProgram p = BuildProgram(exact, all);
  CHECK(p.dim == 20);
  CHECK(p.eq_matrix.rows() == 25);
  CHECK(p.cones.empty());
  CHECK(p.objective.sum() == doctest::Approx(20.0));

  // Variable indices cover 0..19 once each.
  std::vector<int> seen(20, 0);
  for (const Edge& e : AllEdges(5)) ++seen[EdgeVariable(e, 5)];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  const ConicProgram s = BuildProgram(SphericalBenchmark(0.1), all);
  CHECK(s.dim == 45);
  REQUIRE(s.cones.size() == 1);
  CHECK(s.cones[0].selector.size() == 25);
  CHECK(s.cones[0].radius == 0.1);
}

TEST_CASE("region membership") {
  const Matrix M = benchmark::Coefficients();
  Matrix shifted = M;
  shifted(0, 0) += 0.3;
  shifted(1, 4) -= 0.4;

  CHECK(UncertaintyRegion::Exact(M).Contains(M));
  CHECK_FALSE(UncertaintyRegion::Exact(M).Contains(shifted));
  CHECK(UncertaintyRegion::Spherical(M, 0.5).Distance(shifted) == doctest::Approx(1.0));
  CHECK(UncertaintyRegion::Spherical(M, 0.5).Contains(shifted));
  CHECK_FALSE(UncertaintyRegion::Spherical(M, 0.49).Contains(shifted));

  // Ellipsoid with entry (0,0) pinned: the shift there is not allowed.
  BoolMatrix fixed = BoolMatrix::Constant(5, 5, false);
  fixed(0, 0) = true;
  const UncertaintyRegion e = UncertaintyRegion::Ellipsoidal(M, 2.0 * Matrix::Identity(24, 24), 1.0, fixed);
  CHECK(e.FreeCoordinates().size() == 24);
  CHECK_FALSE(e.Contains(shifted));
  Matrix only_free = M;
  only_free(1, 4) -= 0.4;
  CHECK(e.Distance(only_free) == doctest::Approx(0.8));
  CHECK_THROWS_AS(UncertaintyRegion::Spherical(M, -1.0), ContractError);
  CHECK_THROWS_AS(UncertaintyRegion::Ellipsoidal(M, Matrix::Identity(3, 3)), ContractError);
}

TEST_CASE("dense realization of the exact benchmark") {
  const RealizationProblem problem = ExactBenchmark();
  const DenseOutcome out = DenseRealization(problem);
  REQUIRE(out.feasible());
  CHECK(out.realization->support == benchmark::TrueSupport());
  CHECK((out.realization->kirchhoff.A() - benchmark::Kirchhoff().A()).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(out.realization->kirchhoff.rate({0, 1}) == doctest::Approx(0.3386).epsilon(1e-6));
  CheckRealization(problem, *out.realization);
  CHECK(out.iterations <= 20 + 1);

  // Excluding nothing extra is the same computation.
  const DenseOutcome same = ConstrainedDense(problem, {});
  REQUIRE(same.feasible());
  CHECK(same.realization->support == out.realization->support);
}

TEST_CASE("infeasible exclusions") {
  const RealizationProblem problem = ExactBenchmark();
  const DenseOutcome none = ConstrainedDense(problem, benchmark::TrueSupport());
  CHECK_FALSE(none.feasible());
  CHECK(none.certificate == "no realization exists under these constraints");

  // Only C1 -> C2 can produce the 2X2 complex from a complex without X2 that
  // is consumed at rate [M]_21 > 0 in column 1; the LP must agree.
  RealizationProblem excl = problem;
  excl.excluded = {{0, 1}};
  CHECK_FALSE(IsFeasible(BuildProgram(excl, {})));
  CHECK_FALSE(ConstrainedDense(problem, {{0, 1}}).feasible());
  CHECK(IsFeasible(BuildProgram(problem, {})));
}

TEST_CASE("zero radius matches the exact region") {
  const DenseOutcome exact = DenseRealization(ExactBenchmark());
  const DenseOutcome ball = DenseRealization(SphericalBenchmark(0.0));
  REQUIRE(exact.feasible());
  REQUIRE(ball.feasible());
  CHECK(ball.realization->support == exact.realization->support);
}

TEST_CASE("dense support grows with the radius") {
  EdgeSet previous;
  std::vector<size_t> sizes;
  for (double rho : {0.0, 0.01, 0.05, 0.1, 0.2, 0.4}) {
    const RealizationProblem problem = SphericalBenchmark(rho);
    const DenseOutcome out = DenseRealization(problem);
    REQUIRE(out.feasible());
    CheckRealization(problem, *out.realization);
    CHECK(out.iterations <= 20 + 1);
    const EdgeSet& s = out.realization->support;
    CHECK(std::includes(s.begin(), s.end(), previous.begin(), previous.end()));
    previous = s;
    sizes.push_back(s.size());
  }
  CHECK(sizes.front() == 6);
  CHECK(sizes.back() > 6);
}

TEST_CASE("superstructure containment") {
  const RealizationProblem problem = SphericalBenchmark(0.1);
  const DenseOutcome dense = DenseRealization(problem);
  REQUIRE(dense.feasible());
  const std::vector<Edge> support(dense.realization->support.begin(), dense.realization->support.end());
  REQUIRE(support.size() > 6);

  std::mt19937_64 rng(7);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    EdgeSet keep, drop;
    for (const Edge& e : support) (rng() % 5 ? keep : drop).insert(e);
    for (const Edge& e : AllEdges(5)) {
      if (!dense.realization->support.count(e)) drop.insert(e);
    }
    const DenseOutcome out = ConstrainedDense(problem, drop);
    if (!out.feasible()) continue;
    ++feasible;
    const EdgeSet& s = out.realization->support;
    CHECK(std::includes(keep.begin(), keep.end(), s.begin(), s.end()));
    CHECK(std::includes(dense.realization->support.begin(), dense.realization->support.end(),
                        s.begin(), s.end()));
    CheckRealization({problem.complexes, problem.region, drop}, *out.realization);
  }
  CHECK(feasible > 20);
}

TEST_CASE("program hook sees every solve") {
  RealizationOptions opts;
  int calls = 0;
  opts.program_hook = [&](const ConicProgram&) { ++calls; };
  const DenseOutcome out = DenseRealization(ExactBenchmark(), opts);
  CHECK(calls == out.solves);
  CHECK(calls >= 2);
}
