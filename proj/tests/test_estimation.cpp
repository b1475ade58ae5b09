#include <doctest.h>

#include <bit>
#include <random>

#include "crnreal/benchmark.hpp"
#include "crnreal/estimation.hpp"

using namespace crnreal;

namespace {

Matrix RandomMatrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = nd(rng);
  return A;
}

Vector RandomVector(std::mt19937_64& rng, int n) { return RandomMatrix(rng, n, 1).col(0); }

// Direct N x N evaluation, independent of the m x m forms in the library.
double DirectLogDet(const Matrix& phi, const Vector& gamma, double lambda) {
  const Matrix S = lambda * Matrix::Identity(phi.rows(), phi.rows()) +
                   phi * gamma.asDiagonal() * phi.transpose();
  return S.ldlt().vectorD().array().log().sum();
}

std::vector<Trajectory> BenchmarkRuns(std::mt19937_64& rng, int experiments, double T, double h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Trajectory> runs;
  for (int e = 0; e < experiments; ++e) {
    Vector x0(5);
    for (int i = 0; i < 5; ++i) x0(i) = u(rng);
    runs.push_back(Simulate(benchmark::System(), x0, T, h));
  }
  return runs;
}

BoolMatrix TrueZeroMask() { return benchmark::Coefficients().array() == 0.0; }

// Sum of subgradient violations of ||y - Phi t||^2 + 2 lambda sum w|t|.
double KktViolation(const Matrix& phi, const Vector& y, const Vector& w, double lambda, const Vector& t) {
  const Vector c = phi.transpose() * (y - phi * t);
  double worst = 0.0;
  for (int j = 0; j < t.size(); ++j) {
    if (t(j) != 0.0) {
      worst = std::max(worst, std::abs(c(j) - lambda * w(j) * (t(j) > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::abs(c(j)) - lambda * w(j));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("regression data") {
  std::mt19937_64 rng(1);
  const ComplexMatrix Y = benchmark::Complexes();

  Trajectory still;
  still.h = 0.1;
  still.times = Vector::LinSpaced(11, 0.0, 1.0);
  still.states = Matrix::Constant(11, 5, 0.4);
  const RegressionData flat = BuildRegression({still}, Y);
  CHECK(flat.rows() == 10);
  CHECK(flat.targets.isZero(0.0));

  const auto runs = BenchmarkRuns(rng, 3, 2.0, 0.01);
  const RegressionData data = BuildRegression(runs, Y);
  CHECK(data.rows() == 3 * 200);
  const Matrix predicted = data.phi * benchmark::Coefficients().transpose();
  CHECK((predicted - data.targets).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(data.monomial_names[2] == "X1+X3");

  // 50 experiments of 1000 samples each: 50 * 999 rows.
  Trajectory thousand;
  thousand.h = 0.01;
  thousand.times = Vector::LinSpaced(1000, 0.0, 9.99);
  thousand.states = Matrix::Constant(1000, 5, 0.5);
  CHECK(BuildRegression(std::vector<Trajectory>(50, thousand), Y).rows() == 49950);

  Trajectory other = still;
  other.h = 0.2;
  CHECK_THROWS_AS(BuildRegression({still, other}, Y), ContractError);
  Trajectory negative = still;
  negative.states(3, 1) = -0.01;
  CHECK_THROWS_AS(BuildRegression({negative}, Y), ContractError);
  RegressionOptions allow;
  allow.allow_negative_states = true;
  CHECK(BuildRegression({negative}, Y, allow).rows() == 10);
}

TEST_CASE("least squares with known zeros") {
  std::mt19937_64 rng(2);
  const RegressionData data = BuildRegression(BenchmarkRuns(rng, 5, 5.0, 0.01), benchmark::Complexes());
  const EstimationResult fit = LseFit(data, TrueZeroMask());
  CHECK((fit.M - benchmark::Coefficients()).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(fit.FreeParameters() == 13);
  CHECK(fit.covariance[3].rows() == 1);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (TrueZeroMask()(i, j)) CHECK(fit.M(i, j) == 0.0);

  RegressionData zero = data;
  zero.targets.setZero();
  CHECK(LseFit(zero, TrueZeroMask()).M.isZero(0.0));

  // Additive Gaussian noise on the difference quotients: estimates land within
  // three standard errors of the truth.
  RegressionData noisy = BuildRegression(BenchmarkRuns(rng, 50, 10.0, 0.01), benchmark::Complexes());
  std::normal_distribution<double> nd(0.0, 1e-2);
  for (Eigen::Index k = 0; k < noisy.targets.size(); ++k) noisy.targets.data()[k] += nd(rng);
  const EstimationResult est = LseFit(noisy, TrueZeroMask());
  const Matrix truth = benchmark::Coefficients();
  for (int i = 0; i < 5; ++i) {
    const std::vector<int> cols = est.SupportColumns(i);
    for (size_t k = 0; k < cols.size(); ++k) {
      const double se = std::sqrt(est.covariance[i](k, k));
      CHECK(std::abs(est.M(i, cols[k]) - truth(i, cols[k])) <= 3.0 * se);
    }
    CHECK(est.sigma2(i) == doctest::Approx(1e-4).epsilon(0.05));
  }
}

TEST_CASE("collinear monomials are named") {
  // Every state constant at 1: all monomials coincide.
  Trajectory ones;
  ones.h = 0.1;
  ones.times = Vector::LinSpaced(20, 0.0, 1.9);
  ones.states = Matrix::Ones(20, 5);
  const RegressionData data = BuildRegression({ones}, benchmark::Complexes());
  try {
    LseFit(data, TrueZeroMask());
    FAIL("expected a rank deficiency error");
  } catch (const RankDeficiencyError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("collinear") != std::string::npos);
    CHECK(msg.find("X1") != std::string::npos);
  }
}

TEST_CASE("weighted L1 solver") {
  std::mt19937_64 rng(3);
  const Matrix phi = RandomMatrix(rng, 40, 6);
  const Vector y = RandomVector(rng, 40);
  const Vector ones = Vector::Ones(6);

  const Vector ols = WeightedL1Solve(phi, y, ones, 0.0);
  CHECK((ols - phi.colPivHouseholderQr().solve(y)).norm() <= 1e-10);

  Vector w(6);
  w << 1.0, 2.0, 0.5, 1.0, 3.0, 1.5;
  const Vector c = phi.transpose() * y;
  const double lambda_max = (c.array().abs() / w.array()).maxCoeff();
  const Vector zero = WeightedL1Solve(phi, y, w, lambda_max * 1.0001);
  CHECK(zero.isZero(0.0));
  CHECK(KktViolation(phi, y, w, lambda_max * 1.0001, zero) <= 0.0);

  for (double lambda : {0.1, 1.0, 5.0}) {
    const Vector t = WeightedL1Solve(phi, y, w, lambda);
    CHECK(KktViolation(phi, y, w, lambda, t) <= 1e-8);
  }

  Vector pinned = w;
  pinned(2) = std::numeric_limits<double>::infinity();
  CHECK(WeightedL1Solve(phi, y, pinned, 0.5)(2) == 0.0);

  // Orthonormal design: soft thresholding of Phi^T y.
  const Matrix Q = RandomMatrix(rng, 30, 5).householderQr().householderQ() * Matrix::Identity(30, 5);
  const Vector yq = RandomVector(rng, 30);
  const Vector corr = Q.transpose() * yq;
  const double lambda = 0.3;
  const Vector soft = WeightedL1Solve(Q, yq, Vector::Ones(5), lambda);
  for (int j = 0; j < 5; ++j) {
    const double expected = std::copysign(std::max(std::abs(corr(j)) - lambda, 0.0), corr(j));
    CHECK(std::abs(soft(j) - expected) <= 1e-10);
  }
}

TEST_CASE("posterior moments") {
  std::mt19937_64 rng(4);
  const Matrix phi = RandomMatrix(rng, 25, 5);
  const Vector y = RandomVector(rng, 25);

  const PosteriorMoments none = ComputePosteriorMoments(phi, y, Vector::Zero(5), 0.5);
  CHECK(none.mean.isZero(0.0));
  CHECK(none.covariance.isZero(0.0));

  Vector gamma(5);
  gamma << 0.5, 0.0, 2.0, 0.1, 0.0;
  CHECK(ComputePosteriorMoments(phi, y, gamma, 1e8).mean.cwiseAbs().maxCoeff() <= 1e-6);

  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = RandomMatrix(rng, 20, 5);
    const Vector yy = RandomVector(rng, 20);
    Vector g = RandomVector(rng, 5).cwiseAbs();
    g(trial % 5) = 0.0;
    const double lambda = 0.2 + 0.1 * trial;
    const PosteriorMoments post = ComputePosteriorMoments(p, yy, g, lambda);

    // Textbook N x N form.
    const Matrix Sy = lambda * Matrix::Identity(20, 20) + p * g.asDiagonal() * p.transpose();
    const Vector mu = g.asDiagonal() * p.transpose() * Sy.ldlt().solve(yy);
    CHECK((post.mean - mu).norm() <= 1e-10 * std::max(1.0, mu.norm()));

    // Ridge form on the support of gamma.
    std::vector<int> s;
    for (int j = 0; j < 5; ++j)
      if (g(j) > 0) s.push_back(j);
    Matrix ps(20, s.size());
    Vector gi(s.size());
    for (size_t k = 0; k < s.size(); ++k) {
      ps.col(k) = p.col(s[k]);
      gi(k) = lambda / g(s[k]);
    }
    const Vector ridge = (Matrix(gi.asDiagonal()) + ps.transpose() * ps).ldlt().solve(ps.transpose() * yy);
    for (size_t k = 0; k < s.size(); ++k) CHECK(std::abs(post.mean(s[k]) - ridge(k)) <= 1e-9);

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(post.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    const Eigen::SelfAdjointEigenSolver<Matrix> gap(Matrix(g.asDiagonal()) - post.covariance);
    CHECK(gap.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("z update is the gradient of log det Sigma_y") {
  CHECK((ZUpdate(Matrix::Identity(4, 4), Vector::Zero(4), 0.25) - Vector::Constant(4, 4.0)).norm() <= 1e-12);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> m_dist(1, 10), n_dist(5, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = m_dist(rng), N = n_dist(rng);
    const Matrix phi = RandomMatrix(rng, N, m);
    const Vector gamma = RandomVector(rng, m).cwiseAbs() + Vector::Constant(m, 0.05);
    const double lambda = 0.1 + std::abs(RandomVector(rng, 1)(0));
    const Vector z = ZUpdate(phi, gamma, lambda);
    CHECK(LogDetSigmaY(phi, gamma, lambda) == doctest::Approx(DirectLogDet(phi, gamma, lambda)).epsilon(1e-10));
    for (int i = 0; i < m; ++i) {
      const double step = 1e-5 * std::max(1.0, gamma(i));
      Vector up = gamma, down = gamma;
      up(i) += step;
      down(i) -= step;
      const double fd = (DirectLogDet(phi, up, lambda) - DirectLogDet(phi, down, lambda)) / (2 * step);
      CHECK(std::abs(z(i) - fd) <= 1e-5 * std::abs(fd));
      CHECK(z(i) > 0.0);
    }
  }

  const Matrix phi = RandomMatrix(rng, 15, 4);
  double previous = std::numeric_limits<double>::infinity();
  for (double g : {0.0, 1.0, 1e2, 1e4, 1e6, 1e8}) {
    Vector gamma = Vector::Constant(4, 0.3);
    gamma(1) = g;
    const double z = ZUpdate(phi, gamma, 0.5)(1);
    CHECK(z < previous);
    previous = z;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("sparse Bayesian learning") {
  std::mt19937_64 rng(6);
  RegressionData data;
  data.h = 1.0;
  data.phi = RandomMatrix(rng, 50, 6);
  data.targets = Matrix::Zero(50, 1);
  data.monomial_names = {"a", "b", "c", "d", "e", "f"};

  const EstimationResult quiet = SblFit(data);
  CHECK(quiet.M.isZero(0.0));
  CHECK(quiet.gamma[0].isZero(0.0));
  CHECK(quiet.support.count() == 0);

  // Two active columns, noise well below the assumed noise level lambda.
  // Oracle: the smallest subset whose least-squares residual fits within N lambda.
  const double lambda = 0.05 * 0.05;
  Vector theta = Vector::Zero(6);
  theta(1) = 1.5;
  theta(4) = -0.8;
  std::normal_distribution<double> nd(0.0, 0.01);
  SblOptions opts;
  opts.lambda = lambda;
  EstimationResult fit;
  for (int instance = 0; instance < 10; ++instance) {
    data.phi = RandomMatrix(rng, 50, 6);
    data.targets.col(0) = data.phi * theta;
    for (int k = 0; k < 50; ++k) data.targets(k, 0) += nd(rng);
    const Vector y = data.targets.col(0);
    fit = SblFit(data, opts);

    int best_mask = -1;
    double best_rss = 0.0;
    for (int mask = 0; mask < 64; ++mask) {
      std::vector<int> cols;
      for (int j = 0; j < 6; ++j)
        if (mask >> j & 1) cols.push_back(j);
      Matrix sub(50, cols.size());
      for (size_t k = 0; k < cols.size(); ++k) sub.col(k) = data.phi.col(cols[k]);
      const double rss =
          cols.empty() ? y.squaredNorm() : (y - sub * sub.colPivHouseholderQr().solve(y)).squaredNorm();
      if (rss > 50 * lambda) continue;
      const int size = static_cast<int>(cols.size());
      if (best_mask < 0 || size < std::popcount(static_cast<unsigned>(best_mask)) ||
          (size == std::popcount(static_cast<unsigned>(best_mask)) && rss < best_rss)) {
        best_mask = mask;
        best_rss = rss;
      }
    }
    REQUIRE(best_mask >= 0);
    for (int j = 0; j < 6; ++j) CHECK(fit.support(0, j) == static_cast<bool>(best_mask >> j & 1));
  }
  const Vector y = data.targets.col(0);

  // First iteration is the plain L1 problem with weight 2 lambda.
  const Vector lasso = WeightedL1Solve(data.phi, y, Vector::Ones(6), fit.lambda(0));
  CHECK((fit.trace[0].first_theta - lasso).cwiseAbs().maxCoeff() <= 1e-8);

  // The upper-bound cost never increases.
  const auto& cost = fit.trace[0].cost;
  REQUIRE(cost.size() >= 2);
  for (size_t k = 1; k < cost.size(); ++k) CHECK(cost[k] - cost[k - 1] <= 1e-10 * std::max(1.0, std::abs(cost[k - 1])));
  CHECK(fit.trace[0].converged);
  CHECK(fit.covariance[0].rows() == 2);
}

TEST_CASE("SBL recovers the benchmark sparsity from noiseless data") {
  std::mt19937_64 rng(7);
  const RegressionData data = BuildRegression(BenchmarkRuns(rng, 10, 10.0, 0.1), benchmark::Complexes());
  SblOptions opts;
  opts.threads = 2;
  const EstimationResult fit = SblFit(data, opts);
  CHECK((fit.support.array() == (benchmark::Coefficients().array() != 0.0)).all());
  CHECK((fit.M - benchmark::Coefficients()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("confidence region") {
  EstimationResult r;
  r.M = Matrix::Zero(1, 2);
  r.M(0, 0) = 1.0;
  r.support = BoolMatrix::Constant(1, 2, false);
  r.support(0, 0) = true;
  const double c = 0.04;
  r.covariance = {Matrix::Constant(1, 1, c)};
  const UncertaintyRegion region = ConfidenceRegion(r, 0.05);
  CHECK(region.Contains(r.M));
  Matrix edge = r.M;
  edge(0, 0) += std::sqrt(3.841458820694124 * c);
  CHECK(region.Distance(edge) == doctest::Approx(1.0).epsilon(1e-9));
  Matrix off = r.M;
  off(0, 1) = 1e-3;
  CHECK_FALSE(region.Contains(off));

  // Nearly alpha = 1: the region collapses towards the estimate.
  const UncertaintyRegion tiny = ConfidenceRegion(r, 1.0 - 1e-9);
  Matrix near = r.M;
  near(0, 0) += 1e-3;
  CHECK(tiny.Distance(near) > 10.0);

  std::vector<std::string> warnings;
  r.covariance = {Matrix::Zero(1, 1)};
  ConfidenceRegion(r, 0.05, &warnings);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(ConfidenceRegion(r, 1.5), ContractError);
}
