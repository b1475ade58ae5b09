#include "crnreal/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/distributions/chi_squared.hpp>

#include "crnreal/conic.hpp"
#include "parallel.hpp"

namespace crnreal {

namespace {

// Sufficient statistics of one regression row: everything the estimators need
// is m x m, so N never enters beyond these sums.
struct Gram {
  Matrix G;   // Phi^T Phi
  Vector b;   // Phi^T y
  double yy;  // y^T y
  int n;      // sample count
};

Gram MakeGram(const Matrix& phi, const Vector& y) {
  if (phi.rows() != y.size()) throw ContractError("regressor and target lengths differ");
  return {phi.transpose() * phi, phi.transpose() * y, y.squaredNorm(), static_cast<int>(y.size())};
}

double SoftThreshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double ResidualSquared(const Gram& g, const Vector& theta) {
  return std::max(0.0, g.yy - 2.0 * theta.dot(g.b) + theta.dot(g.G * theta));
}

Vector LeastSquaresOnFree(const Matrix& phi, const Vector& y, const std::vector<int>& free) {
  Vector theta = Vector::Zero(phi.cols());
  if (free.empty()) return theta;
  Matrix sub(phi.rows(), static_cast<Eigen::Index>(free.size()));
  for (size_t k = 0; k < free.size(); ++k) sub.col(k) = phi.col(free[k]);
  const Vector sol = sub.completeOrthogonalDecomposition().solve(y);
  for (size_t k = 0; k < free.size(); ++k) theta(free[k]) = sol(k);
  return theta;
}

// Coordinate descent on the Gram form with a duality-gap stop.
Vector WeightedL1Gram(const Gram& g, const Vector& w, double lambda, const WeightedL1Options& opts) {
  const Eigen::Index m = g.G.rows();
  Vector theta = Vector::Zero(m);
  Vector c = g.b;  // Phi^T (y - Phi theta)
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      double next = 0.0;
      if (std::isfinite(w(j)) && g.G(j, j) > 0.0) {
        next = SoftThreshold(c(j) + g.G(j, j) * theta(j), lambda * w(j)) / g.G(j, j);
      }
      const double delta = next - theta(j);
      if (delta != 0.0) {
        c -= g.G.col(j) * delta;
        theta(j) = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (!theta.allFinite()) throw NumericFailure("weighted L1 coordinate descent diverged");

    const double r2 = ResidualSquared(g, theta);
    double penalty = 0.0, scale = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!std::isfinite(w(j))) continue;
      penalty += w(j) * std::abs(theta(j));
      if (w(j) > 0.0 && std::abs(c(j)) > lambda * w(j)) scale = std::min(scale, lambda * w(j) / std::abs(c(j)));
    }
    const double primal = r2 + 2.0 * lambda * penalty;
    const double ry = g.yy - theta.dot(g.b);
    const double dual = 2.0 * scale * ry - scale * scale * r2;
    const double gap = primal - dual;
    const double size = std::max(1.0, theta.lpNorm<Eigen::Infinity>());
    if (gap <= opts.gap_tol * std::max(g.yy, std::numeric_limits<double>::min()) ||
        max_delta <= 1e-15 * size) {
      return theta;
    }
  }
  throw NumericFailure("weighted L1 solver did not reach the duality-gap tolerance");
}

double LogDetGram(const Gram& g, const Vector& gamma, double lambda) {
  const Vector d = gamma.cwiseMax(0.0).cwiseSqrt();
  const Matrix K = Matrix::Identity(g.G.rows(), g.G.cols()) + d.asDiagonal() * g.G * d.asDiagonal() / lambda;
  const Eigen::LDLT<Matrix> ldlt(K);
  return g.n * std::log(lambda) + ldlt.vectorD().array().log().sum();
}

Vector ZUpdateGram(const Gram& g, const Vector& gamma, double lambda) {
  // Phi^T (lambda I + Phi Gamma Phi^T)^{-1} Phi = (lambda I + G Gamma)^{-1} G.
  const Eigen::Index m = g.G.rows();
  const Matrix lhs = lambda * Matrix::Identity(m, m) + g.G * gamma.asDiagonal();
  const Matrix z = lhs.partialPivLu().solve(g.G);
  return z.diagonal();
}

PosteriorMoments PosteriorGram(const Gram& g, const Vector& gamma, double lambda) {
  const Eigen::Index m = g.G.rows();
  const Vector d = gamma.cwiseMax(0.0).cwiseSqrt();
  const Matrix K = Matrix::Identity(m, m) + d.asDiagonal() * g.G * d.asDiagonal() / lambda;
  const Matrix inner = K.ldlt().solve(Matrix(d.asDiagonal()));
  Matrix cov = d.asDiagonal() * inner;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {cov * g.b / lambda, cov};
}

std::string JoinNames(const std::vector<std::string>& names, const std::vector<int>& idx) {
  std::ostringstream out;
  for (size_t k = 0; k < idx.size(); ++k) out << (k ? ", " : "") << names[idx[k]];
  return out.str();
}

struct RowFit {
  Vector theta;
  Matrix covariance;
  double sigma2;
};

// Least squares on the given columns with rank checking; covariance is
// sigma2 (Phi_S^T Phi_S)^{-1}.
RowFit FitRow(const RegressionData& data, int row, const std::vector<int>& cols) {
  const Vector y = data.targets.col(row);
  const Eigen::Index N = data.phi.rows();
  const auto k = static_cast<Eigen::Index>(cols.size());
  RowFit fit{Vector::Zero(data.phi.cols()), Matrix::Zero(k, k), 0.0};
  if (k == 0) {
    fit.sigma2 = N > 0 ? y.squaredNorm() / N : 0.0;
    return fit;
  }
  if (N <= k) {
    throw RankDeficiencyError("row " + std::to_string(row + 1) + ": " + std::to_string(N) +
                              " samples cannot determine " + std::to_string(k) + " parameters");
  }
  Matrix sub(N, k);
  for (Eigen::Index c = 0; c < k; ++c) sub.col(c) = data.phi.col(cols[c]);

  const Eigen::JacobiSVD<Matrix> svd(sub, Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  if (sv(0) == 0.0 || sv(k - 1) <= 1e-10 * sv(0)) {
    const Vector null = svd.matrixV().col(k - 1);
    std::vector<int> involved;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (std::abs(null(c)) > 1e-6) involved.push_back(cols[c]);
    }
    throw RankDeficiencyError("row " + std::to_string(row + 1) + ": collinear monomials {" +
                              JoinNames(data.monomial_names, involved) + "}");
  }

  const Eigen::HouseholderQR<Matrix> qr(sub);
  const Vector sol = qr.solve(y);
  const double rss = (y - sub * sol).squaredNorm();
  fit.sigma2 = rss / static_cast<double>(N - k);
  const Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix Rinv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  fit.covariance = fit.sigma2 * Rinv * Rinv.transpose();
  for (Eigen::Index c = 0; c < k; ++c) fit.theta(cols[c]) = sol(c);
  return fit;
}

std::vector<int> Columns(const BoolMatrix& support, int row) {
  std::vector<int> cols;
  for (int j = 0; j < support.cols(); ++j) {
    if (support(row, j)) cols.push_back(j);
  }
  return cols;
}

}  // namespace

std::vector<int> EstimationResult::SupportColumns(int row) const { return Columns(support, row); }

RegressionData BuildRegression(const std::vector<Trajectory>& dataset, const ComplexMatrix& complexes,
                               const RegressionOptions& options) {
  if (dataset.empty()) throw ContractError("no trajectories given");
  const int n = complexes.num_species();
  const int m = complexes.num_complexes();
  const double h = dataset.front().h;
  if (!(h > 0.0)) throw ContractError("sample step must be positive");
  Eigen::Index total = 0;
  for (size_t e = 0; e < dataset.size(); ++e) {
    const Trajectory& t = dataset[e];
    if (t.num_samples() < 2) {
      throw ContractError("experiment " + std::to_string(e + 1) + " has fewer than 2 samples");
    }
    if (std::abs(t.h - h) > 1e-9 * h) {
      throw ContractError("experiment " + std::to_string(e + 1) + " uses step " + std::to_string(t.h) +
                          ", expected " + std::to_string(h));
    }
    if (t.states.cols() != n) {
      throw ContractError("experiment " + std::to_string(e + 1) + " has the wrong species count");
    }
    if (!options.allow_negative_states && (t.states.array() < 0.0).any()) {
      throw ContractError("experiment " + std::to_string(e + 1) +
                          " contains negative states (allow them explicitly to proceed)");
    }
    total += t.num_samples() - 1;
  }

  RegressionData data;
  data.h = h;
  data.targets.resize(total, n);
  data.phi.resize(total, m);
  for (int j = 0; j < m; ++j) data.monomial_names.push_back(complexes.Formula(j));
  Eigen::Index row = 0;
  for (const Trajectory& t : dataset) {
    for (int k = 1; k < t.num_samples(); ++k, ++row) {
      const Vector prev = t.states.row(k - 1).transpose();
      data.phi.row(row) = MonomialEval(complexes, prev).transpose();
      data.targets.row(row) = (t.states.row(k) - t.states.row(k - 1)) / h;
    }
  }
  return data;
}

EstimationResult LseFit(const RegressionData& data, const BoolMatrix& zero_mask) {
  const int n = static_cast<int>(data.targets.cols());
  const int m = static_cast<int>(data.phi.cols());
  if (zero_mask.rows() != n || zero_mask.cols() != m) {
    throw ContractError("zero mask must be " + std::to_string(n) + "x" + std::to_string(m));
  }
  EstimationResult result;
  result.method = EstimationResult::Method::kLse;
  result.support = !zero_mask.array();
  result.M = Matrix::Zero(n, m);
  result.sigma2 = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    RowFit fit = FitRow(data, i, Columns(result.support, i));
    result.M.row(i) = fit.theta.transpose();
    result.sigma2(i) = fit.sigma2;
    result.covariance.push_back(std::move(fit.covariance));
  }
  return result;
}

Vector WeightedL1Solve(const Matrix& phi, const Vector& y, const Vector& weights, double lambda,
                       const WeightedL1Options& options) {
  if (weights.size() != phi.cols()) throw ContractError("one weight per column is required");
  if ((weights.array() < 0.0).any() || weights.hasNaN()) throw ContractError("weights must be >= 0");
  if (!(lambda >= 0.0)) throw ContractError("lambda must be nonnegative");
  if (lambda == 0.0) {
    std::vector<int> free;
    for (int j = 0; j < weights.size(); ++j) {
      if (std::isfinite(weights(j))) free.push_back(j);
    }
    return LeastSquaresOnFree(phi, y, free);
  }
  return WeightedL1Gram(MakeGram(phi, y), weights, lambda, options);
}

PosteriorMoments ComputePosteriorMoments(const Matrix& phi, const Vector& y, const Vector& gamma,
                                         double lambda) {
  if (!(lambda > 0.0)) throw ContractError("lambda must be positive");
  if ((gamma.array() < 0.0).any()) throw ContractError("gamma must be nonnegative");
  return PosteriorGram(MakeGram(phi, y), gamma, lambda);
}

Vector ZUpdate(const Matrix& phi, const Vector& gamma, double lambda) {
  if (!(lambda > 0.0)) throw ContractError("lambda must be positive");
  if ((gamma.array() < 0.0).any()) throw ContractError("gamma must be nonnegative");
  return ZUpdateGram(MakeGram(phi, Vector::Zero(phi.rows())), gamma, lambda);
}

double LogDetSigmaY(const Matrix& phi, const Vector& gamma, double lambda) {
  if (!(lambda > 0.0)) throw ContractError("lambda must be positive");
  return LogDetGram(MakeGram(phi, Vector::Zero(phi.rows())), gamma, lambda);
}

EstimationResult SblFit(const RegressionData& data, const SblOptions& options) {
  const int n = static_cast<int>(data.targets.cols());
  const int m = static_cast<int>(data.phi.cols());
  if (options.lambda && !(*options.lambda > 0.0)) throw ContractError("lambda must be positive");

  EstimationResult result;
  result.method = EstimationResult::Method::kSbl;
  result.M = Matrix::Zero(n, m);
  result.support = BoolMatrix::Constant(n, m, false);
  result.sigma2 = Vector::Zero(n);
  result.lambda = Vector::Zero(n);
  result.covariance.resize(n);
  result.gamma.resize(n);
  result.trace.resize(n);

  const Matrix G = data.phi.transpose() * data.phi;
  std::vector<std::string> row_warnings(n);
  detail::ParallelFor(n, options.threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    const Vector y = data.targets.col(i);
    const Gram g{G, data.phi.transpose() * y, y.squaredNorm(), data.rows()};

    double lambda;
    if (options.lambda) {
      lambda = *options.lambda;
    } else {
      std::vector<int> all(m);
      for (int j = 0; j < m; ++j) all[j] = j;
      const Vector ls = LeastSquaresOnFree(data.phi, y, all);
      const double dof = std::max(1, g.n - m);
      lambda = ResidualSquared(g, ls) / dof;
      lambda = std::max(lambda, 1e-12 * g.yy / std::max(1, g.n));
      if (!(lambda > 0.0)) lambda = 1.0;
    }
    result.lambda(i) = lambda;

    SblTrace& trace = result.trace[i];
    Vector z = Vector::Ones(m);
    Vector gamma = Vector::Zero(m);
    for (int it = 1; it <= options.max_iterations; ++it) {
      const Vector theta = WeightedL1Gram(g, z.cwiseMax(0.0).cwiseSqrt(), lambda, options.l1);
      if (it == 1) trace.first_theta = theta;
      Vector next(m);
      double quad = 0.0;
      for (int j = 0; j < m; ++j) {
        next(j) = z(j) > 0.0 ? std::abs(theta(j)) / std::sqrt(z(j)) : 0.0;
        if (next(j) > 0.0) quad += theta(j) * theta(j) / next(j);
      }
      trace.cost.push_back(ResidualSquared(g, theta) / lambda + quad + LogDetGram(g, next, lambda));
      trace.gamma.push_back(next);
      trace.iterations = it;
      const double change = (next - gamma).lpNorm<Eigen::Infinity>();
      const double ref = gamma.lpNorm<Eigen::Infinity>();
      gamma = next;
      z = ZUpdateGram(g, gamma, lambda);
      if (it > 1 && change <= options.gamma_tol * std::max(ref, std::numeric_limits<double>::min())) {
        trace.converged = true;
        break;
      }
      if (ref == 0.0 && gamma.isZero(0.0)) {
        trace.converged = true;
        break;
      }
    }
    if (!trace.converged) {
      row_warnings[i] = "row " + std::to_string(i + 1) + ": SBL stopped after " +
                        std::to_string(options.max_iterations) + " iterations without converging";
    }
    result.gamma[i] = gamma;

    std::vector<int> cols;
    for (int j = 0; j < m; ++j) {
      if (gamma(j) > options.gamma_eps) {
        cols.push_back(j);
        result.support(i, j) = true;
      }
    }
    // Debiasing refit on the recovered support; the posterior covariance on
    // that support describes the uncertainty.
    const RowFit fit = FitRow(data, i, cols);
    result.M.row(i) = fit.theta.transpose();
    result.sigma2(i) = fit.sigma2;
    const Matrix post = PosteriorGram(g, gamma, lambda).covariance;
    Matrix cov(cols.size(), cols.size());
    for (size_t a = 0; a < cols.size(); ++a)
      for (size_t b = 0; b < cols.size(); ++b) cov(a, b) = post(cols[a], cols[b]);
    result.covariance[i] = cov;
  });
  for (auto& w : row_warnings) {
    if (!w.empty()) result.warnings.push_back(std::move(w));
  }
  return result;
}

UncertaintyRegion ConfidenceRegion(const EstimationResult& result, double alpha,
                                   std::vector<std::string>* warnings) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in (0, 1)");
  const int df = result.FreeParameters();
  if (df == 0) return UncertaintyRegion::Exact(result.M);
  const double quantile =
      boost::math::quantile(boost::math::chi_squared(static_cast<double>(df)), 1.0 - alpha);
  const double scale = 1.0 / std::sqrt(quantile);

  Matrix W = Matrix::Zero(df, df);
  int offset = 0;
  for (int i = 0; i < result.M.rows(); ++i) {
    const Matrix& C = result.covariance[i];
    const auto k = C.rows();
    if (k == 0) continue;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (C + C.transpose()));
    const Vector ev = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(ev.maxCoeff(), 0.0);
    Vector inv_sqrt(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (ev(j) > cutoff && ev(j) > 0.0) {
        inv_sqrt(j) = 1.0 / std::sqrt(ev(j));
      } else {
        inv_sqrt(j) = 0.0;
        if (warnings) {
          warnings->push_back("row " + std::to_string(i + 1) +
                              ": singular covariance block, using the pseudo-inverse");
        }
      }
    }
    W.block(offset, offset, k, k) =
        scale * eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    offset += static_cast<int>(k);
  }
  return UncertaintyRegion::Ellipsoidal(result.M, W, 1.0, !result.support.array());
}

}  // namespace crnreal
