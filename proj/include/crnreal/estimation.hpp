#pragma once

// Identification of M from sampled trajectories: forward-difference
// regression, equality-constrained least squares, and Sparse Bayesian
// Learning via iterated reweighted L1.

#include <optional>
#include <string>
#include <vector>

#include "crnreal/kinetic.hpp"
#include "crnreal/realization.hpp"

namespace crnreal {

/// Stacked regression problem. Row k of `phi` holds the monomials at the
/// sample preceding the difference in row k of `targets` (one column per
/// species).
struct RegressionData {
  Matrix targets;  // N x n
  Matrix phi;      // N x m
  double h = 0.0;
  std::vector<std::string> monomial_names;

  int rows() const { return static_cast<int>(phi.rows()); }
};

struct RegressionOptions {
  bool allow_negative_states = false;
};

RegressionData BuildRegression(const std::vector<Trajectory>& dataset,
                               const ComplexMatrix& complexes,
                               const RegressionOptions& options = {});

class RankDeficiencyError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct SblTrace {
  std::vector<double> cost;         // upper-bound cost after each iteration
  std::vector<Vector> gamma;        // gamma after each iteration
  Vector first_theta;               // the plain weighted-L1 (LASSO) solution
  int iterations = 0;
  bool converged = false;
};

struct EstimationResult {
  enum class Method { kLse, kSbl };

  Method method = Method::kLse;
  Matrix M;
  BoolMatrix support;                    // true where the entry is estimated
  std::vector<Matrix> covariance;        // per row, over that row's support columns
  Vector sigma2;                         // residual variance per row
  std::vector<Vector> gamma;             // SBL only
  std::vector<SblTrace> trace;           // SBL only
  Vector lambda;                         // SBL only, per row
  std::vector<std::string> warnings;

  std::vector<int> SupportColumns(int row) const;
  int FreeParameters() const { return static_cast<int>(support.count()); }
};

/// Least squares per row over the columns where `zero_mask` is false.
/// Throws RankDeficiencyError naming the collinear monomials.
EstimationResult LseFit(const RegressionData& data, const BoolMatrix& zero_mask);

struct WeightedL1Options {
  double gap_tol = 1e-12;  // relative to the primal objective
  int max_sweeps = 200000;
};

/// argmin ||y - Phi theta||^2 + 2 lambda sum w_i |theta_i|. Infinite weights
/// pin the coordinate at 0; lambda = 0 gives (minimum-norm) least squares.
Vector WeightedL1Solve(const Matrix& phi, const Vector& y, const Vector& weights, double lambda,
                       const WeightedL1Options& options = {});

struct PosteriorMoments {
  Vector mean;
  Matrix covariance;
};

PosteriorMoments ComputePosteriorMoments(const Matrix& phi, const Vector& y, const Vector& gamma,
                                         double lambda);

/// z_i = phi_i^T (lambda I + Phi Gamma Phi^T)^{-1} phi_i.
Vector ZUpdate(const Matrix& phi, const Vector& gamma, double lambda);

/// log det(lambda I + Phi Gamma Phi^T), computed in the m-dimensional form.
double LogDetSigmaY(const Matrix& phi, const Vector& gamma, double lambda);

struct SblOptions {
  std::optional<double> lambda;  // default: per-row full-support LS residual variance
  double gamma_tol = 1e-6;
  int max_iterations = 50;
  double gamma_eps = 1e-8;
  WeightedL1Options l1;
  int threads = 1;
};

EstimationResult SblFit(const RegressionData& data, const SblOptions& options = {});

/// Joint (1 - alpha) chi-square confidence ellipsoid over the estimated
/// entries; entries outside the support are pinned to zero.
UncertaintyRegion ConfidenceRegion(const EstimationResult& result, double alpha,
                                   std::vector<std::string>* warnings = nullptr);

}  // namespace crnreal
