#pragma once

// Dense realizations of exact and uncertain kinetic systems.
//
// The reaction rates k_e of every ordered complex pair are the decision
// variables; M = Y A(k) ties them to the coefficient matrix, which is either
// fixed (exact case) or free inside a spherical/ellipsoidal region. The dense
// realization is the unique realization with maximal edge support; every other
// realization of the same problem uses a subset of its edges.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crnreal/conic.hpp"
#include "crnreal/kinetic.hpp"

namespace crnreal {

/// Admissible coefficient matrices around a nominal M. Coordinates of vec(M)
/// are taken in row-major order (index i * m + j).
class UncertaintyRegion {
 public:
  enum class Kind { kExact, kSpherical, kEllipsoidal };

  static UncertaintyRegion Exact(Matrix nominal);
  static UncertaintyRegion Spherical(Matrix nominal, double rho);

  /// || transform * (vec(M) - vec(nominal))[free] || <= level, where the free
  /// coordinates are those not marked in `fixed`; fixed coordinates equal the
  /// nominal. An empty `fixed` leaves every coordinate free.
  static UncertaintyRegion Ellipsoidal(Matrix nominal, Matrix transform, double level = 1.0,
                                       BoolMatrix fixed = {});

  Kind kind() const { return kind_; }
  const Matrix& nominal() const { return nominal_; }
  double rho() const { return rho_; }
  const Matrix& transform() const { return transform_; }
  double level() const { return level_; }
  const BoolMatrix& fixed() const { return fixed_; }

  /// Row-major vec indices that are not pinned to the nominal.
  std::vector<int> FreeCoordinates() const;

  /// Normalized distance from the nominal: 0 at the nominal, 1 on the
  /// boundary. Exact regions return 0 or +inf.
  double Distance(const Matrix& M) const;
  bool Contains(const Matrix& M, double tol = 1e-8) const;

 private:
  Kind kind_ = Kind::kExact;
  Matrix nominal_;
  double rho_ = 0.0;
  Matrix transform_;
  double level_ = 1.0;
  BoolMatrix fixed_;
};

struct RealizationProblem {
  ComplexMatrix complexes;
  UncertaintyRegion region;
  EdgeSet excluded;

  void Validate() const;
};

struct RealizationOptions {
  SolverOptions solver;
  double support_eps = kSupportEpsilon;
  double rate_upper_bound = 1e4;
  /// Called with every program before it is solved (debug dumps).
  std::function<void(const ConicProgram&)> program_hook;
};

/// All ordered pairs (s, t), s != t, in source-major order; the position in
/// this list is the rate variable index of the program.
std::vector<Edge> AllEdges(int num_complexes);
int EdgeVariable(const Edge& e, int num_complexes);

/// Variables: one rate per ordered complex pair, followed by vec(M) unless the
/// region is exact. The objective sums the rates of `objective_edges`.
ConicProgram BuildProgram(const RealizationProblem& problem, const EdgeSet& objective_edges,
                          const RealizationOptions& options = {});

struct DenseOutcome {
  std::optional<Realization> realization;
  std::string certificate;  // set when no realization exists
  int iterations = 0;
  int solves = 0;

  bool feasible() const { return realization.has_value(); }
};

/// Iterated LP/SOCP computation of the dense realization. Throws
/// NumericFailure when a subproblem cannot be decided.
DenseOutcome DenseRealization(const RealizationProblem& problem,
                              const RealizationOptions& options = {});

/// Dense realization with additional edges forced to zero.
DenseOutcome ConstrainedDense(const RealizationProblem& problem, const EdgeSet& extra_exclusions,
                              const RealizationOptions& options = {});

}  // namespace crnreal
