#pragma once

// Linear and second-order-cone programs in the form
//
//   maximize    c' v
//   subject to  A_eq v = b_eq
//               lower <= v <= upper          (+-infinity allowed)
//               || W (v[sel] - center) ||_2 <= radius   for each cone
//
// solved by a primal-dual interior-point method on the homogeneous
// self-dual embedding, which also yields infeasibility certificates.

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crnreal/kinetic.hpp"

namespace crnreal {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SocConstraint {
  std::vector<int> selector;  // indices into v
  Vector center;              // same length as selector
  Matrix transform;           // rows x selector.size(); identity when empty
  double radius = 0.0;
};

struct ConicProgram {
  int dim = 0;
  Vector objective;  // maximized
  Matrix eq_matrix;  // rows x dim
  Vector eq_rhs;
  Vector lower;
  Vector upper;
  std::vector<SocConstraint> cones;

  /// Empty program on `dim` free variables with zero objective.
  static ConicProgram Free(int dim);

  /// Throws ContractError when sizes or indices are inconsistent.
  void Validate() const;

  nlohmann::json ToJson() const;
  static ConicProgram FromJson(const nlohmann::json& j);
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericFailure };

std::string ToString(SolveStatus status);

struct SolveStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double dual_objective = 0.0;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::kNumericFailure;
  std::optional<Vector> solution;
  double objective = 0.0;
  SolveStats stats;
  std::string note;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 100;
};

class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SolveOutcome Solve(const ConicProgram& program, const SolverOptions& options = {});

/// Solves with a zero objective. Throws NumericFailure when the solver cannot
/// decide.
bool IsFeasible(const ConicProgram& program, const SolverOptions& options = {});

}  // namespace crnreal
