#pragma once

// Core types for mass-action kinetic systems and their reaction-network
// realizations.
//
// A kinetic system is the polynomial ODE  dx/dt = M * psi(x)  where psi_j(x)
// is the monomial prod_i x_i^Y(i,j) attached to complex j. A reaction network
// on the same complexes is encoded by a Kirchhoff matrix A whose off-diagonal
// entry A(j,i) is the rate of reaction C_i -> C_j; it reproduces the dynamics
// iff M = Y * A.

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace crnreal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BigInt = boost::multiprecision::cpp_int;

/// Rate coefficients at or below this value are treated as absent reactions.
inline constexpr double kSupportEpsilon = 1e-6;

/// Raised when arguments violate an operation's preconditions (dimension
/// mismatches, malformed matrices, out-of-range indices).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reaction C_source -> C_target. Indices are zero-based; display is one-based.
struct Edge {
  int source = 0;
  int target = 0;

  auto operator<=>(const Edge&) const = default;
  std::string ToString() const;  // "C1->C2"
};

using EdgeSet = std::set<Edge>;

/// Parses "C4->C1" (also accepts "C4 -> C1" and "4->1").
Edge ParseEdge(const std::string& text);
std::string EdgeSetToString(const EdgeSet& edges);

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(IntMatrix Y, std::vector<std::string> species_names = {},
                         std::vector<std::string> complex_labels = {});

  int num_species() const { return static_cast<int>(Y_.rows()); }
  int num_complexes() const { return static_cast<int>(Y_.cols()); }
  const IntMatrix& Y() const { return Y_; }
  Matrix AsReal() const { return Y_.cast<double>(); }

  const std::vector<std::string>& species_names() const { return species_names_; }
  const std::string& label(int j) const { return complex_labels_.at(j); }

  /// Formula of complex j, e.g. "X1+X3", "2X2", or "0" for the zero complex.
  std::string Formula(int j) const;

 private:
  IntMatrix Y_;
  std::vector<std::string> species_names_;
  std::vector<std::string> complex_labels_;
};

struct KineticViolation {
  int species = 0;
  int complex = 0;
};

struct KineticCheck {
  bool kinetic = true;
  std::vector<KineticViolation> violations;
};

class NonKineticError : public std::runtime_error {
 public:
  explicit NonKineticError(std::vector<KineticViolation> violations);
  const std::vector<KineticViolation>& violations() const { return violations_; }

 private:
  std::vector<KineticViolation> violations_;
};

/// A negative coefficient M(i,j) requires species i in complex j.
KineticCheck IsKinetic(const ComplexMatrix& complexes, const Matrix& M);

class KineticSystem {
 public:
  /// Throws ContractError on a dimension mismatch and NonKineticError when
  /// the sign condition fails.
  KineticSystem(ComplexMatrix complexes, Matrix M);

  const ComplexMatrix& complexes() const { return complexes_; }
  const Matrix& M() const { return M_; }
  int num_species() const { return complexes_.num_species(); }
  int num_complexes() const { return complexes_.num_complexes(); }

 private:
  ComplexMatrix complexes_;
  Matrix M_;
};

inline KineticCheck IsKinetic(const KineticSystem& system) {
  return IsKinetic(system.complexes(), system.M());
}

class KirchhoffMatrix {
 public:
  KirchhoffMatrix() = default;

  /// Zero matrix on m complexes.
  explicit KirchhoffMatrix(int m);

  /// Validates sign and column-sum structure. Off-diagonals in [-tol, 0) are
  /// clamped to zero and the diagonal is recomputed from its column.
  static KirchhoffMatrix FromMatrix(const Matrix& A, double tol = 1e-10);

  /// Builds A from reaction rates. Rates must be nonnegative.
  static KirchhoffMatrix FromRates(int m, const std::vector<std::pair<Edge, double>>& rates);

  int num_complexes() const { return static_cast<int>(A_.rows()); }
  const Matrix& A() const { return A_; }
  double rate(const Edge& e) const { return A_(e.target, e.source); }

  /// Reactions with rate strictly above eps.
  EdgeSet Support(double eps = kSupportEpsilon) const;

 private:
  Matrix A_;
};

struct Trajectory {
  Vector times;   // N+1 instants
  Matrix states;  // (N+1) x n, one row per sample
  double h = 0.0;

  int num_samples() const { return static_cast<int>(times.size()); }
};

struct Realization {
  KirchhoffMatrix kirchhoff;
  EdgeSet support;
  Matrix m_used;
};

/// psi_j(x) = prod_i x_i^Y(i,j), with 0^0 = 1.
Vector MonomialEval(const ComplexMatrix& complexes, const Eigen::Ref<const Vector>& x);

/// M = Y * A.
Matrix AssembleCoefficients(const ComplexMatrix& complexes, const KirchhoffMatrix& A);

struct CanonicalNetwork {
  ComplexMatrix complexes;  // original complexes first, then added products
  KirchhoffMatrix kirchhoff;
};

/// Each nonzero M(i,j) becomes the reaction y_j -> y_j + sign(M(i,j)) e_i with
/// rate |M(i,j)|. Throws NonKineticError when the sign condition fails.
CanonicalNetwork CanonicalRealization(const ComplexMatrix& complexes, const Matrix& M);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct SimulationOptions {
  bool clamp_nonnegative = true;
};

/// Forward Euler with floor(T/h) steps. With clamping disabled the raw Euler
/// iterate is returned, which may leave the nonnegative orthant.
Trajectory Simulate(const KineticSystem& system, const Eigen::Ref<const Vector>& x0, double T,
                    double h, const SimulationOptions& options = {});

/// Number of nonempty edge subsets of a dense realization with at least
/// min_edges edges: sum_{i=min_edges}^{dense_edge_count} C(dense_edge_count, i).
BigInt RMax(int dense_edge_count, int min_edges = 1);

/// realization_count / RMax(dense_edge_count).
double InfoRatio(const BigInt& realization_count, int dense_edge_count);

}  // namespace crnreal
