#include "crnreal/kinetic.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <sstream>

namespace crnreal {

std::string Edge::ToString() const {
  return "C" + std::to_string(source + 1) + "->C" + std::to_string(target + 1);
}

Edge ParseEdge(const std::string& text) {
  static const std::regex pattern(R"(\s*[Cc]?(\d+)\s*->\s*[Cc]?(\d+)\s*)");
  std::smatch match;
  if (!std::regex_match(text, match, pattern)) {
    throw ContractError("cannot parse edge '" + text + "' (expected e.g. C4->C1)");
  }
  const int source = std::stoi(match[1]) - 1;
  const int target = std::stoi(match[2]) - 1;
  if (source < 0 || target < 0 || source == target) {
    throw ContractError("invalid edge '" + text + "'");
  }
  return {source, target};
}

std::string EdgeSetToString(const EdgeSet& edges) {
  std::string out = "{";
  bool first = true;
  for (const Edge& e : edges) {
    if (!first) out += ", ";
    out += e.ToString();
    first = false;
  }
  return out + "}";
}

ComplexMatrix::ComplexMatrix(IntMatrix Y, std::vector<std::string> species_names,
                             std::vector<std::string> complex_labels)
    : Y_(std::move(Y)),
      species_names_(std::move(species_names)),
      complex_labels_(std::move(complex_labels)) {
  if (Y_.rows() < 1 || Y_.cols() < 1) {
    throw ContractError("complex matrix needs at least one species and one complex");
  }
  if ((Y_.array() < 0).any()) {
    throw ContractError("complex matrix entries must be nonnegative");
  }
  for (int a = 0; a < Y_.cols(); ++a) {
    for (int b = a + 1; b < Y_.cols(); ++b) {
      if (Y_.col(a) == Y_.col(b)) {
        throw ContractError("complexes " + std::to_string(a + 1) + " and " +
                            std::to_string(b + 1) + " are identical");
      }
    }
  }
  if (species_names_.empty()) {
    for (int i = 0; i < Y_.rows(); ++i) species_names_.push_back("X" + std::to_string(i + 1));
  }
  if (complex_labels_.empty()) {
    for (int j = 0; j < Y_.cols(); ++j) complex_labels_.push_back("C" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(species_names_.size()) != Y_.rows() ||
      static_cast<Eigen::Index>(complex_labels_.size()) != Y_.cols()) {
    throw ContractError("species/complex name count does not match the complex matrix");
  }
}

std::string ComplexMatrix::Formula(int j) const {
  std::string out;
  for (int i = 0; i < Y_.rows(); ++i) {
    const int a = Y_(i, j);
    if (a == 0) continue;
    if (!out.empty()) out += "+";
    if (a > 1) out += std::to_string(a);
    out += species_names_[i];
  }
  return out.empty() ? "0" : out;
}

NonKineticError::NonKineticError(std::vector<KineticViolation> violations)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "coefficient matrix is not kinetic; violations at";
        for (const auto& v : violations) os << " (" << v.species + 1 << "," << v.complex + 1 << ")";
        return os.str();
      }()),
      violations_(std::move(violations)) {}

KineticCheck IsKinetic(const ComplexMatrix& complexes, const Matrix& M) {
  if (M.rows() != complexes.num_species() || M.cols() != complexes.num_complexes()) {
    throw ContractError("coefficient matrix dimensions do not match the complex matrix");
  }
  KineticCheck check;
  for (int j = 0; j < M.cols(); ++j) {
    for (int i = 0; i < M.rows(); ++i) {
      if (M(i, j) < 0.0 && complexes.Y()(i, j) == 0) {
        check.kinetic = false;
        check.violations.push_back({i, j});
      }
    }
  }
  return check;
}

KineticSystem::KineticSystem(ComplexMatrix complexes, Matrix M)
    : complexes_(std::move(complexes)), M_(std::move(M)) {
  auto check = IsKinetic(complexes_, M_);
  if (!check.kinetic) throw NonKineticError(std::move(check.violations));
}

KirchhoffMatrix::KirchhoffMatrix(int m) : A_(Matrix::Zero(m, m)) {}

KirchhoffMatrix KirchhoffMatrix::FromMatrix(const Matrix& A, double tol) {
  if (A.rows() != A.cols()) throw ContractError("Kirchhoff matrix must be square");
  KirchhoffMatrix out(static_cast<int>(A.rows()));
  for (int j = 0; j < A.cols(); ++j) {
    double column_sum = 0.0;
    double scale = 1.0;
    for (int i = 0; i < A.rows(); ++i) {
      column_sum += A(i, j);
      scale = std::max(scale, std::abs(A(i, j)));
      if (i == j) continue;
      if (A(i, j) < -tol) {
        throw ContractError("Kirchhoff off-diagonal (" + std::to_string(i + 1) + "," +
                            std::to_string(j + 1) + ") is negative");
      }
      out.A_(i, j) = std::max(A(i, j), 0.0);
    }
    if (std::abs(column_sum) > tol * scale) {
      throw ContractError("Kirchhoff column " + std::to_string(j + 1) + " does not sum to zero");
    }
    out.A_(j, j) = -(out.A_.col(j).sum());
  }
  return out;
}

KirchhoffMatrix KirchhoffMatrix::FromRates(int m,
                                           const std::vector<std::pair<Edge, double>>& rates) {
  KirchhoffMatrix out(m);
  for (const auto& [e, k] : rates) {
    if (e.source < 0 || e.source >= m || e.target < 0 || e.target >= m || e.source == e.target) {
      throw ContractError("edge " + e.ToString() + " out of range");
    }
    if (k < 0.0) throw ContractError("negative rate for " + e.ToString());
    out.A_(e.target, e.source) += k;
    out.A_(e.source, e.source) -= k;
  }
  return out;
}

EdgeSet KirchhoffMatrix::Support(double eps) const {
  EdgeSet support;
  for (int i = 0; i < A_.cols(); ++i) {
    for (int j = 0; j < A_.rows(); ++j) {
      if (i != j && A_(j, i) > eps) support.insert({i, j});
    }
  }
  return support;
}

Vector MonomialEval(const ComplexMatrix& complexes, const Eigen::Ref<const Vector>& x) {
  if (x.size() != complexes.num_species()) {
    throw ContractError("state has " + std::to_string(x.size()) + " entries, expected " +
                        std::to_string(complexes.num_species()));
  }
  const IntMatrix& Y = complexes.Y();
  Vector psi = Vector::Ones(Y.cols());
  for (int j = 0; j < Y.cols(); ++j) {
    for (int i = 0; i < Y.rows(); ++i) {
      const int a = Y(i, j);
      if (a == 0) continue;  // 0^0 = 1
      double p = x(i);
      for (int k = 1; k < a; ++k) p *= x(i);
      psi(j) *= p;
    }
  }
  return psi;
}

Matrix AssembleCoefficients(const ComplexMatrix& complexes, const KirchhoffMatrix& A) {
  if (A.num_complexes() != complexes.num_complexes()) {
    throw ContractError("Kirchhoff matrix size does not match the complex count");
  }
  return complexes.AsReal() * A.A();
}

CanonicalNetwork CanonicalRealization(const ComplexMatrix& complexes, const Matrix& M) {
  auto check = IsKinetic(complexes, M);
  if (!check.kinetic) throw NonKineticError(std::move(check.violations));

  const int n = complexes.num_species();
  const int m = complexes.num_complexes();
  std::vector<Eigen::VectorXi> columns;
  for (int j = 0; j < m; ++j) columns.push_back(complexes.Y().col(j));

  auto find_or_add = [&columns](const Eigen::VectorXi& y) {
    for (size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == y) return static_cast<int>(c);
    }
    columns.push_back(y);
    return static_cast<int>(columns.size()) - 1;
  };

  std::vector<std::pair<Edge, double>> rates;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      const double c = M(i, j);
      if (c == 0.0) continue;
      Eigen::VectorXi product = complexes.Y().col(j);
      product(i) += c > 0.0 ? 1 : -1;
      rates.push_back({{j, find_or_add(product)}, std::abs(c)});
    }
  }

  IntMatrix Y(n, static_cast<Eigen::Index>(columns.size()));
  for (size_t c = 0; c < columns.size(); ++c) Y.col(static_cast<Eigen::Index>(c)) = columns[c];
  const int total = static_cast<int>(columns.size());
  return {ComplexMatrix(std::move(Y), complexes.species_names()),
          KirchhoffMatrix::FromRates(total, rates)};
}

Trajectory Simulate(const KineticSystem& system, const Eigen::Ref<const Vector>& x0, double T,
                    double h, const SimulationOptions& options) {
  const int n = system.num_species();
  if (x0.size() != n) throw ContractError("initial state has the wrong dimension");
  if (!(h > 0.0) || !(T >= h)) throw ContractError("simulation needs h > 0 and T >= h");
  if ((x0.array() < 0.0).any()) throw ContractError("initial state must be nonnegative");

  const int steps = static_cast<int>(std::floor(T / h + 1e-9));
  Trajectory traj;
  traj.h = h;
  traj.times.resize(steps + 1);
  traj.states.resize(steps + 1, n);
  traj.times(0) = 0.0;
  traj.states.row(0) = x0.transpose();

  Vector x = x0;
  for (int k = 1; k <= steps; ++k) {
    x += h * (system.M() * MonomialEval(system.complexes(), x));
    if (!x.allFinite()) {
      throw DivergenceError(k, "simulation diverged at step " + std::to_string(k));
    }
    if (options.clamp_nonnegative) x = x.cwiseMax(0.0);
    traj.times(k) = k * h;
    traj.states.row(k) = x.transpose();
  }
  return traj;
}

BigInt RMax(int dense_edge_count, int min_edges) {
  if (min_edges < 1 || dense_edge_count < min_edges) {
    throw ContractError("RMax needs dense_edge_count >= min_edges >= 1");
  }
  BigInt total = 0;
  BigInt binom = 1;  // C(R_d, i), updated incrementally
  for (int i = 0; i <= dense_edge_count; ++i) {
    if (i >= min_edges) total += binom;
    binom = binom * (dense_edge_count - i) / (i + 1);
  }
  return total;
}

double InfoRatio(const BigInt& realization_count, int dense_edge_count) {
  if (realization_count < 1) throw ContractError("realization count must be at least 1");
  return realization_count.convert_to<double>() / RMax(dense_edge_count).convert_to<double>();
}

}  // namespace crnreal
