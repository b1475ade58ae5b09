#include "crnreal/realization.hpp"

#include <cmath>

namespace crnreal {

namespace {

Vector VecRowMajor(const Matrix& M) {
  Vector v(M.size());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) v(i * M.cols() + j) = M(i, j);
  return v;
}

Matrix UnvecRowMajor(const Eigen::Ref<const Vector>& v, int n, int m) {
  Matrix M(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) M(i, j) = v(i * m + j);
  return M;
}

}  // namespace

UncertaintyRegion UncertaintyRegion::Exact(Matrix nominal) {
  UncertaintyRegion r;
  r.kind_ = Kind::kExact;
  r.nominal_ = std::move(nominal);
  return r;
}

UncertaintyRegion UncertaintyRegion::Spherical(Matrix nominal, double rho) {
  if (!(rho >= 0.0)) throw ContractError("spherical radius must be nonnegative");
  UncertaintyRegion r;
  r.kind_ = Kind::kSpherical;
  r.nominal_ = std::move(nominal);
  r.rho_ = rho;
  return r;
}

UncertaintyRegion UncertaintyRegion::Ellipsoidal(Matrix nominal, Matrix transform, double level,
                                                 BoolMatrix fixed) {
  if (!(level >= 0.0)) throw ContractError("ellipsoid level must be nonnegative");
  UncertaintyRegion r;
  r.kind_ = Kind::kEllipsoidal;
  r.nominal_ = std::move(nominal);
  r.level_ = level;
  if (fixed.size() == 0) fixed = BoolMatrix::Constant(r.nominal_.rows(), r.nominal_.cols(), false);
  if (fixed.rows() != r.nominal_.rows() || fixed.cols() != r.nominal_.cols()) {
    throw ContractError("fixed-coordinate mask does not match the nominal matrix");
  }
  r.fixed_ = std::move(fixed);
  const auto free = static_cast<Eigen::Index>(r.FreeCoordinates().size());
  if (transform.rows() != free || transform.cols() != free) {
    throw ContractError("ellipsoid transform must be square over the free coordinates");
  }
  r.transform_ = std::move(transform);
  return r;
}

std::vector<int> UncertaintyRegion::FreeCoordinates() const {
  std::vector<int> free;
  const auto m = nominal_.cols();
  for (int i = 0; i < nominal_.rows(); ++i) {
    for (int j = 0; j < m; ++j) {
      const bool pinned = kind_ == Kind::kExact || (kind_ == Kind::kEllipsoidal && fixed_(i, j));
      if (!pinned) free.push_back(static_cast<int>(i * m + j));
    }
  }
  return free;
}

double UncertaintyRegion::Distance(const Matrix& M) const {
  if (M.rows() != nominal_.rows() || M.cols() != nominal_.cols()) {
    throw ContractError("matrix dimensions do not match the region");
  }
  const Vector diff = VecRowMajor(M) - VecRowMajor(nominal_);
  switch (kind_) {
    case Kind::kExact:
      return diff.lpNorm<Eigen::Infinity>() == 0.0 ? 0.0 : kInf;
    case Kind::kSpherical:
      if (rho_ == 0.0) return diff.lpNorm<Eigen::Infinity>() == 0.0 ? 0.0 : kInf;
      return diff.norm() / rho_;
    case Kind::kEllipsoidal: {
      const std::vector<int> free = FreeCoordinates();
      double pinned_dev = 0.0;
      for (int idx = 0, f = 0; idx < diff.size(); ++idx) {
        if (f < static_cast<int>(free.size()) && free[f] == idx) {
          ++f;
        } else {
          pinned_dev = std::max(pinned_dev, std::abs(diff(idx)));
        }
      }
      if (pinned_dev > 0.0) return kInf;
      Vector d(free.size());
      for (size_t f = 0; f < free.size(); ++f) d(f) = diff(free[f]);
      const double dist = (transform_ * d).norm();
      return level_ == 0.0 ? (dist == 0.0 ? 0.0 : kInf) : dist / level_;
    }
  }
  return kInf;
}

bool UncertaintyRegion::Contains(const Matrix& M, double tol) const {
  const Vector diff = VecRowMajor(M) - VecRowMajor(nominal_);
  switch (kind_) {
    case Kind::kExact:
      return diff.lpNorm<Eigen::Infinity>() <= tol;
    case Kind::kSpherical:
      return diff.norm() <= rho_ + tol;
    case Kind::kEllipsoidal: {
      const std::vector<int> free = FreeCoordinates();
      Vector d(free.size());
      size_t f = 0;
      for (int idx = 0; idx < diff.size(); ++idx) {
        if (f < free.size() && free[f] == idx) {
          d(f++) = diff(idx);
        } else if (std::abs(diff(idx)) > tol) {
          return false;
        }
      }
      return (transform_ * d).norm() <= level_ + tol;
    }
  }
  return false;
}

void RealizationProblem::Validate() const {
  const int m = complexes.num_complexes();
  if (region.nominal().rows() != complexes.num_species() || region.nominal().cols() != m) {
    throw ContractError("nominal coefficient matrix does not match the complex matrix");
  }
  for (const Edge& e : excluded) {
    if (e.source == e.target || e.source < 0 || e.target < 0 || e.source >= m || e.target >= m) {
      throw ContractError("excluded edge " + e.ToString() + " is invalid");
    }
  }
}

std::vector<Edge> AllEdges(int num_complexes) {
  std::vector<Edge> edges;
  for (int s = 0; s < num_complexes; ++s)
    for (int t = 0; t < num_complexes; ++t)
      if (s != t) edges.push_back({s, t});
  return edges;
}

int EdgeVariable(const Edge& e, int num_complexes) {
  return e.source * (num_complexes - 1) + (e.target < e.source ? e.target : e.target - 1);
}

ConicProgram BuildProgram(const RealizationProblem& problem, const EdgeSet& objective_edges,
                          const RealizationOptions& options) {
  problem.Validate();
  const int n = problem.complexes.num_species();
  const int m = problem.complexes.num_complexes();
  const int num_rates = m * (m - 1);
  const int nm = n * m;
  const IntMatrix& Y = problem.complexes.Y();
  const UncertaintyRegion& region = problem.region;
  const bool exact = region.kind() == UncertaintyRegion::Kind::kExact;
  const int dim = num_rates + (exact ? 0 : nm);

  // Linear map k -> vec(Y A(k)): rate of s->t adds Y(:,t) - Y(:,s) to column s.
  Matrix G = Matrix::Zero(nm, num_rates);
  for (const Edge& e : AllEdges(m)) {
    const int var = EdgeVariable(e, m);
    for (int i = 0; i < n; ++i) G(i * m + e.source, var) = Y(i, e.target) - Y(i, e.source);
  }

  ConicProgram p = ConicProgram::Free(dim);
  p.lower.head(num_rates).setZero();
  p.upper.head(num_rates).setConstant(options.rate_upper_bound);
  for (const Edge& e : problem.excluded) p.upper(EdgeVariable(e, m)) = 0.0;
  for (const Edge& e : objective_edges) p.objective(EdgeVariable(e, m)) += 1.0;

  const Vector nominal = VecRowMajor(region.nominal());
  if (exact) {
    p.eq_matrix = G;
    p.eq_rhs = nominal;
    return p;
  }

  // vec(M) - G k = 0, plus pinned coordinates and the region cone.
  const std::vector<int> free = region.FreeCoordinates();
  const int pinned = nm - static_cast<int>(free.size());
  p.eq_matrix = Matrix::Zero(nm + pinned, dim);
  p.eq_rhs = Vector::Zero(nm + pinned);
  p.eq_matrix.topLeftCorner(nm, num_rates) = -G;
  p.eq_matrix.block(0, num_rates, nm, nm) = Matrix::Identity(nm, nm);
  for (int idx = 0, f = 0, row = nm; idx < nm; ++idx) {
    if (f < static_cast<int>(free.size()) && free[f] == idx) {
      ++f;
      continue;
    }
    p.eq_matrix(row, num_rates + idx) = 1.0;
    p.eq_rhs(row) = nominal(idx);
    ++row;
  }

  SocConstraint cone;
  for (int idx : free) cone.selector.push_back(num_rates + idx);
  cone.center.resize(static_cast<Eigen::Index>(free.size()));
  for (size_t f = 0; f < free.size(); ++f) cone.center(f) = nominal(free[f]);
  if (region.kind() == UncertaintyRegion::Kind::kSpherical) {
    cone.radius = region.rho();
  } else {
    cone.transform = region.transform();
    cone.radius = region.level();
  }
  p.cones.push_back(std::move(cone));
  return p;
}

namespace {

struct Witness {
  Vector rates;
  Matrix m_used;
};

class DenseSolver {
 public:
  DenseSolver(const RealizationProblem& problem, const RealizationOptions& options)
      : problem_(problem),
        options_(options),
        n_(problem.complexes.num_species()),
        m_(problem.complexes.num_complexes()) {}

  DenseOutcome Run() {
    DenseOutcome out;
    std::vector<Edge> candidates;
    for (const Edge& e : AllEdges(m_)) {
      if (!problem_.excluded.count(e)) candidates.push_back(e);
    }

    EdgeSet found;
    std::vector<Witness> witnesses;
    for (;;) {
      EdgeSet objective;
      for (const Edge& e : candidates) {
        if (!found.count(e)) objective.insert(e);
      }
      if (objective.empty() && !witnesses.empty()) break;
      ++out.iterations;
      std::optional<Witness> w = SolveFor(objective, out);
      if (!w) {
        if (!witnesses.empty()) {
          throw NumericFailure("dense realization: feasible problem reported infeasible");
        }
        out.certificate = "no realization exists under these constraints";
        return out;
      }
      bool added = false;
      for (const Edge& e : objective) {
        const double k = w->rates(EdgeVariable(e, m_));
        bool positive = k > options_.support_eps;
        if (!positive && k >= options_.support_eps / 10.0) {
          // Borderline magnitude: confirm by maximizing this edge alone.
          std::optional<Witness> single = SolveFor({e}, out);
          if (single && single->rates(EdgeVariable(e, m_)) > options_.support_eps) {
            positive = true;
            witnesses.push_back(*single);
          }
        }
        if (positive) {
          found.insert(e);
          added = true;
        }
      }
      witnesses.push_back(std::move(*w));
      if (!added) break;
    }

    // Representative with full support: maximize the summed found rates; if
    // that optimum sits on a vertex that drops some edge, maximize the
    // smallest found rate instead.
    Witness rep;
    if (!found.empty()) {
      std::optional<Witness> final_solve = SolveFor(found, out);
      if (!final_solve) throw NumericFailure("dense realization: final solve failed");
      rep = *final_solve;
      if (SupportOf(rep.rates) != found) {
        std::optional<Witness> balanced = SolveMaxMin(found, out);
        if (!balanced) throw NumericFailure("dense realization: max-min solve failed");
        rep = *balanced;
      }
    } else {
      rep = witnesses.back();
    }

    std::vector<std::pair<Edge, double>> rates;
    for (const Edge& e : found) rates.push_back({e, rep.rates(EdgeVariable(e, m_))});
    Realization r;
    r.kirchhoff = KirchhoffMatrix::FromRates(m_, rates);
    r.support = r.kirchhoff.Support(options_.support_eps);
    r.m_used = rep.m_used;
    if (r.support != found) {
      throw NumericFailure("dense realization: representative lost support edges");
    }
    out.realization = std::move(r);
    return out;
  }

 private:
  EdgeSet SupportOf(const Vector& rates) const {
    EdgeSet s;
    for (const Edge& e : AllEdges(m_)) {
      if (rates(EdgeVariable(e, m_)) > options_.support_eps) s.insert(e);
    }
    return s;
  }

  std::optional<Witness> SolveFor(const EdgeSet& objective, DenseOutcome& out) {
    return SolveProgram(BuildProgram(problem_, objective, options_), out);
  }

  // maximize t subject to k_e - t - s_e = 0, s_e >= 0 for e in `edges`.
  std::optional<Witness> SolveMaxMin(const EdgeSet& edges, DenseOutcome& out) {
    const ConicProgram base = BuildProgram(problem_, {}, options_);
    const int extra = 1 + static_cast<int>(edges.size());
    const int t = base.dim;
    ConicProgram p = ConicProgram::Free(base.dim + extra);
    p.objective(t) = 1.0;
    p.lower.head(base.dim) = base.lower;
    p.upper.head(base.dim) = base.upper;
    p.lower.tail(extra).setZero();
    p.upper(t) = options_.rate_upper_bound;
    p.cones = base.cones;
    const Eigen::Index rows = base.eq_matrix.rows();
    p.eq_matrix = Matrix::Zero(rows + extra - 1, p.dim);
    p.eq_rhs = Vector::Zero(rows + extra - 1);
    p.eq_matrix.topLeftCorner(rows, base.dim) = base.eq_matrix;
    p.eq_rhs.head(rows) = base.eq_rhs;
    int row = static_cast<int>(rows);
    for (const Edge& e : edges) {
      p.eq_matrix(row, EdgeVariable(e, m_)) = 1.0;
      p.eq_matrix(row, t) = -1.0;
      p.eq_matrix(row, t + 1 + (row - static_cast<int>(rows))) = -1.0;
      ++row;
    }
    return SolveProgram(p, out);
  }

  std::optional<Witness> SolveProgram(const ConicProgram& program, DenseOutcome& out) {
    if (options_.program_hook) options_.program_hook(program);
    ++out.solves;
    const SolveOutcome sol = Solve(program, options_.solver);
    if (sol.status == SolveStatus::kInfeasible) return std::nullopt;
    if (sol.status != SolveStatus::kOptimal) {
      throw NumericFailure("realization subproblem: " + ToString(sol.status) + " (" + sol.note + ")");
    }
    const int num_rates = m_ * (m_ - 1);
    Witness w;
    w.rates = sol.solution->head(num_rates).cwiseMax(0.0);
    if (problem_.region.kind() == UncertaintyRegion::Kind::kExact) {
      w.m_used = problem_.region.nominal();
    } else {
      w.m_used = UnvecRowMajor(sol.solution->segment(num_rates, n_ * m_), n_, m_);
    }
    return w;
  }

  const RealizationProblem& problem_;
  const RealizationOptions& options_;
  int n_;
  int m_;
};

}  // namespace

DenseOutcome DenseRealization(const RealizationProblem& problem, const RealizationOptions& options) {
  problem.Validate();
  return DenseSolver(problem, options).Run();
}

DenseOutcome ConstrainedDense(const RealizationProblem& problem, const EdgeSet& extra_exclusions,
                              const RealizationOptions& options) {
  RealizationProblem restricted = problem;
  restricted.excluded.insert(extra_exclusions.begin(), extra_exclusions.end());
  return DenseRealization(restricted, options);
}

}  // namespace crnreal
