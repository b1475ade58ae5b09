#include "crnreal/conic.hpp"

#include <algorithm>
#include <cmath>

namespace crnreal {

namespace {

// Cone layout of the reduced problem: `lp` nonnegative-orthant rows followed
// by second-order-cone blocks of the given sizes.
struct ConeLayout {
  int lp = 0;
  std::vector<int> soc;  // block sizes (>= 1 each; first entry is the "t" part)

  int rows() const {
    int r = lp;
    for (int s : soc) r += s;
    return r;
  }
  int degree() const { return lp + static_cast<int>(soc.size()); }
};

// Reduced standard form:  minimize c'w  s.t.  G w + s = h,  s in K.
struct Reduced {
  Matrix G;
  Vector h;
  Vector c;
  ConeLayout cones;
};

double SocDet(double t, const Eigen::Ref<const Vector>& x) {
  const double nx = x.norm();
  return (t - nx) * (t + nx);
}

// Smallest alpha >= 0 with u + alpha d on the boundary of the cone (inf when
// the ray never leaves it). u must be interior.
double MaxStepSoc(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& d) {
  const double u0 = u(0), d0 = d(0);
  const auto u1 = u.tail(u.size() - 1);
  const auto d1 = d.tail(d.size() - 1);
  const double a = d0 * d0 - d1.squaredNorm();
  const double b = u0 * d0 - u1.dot(d1);
  const double c = std::max(SocDet(u0, u1), 0.0);
  double best = kInf;
  auto consider = [&best](double r) {
    if (r > 0.0 && r < best) best = r;
  };
  if (std::abs(a) < 1e-300) {
    if (b < 0.0) consider(-c / (2.0 * b));
  } else {
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double q = -(b + std::copysign(std::sqrt(disc), b));
      if (q != 0.0) {
        consider(q / a);
        consider(c / q);
      } else {
        consider(std::sqrt(-c / a));
      }
    }
  }
  if (u.size() == 1 && d0 < 0.0) consider(-u0 / d0);
  return best;
}

double MaxStep(const ConeLayout& cones, const Vector& u, const Vector& d) {
  double alpha = kInf;
  for (int i = 0; i < cones.lp; ++i) {
    if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
  }
  int off = cones.lp;
  for (int sz : cones.soc) {
    alpha = std::min(alpha, MaxStepSoc(u.segment(off, sz), d.segment(off, sz)));
    off += sz;
  }
  return alpha;
}

// inf { alpha : u + alpha e in K }.
double ShiftToInterior(const ConeLayout& cones, const Vector& u) {
  double alpha = -kInf;
  for (int i = 0; i < cones.lp; ++i) alpha = std::max(alpha, -u(i));
  int off = cones.lp;
  for (int sz : cones.soc) {
    alpha = std::max(alpha, u.segment(off + 1, sz - 1).norm() - u(off));
    off += sz;
  }
  return alpha;
}

Vector Identity(const ConeLayout& cones) {
  Vector e = Vector::Zero(cones.rows());
  e.head(cones.lp).setOnes();
  int off = cones.lp;
  for (int sz : cones.soc) {
    e(off) = 1.0;
    off += sz;
  }
  return e;
}

Vector JordanProduct(const ConeLayout& cones, const Vector& u, const Vector& v) {
  Vector out(u.size());
  out.head(cones.lp) = u.head(cones.lp).cwiseProduct(v.head(cones.lp));
  int off = cones.lp;
  for (int sz : cones.soc) {
    const auto us = u.segment(off, sz);
    const auto vs = v.segment(off, sz);
    out(off) = us.dot(vs);
    out.segment(off + 1, sz - 1) = us(0) * vs.tail(sz - 1) + vs(0) * us.tail(sz - 1);
    off += sz;
  }
  return out;
}

// Solves lambda o x = d.
Vector JordanDivide(const ConeLayout& cones, const Vector& lambda, const Vector& d) {
  Vector out(d.size());
  out.head(cones.lp) = d.head(cones.lp).cwiseQuotient(lambda.head(cones.lp));
  int off = cones.lp;
  for (int sz : cones.soc) {
    const auto l = lambda.segment(off, sz);
    const auto ds = d.segment(off, sz);
    const double l0 = l(0);
    const auto l1 = l.tail(sz - 1);
    const double det = SocDet(l0, l1);
    const double x0 = (l0 * ds(0) - l1.dot(ds.tail(sz - 1))) / det;
    out(off) = x0;
    out.segment(off + 1, sz - 1) = (ds.tail(sz - 1) - x0 * l1) / l0;
    off += sz;
  }
  return out;
}

// Nesterov-Todd scaling: W z = W^{-T} s = lambda. W is symmetric block
// diagonal; we keep W and its inverse explicitly.
struct Scaling {
  Matrix W;
  Matrix Winv;
  Vector lambda;
};

Scaling ComputeScaling(const ConeLayout& cones, const Vector& s, const Vector& z) {
  const int p = cones.rows();
  Scaling sc;
  sc.W = Matrix::Zero(p, p);
  sc.Winv = Matrix::Zero(p, p);
  for (int i = 0; i < cones.lp; ++i) {
    const double w = std::sqrt(s(i) / z(i));
    sc.W(i, i) = w;
    sc.Winv(i, i) = 1.0 / w;
  }
  int off = cones.lp;
  for (int sz : cones.soc) {
    const auto ss = s.segment(off, sz);
    const auto zs = z.segment(off, sz);
    const double sdet = std::sqrt(SocDet(ss(0), ss.tail(sz - 1)));
    const double zdet = std::sqrt(SocDet(zs(0), zs.tail(sz - 1)));
    const Vector sbar = ss / sdet;
    const Vector zbar = zs / zdet;
    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    Vector wbar(sz);
    wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
    wbar.tail(sz - 1) = (sbar.tail(sz - 1) - zbar.tail(sz - 1)) / (2.0 * gamma);
    const double eta = std::sqrt(sdet / zdet);

    // W = eta * (2 v v' - J) is the square root of the quadratic
    // representation of wbar.
    Vector v = wbar;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (wbar(0) + 1.0));
    Matrix J = Matrix::Identity(sz, sz);
    J.diagonal().tail(sz - 1).setConstant(-1.0);
    const Vector Jv = J * v;
    sc.W.block(off, off, sz, sz) = eta * (2.0 * v * v.transpose() - J);
    sc.Winv.block(off, off, sz, sz) = (1.0 / eta) * (2.0 * Jv * Jv.transpose() - J);
    off += sz;
  }
  sc.lambda = sc.W * z;
  return sc;
}

// Solves [0 G'; G -W'W] [x; z] = [r1; r2] through the normal equations
// (G' W^{-1} W^{-T} G) x = r1 + G' W^{-1} W^{-T} r2.
class KktSolver {
 public:
  KktSolver(const Matrix& G, const Scaling& sc) : G_(G), W_(sc.W), Winv_(sc.Winv) {
    Gs_ = Winv_ * G_;  // W symmetric, so W^{-T} = W^{-1}
    H_ = Gs_.transpose() * Gs_;
    const double reg = 1e-13 * std::max(1.0, H_.diagonal().maxCoeff());
    Matrix Hreg = H_;
    Hreg.diagonal().array() += reg;
    llt_.compute(Hreg);
    ok_ = llt_.info() == Eigen::Success;
    if (!ok_) {
      ldlt_.compute(Hreg);
      ok_ = ldlt_.info() == Eigen::Success;
      use_ldlt_ = true;
    }
  }

  bool ok() const { return ok_; }

  void Solve(const Vector& r1, const Vector& r2, Vector& x, Vector& z) const {
    SolveOnce(r1, r2, x, z);
    // Iterative refinement against the full system [0 G'; G -W'W].
    double last = kInf;
    for (int pass = 0; pass < 5; ++pass) {
      const Vector e1 = r1 - G_.transpose() * z;
      const Vector e2 = r2 - (G_ * x - W_ * (W_ * z));
      const double err = std::max(e1.lpNorm<Eigen::Infinity>(), e2.lpNorm<Eigen::Infinity>());
      const double scale = 1.0 + std::max(r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>());
      if (err <= 1e-15 * scale || err >= 0.5 * last) break;
      last = err;
      Vector dx, dz;
      SolveOnce(e1, e2, dx, dz);
      x += dx;
      z += dz;
    }
  }

 private:
  void SolveOnce(const Vector& r1, const Vector& r2, Vector& x, Vector& z) const {
    const Vector r2s = Winv_ * r2;
    x = Apply(r1 + Gs_.transpose() * r2s);
    z = Winv_ * (Gs_ * x - r2s);
  }

  Vector Apply(const Vector& b) const {
    if (use_ldlt_) return ldlt_.solve(b);
    return llt_.solve(b);
  }

  const Matrix& G_;
  const Matrix& W_;
  const Matrix& Winv_;
  Matrix Gs_;
  Matrix H_;
  Eigen::LLT<Matrix> llt_;
  Eigen::LDLT<Matrix> ldlt_;
  bool ok_ = false;
  bool use_ldlt_ = false;
};

enum class IpmStatus { kOptimal, kInfeasible, kUnbounded, kFailure };

struct IpmResult {
  IpmStatus status = IpmStatus::kFailure;
  Vector w;
  double dual_objective = 0.0;
  int iterations = 0;
  double pres = 0.0, dres = 0.0, gap = 0.0;
  std::string note;
};

IpmResult RunIpm(const Reduced& P, const SolverOptions& opt) {
  const int q = static_cast<int>(P.G.cols());
  const int p = P.cones.rows();
  const ConeLayout& K = P.cones;
  const double nu = K.degree();
  const Vector e = Identity(K);
  const double hnorm = std::max(1.0, P.h.norm());
  const double cnorm = std::max(1.0, P.c.norm());

  IpmResult res;
  res.w = Vector::Zero(q);

  // Initial point.
  Vector w, s, z;
  {
    Scaling unit{Matrix::Identity(p, p), Matrix::Identity(p, p), e};
    KktSolver kkt(P.G, unit);
    if (!kkt.ok()) {
      res.note = "initial KKT factorization failed";
      return res;
    }
    Vector zp;
    kkt.Solve(Vector::Zero(q), P.h, w, zp);
    s = P.h - P.G * w;  // primal: least-squares fit of G w to h
    Vector wd;
    kkt.Solve(-P.c, Vector::Zero(p), wd, z);  // least-norm z with G'z = -c
    const double ap = ShiftToInterior(K, s);
    if (ap >= -1e-8) s += (1.0 + std::max(ap, 0.0)) * e;
    const double ad = ShiftToInterior(K, z);
    if (ad >= -1e-8) z += (1.0 + std::max(ad, 0.0)) * e;
  }
  double tau = 1.0, kappa = 1.0;

  for (int it = 0; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    const Vector rx = P.G.transpose() * z + P.c * tau;
    const Vector rz = s + P.G * w - P.h * tau;
    const double cw = P.c.dot(w);
    const double hz = P.h.dot(z);
    const double rt = kappa + cw + hz;

    const double pres = rz.norm() / tau / hnorm;
    const double dres = rx.norm() / tau / cnorm;
    const double pcost = cw / tau;
    const double dcost = -hz / tau;
    const double gap = s.dot(z) / (tau * tau);
    double relgap = kInf;
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    res.pres = pres;
    res.dres = dres;
    res.gap = gap;

    if (pres < opt.tol && dres < opt.tol && (gap < opt.tol || relgap < opt.tol)) {
      res.status = IpmStatus::kOptimal;
      res.w = w / tau;
      res.dual_objective = dcost;
      return res;
    }
    if (hz < 0.0 && (P.G.transpose() * z).norm() / -hz < opt.tol) {
      res.status = IpmStatus::kInfeasible;
      res.note = "Farkas certificate: G'z = 0, h'z < 0";
      return res;
    }
    if (cw < 0.0 && (P.G * w + s).norm() / -cw < opt.tol) {
      res.status = IpmStatus::kUnbounded;
      res.note = "improving ray found";
      return res;
    }
    if (it == opt.max_iterations) break;

    const Scaling sc = ComputeScaling(K, s, z);
    const KktSolver kkt(P.G, sc);
    if (!kkt.ok()) {
      res.note = "KKT factorization failed";
      return res;
    }
    const double mu = (s.dot(z) + tau * kappa) / (nu + 1.0);

    Vector w1, z1;
    kkt.Solve(-P.c, P.h, w1, z1);
    const double denom = P.c.dot(w1) + P.h.dot(z1) - kappa / tau;

    auto direction = [&](double eta, const Vector& ds, double dk, Vector& dw, Vector& dzv,
                         Vector& dsv, double& dtau, double& dkappa) {
      const Vector lds = JordanDivide(K, sc.lambda, ds);
      Vector w2, z2;
      kkt.Solve(-eta * rx, -eta * rz - sc.W * lds, w2, z2);
      dtau = (-eta * rt - P.c.dot(w2) - P.h.dot(z2) - dk / tau) / denom;
      dw = w2 + dtau * w1;
      dzv = z2 + dtau * z1;
      dsv = sc.W * (lds - sc.W * dzv);
      dkappa = (dk - kappa * dtau) / tau;
    };

    auto step_length = [&](const Vector& dsv, const Vector& dzv, double dtau, double dkappa) {
      double a = std::min(MaxStep(K, s, dsv), MaxStep(K, z, dzv));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    const Vector lam2 = JordanProduct(K, sc.lambda, sc.lambda);
    Vector dwa, dza, dsa;
    double dta, dka;
    direction(1.0, -lam2, -tau * kappa, dwa, dza, dsa, dta, dka);
    const double alpha_a = std::min(1.0, step_length(dsa, dza, dta, dka));
    const double sigma = std::pow(1.0 - alpha_a, 3);

    // Corrector.
    const Vector ds_c = -lam2 - JordanProduct(K, sc.Winv * dsa, sc.W * dza) + sigma * mu * e;
    const double dk_c = -tau * kappa - dta * dka + sigma * mu;
    Vector dw, dzv, dsv;
    double dtau, dkappa;
    direction(1.0 - sigma, ds_c, dk_c, dw, dzv, dsv, dtau, dkappa);
    const double alpha = std::min(1.0, 0.99 * step_length(dsv, dzv, dtau, dkappa));
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
      res.note = "step length collapsed";
      return res;
    }
    w += alpha * dw;
    s += alpha * dsv;
    z += alpha * dzv;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    if (!w.allFinite() || !z.allFinite() || !s.allFinite() || !(tau > 0.0)) {
      res.note = "non-finite iterate";
      return res;
    }
  }
  res.note = "iteration limit reached";
  return res;
}

// Equality constraints reduce the variable space to v = x0 + N w.
struct Parametrization {
  Vector x0;
  Matrix N;
  bool consistent = true;
};

Parametrization ParametrizeEqualities(const Matrix& A, const Vector& b, int dim, double tol) {
  Parametrization out;
  if (A.rows() == 0) {
    out.x0 = Vector::Zero(dim);
    out.N = Matrix::Identity(dim, dim);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-10 * std::max(1.0, smax)) ++rank;
  }
  const Matrix& U = svd.matrixU();
  const Matrix& V = svd.matrixV();
  out.x0 = Vector::Zero(dim);
  for (int i = 0; i < rank; ++i) out.x0 += V.col(i) * (U.col(i).dot(b) / sv(i));
  out.N = V.rightCols(dim - rank);
  const double residual = (A * out.x0 - b).lpNorm<Eigen::Infinity>();
  out.consistent = residual <= tol * std::max(1.0, b.lpNorm<Eigen::Infinity>());
  return out;
}

}  // namespace

std::string ToString(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericFailure: return "numeric-failure";
  }
  return "unknown";
}

ConicProgram ConicProgram::Free(int dim) {
  ConicProgram p;
  p.dim = dim;
  p.objective = Vector::Zero(dim);
  p.eq_matrix = Matrix::Zero(0, dim);
  p.eq_rhs = Vector::Zero(0);
  p.lower = Vector::Constant(dim, -kInf);
  p.upper = Vector::Constant(dim, kInf);
  return p;
}

void ConicProgram::Validate() const {
  if (dim < 0) throw ContractError("negative program dimension");
  if (objective.size() != dim || lower.size() != dim || upper.size() != dim) {
    throw ContractError("objective/bound sizes do not match the program dimension");
  }
  if (eq_matrix.cols() != dim || eq_matrix.rows() != eq_rhs.size()) {
    throw ContractError("equality constraint sizes are inconsistent");
  }
  for (int i = 0; i < dim; ++i) {
    if (lower(i) > upper(i)) throw ContractError("lower bound exceeds upper bound");
  }
  for (const auto& cone : cones) {
    const auto k = static_cast<Eigen::Index>(cone.selector.size());
    if (cone.center.size() != k) throw ContractError("cone center size mismatch");
    if (cone.transform.size() != 0 && cone.transform.cols() != k) {
      throw ContractError("cone transform size mismatch");
    }
    if (!(cone.radius >= 0.0)) throw ContractError("cone radius must be nonnegative");
    for (int idx : cone.selector) {
      if (idx < 0 || idx >= dim) throw ContractError("cone selector index out of range");
    }
  }
}

SolveOutcome Solve(const ConicProgram& program, const SolverOptions& options) {
  program.Validate();
  const int d = program.dim;
  SolveOutcome out;

  // Collect equalities: explicit rows, fixed variables, zero-radius cones.
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (int r = 0; r < program.eq_matrix.rows(); ++r) {
    rows.push_back(program.eq_matrix.row(r).transpose());
    rhs.push_back(program.eq_rhs(r));
  }
  for (int i = 0; i < d; ++i) {
    if (std::isfinite(program.lower(i)) && program.lower(i) == program.upper(i)) {
      Vector row = Vector::Zero(d);
      row(i) = 1.0;
      rows.push_back(row);
      rhs.push_back(program.lower(i));
    }
  }
  std::vector<const SocConstraint*> soc;
  for (const auto& cone : program.cones) {
    const int k = static_cast<int>(cone.selector.size());
    const Matrix W = cone.transform.size() == 0 ? Matrix::Identity(k, k) : cone.transform;
    if (cone.radius == 0.0) {
      for (int r = 0; r < W.rows(); ++r) {
        Vector row = Vector::Zero(d);
        for (int t = 0; t < k; ++t) row(cone.selector[t]) += W(r, t);
        rows.push_back(row);
        rhs.push_back(W.row(r).dot(cone.center));
      }
    } else {
      soc.push_back(&cone);
    }
  }
  Matrix A(static_cast<Eigen::Index>(rows.size()), d);
  Vector b(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    A.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    b(static_cast<Eigen::Index>(r)) = rhs[r];
  }

  const Parametrization par = ParametrizeEqualities(A, b, d, 1e-9);
  if (!par.consistent) {
    out.status = SolveStatus::kInfeasible;
    out.note = "equality constraints are inconsistent";
    return out;
  }
  const int q = static_cast<int>(par.N.cols());

  // Inequality rows a'v <= beta  ->  (a'N) w <= beta - a'x0, scaled to unit norm.
  std::vector<Vector> g_rows;
  std::vector<double> h_vals;
  auto add_inequality = [&](const Vector& a, double beta) -> bool {
    Vector g = par.N.transpose() * a;
    double hv = beta - a.dot(par.x0);
    const double gn = g.norm();
    if (gn <= 1e-12 * std::max(1.0, a.norm())) return hv >= -options.tol * std::max(1.0, std::abs(beta));
    g_rows.push_back(g / gn);
    h_vals.push_back(hv / gn);
    return true;
  };
  bool trivially_infeasible = false;
  for (int i = 0; i < d; ++i) {
    if (std::isfinite(program.lower(i)) && program.lower(i) == program.upper(i)) continue;
    Vector a = Vector::Zero(d);
    if (std::isfinite(program.lower(i))) {
      a(i) = -1.0;
      if (!add_inequality(a, -program.lower(i))) trivially_infeasible = true;
    }
    if (std::isfinite(program.upper(i))) {
      a.setZero();
      a(i) = 1.0;
      if (!add_inequality(a, program.upper(i))) trivially_infeasible = true;
    }
  }
  if (trivially_infeasible) {
    out.status = SolveStatus::kInfeasible;
    out.note = "bounds contradict the equality constraints";
    return out;
  }

  Reduced P;
  P.cones.lp = static_cast<int>(g_rows.size());
  std::vector<Matrix> soc_G;
  std::vector<Vector> soc_h;
  for (const SocConstraint* cone : soc) {
    const int k = static_cast<int>(cone->selector.size());
    const Matrix W = cone->transform.size() == 0 ? Matrix::Identity(k, k) : cone->transform;
    Matrix S = Matrix::Zero(k, d);
    for (int t = 0; t < k; ++t) S(t, cone->selector[t]) = 1.0;
    const Matrix WS = W * S;
    Matrix Gb = Matrix::Zero(W.rows() + 1, q);
    Vector hb(W.rows() + 1);
    Gb.bottomRows(W.rows()) = -WS * par.N;
    hb(0) = cone->radius;
    hb.tail(W.rows()) = WS * par.x0 - W * cone->center;
    const double scale = std::max(Gb.rowwise().norm().maxCoeff(), 1e-12);
    soc_G.push_back(Gb / scale);
    soc_h.push_back(hb / scale);
    P.cones.soc.push_back(static_cast<int>(W.rows()) + 1);
  }
  const int p = P.cones.rows();
  P.G.resize(p, q);
  P.h.resize(p);
  for (int r = 0; r < P.cones.lp; ++r) {
    P.G.row(r) = g_rows[r].transpose();
    P.h(r) = h_vals[r];
  }
  int off = P.cones.lp;
  for (size_t c = 0; c < soc_G.size(); ++c) {
    P.G.middleRows(off, soc_G[c].rows()) = soc_G[c];
    P.h.segment(off, soc_h[c].size()) = soc_h[c];
    off += static_cast<int>(soc_G[c].rows());
  }
  P.c = -(par.N.transpose() * program.objective);
  const double objective_offset = program.objective.dot(par.x0);

  auto finish_optimal = [&](const Vector& wsol, double dual_obj, int iterations) {
    const Vector v = par.x0 + par.N * wsol;
    out.status = SolveStatus::kOptimal;
    out.solution = v;
    out.objective = program.objective.dot(v);
    out.stats.iterations = iterations;
    out.stats.dual_objective = objective_offset - dual_obj;
    double pr = program.eq_matrix.rows() ? (program.eq_matrix * v - program.eq_rhs).lpNorm<Eigen::Infinity>() : 0.0;
    for (int i = 0; i < d; ++i) {
      pr = std::max(pr, program.lower(i) - v(i));
      pr = std::max(pr, v(i) - program.upper(i));
    }
    for (const auto& cone : program.cones) {
      const int k = static_cast<int>(cone.selector.size());
      Vector sel(k);
      for (int t = 0; t < k; ++t) sel(t) = v(cone.selector[t]);
      const Vector dev = cone.transform.size() == 0 ? Vector(sel - cone.center)
                                                     : Vector(cone.transform * (sel - cone.center));
      pr = std::max(pr, dev.norm() - cone.radius);
    }
    out.stats.primal_residual = std::max(pr, 0.0);
  };

  if (q == 0 || p == 0) {
    // No free directions, or no inequality constraints.
    if (q > 0 && P.c.norm() > options.tol) {
      out.status = SolveStatus::kUnbounded;
      out.note = "objective unbounded without inequality constraints";
      return out;
    }
    bool feasible = true;
    for (int r = 0; r < P.cones.lp; ++r) feasible &= P.h(r) >= -options.tol;
    off = P.cones.lp;
    for (int sz : P.cones.soc) {
      feasible &= P.h.segment(off + 1, sz - 1).norm() - P.h(off) <= options.tol;
      off += sz;
    }
    if (!feasible) {
      out.status = SolveStatus::kInfeasible;
      out.note = "unique point implied by equalities violates the cone constraints";
      return out;
    }
    finish_optimal(Vector::Zero(q), -P.c.dot(Vector::Zero(q)) - 0.0, 0);
    out.stats.dual_objective = out.objective;
    return out;
  }

  const IpmResult ipm = RunIpm(P, options);
  out.stats.iterations = ipm.iterations;
  out.stats.gap = ipm.gap;
  out.stats.dual_residual = ipm.dres;
  out.note = ipm.note;
  switch (ipm.status) {
    case IpmStatus::kOptimal:
      finish_optimal(ipm.w, ipm.dual_objective, ipm.iterations);
      out.stats.gap = ipm.gap;
      out.stats.dual_residual = ipm.dres;
      break;
    case IpmStatus::kInfeasible:
      out.status = SolveStatus::kInfeasible;
      break;
    case IpmStatus::kUnbounded:
      out.status = SolveStatus::kUnbounded;
      break;
    case IpmStatus::kFailure:
      out.status = SolveStatus::kNumericFailure;
      out.stats.primal_residual = ipm.pres;
      break;
  }
  return out;
}

bool IsFeasible(const ConicProgram& program, const SolverOptions& options) {
  ConicProgram zero = program;
  zero.objective.setZero();
  const SolveOutcome out = Solve(zero, options);
  switch (out.status) {
    case SolveStatus::kOptimal: return true;
    case SolveStatus::kInfeasible: return false;
    default: throw NumericFailure("feasibility undecided: " + out.note);
  }
}

namespace {

nlohmann::json BoundToJson(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double BoundFromJson(const nlohmann::json& j, double infinite) {
  return j.is_null() ? infinite : j.get<double>();
}

nlohmann::json MatrixToJson(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix MatrixFromJson(const nlohmann::json& j, int cols) {
  Matrix M(static_cast<Eigen::Index>(j.size()), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    for (int c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), c) = j[r][c].get<double>();
  }
  return M;
}

}  // namespace

nlohmann::json ConicProgram::ToJson() const {
  nlohmann::json j;
  j["format"] = "crnreal-conic-program";
  j["sense"] = "maximize";
  j["dim"] = dim;
  j["objective"] = std::vector<double>(objective.data(), objective.data() + objective.size());
  j["eq_matrix"] = MatrixToJson(eq_matrix);
  j["eq_rhs"] = std::vector<double>(eq_rhs.data(), eq_rhs.data() + eq_rhs.size());
  j["lower"] = nlohmann::json::array();
  j["upper"] = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) {
    j["lower"].push_back(BoundToJson(lower(i)));
    j["upper"].push_back(BoundToJson(upper(i)));
  }
  j["cones"] = nlohmann::json::array();
  for (const auto& cone : cones) {
    nlohmann::json c;
    c["selector"] = cone.selector;
    c["center"] = std::vector<double>(cone.center.data(), cone.center.data() + cone.center.size());
    c["transform"] = MatrixToJson(cone.transform);
    c["radius"] = cone.radius;
    j["cones"].push_back(c);
  }
  return j;
}

ConicProgram ConicProgram::FromJson(const nlohmann::json& j) {
  ConicProgram p = Free(j.at("dim").get<int>());
  const auto obj = j.at("objective").get<std::vector<double>>();
  p.objective = Eigen::Map<const Vector>(obj.data(), static_cast<Eigen::Index>(obj.size()));
  p.eq_matrix = MatrixFromJson(j.at("eq_matrix"), p.dim);
  const auto rhs = j.at("eq_rhs").get<std::vector<double>>();
  p.eq_rhs = Eigen::Map<const Vector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  for (int i = 0; i < p.dim; ++i) {
    p.lower(i) = BoundFromJson(j.at("lower")[i], -kInf);
    p.upper(i) = BoundFromJson(j.at("upper")[i], kInf);
  }
  for (const auto& c : j.at("cones")) {
    SocConstraint cone;
    cone.selector = c.at("selector").get<std::vector<int>>();
    const auto center = c.at("center").get<std::vector<double>>();
    cone.center = Eigen::Map<const Vector>(center.data(), static_cast<Eigen::Index>(center.size()));
    const auto& t = c.at("transform");
    cone.transform = t.empty() ? Matrix() : MatrixFromJson(t, static_cast<int>(cone.selector.size()));
    cone.radius = c.at("radius").get<double>();
    p.cones.push_back(std::move(cone));
  }
  p.Validate();
  return p;
}

}  // namespace crnreal
