#include "sipo/solvers.hpp"

#include "sipo/pdhg.hpp"

#include <limits>

namespace sipo {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::IterLimit: return "IterLimit";
    case SolveStatus::Unbounded: return "Unbounded";
  }
  return "unknown";
}

double KktResiduals::max_kkt() const { return std::max({stationarity, primal, dual, complementarity}); }

namespace {
double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
}  // namespace

KktResiduals kkt_from_products(const Vector& c, const Vector& h, const Vector& lb, const Vector& x,
                               const Vector& lambda, const Vector& gx, const Vector& gt_lambda) {
  const double scale = 1.0 + inf_norm(h) + inf_norm(c);
  KktResiduals k;
  double dual_obj = -h.dot(lambda);
  for (Index j = 0; j < c.size(); ++j) {
    const double r = c[j] + gt_lambda[j];
    if (std::isfinite(lb[j])) {
      k.stationarity = std::max(k.stationarity, std::max(0.0, -r));
      const double mu = std::max(r, 0.0);
      k.complementarity = std::max(k.complementarity, std::abs(mu * (x[j] - lb[j])));
      dual_obj += lb[j] * mu;
    } else {
      k.stationarity = std::max(k.stationarity, std::abs(r));
    }
  }
  for (Index i = 0; i < h.size(); ++i) {
    const double s = gx[i] - h[i];
    k.primal = std::max(k.primal, s);
    k.dual = std::max(k.dual, -lambda[i]);
    k.complementarity = std::max(k.complementarity, std::abs(lambda[i] * s));
  }
  k.primal_abs = k.primal;
  k.stationarity /= scale;
  k.primal /= scale;
  k.dual /= scale;
  k.complementarity /= scale;
  const double p = c.dot(x);
  k.gap = std::abs(p - dual_obj) / (1.0 + std::abs(p) + std::abs(dual_obj));
  return k;
}

KktResiduals kkt_residuals(const LpProblem& prob, const Vector& x, const Vector& lambda) {
  Vector gx, gtl;
  prob.apply(x, gx);
  prob.apply_adjoint(lambda, gtl);
  return kkt_from_products(prob.cost(), prob.rhs(), prob.lower_bounds(), x, lambda, gx, gtl);
}

DualState split_duals(const LpProblem& prob, const Vector& x, const Vector& lambda) {
  (void)x;
  DualState d;
  const Index nb = prob.n_band(), ng = prob.n_gel();
  d.lambda1 = lambda.head(nb);
  d.lambda2 = lambda.segment(nb, ng);
  d.lambda3 = lambda.segment(nb + ng, ng);
  Vector gtl;
  prob.apply_adjoint(lambda, gtl);
  d.lambda4 = (prob.cost() + gtl).head(prob.n_active()).cwiseMax(0.0);
  return d;
}

namespace {

SolveReport make_report(const LpProblem& prob, SolveStatus status, const Vector& x, const Vector& lambda,
                        const KktResiduals& k) {
  SolveReport r;
  r.status = status;
  r.x = x;
  r.lambda = lambda;
  r.kkt = k;
  r.objective = prob.objective(x);
  r.y = prob.expand(x);
  if (prob.has_u()) r.u = x[prob.u_index()];
  if (prob.has_v()) r.v = x[prob.v_index()];
  r.dual = split_duals(prob, x, lambda);
  return r;
}

}  // namespace

SolveReport solve_pdhg(const LpProblem& prob, const PdhgOptions& opts) {
  const PdhgRaw raw = pdhg_solve(prob, opts);
  SolveReport r = make_report(prob, raw.status, raw.x, raw.lambda, raw.kkt);
  r.iters = raw.iters;
  r.restarts = raw.restarts;
  r.wall_time = raw.wall_time;
  r.solver = "pdhg";
  return r;
}

// ------------------------------------------------------------------ simplex

namespace {

class Tableau {
 public:
  Tableau(Matrix a, Vector b, std::vector<Index> basis) : t_(a.rows() + 1, a.cols() + 1), basis_(std::move(basis)) {
    t_.topLeftCorner(a.rows(), a.cols()) = a;
    t_.col(a.cols()).head(a.rows()) = b;
    t_.row(a.rows()).setZero();
  }

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  const std::vector<Index>& basis() const { return basis_; }
  double rhs(Index i) const { return t_(i, cols()); }
  double at(Index i, Index j) const { return t_(i, j); }
  double value() const { return -t_(rows(), cols()); }

  // Objective row holds reduced costs; the corner holds -objective.
  void set_objective(const Vector& cost) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(cost.size()) = cost.transpose();
    for (Index i = 0; i < rows(); ++i) {
      const double cb = basis_[static_cast<std::size_t>(i)] < cost.size() ? cost[basis_[static_cast<std::size_t>(i)]] : 0.0;
      if (cb != 0.0) t_.row(rows()) -= cb * t_.row(i);
    }
  }

  void pivot(Index r, Index c) {
    t_.row(r) /= t_(r, c);
    for (Index i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Dantzig pricing over columns [0, limit), falling back to Bland's rule
  // while pivots stay degenerate so that cycling cannot occur.
  SolveStatus run(Index limit, Index& pivots, double eps) {
    Index degenerate = 0;
    for (;;) {
      const bool bland = degenerate > 20;
      Index enter = -1;
      double most = -eps;
      for (Index j = 0; j < limit; ++j) {
        const double rc = t_(rows(), j);
        if (rc < most) {
          enter = j;
          if (bland) break;
          most = rc;
        }
      }
      if (enter < 0) return SolveStatus::Optimal;
      Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < rows(); ++i) {
        const double a = t_(i, enter);
        if (a <= eps) continue;
        const double ratio = t_(i, cols()) / a;
        bool take = ratio < best - 1e-12;
        if (!take && leave >= 0 && std::abs(ratio - best) <= 1e-12) {
          take = bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]
                       : a > t_(leave, enter);
        }
        if (take) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return SolveStatus::Unbounded;
      degenerate = best <= 1e-12 ? degenerate + 1 : 0;
      pivot(leave, enter);
      if (++pivots > 200000) throw Error(ErrorCode::NonConvergence, "simplex pivot limit reached");
    }
  }

 private:
  Matrix t_;
  std::vector<Index> basis_;
};

}  // namespace

DenseSolution solve_dense_simplex(const DenseLp& lp, Index max_entries) {
  const Index n = lp.n_vars();
  const Index mu = lp.a_ub.rows(), me = lp.a_eq.rows();
  if (lp.entries() > max_entries) {
    throw Error(ErrorCode::SizeLimitExceeded,
                "dense problem has " + std::to_string(lp.entries()) + " entries, limit " + std::to_string(max_entries));
  }
  if ((mu > 0 && lp.a_ub.cols() != n) || (me > 0 && lp.a_eq.cols() != n) || lp.b_ub.size() != mu ||
      lp.b_eq.size() != me || (!lp.free.empty() && static_cast<Index>(lp.free.size()) != n)) {
    throw Error(ErrorCode::ShapeMismatch, "dense LP blocks have inconsistent shapes");
  }
  auto is_free = [&](Index j) { return !lp.free.empty() && lp.free[static_cast<std::size_t>(j)]; };

  // Structural columns: x_j, then -x_j for free variables.
  std::vector<Index> neg_of(static_cast<std::size_t>(n), -1);
  Index ns = n;
  for (Index j = 0; j < n; ++j)
    if (is_free(j)) neg_of[static_cast<std::size_t>(j)] = ns++;
  const Index m = mu + me;
  const Index slack0 = ns, art0 = ns + mu;

  Matrix a = Matrix::Zero(m, art0 + m);
  Vector b(m);
  Vector sign = Vector::Ones(m);
  for (Index i = 0; i < m; ++i) {
    const bool ub = i < mu;
    const auto row = ub ? lp.a_ub.row(i) : lp.a_eq.row(i - mu);
    const double bi = ub ? lp.b_ub[i] : lp.b_eq[i - mu];
    for (Index j = 0; j < n; ++j) {
      a(i, j) = row[j];
      if (neg_of[static_cast<std::size_t>(j)] >= 0) a(i, neg_of[static_cast<std::size_t>(j)]) = -row[j];
    }
    if (ub) a(i, slack0 + i) = 1.0;
    b[i] = bi;
    if (bi < 0.0) {
      sign[i] = -1.0;
      a.row(i) *= -1.0;
      b[i] = -bi;
    }
  }
  // Rows whose slack is +1 start with the slack basic; the rest need an artificial.
  std::vector<Index> basis(static_cast<std::size_t>(m));
  Vector phase1 = Vector::Zero(art0 + m);
  for (Index i = 0; i < m; ++i) {
    if (i < mu && sign[i] > 0.0) {
      basis[static_cast<std::size_t>(i)] = slack0 + i;
    } else {
      a(i, art0 + i) = 1.0;
      basis[static_cast<std::size_t>(i)] = art0 + i;
      phase1[art0 + i] = 1.0;
    }
  }

  const double scale = 1.0 + (m > 0 ? a.cwiseAbs().maxCoeff() : 0.0);
  const double eps = 1e-10 * scale;
  DenseSolution sol;
  Tableau tab(a, b, basis);
  tab.set_objective(phase1);
  tab.run(art0 + m, sol.pivots, eps);
  if (tab.value() > 1e-9 * (1.0 + (m > 0 ? b.cwiseAbs().maxCoeff() : 0.0))) {
    sol.status = SolveStatus::Infeasible;
    return sol;
  }
  // Drive artificials out of the basis where a structural pivot exists.
  for (Index i = 0; i < m; ++i) {
    if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
    for (Index j = 0; j < art0; ++j) {
      if (std::abs(tab.at(i, j)) > eps) {
        tab.pivot(i, j);
        break;
      }
    }
  }
  Vector cost = Vector::Zero(art0 + m);
  for (Index j = 0; j < n; ++j) {
    cost[j] = lp.c[j];
    if (neg_of[static_cast<std::size_t>(j)] >= 0) cost[neg_of[static_cast<std::size_t>(j)]] = -lp.c[j];
  }
  tab.set_objective(cost);
  sol.status = tab.run(art0, sol.pivots, eps);
  if (sol.status == SolveStatus::Unbounded) return sol;

  // Recompute the vertex and its multipliers from the final basis for accuracy.
  Matrix bm(m, m);
  Vector cb(m);
  for (Index i = 0; i < m; ++i) {
    const Index col = tab.basis()[static_cast<std::size_t>(i)];
    bm.col(i) = a.col(col);
    cb[i] = cost[col];
  }
  Vector z = Vector::Zero(art0 + m);
  Vector ydual = Vector::Zero(m);
  if (m > 0) {
    const Eigen::PartialPivLU<Matrix> lu(bm);
    const Vector zb = lu.solve(b);
    for (Index i = 0; i < m; ++i) z[tab.basis()[static_cast<std::size_t>(i)]] = std::max(zb[i], 0.0);
    ydual = lu.transpose().solve(cb);
  }
  sol.x.resize(n);
  for (Index j = 0; j < n; ++j) {
    sol.x[j] = z[j] - (neg_of[static_cast<std::size_t>(j)] >= 0 ? z[neg_of[static_cast<std::size_t>(j)]] : 0.0);
  }
  // Standard-form duals y satisfy reduced cost c - A^T y >= 0; a <= row's
  // multiplier is -y in original orientation.
  sol.y_ub.resize(mu);
  for (Index i = 0; i < mu; ++i) sol.y_ub[i] = std::max(0.0, -sign[i] * ydual[i]);
  sol.y_eq.resize(me);
  for (Index i = 0; i < me; ++i) sol.y_eq[i] = sign[mu + i] * ydual[mu + i];
  sol.objective = lp.c.dot(sol.x);
  return sol;
}

SolveReport solve_dense_reference(const LpProblem& prob) {
  const DenseSolution sol = solve_dense_simplex(prob.to_dense());
  SolveReport r;
  r.solver = "simplex";
  r.iters = sol.pivots;
  if (sol.status != SolveStatus::Optimal) {
    r.status = sol.status;
    return r;
  }
  r = make_report(prob, SolveStatus::Optimal, sol.x, sol.y_ub, kkt_residuals(prob, sol.x, sol.y_ub));
  r.solver = "simplex";
  r.iters = sol.pivots;
  return r;
}

// ------------------------------------------------------------------ Dinkelbach

DinkelbachResult solve_dinkelbach(const LfProblem& lfp, const DenseSolver& inner, std::optional<double> q0,
                                  double tol, Index max_iters) {
  const DenseSolver solve = inner ? inner : DenseSolver([](const DenseLp& lp) { return solve_dense_simplex(lp); });
  DinkelbachResult res;
  LfPoint best = lfp.initial_point();
  double q = q0 ? *q0 : lfp.objective(best);
  const Index na = lfp.n_active();
  for (Index k = 0; k < max_iters; ++k) {
    res.q_history.push_back(q);
    const DenseSolution sol = solve(lfp.parametric_dense(q));
    if (sol.status != SolveStatus::Optimal) {
      throw Error(ErrorCode::InnerSolverFailure, std::string("parametric problem returned ") + to_string(sol.status));
    }
    LfPoint p;
    p.g = sol.x.head(na);
    p.u = sol.x[na];
    p.v = sol.x[na + 1];
    p.s = sol.x[na + 2];
    const double f = q * p.s - lfp.numerator(p);
    res.iterations = k + 1;
    if (f <= tol || !(p.s > 0.0)) {
      res.q_star = q;
      res.point = best;
      return res;
    }
    const double next = lfp.numerator(p) / p.s;
    if (!(next < q)) {
      res.q_star = q;
      res.point = best;
      return res;
    }
    q = next;
    best = p;
  }
  throw Error(ErrorCode::NonConvergence, "Dinkelbach iteration limit reached");
}

// ------------------------------------------------------------------ phase 1

namespace {

// min xi  s.t.  G x - xi <= h,  xi >= -1.
class Phase1Problem {
 public:
  explicit Phase1Problem(const LpProblem& p) : p_(p) {
    const Index n = p.n_vars();
    cost_ = Vector::Zero(n + 1);
    cost_[n] = 1.0;
    lower_.resize(n + 1);
    lower_.head(n) = p.lower_bounds();
    lower_[n] = -1.0;
  }
  Index n_vars() const { return p_.n_vars() + 1; }
  Index n_rows() const { return p_.n_rows(); }
  const Vector& cost() const { return cost_; }
  const Vector& rhs() const { return p_.rhs(); }
  const Vector& lower_bounds() const { return lower_; }
  void apply(const Vector& x, Vector& out) const {
    p_.apply(x.head(p_.n_vars()), out);
    out.array() -= x[p_.n_vars()];
  }
  void apply_adjoint(const Vector& lambda, Vector& out) const {
    Vector inner;
    p_.apply_adjoint(lambda, inner);
    out.resize(n_vars());
    out.head(p_.n_vars()) = inner;
    out[p_.n_vars()] = -lambda.sum();
  }

 private:
  const LpProblem& p_;
  Vector cost_, lower_;
};

}  // namespace

FeasibilityResult check_feasibility_phase1(const LpProblem& prob, const PdhgOptions& opts, double feas_tol) {
  const Phase1Problem p1(prob);
  PdhgOptions o = opts;
  o.warm_x.reset();
  o.warm_lambda.reset();
  // Objective error of a certified point scales with the residual normalizer.
  const double scale = 2.0 + inf_norm(prob.rhs());
  PdhgRaw raw;
  Vector xs;
  double xi = 0.0;
  bool certified = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    raw = pdhg_solve(p1, o);
    // The largest violation of the returned point is an exact upper bound on xi*.
    xs = raw.x.head(prob.n_vars());
    const Vector viol = prob.constraint_values(xs);
    xi = std::max(-1.0, viol.size() ? viol.maxCoeff() : -1.0);
    certified = raw.status == SolveStatus::Optimal && xi > feas_tol + 10.0 * o.tol_kkt * scale;
    if (xi <= feas_tol || certified || raw.status != SolveStatus::Optimal) break;
    o.tol_kkt *= 1e-2;  // too close to the threshold to call; tighten once
  }

  FeasibilityResult res;
  res.xi = xi;
  res.feasible = xi <= feas_tol;
  res.margin = std::max(0.0, -xi);
  res.violation = std::max(0.0, xi);
  res.conclusive = res.feasible || certified;
  res.report.status = raw.status;
  res.report.x = xs;
  res.report.lambda = raw.lambda;
  res.report.kkt = raw.kkt;
  res.report.iters = raw.iters;
  res.report.restarts = raw.restarts;
  res.report.wall_time = raw.wall_time;
  res.report.objective = raw.x[prob.n_vars()];
  res.report.solver = "pdhg-phase1";
  res.report.phase1_value = xi;
  return res;
}

FeasibilityResult check_feasibility_dense(const LpProblem& prob, double feas_tol) {
  DenseLp lp = prob.to_dense();
  const Index n = lp.n_vars();
  // xi' = xi + 1 >= 0:  G x - xi' <= h - 1.
  Matrix a(lp.a_ub.rows(), n + 1);
  a.leftCols(n) = lp.a_ub;
  a.col(n).setConstant(-1.0);
  lp.a_ub = a;
  lp.b_ub.array() -= 1.0;
  lp.c = Vector::Zero(n + 1);
  lp.c[n] = 1.0;
  lp.a_eq = Matrix(0, n + 1);
  lp.free.push_back(false);
  const DenseSolution sol = solve_dense_simplex(lp);
  if (sol.status != SolveStatus::Optimal) {
    throw Error(ErrorCode::InnerSolverFailure, std::string("phase-1 simplex returned ") + to_string(sol.status));
  }
  FeasibilityResult res;
  res.xi = sol.x[n] - 1.0;
  res.feasible = res.xi <= feas_tol;
  res.margin = std::max(0.0, -res.xi);
  res.violation = std::max(0.0, res.xi);
  res.conclusive = true;
  res.report.status = SolveStatus::Optimal;
  res.report.x = sol.x.head(n);
  res.report.objective = res.xi;
  res.report.iters = sol.pivots;
  res.report.solver = "simplex-phase1";
  res.report.phase1_value = res.xi;
  return res;
}

}  // namespace sipo
