#pragma once

#include "sipo/core.hpp"
#include "sipo/dense_lp.hpp"
#include "sipo/formulations.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sipo {

enum class SolveStatus { Optimal, Infeasible, IterLimit, Unbounded };

const char* to_string(SolveStatus s);

/// Iteration scheme between restarts: reflected Halpern anchoring, or plain
/// PDHG steps restarted from the running average.
enum class PdhgScheme { Halpern, Average };

struct PdhgOptions {
  Index max_iters = 200000;
  double tol_kkt = 1e-6;
  std::optional<double> tau;    // auto: 0.99 / (L * omega)
  std::optional<double> sigma;  // auto: 0.99 * omega / L
  double theta = 1.0;
  Index check_every = 100;
  std::uint64_t seed = 0;
  /// Ratio sigma / tau is omega^2. 1 gives tau = sigma; 0 picks ||c|| / ||h||.
  double primal_weight = 0.0;
  PdhgScheme scheme = PdhgScheme::Halpern;
  /// Restart on sufficient or stalled residual decay, or after a long stretch.
  bool restarts = true;
  /// Smooth the primal weight at restarts from observed primal/dual motion.
  bool adapt_primal_weight = true;
  std::string trace_path;
  std::optional<Vector> warm_x;
  std::optional<Vector> warm_lambda;
};

/// Normalised KKT residuals; every entry is divided by 1 + ||h||_inf + ||c||_inf.
struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double gap = 0.0;  // |primal obj - dual obj| / (1 + |primal obj| + |dual obj|)
  double primal_abs = 0.0;  // unnormalised max(G x - h)_+

  double max_kkt() const;
  /// Also bounds the raw violation, so hard constraints hold to tol itself.
  bool certified(double tol) const { return max_kkt() <= tol && gap <= tol && primal_abs <= tol; }
};

/// Multipliers split by constraint family.
struct DualState {
  Vector lambda1;  // band rows
  Vector lambda2;  // gel upper rows
  Vector lambda3;  // gel lower rows
  Vector lambda4;  // bounds y >= 0 on active beamlets
};

struct SolveReport {
  SolveStatus status = SolveStatus::IterLimit;
  double objective = 0.0;
  Vector x;       // (y_active, [u], [v])
  Sinogram y;     // zero-expanded over all rays
  std::optional<double> u, v;
  Vector lambda;  // stacked row multipliers
  DualState dual;
  KktResiduals kkt;
  Index iters = 0;
  Index restarts = 0;
  double wall_time = 0.0;
  std::string solver;
  std::optional<double> phase1_value;  // xi* when a phase-1 test ran
};

/// Generic residuals for  min c^T x  s.t.  G x <= h,  x >= lb  given G x and
/// G^T lambda.
KktResiduals kkt_from_products(const Vector& c, const Vector& h, const Vector& lb, const Vector& x,
                               const Vector& lambda, const Vector& gx, const Vector& gt_lambda);

KktResiduals kkt_residuals(const LpProblem& prob, const Vector& x, const Vector& lambda);

/// Splits stacked multipliers and derives lambda4 = max(0, c + G^T lambda) on y.
DualState split_duals(const LpProblem& prob, const Vector& x, const Vector& lambda);

SolveReport solve_pdhg(const LpProblem& prob, const PdhgOptions& opts = {});

// ------------------------------------------------------------------ dense

struct DenseSolution {
  SolveStatus status = SolveStatus::Infeasible;
  Vector x;
  Vector y_ub;  // multipliers of the <= rows, nonnegative
  Vector y_eq;
  double objective = 0.0;
  Index pivots = 0;
};

/// Two-phase tableau simplex: Dantzig pricing with Bland's rule on degenerate
/// stretches.
DenseSolution solve_dense_simplex(const DenseLp& lp, Index max_entries = 200000);

SolveReport solve_dense_reference(const LpProblem& prob);

// ------------------------------------------------------------------ Dinkelbach

struct DinkelbachResult {
  double q_star = 0.0;
  std::vector<double> q_history;
  LfPoint point;
  Index iterations = 0;
};

using DenseSolver = std::function<DenseSolution(const DenseLp&)>;

/// Parametric iteration q_{k+1} = N(x_k) / D(x_k) from q0 (or the objective of
/// the problem's initial point when q0 is absent).
DinkelbachResult solve_dinkelbach(const LfProblem& lfp, const DenseSolver& inner = {},
                                  std::optional<double> q0 = std::nullopt, double tol = 1e-12,
                                  Index max_iters = 100);

// ------------------------------------------------------------------ phase 1

struct FeasibilityResult {
  bool feasible = false;
  double xi = 0.0;      // min over x of max_i (G x - h)_i, floored at -1
  double margin = 0.0;  // max(0, -xi)
  double violation = 0.0;  // max(0, xi)
  /// A feasible verdict always has a witness point; an infeasible one is only
  /// conclusive when phase 1 was certified optimal with xi clear of the
  /// threshold by more than its own accuracy.
  bool conclusive = false;
  SolveReport report;
};

/// Solves  min xi  s.t.  G x - h <= xi,  xi >= -1  with PDHG.
FeasibilityResult check_feasibility_phase1(const LpProblem& prob, const PdhgOptions& opts = {},
                                           double feas_tol = 1e-6);

/// The same test through the dense simplex.
FeasibilityResult check_feasibility_dense(const LpProblem& prob, double feas_tol = 1e-6);

}  // namespace sipo
