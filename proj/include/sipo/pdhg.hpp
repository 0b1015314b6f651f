#pragma once

// Matrix-free PDHG for  min c^T x  s.t.  G x <= h,  x >= lb  (lb may be -inf).
// Any type with n_vars(), n_rows(), cost(), rhs(), lower_bounds(),
// apply(x, out) and apply_adjoint(lambda, out) can be solved.

#include "sipo/solvers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

namespace sipo {

template <typename P>
concept ConstraintProblem = requires(const P& p, const Vector& v, Vector& out) {
  { p.n_vars() } -> std::convertible_to<Index>;
  { p.n_rows() } -> std::convertible_to<Index>;
  { p.cost() } -> std::convertible_to<const Vector&>;
  { p.rhs() } -> std::convertible_to<const Vector&>;
  { p.lower_bounds() } -> std::convertible_to<const Vector&>;
  p.apply(v, out);
  p.apply_adjoint(v, out);
};

/// sqrt of the top eigenvalue of G^T G by seeded power iteration.
template <ConstraintProblem P>
double constraint_operator_norm(const P& prob, int iters = 200, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(prob.n_vars());
  for (Index j = 0; j < x.size(); ++j) x[j] = normal(rng);
  Vector gx, gtgx;
  double rq = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double n = x.norm();
    if (n == 0.0) return 0.0;
    x /= n;
    prob.apply(x, gx);
    prob.apply_adjoint(gx, gtgx);
    rq = x.dot(gtgx);
    x = gtgx;
  }
  return std::sqrt(std::max(rq, 0.0));
}

struct PdhgRaw {
  SolveStatus status = SolveStatus::IterLimit;
  Vector x, lambda;
  KktResiduals kkt;
  Index iters = 0;
  Index restarts = 0;
  double wall_time = 0.0;
};

template <ConstraintProblem P>
PdhgRaw pdhg_solve(const P& prob, const PdhgOptions& opts) {
  if (!(opts.tol_kkt > 0.0)) throw Error(ErrorCode::InvalidTolerance, "solver.tol_kkt must be positive");
  if (opts.check_every < 1) throw Error(ErrorCode::Config, "solver.check_every must be >= 1");
  if (!(opts.theta >= 0.0 && opts.theta <= 1.0)) throw Error(ErrorCode::Config, "solver.theta must lie in [0, 1]");
  const auto t0 = std::chrono::steady_clock::now();
  const Vector& c = prob.cost();
  const Vector& h = prob.rhs();
  const Vector& lb = prob.lower_bounds();
  const Index n = prob.n_vars(), m = prob.n_rows();

  double omega = opts.primal_weight;
  if (!(omega > 0.0)) {
    const double cn = c.norm(), hn = h.norm();
    omega = (cn > 0.0 && hn > 0.0) ? cn / hn : 1.0;
  }
  const double L = constraint_operator_norm(prob, 200, opts.seed);
  const double eta = L > 0.0 ? 0.99 / L : 1.0;
  double tau = opts.tau ? *opts.tau : eta / omega;
  double sigma = opts.sigma ? *opts.sigma : eta * omega;
  const bool fixed_steps = opts.tau.has_value() || opts.sigma.has_value();

  Vector x = opts.warm_x ? *opts.warm_x : Vector::Zero(n);
  Vector lambda = opts.warm_lambda ? *opts.warm_lambda : Vector::Zero(m);
  if (x.size() != n || lambda.size() != m) throw Error(ErrorCode::ShapeMismatch, "warm start has the wrong length");
  x = x.cwiseMax(lb);
  lambda = lambda.cwiseMax(0.0);

  Vector gx, gtl;
  prob.apply(x, gx);
  prob.apply_adjoint(lambda, gtl);

  std::ofstream trace;
  if (!opts.trace_path.empty()) {
    trace.open(opts.trace_path);
    if (!trace) throw Error(ErrorCode::Io, "cannot open solver.trace_path " + opts.trace_path);
    trace << "iter,stationarity,primal,dual,complementarity,gap,objective\n";
    trace.precision(17);
  }

  PdhgRaw out;
  auto finish = [&](SolveStatus st, const Vector& xs, const Vector& ls, const KktResiduals& k, Index it) {
    out.status = st;
    out.x = xs;
    out.lambda = ls;
    out.kkt = k;
    out.iters = it;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };
  auto log_check = [&](Index it, const KktResiduals& k, const Vector& xs) {
    if (trace) {
      trace << it << ',' << k.stationarity << ',' << k.primal << ',' << k.dual << ',' << k.complementarity << ','
            << k.gap << ',' << c.dot(xs) << '\n';
    }
  };
  auto check_finite = [&](Index it, const Vector& xs, const Vector& ls) {
    if (!xs.allFinite() || !ls.allFinite()) {
      throw Error(ErrorCode::NumericalBreakdown, "non-finite PDHG iterate at iteration " + std::to_string(it));
    }
  };
  auto is_check = [&](Index it) { return it % opts.check_every == 0 || it == opts.max_iters; };
  // Restart test shared by both schemes; err_start < 0 means "not measured yet".
  double err_start = -1.0, err_prev = std::numeric_limits<double>::infinity();
  Index last_restart = 0;
  auto restart_due = [&](double err, Index it) {
    if (err_start < 0.0) {
      err_start = err;
      err_prev = err;
      return false;
    }
    const bool sufficient = err <= 0.2 * err_start;
    const bool necessary = err <= 0.8 * err_start && err > err_prev;
    const bool artificial = static_cast<double>(it - last_restart) >= 0.36 * static_cast<double>(it);
    err_prev = err;
    return sufficient || necessary || artificial;
  };
  Vector x_anchor = x, l_anchor = lambda;
  auto on_restart = [&](const Vector& xs, const Vector& ls, Index it) {
    if (opts.adapt_primal_weight && !fixed_steps) {
      const double dx = (xs - x_anchor).norm(), dl = (ls - l_anchor).norm();
      if (dx > 1e-10 && dl > 1e-10) {
        omega = std::exp(0.5 * std::log(dl / dx) + 0.5 * std::log(omega));
        tau = eta / omega;
        sigma = eta * omega;
      }
    }
    x_anchor = xs;
    l_anchor = ls;
    err_start = -1.0;
    err_prev = std::numeric_limits<double>::infinity();
    last_restart = it;
    ++out.restarts;
  };

  if (opts.scheme == PdhgScheme::Halpern) {
    // z <- k/(k+1) ((1 + r) T z - r z) + 1/(k+1) z_anchor, where T is one PDHG
    // step; products with G are carried along since every update is affine.
    constexpr double r = 1.0;
    Vector xp, lp, gxp, gtlp;
    Vector gx_anchor = gx, gtl_anchor = gtl;
    Index k = 0;
    for (Index it = 1; it <= opts.max_iters; ++it) {
      xp = (x - tau * (c + gtl)).cwiseMax(lb);
      prob.apply(xp, gxp);
      lp = (lambda + sigma * (gxp + opts.theta * (gxp - gx) - h)).cwiseMax(0.0);
      prob.apply_adjoint(lp, gtlp);

      if (is_check(it)) {
        check_finite(it, xp, lp);
        const KktResiduals kk = kkt_from_products(c, h, lb, xp, lp, gxp, gtlp);
        log_check(it, kk, xp);
        if (kk.certified(opts.tol_kkt)) return finish(SolveStatus::Optimal, xp, lp, kk, it);
        if (it == opts.max_iters) return finish(SolveStatus::IterLimit, xp, lp, kk, it);
        const double fixed_point =
            std::sqrt(omega * (xp - x).squaredNorm() + (lp - lambda).squaredNorm() / omega);
        if (opts.restarts && restart_due(fixed_point, it)) {
          x.swap(xp);
          lambda.swap(lp);
          gx.swap(gxp);
          gtl.swap(gtlp);
          on_restart(x, lambda, it);
          gx_anchor = gx;
          gtl_anchor = gtl;
          k = 0;
          continue;
        }
      }
      const double a = static_cast<double>(k + 1) / static_cast<double>(k + 2);
      const double b = 1.0 / static_cast<double>(k + 2);
      x = a * ((1.0 + r) * xp - r * x) + b * x_anchor;
      lambda = a * ((1.0 + r) * lp - r * lambda) + b * l_anchor;
      gx = a * ((1.0 + r) * gxp - r * gx) + b * gx_anchor;
      gtl = a * ((1.0 + r) * gtlp - r * gtl) + b * gtl_anchor;
      ++k;
    }
  } else {
    Vector gx_prev = gx;
    Vector sx = Vector::Zero(n), sl = Vector::Zero(m), sgx = Vector::Zero(m), sgtl = Vector::Zero(n);
    Index count = 0;
    Vector gxbar(m);
    auto measure = [](const KktResiduals& k) { return std::max(k.max_kkt(), k.gap); };
    for (Index it = 1; it <= opts.max_iters; ++it) {
      gxbar = gx + opts.theta * (gx - gx_prev);
      lambda = (lambda + sigma * (gxbar - h)).cwiseMax(0.0);
      prob.apply_adjoint(lambda, gtl);
      x = (x - tau * (c + gtl)).cwiseMax(lb);
      gx_prev.swap(gx);
      prob.apply(x, gx);

      sx += x;
      sl += lambda;
      sgx += gx;
      sgtl += gtl;
      ++count;

      if (!is_check(it)) continue;
      check_finite(it, x, lambda);
      const KktResiduals k_cur = kkt_from_products(c, h, lb, x, lambda, gx, gtl);
      log_check(it, k_cur, x);
      if (k_cur.certified(opts.tol_kkt)) return finish(SolveStatus::Optimal, x, lambda, k_cur, it);

      const double inv = 1.0 / static_cast<double>(count);
      const Vector ax = sx * inv, al = sl * inv;
      const Vector agx = sgx * inv, agtl = sgtl * inv;
      const KktResiduals k_avg = kkt_from_products(c, h, lb, ax, al, agx, agtl);
      if (k_avg.certified(opts.tol_kkt)) return finish(SolveStatus::Optimal, ax, al, k_avg, it);

      const bool use_avg = measure(k_avg) < measure(k_cur);
      const double err = use_avg ? measure(k_avg) : measure(k_cur);
      if (it == opts.max_iters) {
        return use_avg ? finish(SolveStatus::IterLimit, ax, al, k_avg, it)
                       : finish(SolveStatus::IterLimit, x, lambda, k_cur, it);
      }
      if (!opts.restarts || !restart_due(err, it)) continue;

      if (use_avg) {
        x = ax;
        lambda = al;
        gx = agx;
        gtl = agtl;
      }
      gx_prev = gx;
      on_restart(x, lambda, it);
      sx.setZero();
      sl.setZero();
      sgx.setZero();
      sgtl.setZero();
      count = 0;
    }
  }
  // max_iters == 0
  return finish(SolveStatus::IterLimit, x, lambda, kkt_from_products(c, h, lb, x, lambda, gx, gtl), 0);
}

}  // namespace sipo
