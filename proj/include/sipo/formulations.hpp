#pragma once

#include "sipo/core.hpp"
#include "sipo/dense_lp.hpp"
#include "sipo/domain.hpp"
#include "sipo/material.hpp"
#include "sipo/operators.hpp"

#include <memory>
#include <optional>

namespace sipo {

enum class ProblemKind { General, Case1, Case2 };

const char* to_string(ProblemKind kind);

/// Structural description shared by every formulation. Rows, in order:
///   band:      [A^T y]_i - u            <= 0         (u variable)
///              [A^T y]_i                <= band_cap  (no u)
///   gel upper: [A^T y]_i - v * upper_i  <= 0         (v variable)
///              [A^T y]_i                <= upper_i   (no v)
///   gel lower: -[A^T y]_i               <= -lower_i
/// with y >= 0 on active beamlets and masked beamlets eliminated.
struct LpSpec {
  ProblemKind kind = ProblemKind::General;
  double w1 = 1.0;  // cost on u
  double w2 = 1.0;  // cost on v
  bool has_u = true;
  bool has_v = true;
  double band_cap = 1.0;  // used when !has_u
  Vector gel_upper;       // over gel positions: coefficient of v, or constant bound
  Vector gel_lower;       // over gel positions
  double f_crit = 1.0;    // physical dose represented by 1 in normalized units
};

/// Matrix-free normalized LP over x = (y_active, [u], [v]).
class LpProblem {
 public:
  LpProblem(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition, LpSpec spec);

  ProblemKind kind() const noexcept { return spec_.kind; }
  const LpSpec& spec() const noexcept { return spec_; }
  const TomoOperator& op() const noexcept { return *op_; }
  const DomainPartition& partition() const noexcept { return *partition_; }
  std::shared_ptr<const TomoOperator> op_ptr() const noexcept { return op_; }
  std::shared_ptr<const DomainPartition> partition_ptr() const noexcept { return partition_; }
  double f_crit() const noexcept { return spec_.f_crit; }
  bool has_u() const noexcept { return spec_.has_u; }
  bool has_v() const noexcept { return spec_.has_v; }

  Index n_active() const noexcept { return static_cast<Index>(partition_->active.size()); }
  Index n_band() const noexcept { return static_cast<Index>(partition_->band.size()); }
  Index n_gel() const noexcept { return static_cast<Index>(partition_->gel.size()); }
  Index n_vars() const noexcept { return n_active() + (has_u() ? 1 : 0) + (has_v() ? 1 : 0); }
  Index n_rows() const noexcept { return n_band() + 2 * n_gel(); }
  Index u_index() const noexcept { return n_active(); }
  Index v_index() const noexcept { return n_active() + (has_u() ? 1 : 0); }

  const Vector& cost() const noexcept { return cost_; }
  const Vector& rhs() const noexcept { return rhs_; }
  /// 0 on y, -inf on the free scalars.
  const Vector& lower_bounds() const noexcept { return lower_; }

  /// out = G x.
  void apply(const Vector& x, Vector& out) const;
  /// out = G^T lambda.
  void apply_adjoint(const Vector& lambda, Vector& out) const;

  /// G x - h, the signed constraint values (feasible iff all <= 0).
  Vector constraint_values(const Vector& x) const;

  /// Full sinogram with y on active beamlets and zeros on masked ones.
  Sinogram expand(const Vector& x) const;
  /// Normalized dose A^T y.
  DoseField dose(const Vector& x) const;
  double objective(const Vector& x) const { return cost_.dot(x); }

  /// Explicit constraint matrix (rows x vars), assembled from dense ray
  /// weights rather than through the matrix-free path.
  Matrix materialize() const;
  DenseLp to_dense() const;

 private:
  std::shared_ptr<const TomoOperator> op_;
  std::shared_ptr<const DomainPartition> partition_;
  LpSpec spec_;
  Vector cost_, rhs_, lower_;
  std::vector<std::uint8_t> flags_;
};

/// Weighted general form. f_crit = min_gel f_T and f~_T = f_T / f_crit.
LpProblem build_general_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                           const DoseField& target_dose, double w1, double w2);

/// Result of the Case 1 bound construction, kept for post-processing.
struct Case1Bounds {
  DoseField f_lower, f_upper;  // physical bounds (zero off gel)
  double f_crit = 0.0;
  double m_crit = 0.0;
  bool degenerate_window = false;  // f~_L == f~_U on the gel
};

Case1Bounds case1_bounds(const ResponseField& target_response, const IndexSet& gel, double eps_l, double eps_u,
                         const RichardsParams& p);

/// Spillage minimisation under response tolerances (1 - eps_l, 1 + eps_u) m_T.
LpProblem build_case1_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                         const ResponseField& target_response, double eps_l, double eps_u, const RichardsParams& p);

/// Conformity maximisation under the hard band cap f_crit.
LpProblem build_case2_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                         const DoseField& target_dose, double f_crit);

/// Dense ray-weight matrices built directly from the sampling rule.
Matrix dense_projection_matrix(const ObjectGrid& grid, const ProjectionGeometry& geometry);  // P, rays x voxels
Matrix dense_psf_matrix(const ObjectGrid& grid, const PsfKernel& kernel);                    // K, voxels x voxels
Matrix dense_forward_matrix(const TomoOperator& op);                                         // A^T = K P^T

// ------------------------------------------------------------------ LFP

/// Point of the fractional program before the Charnes-Cooper substitution.
struct LfPoint {
  Vector g;  // over active beamlets
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
};

/// min (w1 u + w2 v) / s subject to the relaxed extrema rows, g >= 0 on
/// active beamlets and s > 0.
class LfProblem {
 public:
  LfProblem(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
            Vector target_norm, double w1, double w2);

  double w1() const noexcept { return w1_; }
  double w2() const noexcept { return w2_; }
  const Vector& target_norm() const noexcept { return target_; }
  const DomainPartition& partition() const noexcept { return *partition_; }
  Index n_active() const noexcept { return static_cast<Index>(partition_->active.size()); }

  double numerator(const LfPoint& x) const { return w1_ * x.u + w2_ * x.v; }
  double denominator(const LfPoint& x) const { return x.s; }
  /// N/D; throws NonPositiveDose when s <= 0.
  double objective(const LfPoint& x) const;
  bool is_feasible(const LfPoint& x, double tol = 1e-9) const;

  /// t = 1/s applied to (g, u, v) gives the LP point (y, u~, v~).
  Vector charnes_cooper(const LfPoint& x) const;

  /// Dense parametric problem  max q D - N  over the feasible cone cut by
  /// sum(g) <= 1, written as a minimisation over (g, u, v, s).
  DenseLp parametric_dense(double q) const;

  /// A feasible point: uniform unit beamlets with the tightest u, v, s.
  LfPoint initial_point() const;

 private:
  std::shared_ptr<const TomoOperator> op_;
  std::shared_ptr<const DomainPartition> partition_;
  Vector target_;
  double w1_, w2_;
};

/// Builds the fractional instance underlying build_general_lp.
LfProblem build_lfp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                    const DoseField& target_dose, double w1, double w2);

/// Gel entries of a field, in gel order.
Vector gather(const Vector& field, const IndexSet& idx);

}  // namespace sipo
