#include "sipo/formulations.hpp"

#include <limits>

namespace sipo {

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::General: return "general";
    case ProblemKind::Case1: return "case1";
    case ProblemKind::Case2: return "case2";
  }
  return "unknown";
}

Vector gather(const Vector& field, const IndexSet& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = field[idx[k]];
  return out;
}

// ------------------------------------------------------------------ LpProblem

LpProblem::LpProblem(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                     LpSpec spec)
    : op_(std::move(op)), partition_(std::move(partition)), spec_(std::move(spec)) {
  if (!op_ || !partition_) throw Error(ErrorCode::ShapeMismatch, "operator and partition are required");
  if (partition_->gel.empty()) throw Error(ErrorCode::EmptyGel, "gel region is empty");
  if (spec_.gel_upper.size() != n_gel() || spec_.gel_lower.size() != n_gel()) {
    throw Error(ErrorCode::ShapeMismatch, "gel bound vectors do not match the gel size");
  }
  if (static_cast<Index>(partition_->active.size() + partition_->mask.size()) != op_->n_rays()) {
    throw Error(ErrorCode::ShapeMismatch, "beamlet partition does not match the operator");
  }
  cost_ = Vector::Zero(n_vars());
  if (has_u()) cost_[u_index()] = spec_.w1;
  if (has_v()) cost_[v_index()] = spec_.w2;

  rhs_.resize(n_rows());
  rhs_.head(n_band()).setConstant(has_u() ? 0.0 : spec_.band_cap);
  if (has_v()) {
    rhs_.segment(n_band(), n_gel()).setZero();
  } else {
    rhs_.segment(n_band(), n_gel()) = spec_.gel_upper;
  }
  rhs_.tail(n_gel()) = -spec_.gel_lower;

  lower_ = Vector::Zero(n_vars());
  lower_.tail(n_vars() - n_active()).setConstant(-std::numeric_limits<double>::infinity());
  flags_ = partition_->active_flags(op_->n_rays());
}

Sinogram LpProblem::expand(const Vector& x) const {
  if (x.size() != n_vars()) throw Error(ErrorCode::ShapeMismatch, "primal vector has the wrong length");
  Sinogram g = Sinogram::Zero(op_->n_rays());
  const auto& act = partition_->active;
  for (std::size_t k = 0; k < act.size(); ++k) g[act[k]] = x[static_cast<Index>(k)];
  return g;
}

DoseField LpProblem::dose(const Vector& x) const { return op_->apply_forward(expand(x)); }

void LpProblem::apply(const Vector& x, Vector& out) const {
  const DoseField f = dose(x);
  out.resize(n_rows());
  const auto& band = partition_->band;
  const auto& gel = partition_->gel;
  const double u = has_u() ? x[u_index()] : 0.0;
  const double v = has_v() ? x[v_index()] : 0.0;
  const Index nb = n_band(), ng = n_gel();
  for (Index k = 0; k < nb; ++k) out[k] = f[band[static_cast<std::size_t>(k)]] - u;
  for (Index k = 0; k < ng; ++k) {
    const double fk = f[gel[static_cast<std::size_t>(k)]];
    out[nb + k] = has_v() ? fk - v * spec_.gel_upper[k] : fk;
    out[nb + ng + k] = -fk;
  }
}

void LpProblem::apply_adjoint(const Vector& lambda, Vector& out) const {
  if (lambda.size() != n_rows()) throw Error(ErrorCode::ShapeMismatch, "dual vector has the wrong length");
  const auto& band = partition_->band;
  const auto& gel = partition_->gel;
  const Index nb = n_band(), ng = n_gel();
  DoseField r = DoseField::Zero(op_->n_voxels());
  for (Index k = 0; k < nb; ++k) r[band[static_cast<std::size_t>(k)]] += lambda[k];
  for (Index k = 0; k < ng; ++k) r[gel[static_cast<std::size_t>(k)]] += lambda[nb + k] - lambda[nb + ng + k];
  const Sinogram s = op_->apply_adjoint(r, flags_);
  out.resize(n_vars());
  const auto& act = partition_->active;
  for (std::size_t k = 0; k < act.size(); ++k) out[static_cast<Index>(k)] = s[act[k]];
  if (has_u()) out[u_index()] = -lambda.head(nb).sum();
  if (has_v()) out[v_index()] = -lambda.segment(nb, ng).dot(spec_.gel_upper);
}

Vector LpProblem::constraint_values(const Vector& x) const {
  Vector gx;
  apply(x, gx);
  return gx - rhs_;
}

Matrix LpProblem::materialize() const {
  const Matrix at = dense_forward_matrix(*op_);
  const auto& band = partition_->band;
  const auto& gel = partition_->gel;
  const auto& act = partition_->active;
  const Index nb = n_band(), ng = n_gel();
  Matrix g = Matrix::Zero(n_rows(), n_vars());
  for (std::size_t c = 0; c < act.size(); ++c) {
    const auto col = static_cast<Index>(c);
    for (Index k = 0; k < nb; ++k) g(k, col) = at(band[static_cast<std::size_t>(k)], act[c]);
    for (Index k = 0; k < ng; ++k) {
      const double a = at(gel[static_cast<std::size_t>(k)], act[c]);
      g(nb + k, col) = a;
      g(nb + ng + k, col) = -a;
    }
  }
  if (has_u()) g.col(u_index()).head(nb).setConstant(-1.0);
  if (has_v()) g.col(v_index()).segment(nb, ng) = -spec_.gel_upper;
  return g;
}

DenseLp LpProblem::to_dense() const {
  DenseLp lp;
  lp.c = cost_;
  lp.a_ub = materialize();
  lp.b_ub = rhs_;
  lp.a_eq = Matrix(0, n_vars());
  lp.b_eq = Vector(0);
  lp.free.assign(static_cast<std::size_t>(n_vars()), false);
  for (Index j = n_active(); j < n_vars(); ++j) lp.free[static_cast<std::size_t>(j)] = true;
  return lp;
}

// ------------------------------------------------------------------ builders

namespace {

double checked_gel_min(const DoseField& target_dose, const IndexSet& gel) {
  double m = std::numeric_limits<double>::infinity();
  for (Index i : gel) {
    if (!(target_dose[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveDose, "target dose must be positive on the gel (voxel " + std::to_string(i) + ")");
    }
    m = std::min(m, target_dose[i]);
  }
  return m;
}

void check_target(const TomoOperator& op, const DomainPartition& part, const DoseField& target_dose) {
  if (target_dose.size() != op.n_voxels()) throw Error(ErrorCode::ShapeMismatch, "target dose does not match the grid");
  if (part.gel.empty()) throw Error(ErrorCode::EmptyGel, "gel region is empty");
}

}  // namespace

LpProblem build_general_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                           const DoseField& target_dose, double w1, double w2) {
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !(w1 + w2 > 0.0)) {
    throw Error(ErrorCode::InvalidWeights, "weights must be nonnegative with a positive sum");
  }
  check_target(*op, *partition, target_dose);
  LpSpec spec;
  spec.kind = ProblemKind::General;
  spec.w1 = w1;
  spec.w2 = w2;
  // u bounds band rows only; without a band it would be unbounded below.
  spec.has_u = !partition->band.empty();
  spec.f_crit = checked_gel_min(target_dose, partition->gel);
  spec.gel_upper = gather(target_dose, partition->gel) / spec.f_crit;
  spec.gel_lower = spec.gel_upper;
  return LpProblem(std::move(op), std::move(partition), std::move(spec));
}

Case1Bounds case1_bounds(const ResponseField& target_response, const IndexSet& gel, double eps_l, double eps_u,
                         const RichardsParams& p) {
  if (!(eps_l >= 0.0 && eps_l < 1.0) || !(eps_u >= 0.0)) {
    throw Error(ErrorCode::InvalidTolerance, "need 0 <= eps_l < 1 and eps_u >= 0");
  }
  if (gel.empty()) throw Error(ErrorCode::EmptyGel, "gel region is empty");
  const Vector m_t = gather(target_response, gel);
  const Vector m_l = (1.0 - eps_l) * m_t;
  const Vector m_u = (1.0 + eps_u) * m_t;
  const Vector f_l = richards_inverse(m_l, p);
  const Vector f_u = richards_inverse(m_u, p);

  Case1Bounds b;
  b.f_lower = DoseField::Zero(target_response.size());
  b.f_upper = DoseField::Zero(target_response.size());
  for (std::size_t k = 0; k < gel.size(); ++k) {
    if (!(f_l[static_cast<Index>(k)] > 0.0)) {
      throw Error(ErrorCode::NonPositiveDose, "lower response bound maps to a non-positive dose");
    }
    b.f_lower[gel[k]] = f_l[static_cast<Index>(k)];
    b.f_upper[gel[k]] = f_u[static_cast<Index>(k)];
  }
  b.f_crit = f_l.minCoeff();
  b.m_crit = m_l.minCoeff();
  b.degenerate_window = (f_l.array() == f_u.array()).all();
  return b;
}

LpProblem build_case1_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                         const ResponseField& target_response, double eps_l, double eps_u, const RichardsParams& p) {
  if (target_response.size() != op->n_voxels()) {
    throw Error(ErrorCode::ShapeMismatch, "target response does not match the grid");
  }
  const Case1Bounds b = case1_bounds(target_response, partition->gel, eps_l, eps_u, p);
  LpSpec spec;
  spec.kind = ProblemKind::Case1;
  spec.w1 = 1.0;
  spec.w2 = 0.0;
  spec.has_u = !partition->band.empty();
  spec.has_v = false;
  spec.f_crit = b.f_crit;
  spec.gel_upper = gather(b.f_upper, partition->gel) / b.f_crit;
  spec.gel_lower = gather(b.f_lower, partition->gel) / b.f_crit;
  return LpProblem(std::move(op), std::move(partition), std::move(spec));
}

LpProblem build_case2_lp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                         const DoseField& target_dose, double f_crit) {
  if (!(f_crit > 0.0) || !std::isfinite(f_crit)) {
    throw Error(ErrorCode::NonPositiveThreshold, "f_crit must be positive and finite");
  }
  check_target(*op, *partition, target_dose);
  checked_gel_min(target_dose, partition->gel);
  LpSpec spec;
  spec.kind = ProblemKind::Case2;
  spec.w1 = 0.0;
  spec.w2 = 1.0;
  spec.has_u = false;
  spec.has_v = true;
  spec.band_cap = 1.0;
  spec.f_crit = f_crit;
  spec.gel_upper = gather(target_dose, partition->gel) / f_crit;
  spec.gel_lower = spec.gel_upper;
  return LpProblem(std::move(op), std::move(partition), std::move(spec));
}

// ------------------------------------------------------------------ dense path

Matrix dense_projection_matrix(const ObjectGrid& grid, const ProjectionGeometry& geometry) {
  const Index per_slice = geometry.rays_per_slice();
  Matrix p = Matrix::Zero(per_slice * grid.nz, grid.size());
  for (Index z = 0; z < grid.nz; ++z) {
    for (Index a = 0; a < geometry.n_angles(); ++a) {
      const double ca = std::cos(geometry.angles[static_cast<std::size_t>(a)]);
      const double sa = std::sin(geometry.angles[static_cast<std::size_t>(a)]);
      for (Index b = 0; b < geometry.n_beams; ++b) {
        const double offset = static_cast<double>(b) - 0.5 * static_cast<double>(geometry.n_beams - 1);
        const Index row = z * per_slice + a * geometry.n_beams + b;
        for_each_ray_sample(grid, ca, sa, offset, [&](Index i, double w) { p(row, z * grid.slice_size() + i) += w; });
      }
    }
  }
  return p;
}

Matrix dense_psf_matrix(const ObjectGrid& grid, const PsfKernel& kernel) {
  Matrix k = Matrix::Zero(grid.size(), grid.size());
  for (Index z = 0; z < grid.nz; ++z)
    for (Index y = 0; y < grid.ny; ++y)
      for (Index x = 0; x < grid.nx; ++x) {
        for (const auto& t : kernel.taps()) {
          const Index xs = x + t.dx, ys = y + t.dy, zs = z + t.dz;
          if (xs < 0 || xs >= grid.nx || ys < 0 || ys >= grid.ny || zs < 0 || zs >= grid.nz) continue;
          k(grid.flat(x, y, z), grid.flat(xs, ys, zs)) += t.w;
        }
      }
  return k;
}

Matrix dense_forward_matrix(const TomoOperator& op) {
  const Matrix pt = dense_projection_matrix(op.grid(), op.geometry()).transpose();
  if (op.kernel().is_identity()) return pt;
  return dense_psf_matrix(op.grid(), op.kernel()) * pt;
}

// ------------------------------------------------------------------ LFP

LfProblem::LfProblem(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                     Vector target_norm, double w1, double w2)
    : op_(std::move(op)), partition_(std::move(partition)), target_(std::move(target_norm)), w1_(w1), w2_(w2) {
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !(w1 + w2 > 0.0)) {
    throw Error(ErrorCode::InvalidWeights, "weights must be nonnegative with a positive sum");
  }
  if (target_.size() != static_cast<Index>(partition_->gel.size())) {
    throw Error(ErrorCode::ShapeMismatch, "normalized target does not match the gel size");
  }
}

double LfProblem::objective(const LfPoint& x) const {
  if (!(x.s > 0.0)) throw Error(ErrorCode::NonPositiveDose, "fractional objective needs s > 0");
  return numerator(x) / x.s;
}

bool LfProblem::is_feasible(const LfPoint& x, double tol) const {
  if (!(x.s > 0.0)) return false;
  if (x.g.size() != n_active() || (x.g.array() < -tol).any()) return false;
  Sinogram full = Sinogram::Zero(op_->n_rays());
  for (std::size_t k = 0; k < partition_->active.size(); ++k) full[partition_->active[k]] = x.g[static_cast<Index>(k)];
  const DoseField f = op_->apply_forward(full);
  const double scale = tol * (1.0 + std::abs(x.u) + std::abs(x.v) + std::abs(x.s));
  for (Index i : partition_->band) {
    if (f[i] - x.u > scale) return false;
  }
  for (std::size_t k = 0; k < partition_->gel.size(); ++k) {
    const double fi = f[partition_->gel[k]];
    const double t = target_[static_cast<Index>(k)];
    if (fi - x.v * t > scale || x.s * t - fi > scale) return false;
  }
  return true;
}

Vector LfProblem::charnes_cooper(const LfPoint& x) const {
  if (!(x.s > 0.0)) throw Error(ErrorCode::NonPositiveDose, "Charnes-Cooper map needs s > 0");
  const double t = 1.0 / x.s;
  Vector out(n_active() + 2);
  out.head(n_active()) = t * x.g;
  out[n_active()] = t * x.u;
  out[n_active() + 1] = t * x.v;
  return out;
}

DenseLp LfProblem::parametric_dense(double q) const {
  const Matrix at = dense_forward_matrix(*op_);
  const auto& band = partition_->band;
  const auto& gel = partition_->gel;
  const auto& act = partition_->active;
  const Index na = n_active(), nb = static_cast<Index>(band.size()), ng = static_cast<Index>(gel.size());
  const Index iu = na, iv = na + 1, is = na + 2, nv = na + 3;

  DenseLp lp;
  lp.c = Vector::Zero(nv);
  lp.c[iu] = w1_;
  lp.c[iv] = w2_;
  lp.c[is] = -q;
  lp.a_ub = Matrix::Zero(nb + 2 * ng + 1, nv);
  lp.b_ub = Vector::Zero(nb + 2 * ng + 1);
  for (std::size_t c = 0; c < act.size(); ++c) {
    const auto col = static_cast<Index>(c);
    for (Index k = 0; k < nb; ++k) lp.a_ub(k, col) = at(band[static_cast<std::size_t>(k)], act[c]);
    for (Index k = 0; k < ng; ++k) {
      const double a = at(gel[static_cast<std::size_t>(k)], act[c]);
      lp.a_ub(nb + k, col) = a;
      lp.a_ub(nb + ng + k, col) = -a;
    }
  }
  lp.a_ub.col(iu).head(nb).setConstant(-1.0);
  lp.a_ub.col(iv).segment(nb, ng) = -target_;
  lp.a_ub.col(is).segment(nb + ng, ng) = target_;
  lp.a_ub.row(nb + 2 * ng).head(na).setOnes();
  lp.b_ub[nb + 2 * ng] = 1.0;
  lp.a_eq = Matrix(0, nv);
  lp.b_eq = Vector(0);
  lp.free.assign(static_cast<std::size_t>(nv), false);
  lp.free[static_cast<std::size_t>(iu)] = true;
  lp.free[static_cast<std::size_t>(iv)] = true;
  return lp;
}

LfPoint LfProblem::initial_point() const {
  LfPoint x;
  x.g = Vector::Ones(n_active());
  Sinogram full = Sinogram::Zero(op_->n_rays());
  for (Index j : partition_->active) full[j] = 1.0;
  const DoseField f = op_->apply_forward(full);
  x.u = 0.0;
  for (Index i : partition_->band) x.u = std::max(x.u, f[i]);
  x.s = std::numeric_limits<double>::infinity();
  x.v = 0.0;
  for (std::size_t k = 0; k < partition_->gel.size(); ++k) {
    const double r = f[partition_->gel[k]] / target_[static_cast<Index>(k)];
    x.s = std::min(x.s, r);
    x.v = std::max(x.v, r);
  }
  if (!(x.s > 0.0)) throw Error(ErrorCode::NonPositiveDose, "uniform beamlets leave a gel voxel undosed");
  return x;
}

LfProblem build_lfp(std::shared_ptr<const TomoOperator> op, std::shared_ptr<const DomainPartition> partition,
                    const DoseField& target_dose, double w1, double w2) {
  check_target(*op, *partition, target_dose);
  const double f_crit = checked_gel_min(target_dose, partition->gel);
  Vector target = gather(target_dose, partition->gel) / f_crit;
  return LfProblem(std::move(op), std::move(partition), std::move(target), w1, w2);
}

}  // namespace sipo
