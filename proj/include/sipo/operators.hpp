#pragma once

#include "sipo/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

namespace sipo {

/// Object-space point spread function, applied as a zero-padded correlation.
/// Extents are odd; weights are stored x-fastest, then y, then z.
class PsfKernel {
 public:
  struct Tap {
    Index dx, dy, dz;
    double w;
  };

  /// Single central unit weight.
  PsfKernel();
  PsfKernel(Index kx, Index ky, Index kz, Vector weights);

  static PsfKernel identity() { return PsfKernel(); }

  /// extent^d zero kernel whose central populated^d block holds a Gaussian
  /// of standard deviation sigma, normalised to unit sum. `dims` is 2 or 3.
  static PsfKernel gaussian(Index extent, Index populated, double sigma, int dims = 3);

  Index kx() const noexcept { return kx_; }
  Index ky() const noexcept { return ky_; }
  Index kz() const noexcept { return kz_; }
  const Vector& weights() const noexcept { return weights_; }
  const std::vector<Tap>& taps() const noexcept { return taps_; }

  bool is_identity() const noexcept;
  bool is_symmetric() const noexcept;
  double at(Index dx, Index dy, Index dz) const;

  /// Nonzero 1D factors (offset, weight) per axis when the kernel is an
  /// outer product of three profiles; empty otherwise.
  struct Factors {
    std::vector<std::pair<Index, double>> x, y, z;
  };
  const std::optional<Factors>& factors() const noexcept { return factors_; }

 private:
  void detect_factors();

  Index kx_ = 1, ky_ = 1, kz_ = 1;
  Vector weights_;
  std::vector<Tap> taps_;  // nonzero weights only
  std::optional<Factors> factors_;
};

/// K f: correlation with zero padding. Identity kernels return f unchanged.
DoseField apply_psf(const DoseField& image, const ObjectGrid& grid, const PsfKernel& kernel);

/// K^T f: correlation with the flipped kernel.
DoseField apply_psf_adjoint(const DoseField& image, const ObjectGrid& grid, const PsfKernel& kernel);

/// P: ray-driven parallel-beam projection with bilinear sampling at unit
/// step. Volumes are projected slice by slice.
Sinogram forward_project(const DoseField& image, const ObjectGrid& grid, const ProjectionGeometry& geometry);

/// P restricted to rays whose flag is nonzero; other entries are left at zero.
/// `ray_flags` has one entry per ray (all slices).
Sinogram forward_project(const DoseField& image, const ObjectGrid& grid, const ProjectionGeometry& geometry,
                         const std::vector<std::uint8_t>& ray_flags);

/// P^T: the literal transpose of forward_project.
DoseField back_project(const Sinogram& sino, const ObjectGrid& grid, const ProjectionGeometry& geometry);

/// Visits every (voxel-in-slice, weight) pair of one ray. Shared by the
/// projector pair and by test oracles that need the raw footprint.
template <typename Visitor>
void for_each_ray_sample(const ObjectGrid& grid, double cos_a, double sin_a, double offset, Visitor&& visit);

/// Ray weights of one slice in compressed-row form for P and for P^T. Both
/// tables hold the same merged weights, so the pair is an exact transpose and
/// every product is a gather with a fixed summation order.
class SliceProjector {
 public:
  SliceProjector(const ObjectGrid& grid, const ProjectionGeometry& geometry);

  /// P on every slice; rays with a zero flag are skipped (left at zero).
  Sinogram project(const DoseField& image, const std::vector<std::uint8_t>* ray_flags = nullptr) const;
  /// P^T on every slice.
  DoseField back(const Sinogram& sino) const;

  Index nnz() const noexcept { return static_cast<Index>(p_val_.size()); }

 private:
  ObjectGrid grid_;
  Index rays_ = 0;
  std::vector<Index> p_ptr_, p_col_, t_ptr_, t_col_;
  std::vector<double> p_val_, t_val_;
};

/// Composite dose model A^T = K P^T with adjoint A = P K^T.
class TomoOperator {
 public:
  TomoOperator(ObjectGrid grid, ProjectionGeometry geometry, PsfKernel kernel = PsfKernel::identity());

  const ObjectGrid& grid() const noexcept { return grid_; }
  const ProjectionGeometry& geometry() const noexcept { return geometry_; }
  const PsfKernel& kernel() const noexcept { return kernel_; }

  Index n_voxels() const noexcept { return grid_.size(); }
  Index n_rays() const noexcept { return geometry_.rays_per_slice() * grid_.nz; }

  /// f = A^T g
  DoseField apply_forward(const Sinogram& g) const;
  /// A f
  Sinogram apply_adjoint(const DoseField& f) const;
  /// A f evaluated only on flagged rays.
  Sinogram apply_adjoint(const DoseField& f, const std::vector<std::uint8_t>& ray_flags) const;

  /// Cached result of estimate_operator_norm(*this, 100, 0), computed once.
  double norm() const;

 private:
  ObjectGrid grid_;
  ProjectionGeometry geometry_;
  PsfKernel kernel_;
  std::shared_ptr<const SliceProjector> projector_;
  struct NormCache;
  std::shared_ptr<NormCache> norm_cache_;
};

/// Power iteration on g -> A A^T g from a seeded Gaussian start; returns the
/// square root of the final Rayleigh quotient.
double estimate_operator_norm(const TomoOperator& op, int iters, std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename Visitor>
void for_each_ray_sample(const ObjectGrid& grid, double cos_a, double sin_a, double offset, Visitor&& visit) {
  const double cx = 0.5 * static_cast<double>(grid.nx - 1);
  const double cy = 0.5 * static_cast<double>(grid.ny - 1);
  // p(t) = q + t d with d = (cos, sin), detector axis e = (-sin, cos).
  const double qx = cx - offset * sin_a;
  const double qy = cy + offset * cos_a;
  const double nx = static_cast<double>(grid.nx);
  const double ny = static_cast<double>(grid.ny);

  double tlo = -1e300, thi = 1e300;
  auto clip = [&](double q, double d, double hi) {
    if (std::abs(d) < 1e-14) {
      if (q <= -1.0 || q >= hi) {
        tlo = 1.0;
        thi = -1.0;
      }
      return;
    }
    double a = (-1.0 - q) / d, b = (hi - q) / d;
    if (a > b) std::swap(a, b);
    tlo = std::max(tlo, a);
    thi = std::min(thi, b);
  };
  clip(qx, cos_a, nx);
  clip(qy, sin_a, ny);
  if (!(thi > tlo)) return;

  const auto kmin = static_cast<Index>(std::floor(tlo)) + 1;
  const auto kmax = static_cast<Index>(std::ceil(thi)) - 1;
  for (Index k = kmin; k <= kmax; ++k) {
    const double t = static_cast<double>(k);
    const double px = qx + t * cos_a;
    const double py = qy + t * sin_a;
    const double fx0 = std::floor(px);
    const double fy0 = std::floor(py);
    const auto x0 = static_cast<Index>(fx0);
    const auto y0 = static_cast<Index>(fy0);
    const double fx = px - fx0;
    const double fy = py - fy0;
    const bool x0in = x0 >= 0 && x0 < grid.nx;
    const bool x1in = x0 + 1 >= 0 && x0 + 1 < grid.nx;
    if (y0 >= 0 && y0 < grid.ny) {
      const Index row = y0 * grid.nx;
      if (x0in) visit(row + x0, (1.0 - fx) * (1.0 - fy));
      if (x1in) visit(row + x0 + 1, fx * (1.0 - fy));
    }
    if (y0 + 1 >= 0 && y0 + 1 < grid.ny) {
      const Index row = (y0 + 1) * grid.nx;
      if (x0in) visit(row + x0, (1.0 - fx) * fy);
      if (x1in) visit(row + x0 + 1, fx * fy);
    }
  }
}

}  // namespace sipo
