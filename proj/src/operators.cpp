#include "sipo/operators.hpp"

#include "sipo/parallel.hpp"

#include <mutex>
#include <random>

namespace sipo {

// ---------------------------------------------------------------- PsfKernel

PsfKernel::PsfKernel() : weights_(Vector::Ones(1)), taps_{{0, 0, 0, 1.0}} {}

PsfKernel::PsfKernel(Index kx, Index ky, Index kz, Vector weights)
    : kx_(kx), ky_(ky), kz_(kz), weights_(std::move(weights)) {
  if (kx < 1 || ky < 1 || kz < 1 || kx % 2 == 0 || ky % 2 == 0 || kz % 2 == 0) {
    throw Error(ErrorCode::InvalidKernel, "kernel extents must be odd and positive");
  }
  if (weights_.size() != kx * ky * kz) {
    throw Error(ErrorCode::InvalidKernel, "kernel has " + std::to_string(weights_.size()) +
                                              " weights, extents require " + std::to_string(kx * ky * kz));
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidKernel, "kernel weights must be finite and nonnegative");
  }
  if (!(weights_.sum() > 0.0)) throw Error(ErrorCode::InvalidKernel, "kernel weights sum to zero");
  const Index hx = kx / 2, hy = ky / 2, hz = kz / 2;
  for (Index z = 0; z < kz; ++z)
    for (Index y = 0; y < ky; ++y)
      for (Index x = 0; x < kx; ++x) {
        const double w = weights_[(z * ky + y) * kx + x];
        if (w != 0.0) taps_.push_back({x - hx, y - hy, z - hz, w});
      }
  detect_factors();
}

void PsfKernel::detect_factors() {
  // Rank-one test against the profiles through the peak weight.
  Index peak = 0;
  const double wmax = weights_.maxCoeff(&peak);
  const Index px = peak % kx_, py = (peak / kx_) % ky_, pz = peak / (kx_ * ky_);
  const auto w = [&](Index x, Index y, Index z) { return weights_[(z * ky_ + y) * kx_ + x]; };
  Vector fx(kx_), fy(ky_), fz(kz_);
  for (Index x = 0; x < kx_; ++x) fx[x] = w(x, py, pz);
  for (Index y = 0; y < ky_; ++y) fy[y] = w(px, y, pz) / wmax;
  for (Index z = 0; z < kz_; ++z) fz[z] = w(px, py, z) / wmax;
  for (Index z = 0; z < kz_; ++z)
    for (Index y = 0; y < ky_; ++y)
      for (Index x = 0; x < kx_; ++x) {
        if (std::abs(fx[x] * fy[y] * fz[z] - w(x, y, z)) > 1e-14 * wmax) return;
      }
  Factors f;
  const auto collect = [](const Vector& v, std::vector<std::pair<Index, double>>& out) {
    for (Index i = 0; i < v.size(); ++i)
      if (v[i] != 0.0) out.emplace_back(i - v.size() / 2, v[i]);
  };
  collect(fx, f.x);
  collect(fy, f.y);
  collect(fz, f.z);
  // Worth it only when three passes touch fewer taps than the full stencil.
  if (f.x.size() + f.y.size() + f.z.size() < taps_.size()) factors_ = std::move(f);
}

PsfKernel PsfKernel::gaussian(Index extent, Index populated, double sigma, int dims) {
  if (dims != 2 && dims != 3) throw Error(ErrorCode::InvalidKernel, "gaussian kernel dims must be 2 or 3");
  if (populated < 1 || populated > extent || populated % 2 == 0 || extent % 2 == 0) {
    throw Error(ErrorCode::InvalidKernel, "populated region must be odd and no larger than the extent");
  }
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidKernel, "sigma must be positive");
  const Index kz = dims == 3 ? extent : 1;
  Vector w = Vector::Zero(extent * extent * kz);
  const Index h = extent / 2, hp = populated / 2;
  const Index hz = kz / 2, hpz = dims == 3 ? hp : 0;
  for (Index z = hz - hpz; z <= hz + hpz; ++z)
    for (Index y = h - hp; y <= h + hp; ++y)
      for (Index x = h - hp; x <= h + hp; ++x) {
        const double r2 = static_cast<double>((x - h) * (x - h) + (y - h) * (y - h) + (z - hz) * (z - hz));
        w[(z * extent + y) * extent + x] = std::exp(-r2 / (2.0 * sigma * sigma));
      }
  w /= w.sum();
  return PsfKernel(extent, extent, kz, std::move(w));
}

bool PsfKernel::is_identity() const noexcept {
  return taps_.size() == 1 && taps_[0].dx == 0 && taps_[0].dy == 0 && taps_[0].dz == 0 && taps_[0].w == 1.0;
}

bool PsfKernel::is_symmetric() const noexcept {
  const Index n = weights_.size();
  for (Index i = 0; i < n; ++i) {
    if (weights_[i] != weights_[n - 1 - i]) return false;
  }
  return true;
}

double PsfKernel::at(Index dx, Index dy, Index dz) const {
  const Index x = dx + kx_ / 2, y = dy + ky_ / 2, z = dz + kz_ / 2;
  if (x < 0 || x >= kx_ || y < 0 || y >= ky_ || z < 0 || z >= kz_) return 0.0;
  return weights_[(z * ky_ + y) * kx_ + x];
}

// ---------------------------------------------------------------- PSF apply

namespace {

void check_field(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has length " + std::to_string(v.size()) +
                                              ", expected " + std::to_string(expected));
  }
}

// One zero-padded 1D correlation along `axis` (0 = x, 1 = y, 2 = z).
DoseField correlate_axis(const DoseField& in, const ObjectGrid& grid, const std::vector<std::pair<Index, double>>& taps,
                         int axis, int sign) {
  if (taps.size() == 1 && taps[0].first == 0 && taps[0].second == 1.0) return in;
  DoseField out = DoseField::Zero(grid.size());
  const Index nx = grid.nx, ny = grid.ny, nz = grid.nz;
  parallel_chunks(nz, nz, [&](Index, Index zb, Index ze) {
    for (const auto& [off, w] : taps) {
      const Index d = sign * off;
      const Index dx = axis == 0 ? d : 0, dy = axis == 1 ? d : 0, dz = axis == 2 ? d : 0;
      const Index x_lo = std::max<Index>(0, -dx), x_hi = std::min(nx, nx - dx);
      const Index y_lo = std::max<Index>(0, -dy), y_hi = std::min(ny, ny - dy);
      if (x_hi <= x_lo) continue;
      const Index len = x_hi - x_lo;
      for (Index z = zb; z < ze; ++z) {
        const Index zs = z + dz;
        if (zs < 0 || zs >= nz) continue;
        for (Index y = y_lo; y < y_hi; ++y) {
          out.segment(grid.flat(x_lo, y, z), len) += w * in.segment(grid.flat(x_lo + dx, y + dy, zs), len);
        }
      }
    }
  });
  return out;
}

DoseField correlate(const DoseField& image, const ObjectGrid& grid, const PsfKernel& kernel, int sign) {
  check_field(image, grid.size(), "image");
  if (kernel.kx() > grid.nx || kernel.ky() > grid.ny || kernel.kz() > grid.nz) {
    throw Error(ErrorCode::KernelTooLarge, "kernel extents exceed the grid");
  }
  if (kernel.is_identity()) return image;
  if (const auto& f = kernel.factors()) {
    return correlate_axis(correlate_axis(correlate_axis(image, grid, f->x, 0, sign), grid, f->y, 1, sign), grid, f->z,
                          2, sign);
  }

  DoseField out = DoseField::Zero(grid.size());
  const Index nx = grid.nx, ny = grid.ny, nz = grid.nz;
  parallel_chunks(nz, nz, [&](Index, Index zb, Index ze) {
    for (const auto& tap : kernel.taps()) {
      const Index dx = sign * tap.dx, dy = sign * tap.dy, dz = sign * tap.dz;
      const Index x_lo = std::max<Index>(0, -dx), x_hi = std::min(nx, nx - dx);
      const Index y_lo = std::max<Index>(0, -dy), y_hi = std::min(ny, ny - dy);
      if (x_hi <= x_lo) continue;
      const Index len = x_hi - x_lo;
      for (Index z = zb; z < ze; ++z) {
        const Index zs = z + dz;
        if (zs < 0 || zs >= nz) continue;
        for (Index y = y_lo; y < y_hi; ++y) {
          out.segment(grid.flat(x_lo, y, z), len) += tap.w * image.segment(grid.flat(x_lo + dx, y + dy, zs), len);
        }
      }
    }
  });
  return out;
}

}  // namespace

DoseField apply_psf(const DoseField& image, const ObjectGrid& grid, const PsfKernel& kernel) {
  return correlate(image, grid, kernel, +1);
}

DoseField apply_psf_adjoint(const DoseField& image, const ObjectGrid& grid, const PsfKernel& kernel) {
  return correlate(image, grid, kernel, -1);
}

// ---------------------------------------------------------------- projector

SliceProjector::SliceProjector(const ObjectGrid& grid, const ProjectionGeometry& geometry)
    : grid_(grid), rays_(geometry.rays_per_slice()) {
  if (geometry.n_angles() < 1 || geometry.n_beams < 1) throw Error(ErrorCode::InvalidGeometry, "empty geometry");
  const Index ns = grid.slice_size();
  std::vector<std::pair<Index, double>> buf;
  p_ptr_.reserve(static_cast<std::size_t>(rays_) + 1);
  p_ptr_.push_back(0);
  for (Index a = 0; a < geometry.n_angles(); ++a) {
    const double ca = std::cos(geometry.angles[static_cast<std::size_t>(a)]);
    const double sa = std::sin(geometry.angles[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < geometry.n_beams; ++b) {
      const double offset = static_cast<double>(b) - 0.5 * static_cast<double>(geometry.n_beams - 1);
      buf.clear();
      for_each_ray_sample(grid, ca, sa, offset, [&](Index i, double w) { buf.emplace_back(i, w); });
      std::stable_sort(buf.begin(), buf.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
      for (std::size_t k = 0; k < buf.size();) {
        const Index i = buf[k].first;
        double w = 0.0;
        for (; k < buf.size() && buf[k].first == i; ++k) w += buf[k].second;
        if (w == 0.0) continue;
        p_col_.push_back(i);
        p_val_.push_back(w);
      }
      p_ptr_.push_back(static_cast<Index>(p_col_.size()));
    }
  }
  // Transpose by counting; rays stay in increasing order within each voxel row.
  t_ptr_.assign(static_cast<std::size_t>(ns) + 1, 0);
  for (Index c : p_col_) ++t_ptr_[static_cast<std::size_t>(c) + 1];
  for (Index i = 0; i < ns; ++i) t_ptr_[static_cast<std::size_t>(i) + 1] += t_ptr_[static_cast<std::size_t>(i)];
  t_col_.resize(p_col_.size());
  t_val_.resize(p_val_.size());
  std::vector<Index> next(t_ptr_.begin(), t_ptr_.end() - 1);
  for (Index r = 0; r < rays_; ++r) {
    for (Index k = p_ptr_[static_cast<std::size_t>(r)]; k < p_ptr_[static_cast<std::size_t>(r) + 1]; ++k) {
      const auto pos = static_cast<std::size_t>(next[static_cast<std::size_t>(p_col_[static_cast<std::size_t>(k)])]++);
      t_col_[pos] = r;
      t_val_[pos] = p_val_[static_cast<std::size_t>(k)];
    }
  }
}

namespace {
constexpr Index kRowChunk = 512;
}

Sinogram SliceProjector::project(const DoseField& image, const std::vector<std::uint8_t>* flags) const {
  check_field(image, grid_.size(), "image");
  const Index total = rays_ * grid_.nz;
  if (flags && static_cast<Index>(flags->size()) != total) {
    throw Error(ErrorCode::ShapeMismatch, "ray flag vector does not match the geometry");
  }
  Sinogram out = Sinogram::Zero(total);
  const Index ns = grid_.slice_size(), nz = grid_.nz;
  if (nz > 1) {
    // Voxel-major copy so every weight updates all slices at once; each
    // (ray, slice) sum keeps the same order as the per-slice loop.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vox =
        Eigen::Map<const Eigen::MatrixXd>(image.data(), ns, nz);
    Eigen::Map<Eigen::MatrixXd> res(out.data(), rays_, nz);
    parallel_chunks(rays_, (rays_ + kRowChunk - 1) / kRowChunk, [&](Index, Index rb, Index re) {
      std::vector<double> acc(static_cast<std::size_t>(nz));
      for (Index r = rb; r < re; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Index k = p_ptr_[static_cast<std::size_t>(r)]; k < p_ptr_[static_cast<std::size_t>(r) + 1]; ++k) {
          const double w = p_val_[static_cast<std::size_t>(k)];
          const double* src = vox.data() + p_col_[static_cast<std::size_t>(k)] * nz;
          for (Index z = 0; z < nz; ++z) acc[static_cast<std::size_t>(z)] += w * src[z];
        }
        for (Index z = 0; z < nz; ++z) {
          if (!flags || (*flags)[static_cast<std::size_t>(z * rays_ + r)]) res(r, z) = acc[static_cast<std::size_t>(z)];
        }
      }
    });
    return out;
  }
  parallel_chunks(total, (total + kRowChunk - 1) / kRowChunk, [&](Index, Index rb, Index re) {
    for (Index j = rb; j < re; ++j) {
      if (flags && !(*flags)[static_cast<std::size_t>(j)]) continue;
      const Index z = j / rays_, r = j % rays_;
      const double* slice = image.data() + z * ns;
      double acc = 0.0;
      for (Index k = p_ptr_[static_cast<std::size_t>(r)]; k < p_ptr_[static_cast<std::size_t>(r) + 1]; ++k) {
        acc += p_val_[static_cast<std::size_t>(k)] * slice[p_col_[static_cast<std::size_t>(k)]];
      }
      out[j] = acc;
    }
  });
  return out;
}

DoseField SliceProjector::back(const Sinogram& sino) const {
  check_field(sino, rays_ * grid_.nz, "sinogram");
  DoseField out(grid_.size());
  const Index ns = grid_.slice_size(), nz = grid_.nz;
  if (nz > 1) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rays =
        Eigen::Map<const Eigen::MatrixXd>(sino.data(), rays_, nz);
    Eigen::Map<Eigen::MatrixXd> res(out.data(), ns, nz);
    parallel_chunks(ns, (ns + kRowChunk - 1) / kRowChunk, [&](Index, Index ib, Index ie) {
      std::vector<double> acc(static_cast<std::size_t>(nz));
      for (Index i = ib; i < ie; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Index k = t_ptr_[static_cast<std::size_t>(i)]; k < t_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
          const double w = t_val_[static_cast<std::size_t>(k)];
          const double* src = rays.data() + t_col_[static_cast<std::size_t>(k)] * nz;
          for (Index z = 0; z < nz; ++z) acc[static_cast<std::size_t>(z)] += w * src[z];
        }
        for (Index z = 0; z < nz; ++z) res(i, z) = acc[static_cast<std::size_t>(z)];
      }
    });
    return out;
  }
  parallel_chunks(grid_.size(), (grid_.size() + kRowChunk - 1) / kRowChunk, [&](Index, Index ib, Index ie) {
    for (Index v = ib; v < ie; ++v) {
      const Index z = v / ns, i = v % ns;
      const double* s = sino.data() + z * rays_;
      double acc = 0.0;
      for (Index k = t_ptr_[static_cast<std::size_t>(i)]; k < t_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
        acc += t_val_[static_cast<std::size_t>(k)] * s[t_col_[static_cast<std::size_t>(k)]];
      }
      out[v] = acc;
    }
  });
  return out;
}

Sinogram forward_project(const DoseField& image, const ObjectGrid& grid, const ProjectionGeometry& geometry) {
  check_field(image, grid.size(), "image");
  return SliceProjector(grid, geometry).project(image);
}

Sinogram forward_project(const DoseField& image, const ObjectGrid& grid, const ProjectionGeometry& geometry,
                         const std::vector<std::uint8_t>& ray_flags) {
  check_field(image, grid.size(), "image");
  return SliceProjector(grid, geometry).project(image, &ray_flags);
}

DoseField back_project(const Sinogram& sino, const ObjectGrid& grid, const ProjectionGeometry& geometry) {
  check_field(sino, geometry.rays_per_slice() * grid.nz, "sinogram");
  return SliceProjector(grid, geometry).back(sino);
}

// ---------------------------------------------------------------- TomoOperator

struct TomoOperator::NormCache {
  std::once_flag once;
  double value = 0.0;
};

TomoOperator::TomoOperator(ObjectGrid grid, ProjectionGeometry geometry, PsfKernel kernel)
    : grid_(grid), geometry_(std::move(geometry)), kernel_(std::move(kernel)), norm_cache_(std::make_shared<NormCache>()) {
  projector_ = std::make_shared<const SliceProjector>(grid_, geometry_);
  if (kernel_.kx() > grid_.nx || kernel_.ky() > grid_.ny || kernel_.kz() > grid_.nz) {
    throw Error(ErrorCode::KernelTooLarge, "kernel extents exceed the grid");
  }
}

DoseField TomoOperator::apply_forward(const Sinogram& g) const {
  DoseField f = projector_->back(g);
  if (kernel_.is_identity()) return f;
  return apply_psf(f, grid_, kernel_);
}

Sinogram TomoOperator::apply_adjoint(const DoseField& f) const {
  if (kernel_.is_identity()) return projector_->project(f);
  return projector_->project(apply_psf_adjoint(f, grid_, kernel_));
}

Sinogram TomoOperator::apply_adjoint(const DoseField& f, const std::vector<std::uint8_t>& ray_flags) const {
  if (kernel_.is_identity()) return projector_->project(f, &ray_flags);
  return projector_->project(apply_psf_adjoint(f, grid_, kernel_), &ray_flags);
}

double TomoOperator::norm() const {
  std::call_once(norm_cache_->once, [&] { norm_cache_->value = estimate_operator_norm(*this, 100, 0); });
  return norm_cache_->value;
}

double estimate_operator_norm(const TomoOperator& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw Error(ErrorCode::InvalidTolerance, "power iteration needs at least one step");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Sinogram g(op.n_rays());
  for (Index j = 0; j < g.size(); ++j) g[j] = normal(rng);
  double rq = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double n = g.norm();
    if (n == 0.0) return 0.0;
    g /= n;
    const DoseField f = op.apply_forward(g);
    rq = f.squaredNorm();  // <g, A A^T g> for unit g
    g = op.apply_adjoint(f);
  }
  return std::sqrt(std::max(rq, 0.0));
}

}  // namespace sipo
