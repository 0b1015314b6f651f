#include "sipo/domain.hpp"

#include <functional>
#include <limits>

namespace sipo {

namespace {

// One-dimensional max filter of radius r along a strided axis.
void dilate_axis(std::vector<std::uint8_t>& mask, Index n_axis, Index stride, Index n_lines,
                 const std::function<Index(Index)>& line_start, Index radius) {
  std::vector<std::uint8_t> line(static_cast<std::size_t>(n_axis));
  for (Index l = 0; l < n_lines; ++l) {
    const Index base = line_start(l);
    for (Index k = 0; k < n_axis; ++k) line[static_cast<std::size_t>(k)] = mask[static_cast<std::size_t>(base + k * stride)];
    // Distance to the nearest set cell, forward then backward sweep.
    Index last = -1;
    std::vector<Index> dist(static_cast<std::size_t>(n_axis), std::numeric_limits<Index>::max());
    for (Index k = 0; k < n_axis; ++k) {
      if (line[static_cast<std::size_t>(k)]) last = k;
      if (last >= 0) dist[static_cast<std::size_t>(k)] = k - last;
    }
    last = -1;
    for (Index k = n_axis - 1; k >= 0; --k) {
      if (line[static_cast<std::size_t>(k)]) last = k;
      if (last >= 0) dist[static_cast<std::size_t>(k)] = std::min(dist[static_cast<std::size_t>(k)], last - k);
    }
    for (Index k = 0; k < n_axis; ++k) {
      mask[static_cast<std::size_t>(base + k * stride)] = dist[static_cast<std::size_t>(k)] <= radius ? 1 : 0;
    }
  }
}

}  // namespace

std::vector<std::uint8_t> DomainPartition::active_flags(Index n_rays) const {
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(n_rays), 0);
  for (Index j : active) flags[static_cast<std::size_t>(j)] = 1;
  return flags;
}

DomainPartition partition_object_domain(const ObjectGrid& grid, const DoseField& target_dose, BandWidth band) {
  if (target_dose.size() != grid.size()) {
    throw Error(ErrorCode::ShapeMismatch, "target dose does not match the grid");
  }
  if (!band.is_free() && band.width() < 0) {
    throw Error(ErrorCode::BandWidthNegative, "band width " + std::to_string(band.width()) + " is negative");
  }
  DomainPartition part;
  std::vector<std::uint8_t> gel(static_cast<std::size_t>(grid.size()), 0);
  for (Index i = 0; i < grid.size(); ++i) {
    if (target_dose[i] > 0.0) {
      gel[static_cast<std::size_t>(i)] = 1;
      part.gel.push_back(i);
    }
  }
  if (part.gel.empty()) throw Error(ErrorCode::AllZeroTarget, "target dose has no positive entry");

  if (band.is_free()) {
    for (Index i = 0; i < grid.size(); ++i) {
      if (!gel[static_cast<std::size_t>(i)]) part.band.push_back(i);
    }
    return part;
  }

  // A Chebyshev ball is a box, so the dilation separates into per-axis passes.
  std::vector<std::uint8_t> dil = gel;
  const Index r = band.width();
  dilate_axis(dil, grid.nx, 1, grid.ny * grid.nz, [&](Index l) { return l * grid.nx; }, r);
  dilate_axis(dil, grid.ny, grid.nx, grid.nx * grid.nz,
              [&](Index l) { return (l / grid.nx) * grid.slice_size() + l % grid.nx; }, r);
  if (grid.is_volume()) {
    dilate_axis(dil, grid.nz, grid.slice_size(), grid.slice_size(), [](Index l) { return l; }, r);
  }
  for (Index i = 0; i < grid.size(); ++i) {
    if (gel[static_cast<std::size_t>(i)]) continue;
    (dil[static_cast<std::size_t>(i)] ? part.band : part.ext).push_back(i);
  }
  return part;
}

void partition_projection_domain(DomainPartition& partition, const TomoOperator& op, const DoseField& target_dose,
                                 double support_tol) {
  if (!(support_tol >= 0.0)) throw Error(ErrorCode::InvalidTolerance, "support tolerance must be nonnegative");
  if (target_dose.size() != op.n_voxels()) throw Error(ErrorCode::ShapeMismatch, "target dose does not match the grid");
  if (!((target_dose.array() > 0.0).any())) throw Error(ErrorCode::AllZeroTarget, "target dose has no positive entry");
  const Sinogram support = forward_project(target_dose, op.grid(), op.geometry());
  const double cut = support_tol * support.maxCoeff();
  partition.active.clear();
  partition.mask.clear();
  for (Index j = 0; j < support.size(); ++j) (support[j] > cut ? partition.active : partition.mask).push_back(j);
}

DomainPartition partition_domain(const TomoOperator& op, const DoseField& target_dose, BandWidth band,
                                 double support_tol) {
  DomainPartition part = partition_object_domain(op.grid(), target_dose, band);
  partition_projection_domain(part, op, target_dose, support_tol);
  return part;
}

}  // namespace sipo
