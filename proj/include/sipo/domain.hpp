#pragma once

#include "sipo/core.hpp"
#include "sipo/operators.hpp"

#include <cstdint>

namespace sipo {

/// Width of the penalised band around the gel, in Chebyshev voxel steps, or
/// "free" meaning every non-gel voxel belongs to the band.
class BandWidth {
 public:
  explicit BandWidth(Index width) : width_(width) {}
  static BandWidth free() { return BandWidth(); }

  bool is_free() const noexcept { return free_; }
  Index width() const noexcept { return width_; }

 private:
  BandWidth() : free_(true) {}
  Index width_ = 0;
  bool free_ = false;
};

/// Object-space regions (gel, band, ext) and projection-space beamlet sets
/// (active, mask). Each family is a partition of its index space.
struct DomainPartition {
  IndexSet gel, band, ext;
  IndexSet active, mask;

  /// 1 for active rays, 0 for masked, over all rays of all slices.
  std::vector<std::uint8_t> active_flags(Index n_rays) const;
};

/// gel = {f_T > 0}; band = Chebyshev dilation of gel by the band width minus
/// gel (or everything else when free); ext = the rest.
DomainPartition partition_object_domain(const ObjectGrid& grid, const DoseField& target_dose, BandWidth band);

/// Adds active = {j : [P f_T]_j > support_tol * max_j [P f_T]_j} and its
/// complement to `partition`.
void partition_projection_domain(DomainPartition& partition, const TomoOperator& op, const DoseField& target_dose,
                                 double support_tol = 0.0);

/// Both stages in one call.
DomainPartition partition_domain(const TomoOperator& op, const DoseField& target_dose, BandWidth band,
                                 double support_tol = 0.0);

}  // namespace sipo
