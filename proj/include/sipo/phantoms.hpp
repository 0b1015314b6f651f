#pragma once

#include "sipo/core.hpp"
#include "sipo/material.hpp"

#include <string>
#include <vector>

namespace sipo {

enum class PhantomKind { Disk, Annulus, Blocks, Sphere3d };

const char* to_string(PhantomKind k);
PhantomKind phantom_kind_from_string(const std::string& s);

/// Generated stand-ins for the logo and statue targets. Distances are
/// measured from the grid centre ((n-1)/2 on every axis) in voxel units.
struct PhantomSpec {
  PhantomKind kind = PhantomKind::Disk;
  Index nx = 64, ny = 64, nz = 1;
  double radius = 20.0;        // disk, annulus outer, sphere outer
  double inner_radius = 10.0;  // annulus hole, sphere cavity (0 = none)
  Index segments = 10;         // blocks
  Index block_width = 8, block_height = 20, gap = 4;
  std::vector<double> levels{0.5};

  /// 64x64 disk, 64x64 ten-segment blocks, 32x32x34 hollow sphere.
  static PhantomSpec desk_default(PhantomKind kind);
};

/// Response field with the prescribed levels on the part and 0 elsewhere.
/// Blocks cycle through `levels` segment by segment.
ResponseField generate_phantom(const PhantomSpec& spec, const RichardsParams& p = {});

ObjectGrid phantom_grid(const PhantomSpec& spec);

}  // namespace sipo
