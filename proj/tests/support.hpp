#pragma once

// Independent oracles and fixtures shared by the unit tests.

#include "sipo/core.hpp"
#include "sipo/domain.hpp"
#include "sipo/formulations.hpp"
#include "sipo/operators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace sipo::test {

inline Vector random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

/// Voxels whose centre lies within r of the grid centre, set to `level`.
inline DoseField disk_field(const ObjectGrid& g, double r, double level = 1.0) {
  DoseField f = DoseField::Zero(g.size());
  const double cx = 0.5 * static_cast<double>(g.nx - 1), cy = 0.5 * static_cast<double>(g.ny - 1);
  for (Index y = 0; y < g.ny; ++y)
    for (Index x = 0; x < g.nx; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      if (dx * dx + dy * dy <= r * r) f[g.flat(x, y)] = level;
    }
  return f;
}

/// Beam offset of detector element b, measured from the grid centre.
inline double beam_offset(const ProjectionGeometry& geo, Index b) {
  return static_cast<double>(b) - 0.5 * static_cast<double>(geo.n_beams - 1);
}

/// Whether a ray gives voxel (vx, vy) a nonzero bilinear weight, found by
/// walking unit-spaced samples over a range that covers any grid position and
/// testing the open bilinear support square of the voxel.
inline bool ray_touches_voxel(const ObjectGrid& g, double angle, double offset, Index vx, Index vy) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double cx = 0.5 * static_cast<double>(g.nx - 1), cy = 0.5 * static_cast<double>(g.ny - 1);
  const double qx = cx - offset * s, qy = cy + offset * c;
  const Index reach = 4 * (g.nx + g.ny);
  for (Index k = -reach; k <= reach; ++k) {
    const double px = qx + static_cast<double>(k) * c, py = qy + static_cast<double>(k) * s;
    const double ax = std::abs(px - static_cast<double>(vx)), ay = std::abs(py - static_cast<double>(vy));
    if (ax < 1.0 && ay < 1.0) return true;
  }
  return false;
}

/// Zero-padded correlation by direct nested summation over the full kernel.
inline DoseField direct_correlation(const DoseField& f, const ObjectGrid& g, const PsfKernel& k) {
  DoseField out = DoseField::Zero(g.size());
  const Index hx = k.kx() / 2, hy = k.ky() / 2, hz = k.kz() / 2;
  for (Index z = 0; z < g.nz; ++z)
    for (Index y = 0; y < g.ny; ++y)
      for (Index x = 0; x < g.nx; ++x) {
        double acc = 0.0;
        for (Index dz = -hz; dz <= hz; ++dz)
          for (Index dy = -hy; dy <= hy; ++dy)
            for (Index dx = -hx; dx <= hx; ++dx) {
              const Index xx = x + dx, yy = y + dy, zz = z + dz;
              if (xx < 0 || yy < 0 || zz < 0 || xx >= g.nx || yy >= g.ny || zz >= g.nz) continue;
              acc += k.at(dx, dy, dz) * f[g.flat(xx, yy, zz)];
            }
        out[g.flat(x, y, z)] = acc;
      }
  return out;
}

/// Small seeded instance: a smooth random blob of target doses on an n x n
/// grid with `n_angles` views over 180 degrees.
struct Instance {
  std::shared_ptr<const TomoOperator> op;
  std::shared_ptr<const DomainPartition> part;
  DoseField target_dose;
  ResponseField target_response;
};

inline Instance tiny_instance(Index n, Index n_angles, std::uint64_t seed, Index band = 1,
                              const PsfKernel& kernel = PsfKernel::identity()) {
  const ObjectGrid g(n, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cx = 0.5 * static_cast<double>(n - 1) + (u(rng) - 0.5);
  const double cy = 0.5 * static_cast<double>(n - 1) + (u(rng) - 0.5);
  const double r = 0.18 * static_cast<double>(n) + 0.12 * static_cast<double>(n) * u(rng);
  Instance inst;
  inst.target_response = ResponseField::Zero(g.size());
  for (Index y = 0; y < n; ++y)
    for (Index x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      if (dx * dx + dy * dy <= r * r) inst.target_response[g.flat(x, y)] = 0.45 + 0.2 * u(rng);
    }
  RichardsParams p;
  inst.target_dose = response_to_dose(inst.target_response, p);
  const auto geo = ProjectionGeometry::uniform(n_angles, M_PI, ProjectionGeometry::default_beams(g));
  inst.op = std::make_shared<const TomoOperator>(g, geo, kernel);
  inst.part = std::make_shared<const DomainPartition>(partition_domain(*inst.op, inst.target_dose, BandWidth(band)));
  return inst;
}

/// 6x6 two-level target (0.3 / 0.7 drawn per voxel on a 4x2 gel) under a
/// 3x3 Gaussian blur, six views. With eps = 0 the pinned gel cannot absorb
/// the blur from neighbouring levels; seed 0 is certified infeasible by the
/// dense phase-1 simplex (xi = 0.0678).
inline Instance two_level_blurred(std::uint64_t seed) {
  const ObjectGrid g(6, 6);
  std::mt19937_64 rng(seed);
  Instance inst;
  inst.target_response = ResponseField::Zero(g.size());
  for (Index y = 2; y < 4; ++y)
    for (Index x = 1; x < 5; ++x) inst.target_response[g.flat(x, y)] = (rng() % 2) ? 0.7 : 0.3;
  const RichardsParams p;
  inst.target_dose = response_to_dose(inst.target_response, p);
  inst.op = std::make_shared<const TomoOperator>(
      g, ProjectionGeometry::uniform(6, M_PI, ProjectionGeometry::default_beams(g)), PsfKernel::gaussian(3, 3, 1.0, 2));
  inst.part = std::make_shared<const DomainPartition>(partition_domain(*inst.op, inst.target_dose, BandWidth(1)));
  return inst;
}

}  // namespace sipo::test
