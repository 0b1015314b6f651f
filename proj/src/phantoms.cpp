#include "sipo/phantoms.hpp"

#include <cmath>

namespace sipo {

const char* to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::Disk: return "disk";
    case PhantomKind::Annulus: return "annulus";
    case PhantomKind::Blocks: return "blocks";
    case PhantomKind::Sphere3d: return "sphere3d";
  }
  return "unknown";
}

PhantomKind phantom_kind_from_string(const std::string& s) {
  if (s == "disk") return PhantomKind::Disk;
  if (s == "annulus") return PhantomKind::Annulus;
  if (s == "blocks") return PhantomKind::Blocks;
  if (s == "sphere3d") return PhantomKind::Sphere3d;
  throw Error(ErrorCode::Config, "phantom.kind must be disk, annulus, blocks or sphere3d (got '" + s + "')");
}

PhantomSpec PhantomSpec::desk_default(PhantomKind kind) {
  PhantomSpec s;
  s.kind = kind;
  switch (kind) {
    case PhantomKind::Disk:
      s.inner_radius = 0.0;
      break;
    case PhantomKind::Annulus:
      break;
    case PhantomKind::Blocks:
      s.levels = {0.7, 0.6, 0.7, 0.6, 0.5, 0.7, 0.6, 0.7, 0.5, 0.7};
      break;
    case PhantomKind::Sphere3d:
      s.nx = 32;
      s.ny = 32;
      s.nz = 34;
      s.radius = 12.0;
      s.inner_radius = 5.0;
      break;
  }
  return s;
}

ObjectGrid phantom_grid(const PhantomSpec& spec) {
  if (spec.kind != PhantomKind::Sphere3d && spec.nz != 1) {
    throw Error(ErrorCode::GeometryOutOfBounds, "2D phantoms need nz = 1");
  }
  return ObjectGrid(spec.nx, spec.ny, spec.nz);
}

ResponseField generate_phantom(const PhantomSpec& spec, const RichardsParams& p) {
  const ObjectGrid grid = phantom_grid(spec);
  if (spec.levels.empty()) throw Error(ErrorCode::Config, "phantom.levels is empty");
  for (double m : spec.levels) {
    if (!p.invertible(m)) {
      throw Error(ErrorCode::OutOfInvertibleRange, "phantom level " + std::to_string(m) + " is outside (alpha, k)");
    }
  }
  if (!(spec.radius >= 0.0) || !(spec.inner_radius >= 0.0)) {
    throw Error(ErrorCode::GeometryOutOfBounds, "radii must be nonnegative");
  }
  const double cx = 0.5 * static_cast<double>(grid.nx - 1);
  const double cy = 0.5 * static_cast<double>(grid.ny - 1);
  const double cz = 0.5 * static_cast<double>(grid.nz - 1);
  ResponseField m = ResponseField::Zero(grid.size());

  auto fits = [&](double r, bool in_z) {
    return r <= cx && r <= cy && (!in_z || r <= cz);
  };

  switch (spec.kind) {
    case PhantomKind::Disk:
    case PhantomKind::Annulus: {
      if (!fits(spec.radius, false)) throw Error(ErrorCode::GeometryOutOfBounds, "radius exceeds the grid");
      const double inner = spec.kind == PhantomKind::Annulus ? spec.inner_radius : -1.0;
      if (spec.kind == PhantomKind::Annulus && !(inner < spec.radius)) {
        throw Error(ErrorCode::GeometryOutOfBounds, "annulus needs inner_radius < radius");
      }
      for (Index y = 0; y < grid.ny; ++y)
        for (Index x = 0; x < grid.nx; ++x) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          const double d2 = dx * dx + dy * dy;
          if (d2 <= spec.radius * spec.radius && (inner < 0.0 || d2 > inner * inner)) m[grid.flat(x, y)] = spec.levels[0];
        }
      break;
    }
    case PhantomKind::Sphere3d: {
      if (!fits(spec.radius, true)) throw Error(ErrorCode::GeometryOutOfBounds, "radius exceeds the grid");
      const double inner = spec.inner_radius;
      for (Index z = 0; z < grid.nz; ++z)
        for (Index y = 0; y < grid.ny; ++y)
          for (Index x = 0; x < grid.nx; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy,
                         dz = static_cast<double>(z) - cz;
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 <= spec.radius * spec.radius && !(inner > 0.0 && d2 <= inner * inner)) {
              m[grid.flat(x, y, z)] = spec.levels[0];
            }
          }
      break;
    }
    case PhantomKind::Blocks: {
      if (spec.segments < 1 || spec.block_width < 1 || spec.block_height < 1 || spec.gap < 0) {
        throw Error(ErrorCode::GeometryOutOfBounds, "blocks need segments, width, height >= 1 and gap >= 0");
      }
      // Two rows when there are more than five segments, like a two-line word.
      const Index rows = spec.segments > 5 ? 2 : 1;
      const Index cols = (spec.segments + rows - 1) / rows;
      const Index w = cols * spec.block_width + (cols - 1) * spec.gap;
      const Index h = rows * spec.block_height + (rows - 1) * spec.gap;
      if (w + 2 > grid.nx || h + 2 > grid.ny) {
        throw Error(ErrorCode::GeometryOutOfBounds, "block layout does not fit the grid with a one-voxel margin");
      }
      const Index x0 = (grid.nx - w) / 2, y0 = (grid.ny - h) / 2;
      for (Index s = 0; s < spec.segments; ++s) {
        const Index r = s / cols, c = s % cols;
        const double level = spec.levels[static_cast<std::size_t>(s) % spec.levels.size()];
        const Index bx = x0 + c * (spec.block_width + spec.gap);
        const Index by = y0 + r * (spec.block_height + spec.gap);
        for (Index y = by; y < by + spec.block_height; ++y)
          for (Index x = bx; x < bx + spec.block_width; ++x) m[grid.flat(x, y)] = level;
      }
      break;
    }
  }
  return m;
}

}  // namespace sipo
