#pragma once

#include "sipo/core.hpp"
#include "sipo/material.hpp"

#include <string>
#include <vector>

namespace sipo {

/// A field together with the grid it lives on.
struct FieldData {
  Vector values;
  ObjectGrid grid;
  std::string units;
};

/// PGM (P2 or P5) as a response field: pixel 0 is outside the part, other
/// pixels map to alpha + (pixel / maxval) (k - alpha), clamped into the
/// invertible range.
FieldData read_pgm(const std::string& path, const RichardsParams& p);

/// Writes a 2D response field as PGM; binary (P5) unless `ascii`.
void write_pgm(const std::string& path, const ResponseField& m, const ObjectGrid& grid, const RichardsParams& p,
               int maxval = 255, bool ascii = false);

/// Raw little-endian float32 values plus `<path>.json` describing
/// {shape, order, dtype, units}. `shape` lists the dimensions slowest first.
void write_raw_f32(const std::string& path, const Vector& values, const std::vector<Index>& shape,
                   const std::string& units);
void write_field(const std::string& path, const Vector& values, const ObjectGrid& grid, const std::string& units);

struct RawArray {
  Vector values;
  std::vector<Index> shape;
  std::string units;
};
RawArray read_raw_f32(const std::string& path);

/// Dispatches on the extension: .pgm goes through read_pgm, anything else is
/// raw float32 with a sidecar (2 or 3 dimensions).
FieldData read_field(const std::string& path, const RichardsParams& p);

}  // namespace sipo
