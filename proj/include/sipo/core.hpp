#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sipo {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Field aliases. All object-space fields are row-major over (z, y, x) with x
// fastest; sinograms are beamlet-major within angle-major blocks, and for
// volumes the per-slice blocks are stacked in z order.
using DoseField = Vector;
using ResponseField = Vector;
using Sinogram = Vector;

/// Sorted, duplicate-free list of flat indices.
using IndexSet = std::vector<Index>;

enum class ErrorCode {
  ShapeMismatch,
  AllZeroTarget,
  BandWidthNegative,
  KernelTooLarge,
  InvalidKernel,
  InvalidGrid,
  InvalidGeometry,
  OutOfInvertibleRange,
  NonPositiveDose,
  EmptyGel,
  EmptyBand,
  InvalidWeights,
  InvalidTolerance,
  NonPositiveThreshold,
  NumericalBreakdown,
  SizeLimitExceeded,
  InnerSolverFailure,
  NonConvergence,
  DegenerateDenominator,
  BracketInvalid,
  NonPositiveAlpha,
  GeometryOutOfBounds,
  UnsupportedFormat,
  CorruptHeader,
  ShapeMismatchWithSidecar,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Uniform voxel grid; voxel pitch is the unit of length everywhere.
struct ObjectGrid {
  Index nx = 0;
  Index ny = 0;
  Index nz = 1;

  ObjectGrid() = default;
  ObjectGrid(Index nx_, Index ny_, Index nz_ = 1);

  Index size() const noexcept { return nx * ny * nz; }
  Index slice_size() const noexcept { return nx * ny; }
  bool is_volume() const noexcept { return nz > 1; }
  Index flat(Index x, Index y, Index z = 0) const noexcept { return (z * ny + y) * nx + x; }

  friend bool operator==(const ObjectGrid&, const ObjectGrid&) = default;
};

/// Parallel-beam geometry. Beamlets are spaced one voxel apart on a detector
/// centred on the grid; the same geometry is applied to every z-slice.
struct ProjectionGeometry {
  std::vector<double> angles;  // radians, strictly increasing
  Index n_beams = 0;

  ProjectionGeometry() = default;
  ProjectionGeometry(std::vector<double> angles_, Index n_beams_);

  /// n views at spacing span/n starting at 0.
  static ProjectionGeometry uniform(Index n_angles, double span, Index n_beams);

  /// Smallest detector covering the grid diagonal, with the parity of ny so
  /// that the axis-aligned view samples voxel centres.
  static Index default_beams(const ObjectGrid& grid);

  Index n_angles() const noexcept { return static_cast<Index>(angles.size()); }
  Index rays_per_slice() const noexcept { return n_angles() * n_beams; }
};

}  // namespace sipo
