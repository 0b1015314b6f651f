#include "sipo/core.hpp"

#include <cmath>

namespace sipo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllZeroTarget: return "AllZeroTarget";
    case ErrorCode::BandWidthNegative: return "BandWidthNegative";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::OutOfInvertibleRange: return "OutOfInvertibleRange";
    case ErrorCode::NonPositiveDose: return "NonPositiveDose";
    case ErrorCode::EmptyGel: return "EmptyGel";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::InvalidTolerance: return "InvalidTolerance";
    case ErrorCode::NonPositiveThreshold: return "NonPositiveThreshold";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::InnerSolverFailure: return "InnerSolverFailure";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::NonPositiveAlpha: return "NonPositiveAlpha";
    case ErrorCode::GeometryOutOfBounds: return "GeometryOutOfBounds";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::ShapeMismatchWithSidecar: return "ShapeMismatchWithSidecar";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ObjectGrid::ObjectGrid(Index nx_, Index ny_, Index nz_) : nx(nx_), ny(ny_), nz(nz_) {
  if (nx < 4 || ny < 4 || nz < 1) {
    throw Error(ErrorCode::InvalidGrid, "grid must be at least 4x4x1, got " + std::to_string(nx) +
                                            "x" + std::to_string(ny) + "x" + std::to_string(nz));
  }
}

ProjectionGeometry::ProjectionGeometry(std::vector<double> angles_, Index n_beams_)
    : angles(std::move(angles_)), n_beams(n_beams_) {
  if (angles.empty()) throw Error(ErrorCode::InvalidGeometry, "at least one angle is required");
  if (n_beams < 1) throw Error(ErrorCode::InvalidGeometry, "n_beams must be positive");
  for (std::size_t a = 0; a < angles.size(); ++a) {
    if (!std::isfinite(angles[a]) || angles[a] < 0.0 || angles[a] >= 2.0 * M_PI) {
      throw Error(ErrorCode::InvalidGeometry, "angles must lie in [0, 2pi)");
    }
    if (a > 0 && !(angles[a] > angles[a - 1])) {
      throw Error(ErrorCode::InvalidGeometry, "angles must be strictly increasing");
    }
  }
}

ProjectionGeometry ProjectionGeometry::uniform(Index n_angles, double span, Index n_beams) {
  if (n_angles < 1) throw Error(ErrorCode::InvalidGeometry, "n_angles must be >= 1");
  if (!(span > 0.0) || span > 2.0 * M_PI + 1e-12) {
    throw Error(ErrorCode::InvalidGeometry, "angle span must be in (0, 2pi]");
  }
  std::vector<double> angles(static_cast<std::size_t>(n_angles));
  for (Index a = 0; a < n_angles; ++a) {
    angles[static_cast<std::size_t>(a)] = span * static_cast<double>(a) / static_cast<double>(n_angles);
  }
  return ProjectionGeometry(std::move(angles), n_beams);
}

Index ProjectionGeometry::default_beams(const ObjectGrid& grid) {
  const double diag = std::sqrt(static_cast<double>(grid.nx * grid.nx + grid.ny * grid.ny));
  auto nb = static_cast<Index>(std::ceil(diag - 1e-9));
  if ((nb % 2) != (grid.ny % 2)) ++nb;
  return nb;
}

}  // namespace sipo
