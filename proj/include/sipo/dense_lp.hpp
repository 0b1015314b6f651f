#pragma once

#include "sipo/core.hpp"

#include <vector>

namespace sipo {

/// Explicit LP  min c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,
/// x_j >= 0 unless free[j]. Used only on tiny instances.
struct DenseLp {
  Vector c;
  Matrix a_ub;
  Vector b_ub;
  Matrix a_eq;
  Vector b_eq;
  std::vector<bool> free;

  Index n_vars() const noexcept { return c.size(); }
  Index entries() const noexcept { return a_ub.size() + a_eq.size(); }
};

}  // namespace sipo
