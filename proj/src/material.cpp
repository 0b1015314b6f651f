#include "sipo/material.hpp"

namespace sipo {

DoseField response_to_dose(const ResponseField& target_response, const RichardsParams& p) {
  p.validate();
  std::vector<Index> gel;
  for (Index i = 0; i < target_response.size(); ++i) {
    if (target_response[i] != 0.0) gel.push_back(i);
  }
  if (gel.empty()) throw Error(ErrorCode::AllZeroTarget, "target response has no gel voxels");

  Vector on_gel(static_cast<Index>(gel.size()));
  for (std::size_t g = 0; g < gel.size(); ++g) on_gel[static_cast<Index>(g)] = target_response[gel[g]];
  const Vector dose = richards_inverse(on_gel, p);

  DoseField out = DoseField::Zero(target_response.size());
  for (std::size_t g = 0; g < gel.size(); ++g) {
    const double f = dose[static_cast<Index>(g)];
    if (!(f > 0.0)) {
      throw Error(ErrorCode::NonPositiveDose, "response " + std::to_string(target_response[gel[g]]) + " at voxel " +
                                                  std::to_string(gel[g]) + " maps to non-positive dose " +
                                                  std::to_string(f));
    }
    out[gel[g]] = f;
  }
  return out;
}

}  // namespace sipo
