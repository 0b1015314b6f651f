#pragma once

#include "sipo/core.hpp"
#include "sipo/material.hpp"

#include <optional>
#include <utility>

namespace sipo {

enum class ScalingDomain { Dose, Response, Anchored };
enum class WeightScheme { Uniform, ProportionalToTarget };

const char* to_string(ScalingDomain d);
const char* to_string(WeightScheme w);

struct ScalingResult {
  double alpha_star = 1.0;
  ScalingDomain domain = ScalingDomain::Dose;
  double objective_value = 0.0;
  Vector weights;  // over gel
};

/// Calibration weights over the gel: ones, or the target values themselves.
Vector calibration_weights(WeightScheme scheme, const Vector& target_on_gel);

/// argmin_a sum w_i (a f~_i - f_T,i)^2 over the gel, in closed form.
ScalingResult scale_dose_domain(const DoseField& normalized_dose, const DoseField& target_dose, const IndexSet& gel,
                                const Vector& weights);

/// Phi_m(a) = sum w_i (M(a f~_i) - m_T,i)^2 over the gel.
double response_objective(double alpha, const DoseField& normalized_dose, const ResponseField& target_response,
                          const IndexSet& gel, const Vector& weights, const RichardsParams& p);

/// Minimises Phi_m over [lo, hi] by a log-spaced scan followed by golden
/// section in log(alpha) down to relative width 1e-10. Without a bracket the
/// search spans (1e-3, 1e3) times the dose-domain optimum against M^{-1}(m_T).
ScalingResult scale_response_domain(const DoseField& normalized_dose, const ResponseField& target_response,
                                    const IndexSet& gel, const Vector& weights, const RichardsParams& p,
                                    std::optional<std::pair<double, double>> bracket = std::nullopt);

/// alpha = f_crit, no calibration.
ScalingResult scale_anchored(double f_crit, Index n_gel);

/// (alpha y, alpha f~).
std::pair<Sinogram, DoseField> apply_scaling(const Sinogram& y, const DoseField& normalized_dose, double alpha);

}  // namespace sipo
