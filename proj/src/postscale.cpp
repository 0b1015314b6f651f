#include "sipo/postscale.hpp"

#include <cmath>
#include <limits>

namespace sipo {

const char* to_string(ScalingDomain d) {
  switch (d) {
    case ScalingDomain::Dose: return "dose";
    case ScalingDomain::Response: return "response";
    case ScalingDomain::Anchored: return "anchored";
  }
  return "unknown";
}

const char* to_string(WeightScheme w) {
  return w == WeightScheme::Uniform ? "uniform" : "proportional-to-target";
}

Vector calibration_weights(WeightScheme scheme, const Vector& target_on_gel) {
  if (scheme == WeightScheme::Uniform) return Vector::Ones(target_on_gel.size());
  return target_on_gel.cwiseMax(0.0);
}

namespace {
void check_weights(const Vector& w, const IndexSet& gel) {
  if (w.size() != static_cast<Index>(gel.size())) throw Error(ErrorCode::ShapeMismatch, "weights do not match the gel");
  if ((w.array() < 0.0).any() || !w.allFinite()) throw Error(ErrorCode::InvalidWeights, "weights must be finite and >= 0");
}
}  // namespace

ScalingResult scale_dose_domain(const DoseField& normalized_dose, const DoseField& target_dose, const IndexSet& gel,
                                const Vector& weights) {
  check_weights(weights, gel);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < gel.size(); ++k) {
    const double w = weights[static_cast<Index>(k)];
    const double f = normalized_dose[gel[k]];
    num += w * f * target_dose[gel[k]];
    den += w * f * f;
  }
  if (!(den > 0.0)) throw Error(ErrorCode::DegenerateDenominator, "weighted norm of the normalized dose is zero");
  ScalingResult r;
  r.alpha_star = num / den;
  r.domain = ScalingDomain::Dose;
  r.weights = weights;
  double phi = 0.0;
  for (std::size_t k = 0; k < gel.size(); ++k) {
    const double d = r.alpha_star * normalized_dose[gel[k]] - target_dose[gel[k]];
    phi += weights[static_cast<Index>(k)] * d * d;
  }
  r.objective_value = phi;
  return r;
}

double response_objective(double alpha, const DoseField& normalized_dose, const ResponseField& target_response,
                          const IndexSet& gel, const Vector& weights, const RichardsParams& p) {
  double phi = 0.0;
  for (std::size_t k = 0; k < gel.size(); ++k) {
    const double d = richards(alpha * normalized_dose[gel[k]], p) - target_response[gel[k]];
    phi += weights[static_cast<Index>(k)] * d * d;
  }
  return phi;
}

ScalingResult scale_response_domain(const DoseField& normalized_dose, const ResponseField& target_response,
                                    const IndexSet& gel, const Vector& weights, const RichardsParams& p,
                                    std::optional<std::pair<double, double>> bracket) {
  check_weights(weights, gel);
  p.validate();
  double lo, hi;
  if (bracket) {
    lo = bracket->first;
    hi = bracket->second;
  } else {
    DoseField f_t = DoseField::Zero(target_response.size());
    for (Index i : gel) f_t[i] = richards_inv(target_response[i], p);
    const double a_f = scale_dose_domain(normalized_dose, f_t, gel, weights).alpha_star;
    if (!(a_f > 0.0)) throw Error(ErrorCode::BracketInvalid, "dose-domain estimate is not positive");
    lo = 1e-3 * a_f;
    hi = 1e3 * a_f;
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::BracketInvalid, "need 0 < alpha_lo < alpha_hi < inf");
  }
  auto phi = [&](double log_a) {
    return response_objective(std::exp(log_a), normalized_dose, target_response, gel, weights, p);
  };
  // Coarse scan guards against a non-unimodal objective.
  const int n_scan = 400;
  const double llo = std::log(lo), lhi = std::log(hi);
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n_scan; ++i) {
    const double v = phi(llo + (lhi - llo) * i / n_scan);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = llo + (lhi - llo) * std::max(best - 1, 0) / n_scan;
  double b = llo + (lhi - llo) * std::min(best + 1, n_scan) / n_scan;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = phi(x1), f2 = phi(x2);
  while (b - a > 1e-10) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = phi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = phi(x2);
    }
  }
  double la = 0.5 * (a + b);
  double fv = phi(la);
  for (double cand : {a, b, llo + (lhi - llo) * best / n_scan}) {
    const double v = phi(cand);
    if (v < fv) {
      fv = v;
      la = cand;
    }
  }
  ScalingResult r;
  r.alpha_star = std::exp(la);
  r.domain = ScalingDomain::Response;
  r.objective_value = fv;
  r.weights = weights;
  return r;
}

ScalingResult scale_anchored(double f_crit, Index n_gel) {
  if (!(f_crit > 0.0)) throw Error(ErrorCode::NonPositiveAlpha, "anchor f_crit must be positive");
  ScalingResult r;
  r.alpha_star = f_crit;
  r.domain = ScalingDomain::Anchored;
  r.weights = Vector::Ones(n_gel);
  return r;
}

std::pair<Sinogram, DoseField> apply_scaling(const Sinogram& y, const DoseField& normalized_dose, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::NonPositiveAlpha, "scale must be positive");
  return {alpha * y, alpha * normalized_dose};
}

}  // namespace sipo
