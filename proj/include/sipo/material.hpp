#pragma once

#include "sipo/core.hpp"

#include <cmath>
#include <sstream>

namespace sipo {

/// Generalised logistic (Richards) dose-to-response curve
///   m = alpha + (k - alpha) / (1 + exp(-beta (f - f0)))^(1/gamma).
/// Defaults describe a plain logistic; no fitted resin constants are implied.
struct RichardsParams {
  double alpha = 0.0;  // lower asymptote
  double k = 1.0;      // upper asymptote
  double beta = 4.0;   // growth rate, 1/dose
  double gamma = 1.0;  // shape
  double f0 = 1.0;     // location, dose

  void validate() const {
    if (!(k > alpha) || !(beta > 0.0) || !(gamma > 0.0) || !std::isfinite(f0) || !std::isfinite(alpha) ||
        !std::isfinite(k)) {
      throw Error(ErrorCode::Config, "Richards parameters need k > alpha, beta > 0, gamma > 0");
    }
  }

  /// Half-width of the excluded strip next to each asymptote.
  double inverse_margin() const { return 1e-12 * (k - alpha); }
  bool invertible(double m) const { return m > alpha + inverse_margin() && m < k - inverse_margin(); }
};

namespace detail {
// log(1 + e^z) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::exp;
  using std::log1p;
  return z > Scalar(0) ? z + log1p(exp(-z)) : log1p(exp(z));
}
}  // namespace detail

template <typename Scalar>
Scalar richards(Scalar f, const RichardsParams& p) {
  using std::exp;
  const Scalar z = -Scalar(p.beta) * (f - Scalar(p.f0));
  return Scalar(p.alpha) + Scalar(p.k - p.alpha) * exp(-detail::softplus(z) / Scalar(p.gamma));
}

template <typename Scalar>
Scalar richards_slope(Scalar f, const RichardsParams& p) {
  using std::exp;
  using std::log;
  const Scalar z = -Scalar(p.beta) * (f - Scalar(p.f0));
  const Scalar g = Scalar(p.gamma);
  return Scalar(p.k - p.alpha) * exp(log(Scalar(p.beta) / g) + z - (Scalar(1) / g + Scalar(1)) * detail::softplus(z));
}

/// Unchecked analytic inverse; callers guarantee alpha < m < k.
template <typename Scalar>
Scalar richards_inv(Scalar m, const RichardsParams& p) {
  using std::expm1;
  using std::log;
  const Scalar ratio = Scalar(p.k - p.alpha) / (m - Scalar(p.alpha));
  return Scalar(p.f0) - log(expm1(Scalar(p.gamma) * log(ratio))) / Scalar(p.beta);
}

/// Elementwise M(f).
template <typename Derived>
Vector richards_forward(const Eigen::DenseBase<Derived>& f, const RichardsParams& p) {
  return f.derived().unaryExpr([&p](double v) { return richards(v, p); });
}

/// Elementwise dM/df.
template <typename Derived>
Vector richards_derivative(const Eigen::DenseBase<Derived>& f, const RichardsParams& p) {
  return f.derived().unaryExpr([&p](double v) { return richards_slope(v, p); });
}

/// Elementwise M^{-1}(m). Throws OutOfInvertibleRange naming the offending
/// indices when any entry is not strictly inside (alpha, k).
template <typename Derived>
Vector richards_inverse(const Eigen::DenseBase<Derived>& m, const RichardsParams& p) {
  std::ostringstream bad;
  int n_bad = 0;
  for (Index i = 0; i < m.size(); ++i) {
    if (!p.invertible(m.derived()(i))) {
      if (n_bad < 8) bad << (n_bad ? ", " : "") << i << " (" << m.derived()(i) << ")";
      ++n_bad;
    }
  }
  if (n_bad > 0) {
    throw Error(ErrorCode::OutOfInvertibleRange,
                std::to_string(n_bad) + " response value(s) outside (alpha, k): " + bad.str());
  }
  return m.derived().unaryExpr([&p](double v) { return richards_inv(v, p); });
}

/// Target dose from a target response: M^{-1} on the nonzero (gel) entries,
/// zero elsewhere. Gel entries must map to strictly positive doses.
DoseField response_to_dose(const ResponseField& target_response, const RichardsParams& p);

}  // namespace sipo
