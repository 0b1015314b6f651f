#include "sipo/metrics.hpp"

#include <cstdio>
#include <limits>
#include <sstream>

namespace sipo {

namespace {

double band_max(const Vector& v, const IndexSet& band) {
  if (band.empty()) throw Error(ErrorCode::EmptyBand, "band region is empty");
  double m = -std::numeric_limits<double>::infinity();
  for (Index i : band) m = std::max(m, v[i]);
  return m;
}

double gel_min(const Vector& v, const IndexSet& gel) {
  double m = std::numeric_limits<double>::infinity();
  for (Index i : gel) m = std::min(m, v[i]);
  return m;
}

double safe_ratio(double num, double den) {
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

RatioExtrema gel_ratio_extrema(const Vector& value, const Vector& reference, const IndexSet& gel) {
  if (gel.empty()) throw Error(ErrorCode::EmptyGel, "gel region is empty");
  RatioExtrema e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (Index i : gel) {
    if (!(value[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveDose, "gel voxel " + std::to_string(i) + " has non-positive value");
    }
    if (!(reference[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveDose, "gel voxel " + std::to_string(i) + " has non-positive reference");
    }
    const double r = value[i] / reference[i];
    e.min = std::min(e.min, r);
    e.max = std::max(e.max, r);
  }
  return e;
}

double dtvr(const DoseField& dose, const DoseField& target, const IndexSet& gel) {
  const RatioExtrema e = gel_ratio_extrema(dose, target, gel);
  return e.max / e.min;
}

double dsr(const DoseField& dose, const DoseField& normalized_target, const IndexSet& gel, const IndexSet& band) {
  const double num = band_max(dose, band);
  return num / gel_ratio_extrema(dose, normalized_target, gel).min;
}

double dsr_absolute(const DoseField& dose, const DoseField& target, double f_crit, const IndexSet& gel,
                    const IndexSet& band) {
  if (!(f_crit > 0.0)) throw Error(ErrorCode::NonPositiveThreshold, "f_crit must be positive");
  const double num = band_max(dose, band) / f_crit;
  return num / gel_ratio_extrema(dose, target, gel).min;
}

SeparationRatios psr(const DoseField& dose, const IndexSet& gel, const IndexSet& band, const RichardsParams& p) {
  if (gel.empty()) throw Error(ErrorCode::EmptyGel, "gel region is empty");
  const double bmax = band_max(dose, band);
  const double gmin = gel_min(dose, gel);
  return {safe_ratio(gmin, bmax), safe_ratio(richards(gmin, p), richards(bmax, p))};
}

MetricsReport evaluate_metrics(const DoseField& dose, const DoseField& target_dose,
                               const ResponseField& target_response, const DomainPartition& partition, double f_crit,
                               const RichardsParams& p) {
  if (dose.size() != target_dose.size() || dose.size() != target_response.size()) {
    throw Error(ErrorCode::ShapeMismatch, "metric inputs differ in length");
  }
  if (!(f_crit > 0.0)) throw Error(ErrorCode::NonPositiveThreshold, "f_crit must be positive");
  MetricsReport r;
  r.f_crit = f_crit;

  // Shared denominator: min_gel(f / f~_T) = f_crit * min_gel(f / f_T).
  const RatioExtrema dose_ratio = gel_ratio_extrema(dose, target_dose, partition.gel);
  r.dtvr_f = dose_ratio.max / dose_ratio.min;
  r.gel_dose_ratio_min = dose_ratio.min;
  r.gel_dose_ratio_max = dose_ratio.max;

  const ResponseField response = richards_forward(dose, p);
  const RatioExtrema resp_ratio = gel_ratio_extrema(response, target_response, partition.gel);
  r.dtvr_m = resp_ratio.max / resp_ratio.min;
  r.gel_ratio_min = resp_ratio.min;
  r.gel_ratio_max = resp_ratio.max;
  r.gel_min_m = gel_min(response, partition.gel);

  if (!partition.band.empty()) {
    const double bmax = band_max(dose, partition.band);
    r.band_max_f = bmax;
    r.band_max_m = richards(bmax, p);
    r.dsr = bmax / (f_crit * dose_ratio.min);
    r.psr_f = safe_ratio(gel_min(dose, partition.gel), bmax);
    r.psr_m = safe_ratio(r.gel_min_m, *r.band_max_m);
  }
  return r;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {
std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }
}  // namespace

std::string metrics_csv_header() {
  return "dtvr_f,dtvr_m,dsr,psr_f,psr_m,gel_ratio_min,gel_ratio_max,gel_dose_ratio_min,gel_dose_ratio_max,"
         "band_max_f,band_max_m,gel_min_m,f_crit";
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << format_double(r.dtvr_f) << ',' << format_double(r.dtvr_m) << ',' << opt(r.dsr) << ',' << opt(r.psr_f) << ','
     << opt(r.psr_m) << ',' << format_double(r.gel_ratio_min) << ',' << format_double(r.gel_ratio_max) << ','
     << format_double(r.gel_dose_ratio_min) << ',' << format_double(r.gel_dose_ratio_max) << ',' << opt(r.band_max_f)
     << ',' << opt(r.band_max_m) << ',' << format_double(r.gel_min_m) << ',' << format_double(r.f_crit);
  return os.str();
}

RegionHistograms region_histograms(const DoseField& dose, const DomainPartition& partition, Index n_bins) {
  if (n_bins < 1) throw Error(ErrorCode::Config, "histogram needs at least one bin");
  RegionHistograms h;
  const double top = std::max(dose.maxCoeff(), 0.0);
  h.bin_width = top > 0.0 ? top / static_cast<double>(n_bins) : 1.0;
  for (Index b = 0; b < n_bins; ++b) h.bin_left.push_back(static_cast<double>(b) * h.bin_width);
  auto fill = [&](const IndexSet& region, std::vector<Index>& counts) {
    counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (Index i : region) {
      auto b = static_cast<Index>(std::floor(std::max(dose[i], 0.0) / h.bin_width));
      b = std::clamp<Index>(b, 0, n_bins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
  };
  fill(partition.gel, h.gel);
  fill(partition.band, h.band);
  fill(partition.ext, h.ext);
  return h;
}

std::string histograms_csv(const RegionHistograms& h) {
  std::ostringstream os;
  os << "region,bin_left,count\n";
  auto emit = [&](const char* name, const std::vector<Index>& counts) {
    for (std::size_t b = 0; b < counts.size(); ++b) os << name << ',' << format_double(h.bin_left[b]) << ',' << counts[b] << '\n';
  };
  emit("gel", h.gel);
  emit("band", h.band);
  emit("ext", h.ext);
  return os.str();
}

}  // namespace sipo
