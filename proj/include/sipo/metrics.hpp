#pragma once

#include "sipo/core.hpp"
#include "sipo/domain.hpp"
#include "sipo/material.hpp"

#include <optional>
#include <string>

namespace sipo {

/// min and max over the gel of value_i / reference_i.
struct RatioExtrema {
  double min = 0.0;
  double max = 0.0;
};

/// Gel ratio extrema; the shared denominator of DTVR and DSR is `min`.
/// Throws EmptyGel, or NonPositiveDose when a gel value or reference is <= 0.
RatioExtrema gel_ratio_extrema(const Vector& value, const Vector& reference, const IndexSet& gel);

/// max_gel(d/f_T) / min_gel(d/f_T).
double dtvr(const DoseField& dose, const DoseField& target, const IndexSet& gel);

/// max_band(d) / min_gel(d / f~_T) with f~_T = f_T / f_crit. Throws EmptyBand.
double dsr(const DoseField& dose, const DoseField& normalized_target, const IndexSet& gel, const IndexSet& band);

/// The same ratio written with the absolute target and an explicit f_crit:
/// max_band(d / f_crit) / min_gel(d / f_T).
double dsr_absolute(const DoseField& dose, const DoseField& target, double f_crit, const IndexSet& gel,
                    const IndexSet& band);

struct SeparationRatios {
  double dose = 0.0;      // min_gel(f) / max_band(f)
  double response = 0.0;  // min_gel(M(f)) / max_band(M(f))
};

/// Process separation ratios; +inf when the band maximum is zero. Throws
/// EmptyBand.
SeparationRatios psr(const DoseField& dose, const IndexSet& gel, const IndexSet& band, const RichardsParams& p);

struct MetricsReport {
  double dtvr_f = 0.0;
  double dtvr_m = 0.0;
  std::optional<double> dsr;    // undefined without a band
  std::optional<double> psr_f;  // undefined without a band
  std::optional<double> psr_m;
  double gel_ratio_min = 0.0;  // min_gel m*/m_T
  double gel_ratio_max = 0.0;  // max_gel m*/m_T
  double gel_dose_ratio_min = 0.0;  // min_gel f*/f_T
  double gel_dose_ratio_max = 0.0;
  std::optional<double> band_max_f;
  std::optional<double> band_max_m;
  double gel_min_m = 0.0;
  double f_crit = 0.0;
};

/// All metrics of a physical dose field against its prescription. DTVR and
/// DSR are computed from one evaluation of the shared gel denominator.
MetricsReport evaluate_metrics(const DoseField& dose, const DoseField& target_dose,
                               const ResponseField& target_response, const DomainPartition& partition, double f_crit,
                               const RichardsParams& p);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

/// Dose histogram per region on common equal-width bins over [0, max dose].
struct RegionHistograms {
  std::vector<double> bin_left;
  double bin_width = 0.0;
  std::vector<Index> gel, band, ext;
};

RegionHistograms region_histograms(const DoseField& dose, const DomainPartition& partition, Index n_bins = 64);
std::string histograms_csv(const RegionHistograms& h);

/// Round-trip decimal form (17 significant digits).
std::string format_double(double v);

}  // namespace sipo
