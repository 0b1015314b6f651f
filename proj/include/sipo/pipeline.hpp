#pragma once

#include "sipo/config.hpp"
#include "sipo/domain.hpp"
#include "sipo/formulations.hpp"
#include "sipo/metrics.hpp"
#include "sipo/operators.hpp"
#include "sipo/phantoms.hpp"
#include "sipo/postscale.hpp"
#include "sipo/solvers.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sipo {

/// Target, operator and partition shared by every formulation on one input.
struct Prepared {
  ObjectGrid grid;
  RichardsParams material;
  ResponseField target_response;
  DoseField target_dose;
  std::shared_ptr<const TomoOperator> op;
  std::shared_ptr<const DomainPartition> partition;
};

Prepared prepare(const ResponseField& target_response, const ObjectGrid& grid, const ProjectionGeometry& geometry,
                 const PsfKernel& kernel, BandWidth band, double support_tol, const RichardsParams& material);

struct ProblemSettings {
  ProblemKind kind = ProblemKind::General;
  double w1 = 1.0, w2 = 1.0;
  double eps_l = 0.1, eps_u = 0.1;
  double m_crit = 0.23;
};

enum class Phase1Mode { Auto, On, Off };

struct RunSettings {
  ProblemSettings problem;
  PdhgOptions pdhg;
  Phase1Mode phase1 = Phase1Mode::Auto;
  double feas_tol = 1e-6;
  std::optional<ScalingDomain> scaling;  // default depends on the formulation
  WeightScheme weights = WeightScheme::Uniform;
};

struct RunResult {
  ProblemKind kind = ProblemKind::General;
  SolveStatus status = SolveStatus::IterLimit;
  std::optional<FeasibilityResult> phase1;
  std::optional<Case1Bounds> bounds;
  SolveReport report;
  double f_crit = 0.0;
  ScalingResult scaling;
  std::optional<ScalingResult> scaling_dose;  // first stage of the two-stage path
  DoseField f_norm, f_phys;
  Sinogram g_phys;
  ResponseField m_phys;
  MetricsReport metrics;
  bool homogeneity_ok = true;              // DTVR and DSR unchanged by the scale
  std::optional<bool> downscale_ok;        // case 2: dose-domain alpha <= f_crit
  double sum_lambda1 = 0.0;                // stationarity in u: equals w1
  double sum_lambda2_ft = 0.0;             // stationarity in v: equals w2

  int exit_code() const;
  /// False when the run stopped at phase 1 without a main solve.
  bool solved() const { return !(phase1 && !phase1->feasible); }
};

/// Builds the formulation, runs phase 1 when requested, solves with PDHG,
/// post-scales and evaluates metrics. Infeasible runs stop after phase 1.
RunResult run_problem(const Prepared& prep, const RunSettings& settings);

/// f_crit of a formulation before solving.
double formulation_f_crit(const Prepared& prep, const ProblemSettings& s);
double formulation_f_crit(const ResponseField& target_response, const DoseField& target_dose, const IndexSet& gel,
                          const RichardsParams& p, const ProblemSettings& s);

/// Metrics of a stored dose against a stored target, with the partition,
/// material and formulation keys taken from a configuration.
MetricsReport metrics_from_config(const DoseField& dose, const ResponseField& target_response, const ObjectGrid& grid,
                                  const Config& cfg);

ScalingDomain default_scaling(ProblemKind kind);

/// Reads the kernel file format: "kx ky kz" then kx*ky*kz weights, x fastest.
PsfKernel read_kernel_file(const std::string& path);

std::string solve_report_csv_header();
std::string solve_report_csv_row(const RunResult& r);

/// Full batch run from a configuration. Writes the result files into
/// io.out_dir and returns the process exit status (0 optimal, 2 infeasible,
/// 3 iteration limit). Configuration and IO problems throw.
int run_pipeline(const Config& cfg, std::vector<std::string>* written = nullptr);

/// Target field named by the configuration (file or phantom).
struct TargetInput {
  ResponseField values;
  ObjectGrid grid;
};
TargetInput load_target(const Config& cfg, const RichardsParams& p);
RichardsParams material_from_config(const Config& cfg);
PhantomSpec phantom_from_config(const Config& cfg);
BandWidth band_from_config(const Config& cfg);
RunSettings settings_from_config(const Config& cfg);

}  // namespace sipo
