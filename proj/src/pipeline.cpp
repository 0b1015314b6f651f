#include "sipo/pipeline.hpp"

#include "sipo/io.hpp"
#include "sipo/phantoms.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace sipo {

Prepared prepare(const ResponseField& target_response, const ObjectGrid& grid, const ProjectionGeometry& geometry,
                 const PsfKernel& kernel, BandWidth band, double support_tol, const RichardsParams& material) {
  if (target_response.size() != grid.size()) throw Error(ErrorCode::ShapeMismatch, "target does not match the grid");
  Prepared p;
  p.grid = grid;
  p.material = material;
  p.target_response = target_response;
  p.target_dose = response_to_dose(target_response, material);
  p.op = std::make_shared<const TomoOperator>(grid, geometry, kernel);
  p.partition = std::make_shared<const DomainPartition>(partition_domain(*p.op, p.target_dose, band, support_tol));
  return p;
}

ScalingDomain default_scaling(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::General: return ScalingDomain::Response;
    case ProblemKind::Case1: return ScalingDomain::Anchored;
    case ProblemKind::Case2: return ScalingDomain::Dose;
  }
  return ScalingDomain::Dose;
}

double formulation_f_crit(const ResponseField& target_response, const DoseField& target_dose, const IndexSet& gel,
                          const RichardsParams& p, const ProblemSettings& s) {
  switch (s.kind) {
    case ProblemKind::General: return gather(target_dose, gel).minCoeff();
    case ProblemKind::Case1: return case1_bounds(target_response, gel, s.eps_l, s.eps_u, p).f_crit;
    case ProblemKind::Case2:
      if (!p.invertible(s.m_crit)) throw Error(ErrorCode::OutOfInvertibleRange, "problem.m_crit lies outside (alpha, k)");
      return richards_inv(s.m_crit, p);
  }
  return 0.0;
}

double formulation_f_crit(const Prepared& prep, const ProblemSettings& s) {
  return formulation_f_crit(prep.target_response, prep.target_dose, prep.partition->gel, prep.material, s);
}

MetricsReport metrics_from_config(const DoseField& dose, const ResponseField& target_response, const ObjectGrid& grid,
                                  const Config& cfg) {
  if (dose.size() != grid.size() || target_response.size() != grid.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dose and target sizes differ");
  }
  const RichardsParams material = material_from_config(cfg);
  const DoseField target_dose = response_to_dose(target_response, material);
  const DomainPartition part = partition_object_domain(grid, target_dose, band_from_config(cfg));
  const RunSettings s = settings_from_config(cfg);
  const double f_crit = formulation_f_crit(target_response, target_dose, part.gel, material, s.problem);
  return evaluate_metrics(dose, target_dose, target_response, part, f_crit, material);
}

int RunResult::exit_code() const {
  switch (status) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::Infeasible: return 2;
    case SolveStatus::IterLimit: return 3;
    case SolveStatus::Unbounded: return 1;
  }
  return 1;
}

namespace {

LpProblem build_problem(const Prepared& prep, const ProblemSettings& s, RunResult& r) {
  switch (s.kind) {
    case ProblemKind::General:
      return build_general_lp(prep.op, prep.partition, prep.target_dose, s.w1, s.w2);
    case ProblemKind::Case1:
      r.bounds = case1_bounds(prep.target_response, prep.partition->gel, s.eps_l, s.eps_u, prep.material);
      return build_case1_lp(prep.op, prep.partition, prep.target_response, s.eps_l, s.eps_u, prep.material);
    case ProblemKind::Case2:
      return build_case2_lp(prep.op, prep.partition, prep.target_dose, formulation_f_crit(prep, s));
  }
  throw Error(ErrorCode::Config, "unknown problem kind");
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

RunResult run_problem(const Prepared& prep, const RunSettings& settings) {
  RunResult r;
  r.kind = settings.problem.kind;
  const LpProblem prob = build_problem(prep, settings.problem, r);
  r.f_crit = prob.f_crit();

  const bool want_phase1 = settings.phase1 == Phase1Mode::On ||
                           (settings.phase1 == Phase1Mode::Auto && r.kind != ProblemKind::General);
  if (want_phase1) {
    r.phase1 = check_feasibility_phase1(prob, settings.pdhg, settings.feas_tol);
    if (!r.phase1->feasible) {
      // An uncertified phase 1 cannot prove infeasibility.
      r.status = r.phase1->conclusive ? SolveStatus::Infeasible : SolveStatus::IterLimit;
      r.report.status = r.status;
      r.report.solver = "pdhg-phase1";
      r.report.phase1_value = r.phase1->xi;
      r.report.iters = r.phase1->report.iters;
      return r;
    }
  }

  r.report = solve_pdhg(prob, settings.pdhg);
  if (r.phase1) r.report.phase1_value = r.phase1->xi;
  r.status = r.report.status;
  r.sum_lambda1 = r.report.dual.lambda1.sum();
  r.sum_lambda2_ft = r.report.dual.lambda2.dot(prob.spec().gel_upper);
  r.f_norm = prob.dose(r.report.x);

  const IndexSet& gel = prep.partition->gel;
  const ScalingDomain domain = settings.scaling.value_or(default_scaling(r.kind));
  const bool two_stage = !settings.scaling && r.kind == ProblemKind::Case2;
  const Vector m_gel = gather(prep.target_response, gel);
  const Vector f_gel = gather(prep.target_dose, gel);

  if (domain == ScalingDomain::Anchored) {
    r.scaling = scale_anchored(r.f_crit, static_cast<Index>(gel.size()));
  } else if (domain == ScalingDomain::Dose) {
    r.scaling = scale_dose_domain(r.f_norm, prep.target_dose, gel, calibration_weights(settings.weights, f_gel));
  } else {
    r.scaling = scale_response_domain(r.f_norm, prep.target_response, gel, calibration_weights(settings.weights, m_gel),
                                      prep.material);
  }
  if (r.kind == ProblemKind::Case2 && domain == ScalingDomain::Dose) {
    // The guarantee only holds when the normalized gel dose sits above f~_T.
    const Vector ratio = gather(r.f_norm, gel).cwiseQuotient(f_gel / r.f_crit);
    if (ratio.minCoeff() >= 1.0) r.downscale_ok = r.scaling.alpha_star <= r.f_crit * (1.0 + 1e-12);
    if (two_stage) {
      r.scaling_dose = r.scaling;
      const double hi = r.f_crit;
      const double lo = 1e-3 * std::min(r.scaling.alpha_star, hi);
      r.scaling = scale_response_domain(r.f_norm, prep.target_response, gel,
                                        calibration_weights(settings.weights, m_gel), prep.material,
                                        std::make_pair(lo, hi));
    }
  }

  auto [g, f] = apply_scaling(r.report.y, r.f_norm, r.scaling.alpha_star);
  r.g_phys = std::move(g);
  r.f_phys = std::move(f);
  r.m_phys = richards_forward(r.f_phys, prep.material);
  r.metrics = evaluate_metrics(r.f_phys, prep.target_dose, prep.target_response, *prep.partition, r.f_crit, prep.material);

  // Scaling must leave the shape metrics alone.
  const double dtvr_norm = dtvr(r.f_norm, prep.target_dose, gel);
  r.homogeneity_ok = rel_diff(dtvr_norm, r.metrics.dtvr_f) <= 1e-12;
  if (r.metrics.dsr) {
    const double dsr_norm = dsr(r.f_norm, prep.target_dose / r.f_crit, gel, prep.partition->band);
    r.homogeneity_ok = r.homogeneity_ok && rel_diff(dsr_norm, *r.metrics.dsr) <= 1e-12;
  }
  return r;
}

PsfKernel read_kernel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open kernel file " + path);
  Index kx = 0, ky = 0, kz = 0;
  if (!(in >> kx >> ky >> kz)) throw Error(ErrorCode::CorruptHeader, "kernel file needs 'kx ky kz' first");
  if (kx < 1 || ky < 1 || kz < 1 || kx * ky * kz > 10000000) {
    throw Error(ErrorCode::CorruptHeader, "kernel extents out of range");
  }
  Vector w(kx * ky * kz);
  for (Index i = 0; i < w.size(); ++i) {
    if (!(in >> w[i])) throw Error(ErrorCode::CorruptHeader, "kernel file has fewer weights than its extents need");
  }
  double extra;
  if (in >> extra) throw Error(ErrorCode::CorruptHeader, "kernel file has more weights than its extents need");
  return PsfKernel(kx, ky, kz, std::move(w));
}

// ------------------------------------------------------------------ config

RichardsParams material_from_config(const Config& cfg) {
  RichardsParams p;
  p.alpha = cfg.get_double("material.alpha");
  p.k = cfg.get_double("material.k");
  p.beta = cfg.get_double("material.beta");
  p.gamma = cfg.get_double("material.gamma");
  p.f0 = cfg.get_double("material.f0");
  p.validate();
  return p;
}

BandWidth band_from_config(const Config& cfg) {
  if (cfg.get_bool("band.free")) return BandWidth::free();
  const Index w = cfg.get_int("band.width");
  if (w < 0) throw Error(ErrorCode::BandWidthNegative, "key 'band.width' must be >= 0");
  return BandWidth(w);
}

namespace {

template <typename T>
T auto_or(const Config& cfg, const std::string& key, T fallback) {
  const std::string s = cfg.get_string(key);
  if (s == "auto") {
    std::ostringstream os;
    os << fallback;
    cfg.record(key, os.str());
    return fallback;
  }
  if constexpr (std::is_integral_v<T>) {
    return static_cast<T>(cfg.get_int(key));
  } else {
    return static_cast<T>(cfg.get_double(key));
  }
}

bool any_phantom_key(const Config& cfg) {
  for (const auto& [k, v] : cfg.explicit_values())
    if (k.rfind("phantom.", 0) == 0) return true;
  return false;
}

}  // namespace

PhantomSpec phantom_from_config(const Config& cfg) {
  const std::string kind = cfg.get_string("phantom.kind");
  if (kind.empty()) throw Error(ErrorCode::Config, "key 'phantom.kind' is required");
  PhantomSpec s = PhantomSpec::desk_default(phantom_kind_from_string(kind));
  s.nx = auto_or<Index>(cfg, "phantom.nx", s.nx);
  s.ny = auto_or<Index>(cfg, "phantom.ny", s.ny);
  s.nz = auto_or<Index>(cfg, "phantom.nz", s.nz);
  s.radius = auto_or<double>(cfg, "phantom.radius", s.radius);
  s.inner_radius = auto_or<double>(cfg, "phantom.inner_radius", s.inner_radius);
  s.segments = cfg.get_int("phantom.segments");
  s.block_width = cfg.get_int("phantom.block_width");
  s.block_height = cfg.get_int("phantom.block_height");
  s.gap = cfg.get_int("phantom.gap");
  if (cfg.get_string("phantom.levels") == "auto") {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.levels.size(); ++i) os << (i ? "," : "") << s.levels[i];
    cfg.record("phantom.levels", os.str());
  } else {
    s.levels = cfg.get_list("phantom.levels");
  }
  return s;
}

TargetInput load_target(const Config& cfg, const RichardsParams& p) {
  const std::string path = cfg.get_string("io.target_path");
  const bool phantom = any_phantom_key(cfg);
  if (!path.empty() && phantom) {
    throw Error(ErrorCode::Config, "key 'io.target_path' conflicts with phantom.* keys; give exactly one target source");
  }
  if (path.empty() && !phantom) {
    throw Error(ErrorCode::Config, "no target: set 'io.target_path' or 'phantom.kind'");
  }
  TargetInput t;
  if (!path.empty()) {
    FieldData f = read_field(path, p);
    t.values = std::move(f.values);
    t.grid = f.grid;
  } else {
    const PhantomSpec spec = phantom_from_config(cfg);
    t.values = generate_phantom(spec, p);
    t.grid = phantom_grid(spec);
  }
  return t;
}

RunSettings settings_from_config(const Config& cfg) {
  RunSettings s;
  const std::string kind = cfg.get_string("problem.kind");
  if (kind == "general") {
    s.problem.kind = ProblemKind::General;
  } else if (kind == "case1") {
    s.problem.kind = ProblemKind::Case1;
  } else if (kind == "case2") {
    s.problem.kind = ProblemKind::Case2;
  } else {
    throw Error(ErrorCode::Config, "key 'problem.kind' must be general, case1 or case2 (got '" + kind + "')");
  }
  s.problem.w1 = cfg.get_double("problem.w1");
  s.problem.w2 = cfg.get_double("problem.w2");
  s.problem.eps_l = cfg.get_double("problem.eps_l");
  s.problem.eps_u = cfg.get_double("problem.eps_u");
  s.problem.m_crit = cfg.get_double("problem.m_crit");

  s.pdhg.max_iters = cfg.get_int("solver.max_iters");
  s.pdhg.tol_kkt = cfg.get_double("solver.tol_kkt");
  s.pdhg.theta = cfg.get_double("solver.theta");
  s.pdhg.check_every = cfg.get_int("solver.check_every");
  s.pdhg.seed = static_cast<std::uint64_t>(cfg.get_int("solver.seed"));
  s.pdhg.primal_weight = auto_or<double>(cfg, "solver.primal_weight", 0.0);
  s.pdhg.adapt_primal_weight = cfg.get_bool("solver.adapt_primal_weight");
  s.pdhg.restarts = cfg.get_bool("solver.restarts");
  const std::string scheme = cfg.get_string("solver.scheme");
  if (scheme == "halpern") {
    s.pdhg.scheme = PdhgScheme::Halpern;
  } else if (scheme == "average") {
    s.pdhg.scheme = PdhgScheme::Average;
  } else {
    throw Error(ErrorCode::Config, "key 'solver.scheme' must be halpern or average");
  }
  s.pdhg.trace_path = cfg.get_string("solver.trace_path");
  if (s.pdhg.max_iters < 0) throw Error(ErrorCode::Config, "key 'solver.max_iters' must be >= 0");

  const std::string p1 = cfg.get_string("solver.phase1");
  if (p1 == "auto") {
    s.phase1 = Phase1Mode::Auto;
  } else if (p1 == "on") {
    s.phase1 = Phase1Mode::On;
  } else if (p1 == "off") {
    s.phase1 = Phase1Mode::Off;
  } else {
    throw Error(ErrorCode::Config, "key 'solver.phase1' must be on, off or auto");
  }
  s.feas_tol = cfg.get_double("solver.feas_tol");

  const std::string dom = cfg.get_string("postscale.domain");
  if (dom == "dose") {
    s.scaling = ScalingDomain::Dose;
  } else if (dom == "response") {
    s.scaling = ScalingDomain::Response;
  } else if (dom == "anchored") {
    s.scaling = ScalingDomain::Anchored;
  } else if (dom != "auto") {
    throw Error(ErrorCode::Config, "key 'postscale.domain' must be dose, response, anchored or auto");
  }
  const std::string w = cfg.get_string("postscale.weights");
  if (w == "uniform") {
    s.weights = WeightScheme::Uniform;
  } else if (w == "proportional-to-target") {
    s.weights = WeightScheme::ProportionalToTarget;
  } else {
    throw Error(ErrorCode::Config, "key 'postscale.weights' must be uniform or proportional-to-target");
  }
  return s;
}

// ------------------------------------------------------------------ reports

std::string solve_report_csv_header() {
  return "status,solver,kind,objective,u,v,iters,restarts,stationarity,primal,dual,complementarity,gap,"
         "sum_lambda1,sum_lambda2_ft,phase1_xi,phase1_feasible,f_crit,alpha_star,scaling_domain,alpha_dose,"
         "degenerate_window,homogeneity_ok,downscale_ok";
}

std::string solve_report_csv_row(const RunResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  const SolveReport& s = r.report;
  const bool solved = r.solved();
  std::ostringstream o;
  o << to_string(r.status) << ',' << (s.solver.empty() ? "none" : s.solver) << ',' << to_string(r.kind) << ','
    << (solved ? format_double(s.objective) : "undefined") << ',' << opt(s.u) << ',' << opt(s.v) << ',' << s.iters
    << ',' << s.restarts << ',';
  if (solved) {
    o << format_double(s.kkt.stationarity) << ',' << format_double(s.kkt.primal) << ',' << format_double(s.kkt.dual)
      << ',' << format_double(s.kkt.complementarity) << ',' << format_double(s.kkt.gap) << ','
      << format_double(r.sum_lambda1) << ',' << format_double(r.sum_lambda2_ft) << ',';
  } else {
    o << "undefined,undefined,undefined,undefined,undefined,undefined,undefined,";
  }
  o << opt(s.phase1_value) << ',' << (r.phase1 ? (r.phase1->feasible ? "true" : r.phase1->conclusive ? "false" : "inconclusive") : "skipped") << ','
    << format_double(r.f_crit) << ',' << (solved ? format_double(r.scaling.alpha_star) : "undefined") << ','
    << (solved ? to_string(r.scaling.domain) : "undefined") << ','
    << (r.scaling_dose ? format_double(r.scaling_dose->alpha_star) : "undefined") << ','
    << (r.bounds ? (r.bounds->degenerate_window ? "true" : "false") : "undefined") << ','
    << (solved ? (r.homogeneity_ok ? "true" : "false") : "undefined") << ','
    << (r.downscale_ok ? (*r.downscale_ok ? "true" : "false") : "undefined");
  return o.str();
}

// ------------------------------------------------------------------ batch

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << s;
}

PsfKernel kernel_from_config(const Config& cfg, const ObjectGrid& grid) {
  const std::string kind = cfg.get_string("psf.kind");
  if (kind == "identity") return PsfKernel::identity();
  if (kind == "gaussian") {
    const Index dims = auto_or<Index>(cfg, "psf.dims", grid.is_volume() ? 3 : 2);
    return PsfKernel::gaussian(cfg.get_int("psf.extent"), cfg.get_int("psf.populated"), cfg.get_double("psf.sigma"),
                               static_cast<int>(dims));
  }
  if (kind == "file") {
    const std::string path = cfg.get_string("psf.path");
    if (path.empty()) throw Error(ErrorCode::Config, "key 'psf.path' is required when psf.kind = file");
    return read_kernel_file(path);
  }
  throw Error(ErrorCode::Config, "key 'psf.kind' must be identity, gaussian or file");
}

}  // namespace

int run_pipeline(const Config& cfg, std::vector<std::string>* written) {
  const RichardsParams material = material_from_config(cfg);
  const TargetInput target = load_target(cfg, material);
  const RunSettings settings = settings_from_config(cfg);

  const Index n_angles = cfg.get_int("geometry.n_angles");
  const double span_deg = cfg.get_double("geometry.angle_span");
  if (n_angles < 1) throw Error(ErrorCode::Config, "key 'geometry.n_angles' must be >= 1");
  if (!(span_deg > 0.0 && span_deg <= 360.0)) throw Error(ErrorCode::Config, "key 'geometry.angle_span' must lie in (0, 360]");
  const Index n_beams = auto_or<Index>(cfg, "geometry.n_beams", ProjectionGeometry::default_beams(target.grid));
  const auto geometry = ProjectionGeometry::uniform(n_angles, span_deg * std::numbers::pi / 180.0, n_beams);
  const PsfKernel kernel = kernel_from_config(cfg, target.grid);
  const BandWidth band = band_from_config(cfg);
  const double support_tol = cfg.get_double("domain.support_tol");

  const std::filesystem::path out_dir = cfg.get_string("io.out_dir");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create io.out_dir " + out_dir.string() + ": " + ec.message());

  const Prepared prep = prepare(target.values, target.grid, geometry, kernel, band, support_tol, material);
  const RunResult r = run_problem(prep, settings);

  std::vector<std::string> files;
  auto note = [&](const std::filesystem::path& p) { files.push_back(p.string()); };
  if (r.solved()) {
    const ObjectGrid& g = prep.grid;
    std::vector<Index> sino_shape{geometry.n_angles(), geometry.n_beams};
    if (g.is_volume()) sino_shape.insert(sino_shape.begin(), g.nz);
    write_raw_f32((out_dir / "sinogram.f32").string(), r.g_phys, sino_shape, "dose/beamlet");
    note(out_dir / "sinogram.f32");
    write_field((out_dir / "dose_normalized.f32").string(), r.f_norm, g, "normalized dose");
    note(out_dir / "dose_normalized.f32");
    write_field((out_dir / "dose.f32").string(), r.f_phys, g, "dose");
    note(out_dir / "dose.f32");
    write_field((out_dir / "response.f32").string(), r.m_phys, g, "response");
    note(out_dir / "response.f32");
    Vector dev = Vector::Zero(g.size());
    for (Index i : prep.partition->gel) dev[i] = r.m_phys[i] - prep.target_response[i];
    write_field((out_dir / "deviation.f32").string(), dev, g, "response");
    note(out_dir / "deviation.f32");
    write_text(out_dir / "histograms.csv", histograms_csv(region_histograms(r.f_phys, *prep.partition)));
    note(out_dir / "histograms.csv");
    write_text(out_dir / "metrics.csv", metrics_csv_header() + "\n" + metrics_csv_row(r.metrics) + "\n");
    note(out_dir / "metrics.csv");
  }
  write_text(out_dir / "solve_report.csv", solve_report_csv_header() + "\n" + solve_report_csv_row(r) + "\n");
  note(out_dir / "solve_report.csv");
  write_text(out_dir / "manifest.txt", cfg.manifest());
  note(out_dir / "manifest.txt");
  if (written) *written = files;

  std::cerr << "sipo: " << to_string(r.kind) << " " << to_string(r.status) << " after " << r.report.iters
            << " iterations";
  if (r.phase1) std::cerr << " (phase-1 xi = " << format_double(r.phase1->xi) << ")";
  std::cerr << ", wall time " << r.report.wall_time << " s\n";
  return r.exit_code();
}

}  // namespace sipo
