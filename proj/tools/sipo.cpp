// Command-line front end: run, phantom, metrics.

#include "sipo/config.hpp"
#include "sipo/io.hpp"
#include "sipo/phantoms.hpp"
#include "sipo/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

std::string lower_ext(const std::string& path) {
  std::string e = std::filesystem::path(path).extension().string();
  for (char& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e;
}

int cmd_run(const std::string& path) {
  const sipo::Config cfg = sipo::Config::from_file(path);
  std::vector<std::string> files;
  const int code = sipo::run_pipeline(cfg, &files);
  for (const auto& f : files) std::cout << f << '\n';
  return code;
}

int cmd_phantom(const std::string& path, const std::string& out) {
  const sipo::Config cfg = sipo::Config::from_file(path);
  const sipo::RichardsParams p = sipo::material_from_config(cfg);
  const sipo::PhantomSpec spec = sipo::phantom_from_config(cfg);
  const sipo::ResponseField m = sipo::generate_phantom(spec, p);
  const sipo::ObjectGrid grid = sipo::phantom_grid(spec);
  if (lower_ext(out) == ".pgm") {
    if (grid.is_volume()) throw sipo::Error(sipo::ErrorCode::UnsupportedFormat, "PGM output needs a 2D phantom; use a .f32 path");
    sipo::write_pgm(out, m, grid, p);
  } else {
    sipo::write_field(out, m, grid, "response");
  }
  return 0;
}

int cmd_metrics(const std::string& dose_path, const std::string& target_path, const std::string& cfg_path) {
  const sipo::Config cfg = sipo::Config::from_file(cfg_path);
  const sipo::RichardsParams p = sipo::material_from_config(cfg);
  const sipo::FieldData dose = sipo::read_field(dose_path, p);
  const sipo::FieldData target = sipo::read_field(target_path, p);
  if (dose.grid.nx != target.grid.nx || dose.grid.ny != target.grid.ny || dose.grid.nz != target.grid.nz) {
    throw sipo::Error(sipo::ErrorCode::ShapeMismatch, "dose and target grids differ");
  }
  const sipo::MetricsReport r = sipo::metrics_from_config(dose.values, target.values, target.grid, cfg);
  std::cout << sipo::metrics_csv_header() << '\n' << sipo::metrics_csv_row(r) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sinogram optimisation for tomographic volumetric printing"};
  app.footer("Configuration keys (key = default):\n" + sipo::config_help() +
             "\nSIPO_THREADS caps the worker threads used by operator applications.");
  app.require_subcommand(1);

  std::string run_cfg;
  auto* run = app.add_subcommand("run", "solve the configured problem and write result files");
  run->add_option("config", run_cfg, "configuration file")->required();

  std::string ph_cfg, ph_out;
  auto* phantom = app.add_subcommand("phantom", "write a built-in phantom target (.pgm or raw .f32)");
  phantom->add_option("spec-config", ph_cfg, "configuration with phantom.* and material.* keys")->required();
  phantom->add_option("-o,--output", ph_out, "output path")->required();

  std::string m_dose, m_target, m_cfg;
  auto* metrics = app.add_subcommand("metrics", "print the metrics CSV of a dose against a target");
  metrics->add_option("dose", m_dose, "dose field (.f32 with sidecar)")->required();
  metrics->add_option("target", m_target, "target response (.pgm or .f32)")->required();
  metrics->add_option("partition-config", m_cfg, "configuration with band.*, material.* and problem.* keys")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_cfg);
    if (*phantom) return cmd_phantom(ph_cfg, ph_out);
    if (*metrics) return cmd_metrics(m_dose, m_target, m_cfg);
  } catch (const std::exception& e) {
    std::cerr << "sipo: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
