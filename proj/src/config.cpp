#include "sipo/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sipo {

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"io.target_path", "", "target response file (.pgm or raw f32 with .json sidecar); exclusive with phantom.*"},
      {"io.out_dir", "sipo_out", "directory for result files (created if missing)"},
      {"phantom.kind", "", "disk | annulus | blocks | sphere3d; exclusive with io.target_path"},
      {"phantom.nx", "auto", "grid width (auto: 64, sphere3d 32)"},
      {"phantom.ny", "auto", "grid height (auto: 64, sphere3d 32)"},
      {"phantom.nz", "auto", "grid depth (auto: 1, sphere3d 34)"},
      {"phantom.radius", "auto", "disk/annulus/sphere outer radius in voxels (auto: 20, sphere3d 12)"},
      {"phantom.inner_radius", "auto", "annulus hole or sphere cavity radius (auto: 10, sphere3d 5, disk 0)"},
      {"phantom.segments", "10", "number of blocks"},
      {"phantom.block_width", "8", "block width in voxels"},
      {"phantom.block_height", "20", "block height in voxels"},
      {"phantom.gap", "4", "spacing between blocks in voxels"},
      {"phantom.levels", "auto", "comma-separated response levels (auto: 0.5; blocks 0.7,0.6,0.7,0.6,0.5,0.7,0.6,0.7,0.5,0.7)"},
      {"geometry.n_angles", "360", "number of views"},
      {"geometry.angle_span", "360", "angular range in degrees; views at span*a/n_angles"},
      {"geometry.n_beams", "auto", "beamlets per view (auto: covers the grid diagonal)"},
      {"band.width", "10", "Chebyshev band width in voxels"},
      {"band.free", "false", "true puts every non-gel voxel in the band"},
      {"domain.support_tol", "0", "relative threshold on P f_T for active beamlets"},
      {"psf.kind", "identity", "identity | gaussian | file"},
      {"psf.extent", "21", "gaussian kernel extent (odd)"},
      {"psf.populated", "5", "gaussian populated central extent (odd)"},
      {"psf.sigma", "1.0", "gaussian standard deviation in voxels"},
      {"psf.dims", "auto", "gaussian dimensionality 2 or 3 (auto: 3 for volumes, else 2)"},
      {"psf.path", "", "kernel file: 'kx ky kz' then kx*ky*kz weights, x fastest"},
      {"material.alpha", "0", "Richards lower asymptote"},
      {"material.k", "1", "Richards upper asymptote"},
      {"material.beta", "4", "Richards growth rate"},
      {"material.gamma", "1", "Richards shape"},
      {"material.f0", "1", "Richards location"},
      {"problem.kind", "general", "general | case1 | case2"},
      {"problem.w1", "1", "general: weight on band spillage"},
      {"problem.w2", "1", "general: weight on gel overshoot"},
      {"problem.eps_l", "0.1", "case1: lower response tolerance"},
      {"problem.eps_u", "0.1", "case1: upper response tolerance"},
      {"problem.m_crit", "0.23", "case2: response threshold defining f_crit"},
      {"solver.max_iters", "200000", "PDHG iteration limit"},
      {"solver.tol_kkt", "1e-6", "PDHG tolerance on normalised KKT residuals and gap"},
      {"solver.theta", "1", "PDHG over-relaxation"},
      {"solver.check_every", "100", "iterations between residual checks"},
      {"solver.seed", "0", "power iteration seed"},
      {"solver.primal_weight", "auto", "sigma/tau = weight^2 (auto: ||c|| / ||h||, 1 gives tau = sigma)"},
      {"solver.adapt_primal_weight", "true", "update the primal weight at restarts"},
      {"solver.scheme", "halpern", "halpern (reflected, anchored) | average (restart from running average)"},
      {"solver.restarts", "true", "adaptive restarts"},
      {"solver.trace_path", "", "CSV of residuals at every check"},
      {"solver.phase1", "auto", "on | off | auto (auto: case1 and case2 only)"},
      {"solver.feas_tol", "1e-6", "phase-1 threshold on the minimal violation"},
      {"postscale.domain", "auto", "dose | response | anchored (auto: general response, case1 anchored, case2 dose then response)"},
      {"postscale.weights", "uniform", "uniform | proportional-to-target"},
  };
  return keys;
}

std::string config_help() {
  std::ostringstream out;
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.key.size());
  for (const auto& k : config_keys()) {
    out << "  " << k.key << std::string(width - k.key.size() + 2, ' ') << "[" << (k.default_value.empty() ? "unset" : k.default_value)
        << "]  " << k.help << '\n';
  }
  return out.str();
}

namespace {

const KeyInfo* find_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorCode::Config, origin + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Config, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    std::string value = trim(t.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    if (!find_key(key)) throw Error(ErrorCode::Config, origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw Error(ErrorCode::Config, "unknown key '" + key + "'");
  values_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
  const KeyInfo* info = find_key(key);
  if (!info) throw Error(ErrorCode::Config, "unknown key '" + key + "'");
  const auto it = values_.find(key);
  const std::string v = it != values_.end() ? it->second : info->default_value;
  used_[key] = v;
  return v;
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(ErrorCode::Config, "key '" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

Index Config::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(ErrorCode::Config, "key '" + key + "': expected an integer, got '" + s + "'");
  }
  return static_cast<Index>(v);
}

bool Config::get_bool(const std::string& key) const {
  const std::string s = get_string(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::Config, "key '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<double> Config::get_list(const std::string& key) const {
  const std::string s = get_string(key);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) {
      throw Error(ErrorCode::Config, "key '" + key + "': expected comma-separated numbers, got '" + s + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string Config::manifest() const {
  std::ostringstream out;
  for (const auto& [k, v] : used_) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace sipo
