#include "sipo/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sipo {

namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Header tokens of a PGM: skips whitespace and '#' comments.
class PgmHeader {
 public:
  explicit PgmHeader(const std::string& data) : d_(data) {}

  long next_int(const char* what) {
    skip();
    const std::size_t start = pos_;
    while (pos_ < d_.size() && std::isdigit(static_cast<unsigned char>(d_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::CorruptHeader, std::string("PGM header: missing ") + what);
    return std::stol(d_.substr(start, pos_ - start));
  }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip() {
    while (pos_ < d_.size()) {
      if (d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(d_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  const std::string& d_;
  std::size_t pos_ = 0;
};

}  // namespace

FieldData read_pgm(const std::string& path, const RichardsParams& p) {
  p.validate();
  const std::string data = read_all(path);
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5')) {
    throw Error(ErrorCode::UnsupportedFormat, path + " is not a P2/P5 PGM");
  }
  const bool binary = data[1] == '5';
  PgmHeader h(data);
  h.advance(2);
  const long w = h.next_int("width"), hgt = h.next_int("height"), maxval = h.next_int("maxval");
  if (w < 1 || hgt < 1 || maxval < 1 || maxval > 65535) throw Error(ErrorCode::CorruptHeader, "PGM header out of range");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(hgt);
  std::vector<long> pix(n);
  if (binary) {
    std::size_t pos = h.pos() + 1;  // exactly one whitespace byte after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (data.size() < pos + n * bpp) throw Error(ErrorCode::CorruptHeader, "PGM raster is truncated");
    for (std::size_t i = 0; i < n; ++i) {
      const auto b0 = static_cast<unsigned char>(data[pos + i * bpp]);
      pix[i] = bpp == 1 ? b0 : (static_cast<long>(b0) << 8) | static_cast<unsigned char>(data[pos + i * bpp + 1]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) pix[i] = h.next_int("pixel");
  }
  FieldData f;
  f.grid = ObjectGrid(w, hgt, 1);
  f.units = "response";
  f.values = Vector::Zero(static_cast<Index>(n));
  const double lo = p.alpha + p.inverse_margin(), hi = p.k - p.inverse_margin();
  for (std::size_t i = 0; i < n; ++i) {
    if (pix[i] > maxval) throw Error(ErrorCode::CorruptHeader, "PGM pixel exceeds maxval");
    if (pix[i] == 0) continue;
    const double m = p.alpha + (static_cast<double>(pix[i]) / static_cast<double>(maxval)) * (p.k - p.alpha);
    f.values[static_cast<Index>(i)] = std::clamp(m, std::nextafter(lo, hi), std::nextafter(hi, lo));
  }
  return f;
}

void write_pgm(const std::string& path, const ResponseField& m, const ObjectGrid& grid, const RichardsParams& p,
               int maxval, bool ascii) {
  if (grid.is_volume()) throw Error(ErrorCode::UnsupportedFormat, "PGM holds 2D fields only");
  if (m.size() != grid.size()) throw Error(ErrorCode::ShapeMismatch, "field does not match the grid");
  if (maxval < 1 || maxval > 255) throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PGM output is supported");
  std::ostringstream out;
  out << (ascii ? "P2" : "P5") << '\n' << grid.nx << ' ' << grid.ny << '\n' << maxval << '\n';
  std::string raster;
  for (Index i = 0; i < m.size(); ++i) {
    const double t = m[i] == 0.0 ? 0.0 : (m[i] - p.alpha) / (p.k - p.alpha);
    const long v = std::lround(std::clamp(t, 0.0, 1.0) * maxval);
    if (ascii) {
      out << v << ((i + 1) % grid.nx == 0 ? '\n' : ' ');
    } else {
      raster.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
  }
  write_all(path, out.str() + raster);
}

void write_raw_f32(const std::string& path, const Vector& values, const std::vector<Index>& shape,
                   const std::string& units) {
  Index count = 1;
  for (Index s : shape) count *= s;
  if (count != values.size()) throw Error(ErrorCode::ShapeMismatch, "shape does not match the value count");
  std::string bytes(static_cast<std::size_t>(values.size()) * 4, '\0');
  for (Index i = 0; i < values.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[static_cast<std::size_t>(i) * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xffu);
  }
  write_all(path, bytes);
  nlohmann::ordered_json j;
  j["shape"] = shape;
  j["order"] = "row-major";
  j["dtype"] = "f32le";
  j["units"] = units;
  write_all(path + ".json", j.dump(2) + "\n");
}

void write_field(const std::string& path, const Vector& values, const ObjectGrid& grid, const std::string& units) {
  if (grid.is_volume()) {
    write_raw_f32(path, values, {grid.nz, grid.ny, grid.nx}, units);
  } else {
    write_raw_f32(path, values, {grid.ny, grid.nx}, units);
  }
}

RawArray read_raw_f32(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_all(path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, "sidecar " + path + ".json: " + e.what());
  }
  RawArray a;
  try {
    if (j.value("dtype", "") != "f32le") throw Error(ErrorCode::UnsupportedFormat, "sidecar dtype must be f32le");
    if (j.value("order", "row-major") != "row-major") throw Error(ErrorCode::UnsupportedFormat, "order must be row-major");
    a.shape = j.at("shape").get<std::vector<Index>>();
    a.units = j.value("units", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, "sidecar " + path + ".json: " + e.what());
  }
  Index count = 1;
  for (Index s : a.shape) {
    if (s < 1) throw Error(ErrorCode::CorruptHeader, "sidecar shape entries must be positive");
    count *= s;
  }
  const std::string bytes = read_all(path);
  if (static_cast<Index>(bytes.size()) != 4 * count) {
    throw Error(ErrorCode::ShapeMismatchWithSidecar, path + " holds " + std::to_string(bytes.size()) +
                                                         " bytes, sidecar shape needs " + std::to_string(4 * count));
  }
  a.values.resize(count);
  for (Index i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) {
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i) * 4 + b])) << (8 * b);
    }
    a.values[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return a;
}

FieldData read_field(const std::string& path, const RichardsParams& p) {
  if (ends_with(path, ".pgm") || ends_with(path, ".PGM")) return read_pgm(path, p);
  RawArray a = read_raw_f32(path);
  FieldData f;
  f.units = a.units;
  if (a.shape.size() == 2) {
    f.grid = ObjectGrid(a.shape[1], a.shape[0], 1);
  } else if (a.shape.size() == 3) {
    f.grid = ObjectGrid(a.shape[2], a.shape[1], a.shape[0]);
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "raw fields must have 2 or 3 dimensions");
  }
  f.values = std::move(a.values);
  return f;
}

}  // namespace sipo
