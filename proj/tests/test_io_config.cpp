#include "support.hpp"

#include "sipo/config.hpp"
#include "sipo/io.hpp"
#include "sipo/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace sipo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sipo_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("raw float32 round trip is bit exact") {
  const ObjectGrid g(5, 4, 2);
  Vector v = sipo::test::random_vector(g.size(), 1);
  v = v.cast<float>().cast<double>();
  const std::string path = scratch("field.f32").string();
  write_field(path, v, g, "dose");
  const FieldData f = read_field(path, RichardsParams{});
  CHECK(f.grid == g);
  CHECK(f.units == "dose");
  CHECK(f.values == v);
  CHECK(fs::file_size(path) == static_cast<std::uintmax_t>(4 * g.size()));
}

TEST_CASE("sidecar shape must match the payload") {
  const std::string path = scratch("short.f32").string();
  write_raw_f32(path, Vector::Ones(6), {2, 3}, "dose");
  write_text(path + ".json", R"({"shape":[3,3],"order":"row-major","dtype":"f32le","units":"dose"})");
  try {
    read_raw_f32(path);
    FAIL("expected ShapeMismatchWithSidecar");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatchWithSidecar);
  }
  write_text(path + ".json", "{not json");
  CHECK_THROWS_AS(read_raw_f32(path), Error);
  CHECK_THROWS_AS(write_raw_f32(path, Vector::Ones(5), {2, 3}, "dose"), Error);
}

TEST_CASE("ASCII and binary PGM decode identically") {
  const auto p2 = scratch("a.pgm"), p5 = scratch("b.pgm");
  const std::vector<int> px{0, 128, 255, 64, 0, 32, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string txt = "P2\n# comment\n4 4\n255\n", bin = "P5\n4 4\n255\n";
  for (int v : px) {
    txt += std::to_string(v) + " ";
    bin.push_back(static_cast<char>(v));
  }
  write_text(p2, txt);
  write_text(p5, bin);
  const RichardsParams p;
  const FieldData a = read_pgm(p2.string(), p), b = read_pgm(p5.string(), p);
  CHECK(a.values == b.values);
  CHECK(a.grid == ObjectGrid(4, 4));
  CHECK(a.values[0] == 0.0);
  CHECK(a.values[1] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(a.values[2] < 1.0);
  CHECK(p.invertible(a.values[2]));
}

TEST_CASE("PGM write and read round trip") {
  const ObjectGrid g(4, 4);
  ResponseField m = ResponseField::Zero(16);
  m[1] = 0.5;
  m[5] = 0.2;
  m[11] = 0.8;
  const RichardsParams p;
  const auto path = scratch("rt.pgm").string();
  write_pgm(path, m, g, p);
  const FieldData f = read_pgm(path, p);
  CHECK((f.values - m).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
  CHECK(f.values[0] == 0.0);
  CHECK_THROWS_AS(write_pgm(path, m, ObjectGrid(4, 4, 3), p), Error);
}

TEST_CASE("malformed PGM headers") {
  const auto path = scratch("bad.pgm");
  write_text(path, "P6\n1 1\n255\n\x01");
  CHECK_THROWS_AS(read_pgm(path.string(), RichardsParams{}), Error);
  write_text(path, "P5\n4 4\n255\n\x01\x02");
  try {
    read_pgm(path.string(), RichardsParams{});
    FAIL("expected CorruptHeader");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptHeader);
  }
  CHECK_THROWS_AS(read_pgm(scratch("missing.pgm").string(), RichardsParams{}), Error);
}

TEST_CASE("config parsing") {
  const Config c = Config::parse("# comment\n[problem]\nkind = case1\neps_l = 0.05\n\nband.width = 3\n");
  CHECK(c.get_string("problem.kind") == "case1");
  CHECK(c.get_double("problem.eps_l") == 0.05);
  CHECK(c.get_int("band.width") == 3);
  CHECK(c.get_double("problem.eps_u") == 0.1);
  CHECK(c.get_bool("solver.restarts"));
  const std::string manifest = c.manifest();
  CHECK(manifest.find("problem.kind = case1") != std::string::npos);
  CHECK(manifest.find("problem.eps_u = 0.1") != std::string::npos);
}

TEST_CASE("config errors name the offending key") {
  auto message = [](const std::string& text, const std::string& key) {
    try {
      const Config c = Config::parse(text);
      c.get_double(key);
      c.get_int(key);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("problem.bogus = 1\n", "problem.w1").find("problem.bogus") != std::string::npos);
  CHECK(message("problem.w1 = abc\n", "problem.w1").find("problem.w1") != std::string::npos);
  CHECK(message("band.width = 2.5\n", "band.width").find("band.width") != std::string::npos);
  CHECK(message("no equals sign\n", "problem.w1").find("expected") != std::string::npos);
  CHECK_THROWS_AS(Config::parse("[unterminated\n"), Error);
  const Config c = Config::parse("phantom.levels = 0.5, 0.6,0.7\n");
  CHECK(c.get_list("phantom.levels") == std::vector<double>{0.5, 0.6, 0.7});
}

TEST_CASE("solver scheme selection") {
  CHECK(settings_from_config(Config::parse("")).pdhg.scheme == PdhgScheme::Halpern);
  CHECK(settings_from_config(Config::parse("solver.scheme = average\n")).pdhg.scheme == PdhgScheme::Average);
  try {
    settings_from_config(Config::parse("solver.scheme = fast\n"));
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("solver.scheme") != std::string::npos);
  }
}

TEST_CASE("every key is documented in the help text") {
  const std::string help = config_help();
  for (const KeyInfo& k : config_keys()) CHECK(help.find(k.key) != std::string::npos);
}
