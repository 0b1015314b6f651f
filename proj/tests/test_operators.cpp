#include "support.hpp"

#include "sipo/operators.hpp"
#include "sipo/parallel.hpp"

#include <doctest.h>

#include <Eigen/SVD>

using namespace sipo;
using sipo::test::random_vector;

namespace {

ProjectionGeometry full_geometry(const ObjectGrid& g, Index n_angles, double span = M_PI) {
  return ProjectionGeometry::uniform(n_angles, span, ProjectionGeometry::default_beams(g));
}

double adjoint_gap(const TomoOperator& op, std::uint64_t seed) {
  const DoseField f = random_vector(op.n_voxels(), seed);
  const Sinogram g = random_vector(op.n_rays(), seed + 1000);
  const double lhs = op.apply_forward(g).dot(f);
  const double rhs = g.dot(op.apply_adjoint(f));
  return std::abs(lhs - rhs) / (f.norm() * g.norm());
}

}  // namespace

TEST_CASE("uniform image at angle 0 integrates to the chord length") {
  const ObjectGrid g(12, 12);
  const ProjectionGeometry geo({0.0}, ProjectionGeometry::default_beams(g));
  const Sinogram s = forward_project(DoseField::Ones(g.size()), g, geo);
  // Beamlets whose offset puts the ray on a row centre see the full row.
  for (Index b = 0; b < geo.n_beams; ++b) {
    const double y = 5.5 + sipo::test::beam_offset(geo, b);
    if (y >= 0.0 && y <= 11.0) {
      CHECK(s[b] == doctest::Approx(12.0).epsilon(1e-14));
    } else {
      CHECK(s[b] == 0.0);
    }
  }
}

TEST_CASE("delta image lights exactly the rays through its bilinear footprint") {
  const ObjectGrid g(9, 9);
  const auto geo = full_geometry(g, 7, M_PI);
  for (const auto& [vx, vy] : std::vector<std::pair<Index, Index>>{{4, 4}, {0, 0}, {2, 7}, {8, 3}}) {
    DoseField d = DoseField::Zero(g.size());
    d[g.flat(vx, vy)] = 1.0;
    const Sinogram s = forward_project(d, g, geo);
    for (Index a = 0; a < geo.n_angles(); ++a)
      for (Index b = 0; b < geo.n_beams; ++b) {
        const bool oracle = sipo::test::ray_touches_voxel(g, geo.angles[static_cast<std::size_t>(a)],
                                                          sipo::test::beam_offset(geo, b), vx, vy);
        CHECK((s[a * geo.n_beams + b] != 0.0) == oracle);
      }
  }
}

TEST_CASE("projections of a centred disk agree across angles") {
  const ObjectGrid g(64, 64);
  const auto geo = full_geometry(g, 36, 2.0 * M_PI);
  const double r = 20.0;
  // Partial-volume disk: each voxel holds its covered area fraction, so the
  // remaining error comes from the interpolation alone.
  DoseField disk = DoseField::Zero(g.size());
  const int sub = 16;
  for (Index y = 0; y < g.ny; ++y)
    for (Index x = 0; x < g.nx; ++x) {
      int hit = 0;
      for (int j = 0; j < sub; ++j)
        for (int i = 0; i < sub; ++i) {
          const double px = static_cast<double>(x) - 31.5 + (i + 0.5) / sub - 0.5;
          const double py = static_cast<double>(y) - 31.5 + (j + 0.5) / sub - 0.5;
          hit += (px * px + py * py <= r * r) ? 1 : 0;
        }
      disk[g.flat(x, y)] = static_cast<double>(hit) / (sub * sub);
    }
  const Sinogram s = forward_project(disk, g, geo);
  const Index nb = geo.n_beams;
  // Compare the central part of every profile with the analytic chord.
  double worst = 0.0;
  for (Index a = 0; a < geo.n_angles(); ++a)
    for (Index b = 0; b < nb; ++b) {
      const double off = sipo::test::beam_offset(geo, b);
      if (std::abs(off) > 0.8 * r) continue;
      const double chord = 2.0 * std::sqrt(r * r - off * off);
      worst = std::max(worst, std::abs(s[a * nb + b] - chord) / chord);
    }
  CHECK(worst <= 2e-2);
  double spread = 0.0;
  for (Index a = 1; a < geo.n_angles(); ++a)
    for (Index b = 0; b < nb; ++b) {
      if (std::abs(sipo::test::beam_offset(geo, b)) > 0.8 * r) continue;
      spread = std::max(spread, std::abs(s[a * nb + b] - s[b]) / s[b]);
    }
  CHECK(spread <= 2e-2);
}

TEST_CASE("back projection is the exact adjoint of projection") {
  const ObjectGrid g(20, 17);
  const auto geo = full_geometry(g, 11, 2.0 * M_PI);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DoseField f = random_vector(g.size(), seed);
    const Sinogram s = random_vector(geo.rays_per_slice(), seed + 50);
    const double gap = std::abs(forward_project(f, g, geo).dot(s) - f.dot(back_project(s, g, geo)));
    CHECK(gap <= 1e-10 * f.norm() * s.norm());
  }
}

TEST_CASE("single-entry sinogram smears along the forward footprint") {
  const ObjectGrid g(10, 10);
  const auto geo = full_geometry(g, 5);
  const Index j = 2 * geo.n_beams + geo.n_beams / 2 + 1;
  Sinogram e = Sinogram::Zero(geo.rays_per_slice());
  e[j] = 1.0;
  const DoseField smear = back_project(e, g, geo);
  for (Index v = 0; v < g.size(); ++v) {
    DoseField d = DoseField::Zero(g.size());
    d[v] = 1.0;
    CHECK((smear[v] != 0.0) == (forward_project(d, g, geo)[j] != 0.0));
  }
  CHECK(back_project(Sinogram::Zero(geo.rays_per_slice()), g, geo).isZero(0.0));
}

TEST_CASE("identity kernel leaves fields bit-exact") {
  const ObjectGrid g(8, 8, 3);
  const DoseField f = random_vector(g.size(), 3);
  CHECK((apply_psf(f, g, PsfKernel::identity()).array() == f.array()).all());
  CHECK((apply_psf_adjoint(f, g, PsfKernel::identity()).array() == f.array()).all());
}

TEST_CASE("normalised 3x3 Gaussian preserves a constant interior") {
  const ObjectGrid g(10, 10);
  const PsfKernel k = PsfKernel::gaussian(3, 3, 0.8, 2);
  CHECK(k.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  const DoseField out = apply_psf(DoseField::Constant(g.size(), 2.5), g, k);
  for (Index y = 1; y < 9; ++y)
    for (Index x = 1; x < 9; ++x) CHECK(std::abs(out[g.flat(x, y)] - 2.5) <= 1e-12);
}

TEST_CASE("21^3 kernel with a populated 5^3 Gaussian core") {
  const PsfKernel k = PsfKernel::gaussian(21, 5, 1.0, 3);
  CHECK(k.kx() == 21);
  CHECK(k.kz() == 21);
  double z = 0.0;
  for (int dz = -2; dz <= 2; ++dz)
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) z += std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
  CHECK(k.at(0, 0, 0) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(k.at(3, 0, 0) == 0.0);
  CHECK(k.at(2, 2, 2) == doctest::Approx(std::exp(-6.0) / z).epsilon(1e-14));

  const ObjectGrid g(21, 21, 21);
  DoseField d = DoseField::Zero(g.size());
  d[g.flat(10, 10, 10)] = 1.0;
  const DoseField out = apply_psf(d, g, k);
  CHECK(out[g.flat(10, 10, 10)] == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK((out - sipo::test::direct_correlation(d, g, k)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("correlation and its adjoint match direct summation for an asymmetric kernel") {
  const ObjectGrid g(9, 8, 5);
  Vector w = random_vector(3 * 5 * 3, 7, 0.0, 1.0);
  const PsfKernel k(3, 5, 3, w);
  CHECK_FALSE(k.is_symmetric());
  const DoseField f = random_vector(g.size(), 8);
  CHECK((apply_psf(f, g, k) - sipo::test::direct_correlation(f, g, k)).cwiseAbs().maxCoeff() <= 1e-13);
  const DoseField h = random_vector(g.size(), 9);
  CHECK(std::abs(apply_psf(f, g, k).dot(h) - f.dot(apply_psf_adjoint(h, g, k))) <= 1e-10 * f.norm() * h.norm());
}

TEST_CASE("outer-product kernels take the factored path and match direct summation") {
  const ObjectGrid g(11, 9, 7);
  const Vector px = random_vector(5, 21, 0.1, 1.0), py = random_vector(3, 22, 0.1, 1.0),
               pz = random_vector(5, 23, 0.1, 1.0);
  Vector w(5 * 3 * 5);
  for (Index z = 0; z < 5; ++z)
    for (Index y = 0; y < 3; ++y)
      for (Index x = 0; x < 5; ++x) w[(z * 3 + y) * 5 + x] = px[x] * py[y] * pz[z];
  const PsfKernel k(5, 3, 5, w);
  REQUIRE(k.factors().has_value());
  CHECK_FALSE(k.is_symmetric());
  const DoseField f = random_vector(g.size(), 24);
  CHECK((apply_psf(f, g, k) - sipo::test::direct_correlation(f, g, k)).cwiseAbs().maxCoeff() <= 1e-13);
  const DoseField h = random_vector(g.size(), 25);
  CHECK(std::abs(apply_psf(f, g, k).dot(h) - f.dot(apply_psf_adjoint(h, g, k))) <= 1e-12 * f.norm() * h.norm());

  CHECK(PsfKernel::gaussian(21, 5, 1.0, 3).factors().has_value());
  CHECK(PsfKernel::gaussian(5, 5, 1.0, 2).factors().has_value());
  CHECK_FALSE(PsfKernel(3, 5, 3, random_vector(45, 7, 0.0, 1.0)).factors().has_value());
  CHECK_FALSE(PsfKernel::identity().factors().has_value());
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(PsfKernel(2, 1, 1, Vector::Ones(2)), Error);
  CHECK_THROWS_AS(PsfKernel(3, 1, 1, Vector::Zero(3)), Error);
  CHECK_THROWS_AS(PsfKernel::gaussian(5, 7, 1.0), Error);
  const ObjectGrid g(4, 4);
  try {
    apply_psf(DoseField::Ones(g.size()), g, PsfKernel::gaussian(5, 5, 1.0, 2));
    FAIL("expected KernelTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KernelTooLarge);
  }
}

TEST_CASE("composite operator") {
  const ObjectGrid g(16, 16);
  const auto geo = full_geometry(g, 9);
  SUBCASE("identity kernel reduces to back projection bit-exactly") {
    const TomoOperator op(g, geo);
    const Sinogram s = random_vector(op.n_rays(), 4);
    CHECK((op.apply_forward(s).array() == back_project(s, g, geo).array()).all());
  }
  SUBCASE("exact adjoint with a Gaussian kernel") {
    const TomoOperator op(g, geo, PsfKernel::gaussian(7, 5, 1.0, 2));
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(adjoint_gap(op, seed) <= 1e-10);
  }
  SUBCASE("symmetric kernel: A f = P K f") {
    const PsfKernel k = PsfKernel::gaussian(5, 5, 1.0, 2);
    REQUIRE(k.is_symmetric());
    const TomoOperator op(g, geo, k);
    const DoseField f = random_vector(g.size(), 5);
    CHECK((op.apply_adjoint(f) - forward_project(apply_psf(f, g, k), g, geo)).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SUBCASE("shape errors") {
    const TomoOperator op(g, geo);
    CHECK_THROWS_AS(op.apply_forward(Sinogram::Zero(3)), Error);
    CHECK_THROWS_AS(op.apply_adjoint(DoseField::Zero(3)), Error);
  }
}

TEST_CASE("volumes are projected slice by slice with 3D blur coupling") {
  const ObjectGrid g(8, 8, 6);
  const auto geo = full_geometry(g, 5);
  const TomoOperator op(g, geo, PsfKernel::gaussian(5, 3, 1.0, 3));
  for (std::uint64_t seed = 0; seed < 3; ++seed) CHECK(adjoint_gap(op, seed) <= 1e-10);
  // Without blur a ray of slice 2 only reaches slice 2.
  const TomoOperator sharp(g, geo);
  Sinogram e = Sinogram::Zero(sharp.n_rays());
  e[2 * geo.rays_per_slice() + geo.n_beams / 2] = 1.0;
  const DoseField f = sharp.apply_forward(e);
  for (Index z = 0; z < g.nz; ++z) {
    CHECK((f.segment(z * g.slice_size(), g.slice_size()).sum() > 0.0) == (z == 2));
  }
  CHECK(op.apply_forward(e).segment(3 * g.slice_size(), g.slice_size()).sum() > 0.0);
}

TEST_CASE("volume projection equals per-slice projection, with and without ray flags") {
  const ObjectGrid g(9, 7, 5), gs(9, 7);
  const auto geo = full_geometry(g, 6);
  const DoseField f = random_vector(g.size(), 31);
  const Sinogram y = random_vector(geo.rays_per_slice() * g.nz, 32);
  const Sinogram p = forward_project(f, g, geo);
  const DoseField b = back_project(y, g, geo);
  const Index ns = g.slice_size(), nr = geo.rays_per_slice();
  for (Index z = 0; z < g.nz; ++z) {
    CHECK(p.segment(z * nr, nr) == forward_project(f.segment(z * ns, ns), gs, geo));
    CHECK(b.segment(z * ns, ns) == back_project(y.segment(z * nr, nr), gs, geo));
  }
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(p.size()));
  for (std::size_t j = 0; j < flags.size(); ++j) flags[j] = (j * 7 % 3) != 0;
  const Sinogram pf = forward_project(f, g, geo, flags);
  for (Index j = 0; j < p.size(); ++j) CHECK(pf[j] == (flags[static_cast<std::size_t>(j)] ? p[j] : 0.0));
}

TEST_CASE("linearity, nonnegativity and dense equivalence") {
  const ObjectGrid g(12, 12);
  const auto geo = full_geometry(g, 8);
  const TomoOperator op(g, geo, PsfKernel::gaussian(3, 3, 1.0, 2));
  const Sinogram a = random_vector(op.n_rays(), 1), b = random_vector(op.n_rays(), 2);
  const DoseField lhs = op.apply_forward(2.5 * a - 0.75 * b);
  const DoseField rhs = 2.5 * op.apply_forward(a) - 0.75 * op.apply_forward(b);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

  const Sinogram pos = random_vector(op.n_rays(), 3, 0.0, 1.0);
  CHECK(op.apply_forward(pos).minCoeff() >= 0.0);

  const Matrix at = dense_forward_matrix(op);
  const DoseField f = random_vector(g.size(), 6);
  CHECK((at * a - op.apply_forward(a)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((at.transpose() * f - op.apply_adjoint(f)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("operator norm estimate") {
  SUBCASE("4x4 grid, one axis-aligned view: norm is the square root of the chord") {
    const ObjectGrid g(4, 4);
    const TomoOperator op(g, ProjectionGeometry({0.0}, ProjectionGeometry::default_beams(g)));
    CHECK(estimate_operator_norm(op, 50, 0) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("16x16, 8 angles: matches the top singular value of the dense matrix") {
    const ObjectGrid g(16, 16);
    const TomoOperator op(g, full_geometry(g, 8));
    const Matrix at = dense_forward_matrix(op);
    const double smax = Eigen::JacobiSVD<Matrix>(at).singularValues()[0];
    const double est = estimate_operator_norm(op, 500, 1);
    CHECK(std::abs(est - smax) <= 1e-4 * smax);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Sinogram u = random_vector(op.n_rays(), seed);
      u.normalize();
      CHECK(op.apply_forward(u).norm() <= est * (1.0 + 1e-6));
    }
  }
  SUBCASE("deterministic and cached") {
    const ObjectGrid g(8, 8);
    const TomoOperator op(g, full_geometry(g, 4));
    CHECK(estimate_operator_norm(op, 30, 9) == estimate_operator_norm(op, 30, 9));
    CHECK(op.norm() == estimate_operator_norm(op, 100, 0));
  }
}

TEST_CASE("results do not depend on the worker count") {
  const ObjectGrid g(24, 24, 3);
  const TomoOperator op(g, full_geometry(g, 13), PsfKernel::gaussian(3, 3, 1.0, 3));
  const Sinogram s = random_vector(op.n_rays(), 1);
  const DoseField f = random_vector(g.size(), 2);
  set_thread_count(1);
  const DoseField f1 = op.apply_forward(s);
  const Sinogram s1 = op.apply_adjoint(f);
  set_thread_count(4);
  const DoseField f4 = op.apply_forward(s);
  const Sinogram s4 = op.apply_adjoint(f);
  set_thread_count(0);
  CHECK((f1.array() == f4.array()).all());
  CHECK((s1.array() == s4.array()).all());
}
