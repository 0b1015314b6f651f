#include "support.hpp"

#include "sipo/formulations.hpp"
#include "sipo/material.hpp"

#include <doctest.h>

using namespace sipo;
using sipo::test::tiny_instance;

namespace {

Vector random_point(const LpProblem& lp, std::uint64_t seed) {
  Vector x = sipo::test::random_vector(lp.n_vars(), seed, 0.0, 1.0);
  if (lp.has_u()) x[lp.u_index()] = -0.7;
  if (lp.has_v()) x[lp.v_index()] = 1.3;
  return x;
}

std::vector<LpProblem> three_kinds(const sipo::test::Instance& inst) {
  const RichardsParams p;
  std::vector<LpProblem> out;
  out.push_back(build_general_lp(inst.op, inst.part, inst.target_dose, 1.0, 1.0));
  out.push_back(build_case1_lp(inst.op, inst.part, inst.target_response, 0.1, 0.1, p));
  out.push_back(build_case2_lp(inst.op, inst.part, inst.target_dose, richards_inv(0.3, p)));
  return out;
}

}  // namespace

TEST_CASE("general LP shape and normalization") {
  const auto inst = tiny_instance(10, 8, 1, 2);
  const LpProblem lp = build_general_lp(inst.op, inst.part, inst.target_dose, 2.0, 3.0);
  const Index na = static_cast<Index>(inst.part->active.size());
  CHECK(lp.n_vars() == na + 2);
  CHECK(lp.n_rows() == static_cast<Index>(inst.part->band.size() + 2 * inst.part->gel.size()));
  CHECK(lp.spec().gel_upper.minCoeff() == 1.0);
  CHECK(lp.f_crit() == gather(inst.target_dose, inst.part->gel).minCoeff());
  CHECK(lp.cost()[lp.u_index()] == 2.0);
  CHECK(lp.cost()[lp.v_index()] == 3.0);
  CHECK(lp.cost().head(na).isZero(0.0));
  CHECK(std::isinf(lp.lower_bounds()[lp.u_index()]));
  CHECK(lp.lower_bounds().head(na).isZero(0.0));
}

TEST_CASE("zero point gives the negated right-hand side") {
  const auto inst = tiny_instance(9, 6, 2, 1);
  for (const LpProblem& lp : three_kinds(inst)) {
    const Vector cv = lp.constraint_values(Vector::Zero(lp.n_vars()));
    CHECK((cv + lp.rhs()).isZero(0.0));
  }
}

TEST_CASE("constraint operator adjoint identity") {
  const auto inst = tiny_instance(12, 9, 3, 2, PsfKernel::gaussian(5, 3, 1.0, 2));
  for (const LpProblem& lp : three_kinds(inst)) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Vector x = sipo::test::random_vector(lp.n_vars(), 10 + s);
      const Vector l = sipo::test::random_vector(lp.n_rows(), 20 + s);
      Vector gx, gtl;
      lp.apply(x, gx);
      lp.apply_adjoint(l, gtl);
      CHECK(std::abs(gx.dot(l) - x.dot(gtl)) <= 1e-12 * x.norm() * l.norm() * 10.0);
    }
  }
}

TEST_CASE("matrix-free constraints equal the materialized matrix") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = tiny_instance(8, 12, seed, 1, seed == 2 ? PsfKernel::gaussian(3, 3, 0.8, 2) : PsfKernel::identity());
    for (const LpProblem& lp : three_kinds(inst)) {
      const Matrix g = lp.materialize();
      const Vector x = random_point(lp, seed);
      const Vector l = sipo::test::random_vector(lp.n_rows(), seed + 7, 0.0, 1.0);
      Vector gx, gtl;
      lp.apply(x, gx);
      lp.apply_adjoint(l, gtl);
      CHECK((gx - g * x).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((gtl - g.transpose() * l).cwiseAbs().maxCoeff() <= 1e-12);
      const DenseLp d = lp.to_dense();
      CHECK(d.c == lp.cost());
      CHECK(d.b_ub == lp.rhs());
    }
  }
}

TEST_CASE("case 1 bounds from a uniform response target") {
  const ObjectGrid g(6, 6);
  ResponseField m = ResponseField::Zero(36);
  const IndexSet gel{14, 15, 20, 21};
  for (Index i : gel) m[i] = 0.5;
  const RichardsParams p;
  const Case1Bounds b = case1_bounds(m, gel, 0.1, 0.1, p);
  CHECK(b.m_crit == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(b.f_crit == doctest::Approx(richards_inv(0.45, p)).epsilon(1e-14));
  for (Index i : gel) {
    CHECK(richards(b.f_lower[i], p) == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(richards(b.f_upper[i], p) == doctest::Approx(0.55).epsilon(1e-12));
  }
  CHECK(b.f_lower[0] == 0.0);
  CHECK_FALSE(b.degenerate_window);
  CHECK(case1_bounds(m, gel, 0.0, 0.0, p).degenerate_window);
  CHECK_THROWS_AS(case1_bounds(m, gel, 1.0, 0.1, p), Error);
  CHECK_THROWS_AS(case1_bounds(m, gel, 0.1, -0.1, p), Error);
}

TEST_CASE("case 1 LP normalizes by the lowest lower bound") {
  const auto inst = tiny_instance(10, 8, 4, 1);
  const RichardsParams p;
  const LpProblem lp = build_case1_lp(inst.op, inst.part, inst.target_response, 0.05, 0.05, p);
  CHECK_FALSE(lp.has_v());
  CHECK(lp.has_u());
  CHECK(lp.spec().gel_lower.minCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((lp.spec().gel_upper.array() > lp.spec().gel_lower.array()).all());
  CHECK(lp.cost()[lp.u_index()] == 1.0);
  const Vector ft = gather(inst.target_response, inst.part->gel);
  CHECK(lp.f_crit() == doctest::Approx(richards_inv(0.95 * ft.minCoeff(), p)).epsilon(1e-12));
}

TEST_CASE("case 1 is the general structure with the v column removed") {
  const auto inst = tiny_instance(8, 6, 5, 1);
  const RichardsParams p;
  const LpProblem c1 = build_case1_lp(inst.op, inst.part, inst.target_response, 0.1, 0.2, p);
  const Case1Bounds b = case1_bounds(inst.target_response, inst.part->gel, 0.1, 0.2, p);
  LpSpec spec;
  spec.kind = ProblemKind::Case1;
  spec.w1 = 1.0;
  spec.w2 = 0.0;
  spec.has_v = false;
  spec.gel_upper = gather(b.f_upper, inst.part->gel) / b.f_crit;
  spec.gel_lower = gather(b.f_lower, inst.part->gel) / b.f_crit;
  const LpProblem manual(inst.op, inst.part, spec);
  const Vector x = random_point(c1, 3);
  CHECK((c1.constraint_values(x) - manual.constraint_values(x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("case 2 caps the band at one and scales the gel by f_crit") {
  const auto inst = tiny_instance(10, 8, 6, 2);
  const RichardsParams p;
  for (double mc : {0.23, 0.33}) {
    const double fc = richards_inv(mc, p);
    const LpProblem lp = build_case2_lp(inst.op, inst.part, inst.target_dose, fc);
    CHECK_FALSE(lp.has_u());
    CHECK(lp.n_vars() == static_cast<Index>(inst.part->active.size()) + 1);
    CHECK((lp.rhs().head(lp.n_band()).array() == 1.0).all());
    const Vector ft = gather(inst.target_dose, inst.part->gel);
    CHECK((lp.spec().gel_upper - ft / fc).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK_THROWS_AS(build_case2_lp(inst.op, inst.part, inst.target_dose, 0.0), Error);
  CHECK_THROWS_AS(build_case2_lp(inst.op, inst.part, inst.target_dose, -1.0), Error);
}

TEST_CASE("single-voxel case 2 toy has the expected rows") {
  // 4x4 grid, one view, gel voxel (1,1) with zero band: one upper and one
  // lower row only.
  const ObjectGrid g(4, 4);
  DoseField f = DoseField::Zero(16);
  f[g.flat(1, 1)] = 2.0;
  const auto op = std::make_shared<const TomoOperator>(g, ProjectionGeometry({0.0}, 4));
  const auto part = std::make_shared<const DomainPartition>(partition_domain(*op, f, BandWidth(0)));
  CHECK(part->band.empty());
  CHECK(part->active == IndexSet{1});
  const LpProblem lp = build_case2_lp(op, part, f, 0.5);
  CHECK(lp.n_rows() == 2);
  CHECK(lp.spec().gel_upper[0] == 4.0);
  Vector x(2);
  x << 4.0, 1.0;
  const Vector cv = lp.constraint_values(x);
  CHECK(cv[0] == doctest::Approx(0.0));
  CHECK(cv[1] == doctest::Approx(0.0));
}

TEST_CASE("weight validation") {
  const auto inst = tiny_instance(8, 4, 7, 1);
  CHECK_THROWS_AS(build_general_lp(inst.op, inst.part, inst.target_dose, -1.0, 1.0), Error);
  CHECK_THROWS_AS(build_general_lp(inst.op, inst.part, inst.target_dose, 0.0, 0.0), Error);
  CHECK_NOTHROW(build_general_lp(inst.op, inst.part, inst.target_dose, 0.0, 1.0));
}

TEST_CASE("empty band drops the band scalar") {
  const auto inst = tiny_instance(8, 6, 8, 0);
  if (inst.part->band.empty()) {
    const LpProblem lp = build_general_lp(inst.op, inst.part, inst.target_dose, 1.0, 1.0);
    CHECK_FALSE(lp.has_u());
    CHECK(lp.n_vars() == static_cast<Index>(inst.part->active.size()) + 1);
  }
}

TEST_CASE("Charnes-Cooper image keeps the fractional objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = tiny_instance(6, 5, seed, 1);
    const LfProblem lfp = build_lfp(inst.op, inst.part, inst.target_dose, 1.0, 2.0);
    const LpProblem lp = build_general_lp(inst.op, inst.part, inst.target_dose, 1.0, 2.0);
    LfPoint x = lfp.initial_point();
    CHECK(lfp.is_feasible(x));
    x.g *= 1.7;
    x.u *= 1.7;
    x.v *= 1.7;
    x.s *= 1.2;
    CHECK(lfp.is_feasible(x));
    const Vector y = lfp.charnes_cooper(x);
    CHECK(lp.objective(y) == doctest::Approx(lfp.objective(x)).epsilon(1e-13));
    CHECK(lp.constraint_values(y).maxCoeff() <= 1e-12);
  }
}

TEST_CASE("fractional objective is invariant under positive rescaling") {
  const auto inst = tiny_instance(6, 5, 9, 1);
  const LfProblem lfp = build_lfp(inst.op, inst.part, inst.target_dose, 1.0, 1.0);
  const LfPoint x = lfp.initial_point();
  for (double t : {1e-6, 0.3, 5.0, 1e6}) {
    LfPoint y = x;
    y.g *= t;
    y.u *= t;
    y.v *= t;
    y.s *= t;
    CHECK(lfp.objective(y) == doctest::Approx(lfp.objective(x)).epsilon(1e-13));
    CHECK(lfp.is_feasible(y));
  }
  LfPoint bad = x;
  bad.s = 0.0;
  CHECK_THROWS_AS(lfp.objective(bad), Error);
  CHECK_FALSE(lfp.is_feasible(bad));
  bad.s = -1.0;
  CHECK_THROWS_AS(lfp.charnes_cooper(bad), Error);
}

TEST_CASE("parametric dense problem includes the gauge cut") {
  const auto inst = tiny_instance(6, 4, 10, 1);
  const LfProblem lfp = build_lfp(inst.op, inst.part, inst.target_dose, 1.0, 1.0);
  const DenseLp d = lfp.parametric_dense(0.5);
  const Index na = lfp.n_active();
  CHECK(d.n_vars() == na + 3);
  CHECK(d.a_ub.row(d.a_ub.rows() - 1).head(na).isOnes(0.0));
  CHECK(d.b_ub[d.b_ub.size() - 1] == 1.0);
  CHECK(d.c[na + 2] == -0.5);
  CHECK(d.c[na] == 1.0);
  CHECK(d.free[static_cast<std::size_t>(na)]);
  CHECK_FALSE(d.free[static_cast<std::size_t>(na + 2)]);
}
