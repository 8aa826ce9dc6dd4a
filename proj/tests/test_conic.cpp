#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "laptime/conic/certify.hpp"
#include "laptime/conic/io.hpp"
#include "laptime/conic/solver.hpp"
#include "laptime/errors.hpp"
#include "support/conic_testkit.hpp"

using namespace laptime;
using namespace laptime::conic;
using testkit::ProblemBuilder;

namespace {
SolverSettings default_settings() { return SolverSettings{}; }
}  // namespace

TEST_CASE("single variable pinned by an equality") {
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, 1, {1.0});
  int r = pb.add_row(1.0);
  pb.set(r, 0, 1.0);
  auto sol = solve(pb.build(), default_settings());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-7));
  // d(value)/d(rhs) = 1 here, so the equality dual must be +1
  CHECK(sol.dual_equality[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("second-order cone norm minimization") {
  // minimize t s.t. (t,x,y) in SOC, x = 1, y = 1  ->  t = sqrt(2)
  ProblemBuilder pb;
  pb.add_cone(ConeKind::SecondOrder, 3, {1.0, 0.0, 0.0});
  int r1 = pb.add_row(1.0), r2 = pb.add_row(1.0);
  pb.set(r1, 1, 1.0);
  pb.set(r2, 2, 1.0);
  auto sol = solve(pb.build(), default_settings());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("rotated cone epigraph") {
  // minimize a s.t. 2ab >= z^2, b = 1, z = 2  ->  a = 2
  ProblemBuilder pb;
  pb.add_cone(ConeKind::RotatedSecondOrder, 3, {1.0, 0.0, 0.0});
  int r1 = pb.add_row(1.0), r2 = pb.add_row(2.0);
  pb.set(r1, 1, 1.0);
  pb.set(r2, 2, 1.0);
  auto sol = solve(pb.build(), default_settings());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(sol.primal[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("contradictory sign constraint is reported infeasible") {
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, 1, {1.0});
  int r = pb.add_row(-1.0);
  pb.set(r, 0, 1.0);
  auto sol = solve(pb.build(), default_settings());
  CHECK(sol.status == SolveStatus::primal_infeasible);
}

TEST_CASE("unbounded objective is reported dual infeasible") {
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, 2, {-1.0, 0.0});
  int r = pb.add_row(1.0);
  pb.set(r, 1, 1.0);
  auto sol = solve(pb.build(), default_settings());
  CHECK(sol.status == SolveStatus::dual_infeasible);
}

TEST_CASE("iteration limit status") {
  std::mt19937 rng(7);
  auto p = testkit::random_feasible_problem(rng);
  SolverSettings s;
  s.max_iterations = 1;
  auto sol = solve(p, s);
  CHECK(sol.status == SolveStatus::iteration_limit);
}

TEST_CASE("certify accepts solver output and rejects perturbations") {
  std::mt19937 rng(11);
  auto p = testkit::random_feasible_problem(rng);
  auto sol = solve(p, default_settings());
  REQUIRE(sol.status == SolveStatus::optimal);
  auto rep = certify(p, sol);
  CHECK(rep.max_violation <= 1e-6);

  auto bad = sol;
  bad.primal[0] += 1e-3;
  auto rep2 = certify(p, bad);
  CHECK(rep2.primal_residual + rep2.primal_cone_violation >= 1e-4);
}

TEST_CASE("certify is exact on a hand-built KKT point") {
  // min 2x1 + x2 s.t. x1 + x2 = 1, x >= 0; optimum (0,1), y = 1, s = (1,0)
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, 2, {2.0, 1.0});
  int r = pb.add_row(1.0);
  pb.set(r, 0, 1.0);
  pb.set(r, 1, 1.0);
  ConicSolution hand;
  hand.status = SolveStatus::optimal;
  hand.primal = {0.0, 1.0};
  hand.dual_equality = {1.0};
  hand.dual_cone = {1.0, 0.0};
  auto rep = certify(pb.build(), hand);
  CHECK(rep.max_violation <= 1e-12);
}

TEST_CASE("weak duality and scaling invariance") {
  std::mt19937 rng(23);
  SolverSettings tight;
  tight.feasibility_tolerance = 1e-9;
  tight.gap_tolerance = 1e-9;
  for (int trial = 0; trial < 20; ++trial) {
    auto p = testkit::random_feasible_problem(rng);
    auto sol = solve(p, tight);
    REQUIRE(sol.status == SolveStatus::optimal);
    double dual_obj = 0.0;
    for (int i = 0; i < p.constraint_count(); ++i)
      dual_obj += p.equality_rhs[i] * sol.dual_equality[i];
    const double scale = 1.0 + std::abs(sol.objective_value);
    CHECK(sol.objective_value >= dual_obj - 1e-6 * scale);

    auto p7 = p;
    for (double& v : p7.objective) v *= 7.0;
    auto sol7 = solve(p7, tight);
    REQUIRE(sol7.status == SolveStatus::optimal);
    for (int j = 0; j < p.variable_count(); ++j)
      CHECK(sol7.primal[j] ==
            doctest::Approx(sol.primal[j]).epsilon(5e-4).scale(1.0));
  }
}

TEST_CASE("random LPs match vertex enumeration") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 8)(rng);
    const int m = std::uniform_int_distribution<int>(1, n - 1)(rng);
    auto p = testkit::random_feasible_lp(rng, n, m);
    auto sol = solve(p, default_settings());
    REQUIRE(sol.status == SolveStatus::optimal);
    const double oracle = testkit::lp_vertex_optimum(p);
    CHECK(sol.objective_value ==
          doctest::Approx(oracle).epsilon(1e-6).scale(1.0 + std::abs(oracle)));
  }
}

TEST_CASE("equality duals are objective sensitivities") {
  std::mt19937 rng(5);
  int tested = 0;
  for (int trial = 0; trial < 12; ++trial) {
    auto p = testkit::random_feasible_problem(rng);
    auto sol = solve(p, default_settings());
    REQUIRE(sol.status == SolveStatus::optimal);
    for (int j = 0; j < std::min(2, p.constraint_count()); ++j) {
      if (std::abs(sol.dual_equality[j]) < 1e-4) continue;
      const double eps = 1e-4 * std::max(1.0, std::abs(p.equality_rhs[j]));
      auto pp = p;
      pp.equality_rhs[j] += eps;
      auto sol2 = solve(pp, default_settings());
      if (sol2.status != SolveStatus::optimal) continue;
      const double predicted = sol.dual_equality[j] * eps;
      const double actual = sol2.objective_value - sol.objective_value;
      if (std::abs(actual) < 1e-9) continue;  // degenerate direction
      CHECK(std::abs(actual - predicted) <= 0.05 * std::abs(actual) + 1e-9);
      ++tested;
    }
  }
  CHECK(tested >= 8);  // the property must actually get exercised
}

TEST_CASE("random mixed-cone instances solve to tolerance") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    auto p = testkit::random_feasible_problem(rng);
    auto sol = solve(p, default_settings());
    REQUIRE(sol.status == SolveStatus::optimal);
    double nb = 0.0, nc = 0.0;
    for (double v : p.equality_rhs) nb += v * v;
    for (double v : p.objective) nc += v * v;
    CHECK(sol.primal_residual <= 1e-7 * (1.0 + std::sqrt(nb)));
    CHECK(sol.dual_residual <= 1e-7 * (1.0 + std::sqrt(nc)));
    CHECK(sol.duality_gap <=
          1e-6 * std::max({1.0, std::abs(sol.objective_value)}));
  }
}

TEST_CASE("deterministic across repeated solves") {
  std::mt19937 rng(3);
  auto p = testkit::random_feasible_problem(rng);
  auto a = solve(p, default_settings());
  auto b = solve(p, default_settings());
  REQUIRE(a.status == SolveStatus::optimal);
  CHECK(a.iterations == b.iterations);
  for (int j = 0; j < p.variable_count(); ++j)
    CHECK(a.primal[j] == b.primal[j]);
}

TEST_CASE("warm start hook accepts an interior point") {
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, 2, {1.0, 2.0});
  int r = pb.add_row(2.0);
  pb.set(r, 0, 1.0);
  pb.set(r, 1, 1.0);
  auto p = pb.build();
  auto cold = solve(p, default_settings());
  REQUIRE(cold.status == SolveStatus::optimal);

  InitialPoint ip;
  ip.x = {1.5, 0.5};
  ip.y = {0.0};
  ip.s = {1.0, 2.0};
  auto warm = solve(p, default_settings(), &ip);
  REQUIRE(warm.status == SolveStatus::optimal);
  CHECK(warm.objective_value == doctest::Approx(cold.objective_value).epsilon(1e-7));
}

TEST_CASE("problem dump round-trips") {
  std::mt19937 rng(17);
  auto p = testkit::random_feasible_problem(rng);
  auto q = parse_problem(dump_problem(p));
  CHECK(q.variable_count() == p.variable_count());
  CHECK(q.constraint_count() == p.constraint_count());
  REQUIRE(q.cones.size() == p.cones.size());
  for (size_t i = 0; i < p.cones.size(); ++i) {
    CHECK(q.cones[i].kind == p.cones[i].kind);
    CHECK(q.cones[i].dim == p.cones[i].dim);
  }
  auto sa = solve(p, default_settings());
  auto sb = solve(q, default_settings());
  CHECK(sa.objective_value == doctest::Approx(sb.objective_value).epsilon(1e-12));

  CHECK_THROWS_AS(parse_problem("garbage\n"), ParseError);
}

TEST_CASE("problem validation catches structural mistakes") {
  ProblemBuilder pb;
  pb.add_cone(ConeKind::SecondOrder, 1, {1.0});  // dim too small
  pb.add_row(0.0);
  CHECK_THROWS_AS(pb.build(), ValidationError);
}
