#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "laptime/conic/solver.hpp"
#include "laptime/errors.hpp"
#include "laptime/exact/exact.hpp"
#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"
#include "laptime/transcribe/transcribe.hpp"

using namespace laptime;

namespace {

// straight - corner - straight, fixed total length so the same section can be
// discretized at different step counts
TrackProfile corner_section(int n, double length = 96.0, double kappa = 0.03) {
  const double ds = length / n;
  std::vector<double> curv(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) * ds;
    if (s > length / 3 && s < 2 * length / 3) curv[i] = kappa;
  }
  return make_track(ds, curv, "corner-section");
}

transcribe::BoundaryConditions section_bc(const VehicleSpec& veh,
                                          const TransmissionSpec& trans,
                                          const TrackProfile& sec,
                                          double entry_speed,
                                          double budget_per_metre = 1536.0) {
  transcribe::BoundaryConditions bc;
  bc.periodic = false;
  bc.entry_kinetic_energy =
      0.5 * dynamic_mass(veh, trans) * entry_speed * entry_speed;
  bc.battery_budget = budget_per_metre * sec.total_length;
  return bc;
}

double direct_lap(const TrackProfile& sec, const VehicleSpec& veh,
                  const PowertrainSpec& pw, const TransmissionSpec& trans,
                  const std::vector<int>& gears,
                  const transcribe::BoundaryConditions& bc,
                  const SolverSettings& solver) {
  GearTrajectory g;
  g.active_gear = gears;
  const auto tr = transcribe::build_cop(sec, veh, pw, trans, g, bc);
  const auto raw = conic::solve(tr.problem, solver);
  REQUIRE(raw.status == conic::SolveStatus::optimal);
  return transcribe::extract(raw, tr.layout, veh, pw).lap_time;
}

}  // namespace

TEST_CASE("dominant gear is solved at the root") {
  // full-throttle acceleration from low speed: the short gear out-pulls the
  // tall one at every step, so the relaxation lands integral immediately
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = make_track(4.0, std::vector<double>(6, 0.0), "launch");
  transcribe::BoundaryConditions bc;
  bc.periodic = false;
  bc.entry_kinetic_energy = 0.5 * dynamic_mass(veh, mgt2) * 20.0 * 20.0;

  const auto res = exact::solve_exact(sec, veh, pw, mgt2, bc, SolverSettings{});
  CHECK(res.node_count == 1);
  CHECK(res.bound_gap <= 1e-6 + 1e-12);
  CHECK_FALSE(res.budget_exhausted);
  for (int g : res.gears.active_gear) CHECK(g == 1);
}

TEST_CASE("agrees with exhaustive enumeration on a 6-step 2-gear section") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = corner_section(6, 24.0);
  const auto bc = section_bc(veh, mgt2, sec, 35.0);
  SolverSettings solver;

  const auto truth = exact::enumerate_exhaustive(sec, veh, pw, mgt2, bc, solver);
  CHECK(truth.node_count == 64);

  const auto res = exact::solve_exact(sec, veh, pw, mgt2, bc, solver);
  CHECK(res.node_count < 64);
  CHECK(std::abs(res.solution.lap_time - truth.solution.lap_time) <= 1e-9);
  CHECK(res.gears.active_gear == truth.gears.active_gear);

  // the incumbent is reproducible from its gear map alone
  const double replay =
      direct_lap(sec, veh, pw, mgt2, res.gears.active_gear, bc, solver);
  CHECK(std::abs(replay - res.solution.lap_time) <= 1e-9);

  // bound validity: the certified window contains the true optimum
  CHECK(truth.solution.lap_time >= res.solution.lap_time - 1e-9);
  CHECK(truth.solution.lap_time >= res.solution.lap_time - res.bound_gap - 1e-9);
  CHECK(res.bound_gap <= 1e-6 + 1e-12);
}

TEST_CASE("4-step section: 16 sequences, identical optimum") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = make_track(6.0, {0.0, 0.03, 0.03, 0.0}, "short");
  const auto bc = section_bc(veh, mgt2, sec, 35.0);
  SolverSettings solver;

  const auto truth = exact::enumerate_exhaustive(sec, veh, pw, mgt2, bc, solver);
  CHECK(truth.node_count == 16);
  // a certified gap below any sequence-to-sequence tie forces the exact
  // optimum, not just one within the default 1e-6 window
  exact::ExactSettings tight;
  tight.gap_tolerance = 1e-9;
  const auto res = exact::solve_exact(sec, veh, pw, mgt2, bc, solver, tight);
  CHECK(res.gears.active_gear == truth.gears.active_gear);
  CHECK(std::abs(res.solution.lap_time - truth.solution.lap_time) <= 1e-9);
}

TEST_CASE("randomized small sections agree with enumeration") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  SolverSettings solver;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> speed(28.0, 33.0);
  std::uniform_int_distribution<int> kappa_pick(0, 2);

  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> curv(5, 0.0);
    const double options[] = {0.0, 0.015, 0.03};
    // entry step stays straight: the pinned entry speed must not exceed the
    // first knot's curvature speed cap
    for (std::size_t i = 1; i < curv.size(); ++i) curv[i] = options[kappa_pick(rng)];
    TrackProfile sec = make_track(4.0, curv, "random-section");
    const auto bc = section_bc(veh, mgt2, sec, speed(rng));

    const auto truth =
        exact::enumerate_exhaustive(sec, veh, pw, mgt2, bc, solver);
    const auto res = exact::solve_exact(sec, veh, pw, mgt2, bc, solver);
    CHECK(std::abs(res.solution.lap_time - truth.solution.lap_time) <= 1e-6);
    CHECK(truth.solution.lap_time >=
          res.solution.lap_time - res.bound_gap - 1e-9);
  }
}

TEST_CASE("single-gear transmission needs one node") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt1 = make_mgt({4.8}, 0.985);
  TrackProfile sec = corner_section(6, 24.0);
  const auto bc = section_bc(veh, mgt1, sec, 35.0);
  SolverSettings solver;

  const double cop =
      direct_lap(sec, veh, pw, mgt1, std::vector<int>(6, 1), bc, solver);
  const auto truth = exact::enumerate_exhaustive(sec, veh, pw, mgt1, bc, solver);
  CHECK(truth.node_count == 1);
  CHECK(std::abs(truth.solution.lap_time - cop) <= 1e-12);
  const auto res = exact::solve_exact(sec, veh, pw, mgt1, bc, solver);
  CHECK(res.node_count == 1);
  CHECK(std::abs(res.solution.lap_time - cop) <= 1e-12);
}

TEST_CASE("uniformly infeasible sections are reported") {
  // a motor too weak to regenerate past its own spin losses cannot cover the
  // auxiliary draw, so a zero battery allotment defeats every gear sequence
  VehicleSpec veh;
  PowertrainSpec pw;
  pw.em_torque_max = 5.0;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = corner_section(6, 24.0);
  auto bc = section_bc(veh, mgt2, sec, 35.0);
  bc.battery_budget = 0.0;
  SolverSettings solver;

  CHECK_THROWS_AS(exact::solve_exact(sec, veh, pw, mgt2, bc, solver),
                  ValidationError);
  CHECK_THROWS_AS(exact::enumerate_exhaustive(sec, veh, pw, mgt2, bc, solver),
                  ValidationError);
}

TEST_CASE("node budget exhaustion keeps the best incumbent and a valid gap") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = corner_section(8, 32.0);
  const auto bc = section_bc(veh, mgt2, sec, 35.0);
  SolverSettings solver;

  const auto truth = exact::enumerate_exhaustive(sec, veh, pw, mgt2, bc, solver);

  exact::ExactSettings tight;
  tight.node_budget = 1;
  const auto res = exact::solve_exact(sec, veh, pw, mgt2, bc, solver, tight);
  CHECK(res.budget_exhausted);
  CHECK(res.node_count == 1);
  // incumbent is a genuine COP, so it cannot beat the true optimum...
  CHECK(res.solution.lap_time >= truth.solution.lap_time - 1e-9);
  // ...and the certified window still contains it
  CHECK(res.solution.lap_time - res.bound_gap <=
        truth.solution.lap_time + 1e-9);
  CHECK(res.bound_gap > 1e-6);
}

TEST_CASE("input validation") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = corner_section(6, 24.0);
  const auto bc = section_bc(veh, mgt2, sec, 35.0);
  SolverSettings solver;

  transcribe::BoundaryConditions lap_bc;  // periodic
  CHECK_THROWS_AS(exact::solve_exact(sec, veh, pw, mgt2, lap_bc, solver),
                  ValidationError);
  auto no_entry = bc;
  no_entry.entry_kinetic_energy = 0.0;
  CHECK_THROWS_AS(exact::solve_exact(sec, veh, pw, mgt2, no_entry, solver),
                  ValidationError);
  CHECK_THROWS_AS(
      exact::solve_exact(sec, veh, pw, make_fgt(4.8), bc, solver),
      ValidationError);

  TrackProfile big = corner_section(26, 104.0);
  const auto big_bc = section_bc(veh, mgt2, big, 35.0);
  CHECK_THROWS_AS(exact::solve_exact(big, veh, pw, mgt2, big_bc, solver),
                  ValidationError);
  TrackProfile wide = corner_section(18, 72.0);
  const auto wide_bc = section_bc(veh, mgt2, wide, 35.0);
  CHECK_THROWS_AS(
      exact::enumerate_exhaustive(wide, veh, pw, mgt2, wide_bc, solver),
      ValidationError);
}

TEST_CASE("deterministic replay") {
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt2 = make_mgt({7.0, 4.2}, 0.975);
  TrackProfile sec = corner_section(8, 32.0);
  const auto bc = section_bc(veh, mgt2, sec, 35.0);
  SolverSettings solver;

  const auto a = exact::solve_exact(sec, veh, pw, mgt2, bc, solver);
  const auto b = exact::solve_exact(sec, veh, pw, mgt2, bc, solver);
  CHECK(a.solution.lap_time == b.solution.lap_time);
  CHECK(a.gears.active_gear == b.gears.active_gear);
  CHECK(a.node_count == b.node_count);
  CHECK(a.bound_gap == b.bound_gap);
}

TEST_CASE("node count grows steeply with section length") {
  // doubling the step count on the same geometry at least quadruples the
  // median node count: the combinatorial cost of certified optimality
  VehicleSpec veh;
  PowertrainSpec pw;
  TransmissionSpec mgt3 = make_mgt({7.0, 4.2, 2.8}, 0.975);
  SolverSettings solver;

  auto median_nodes = [&](int n) {
    std::vector<long> counts;
    for (double v0 : {33.0, 35.0, 37.0}) {
      TrackProfile sec = corner_section(n);
      const auto bc = section_bc(veh, mgt3, sec, v0);
      counts.push_back(
          exact::solve_exact(sec, veh, pw, mgt3, bc, solver).node_count);
    }
    std::sort(counts.begin(), counts.end());
    return counts[counts.size() / 2];
  };

  const long fine = median_nodes(24);
  const long coarse = median_nodes(12);
  CHECK(coarse >= 1);
  CHECK(fine >= 4 * coarse);
}
