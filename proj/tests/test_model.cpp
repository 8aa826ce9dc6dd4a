#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "laptime/errors.hpp"
#include "laptime/model/config.hpp"
#include "laptime/model/solution.hpp"
#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"

using namespace laptime;

namespace {

std::string sampled_track(double length, double spacing,
                          double (*kappa)(double)) {
  std::ostringstream out;
  out.precision(12);
  for (double s = 0.0; s <= length + 1e-9; s += spacing)
    out << s << " " << kappa(s) << "\n";
  return out.str();
}

}  // namespace

TEST_CASE("track resampling hits the reference grid size") {
  auto text = sampled_track(4232.0, 1.0, [](double) { return 0.0; });
  auto t = load_track_text(text, 4.0, "synthetic");
  CHECK(t.n_steps == 1058);
  CHECK(t.step_length == doctest::Approx(4.0));
  CHECK(t.total_length == doctest::Approx(4232.0));
}

TEST_CASE("straight track identity resample") {
  auto text = sampled_track(100.0, 10.0, [](double) { return 0.0; });
  auto t = load_track_text(text, 10.0, "straight");
  CHECK(t.n_steps == 10);
  for (double k : t.curvature) CHECK(k == 0.0);
}

TEST_CASE("constant curvature survives resampling") {
  auto text = sampled_track(200.0, 1.0, [](double) { return 0.02; });
  auto t = load_track_text(text, 4.0, "arc");
  REQUIRE(t.n_steps == 50);
  for (double k : t.curvature) CHECK(k == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("resampling is exact on affine curvature") {
  auto text = sampled_track(300.0, 2.5, [](double s) { return 0.001 * s - 0.05; });
  auto t = load_track_text(text, 6.0, "affine");
  for (int i = 0; i < t.n_steps; ++i) {
    double mid = (i + 0.5) * t.step_length;
    CHECK(t.curvature[i] == doctest::Approx(0.001 * mid - 0.05).epsilon(1e-12));
  }
}

TEST_CASE("track parser reports the offending line") {
  std::string text = "s kappa\n0 0\n10 0.01\nbogus row here\n30 0\n";
  try {
    load_track_text(text, 10.0, "bad");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("track parser rejects non-monotone arc-length") {
  std::string text = "0 0\n10 0\n5 0\n30 0\n";
  CHECK_THROWS_AS(load_track_text(text, 10.0, "bad"), ValidationError);
  CHECK_THROWS_AS(load_track_text("0 0\n", 1.0, "short"), ValidationError);
}

TEST_CASE("effective mass per transmission kind") {
  VehicleSpec v;
  v.base_mass = 1000.0;
  CHECK(effective_mass(v, make_fgt(4.8)) == doctest::Approx(1000.0));
  CHECK(effective_mass(v, make_mgt({7.0, 4.2, 2.8})) == doctest::Approx(1007.4));
  CHECK(effective_mass(v, make_cvt(2.5, 7.5)) == doctest::Approx(1026.0));
  CHECK(effective_mass(v, make_mgt({7.0, 4.2})) <
        effective_mass(v, make_mgt({7.0, 4.2, 2.8})));
  CHECK(dynamic_mass(v, make_fgt(4.8)) ==
        doctest::Approx(1000.0 * v.rotational_mass_factor));
}

TEST_CASE("transmission validation") {
  CHECK_THROWS_AS(make_mgt({4.2, 7.0}), ValidationError);   // not decreasing
  CHECK_THROWS_AS(make_mgt({}), ValidationError);           // no gears at all
  CHECK_THROWS_AS(make_mgt({9.0, 7.0, 5.5, 4.2, 2.8}), ValidationError);
  CHECK_NOTHROW(make_mgt({7.0}));  // degenerate single-gear unit is allowed
  CHECK_THROWS_AS(make_cvt(7.5, 2.5), ValidationError);     // inverted band
  CHECK_THROWS_AS(make_fgt(-1.0), ValidationError);
}

TEST_CASE("max kinetic energy limits") {
  VehicleSpec v;
  v.lateral_accel_max = 30.0;
  v.speed_cap = 100.0;
  auto t = make_track(10.0, {0.01, 0.0, -0.01, 0.02});
  auto emax = max_kinetic_energy(t, v, 1000.0);
  CHECK(emax[0] == doctest::Approx(1.5e6));
  CHECK(emax[1] == doctest::Approx(5.0e6));
  CHECK(emax[2] == doctest::Approx(emax[0]));   // symmetric in |curvature|
  CHECK(emax[3] < emax[0]);                     // tighter corner, lower cap
}

namespace {

ContinuousSolution uniform_solution(int n, double v, double fm, double m_dyn) {
  ContinuousSolution s;
  s.velocity.assign(n, v);
  s.lethargy.assign(n, 1.0 / v);
  s.motor_force.assign(n, fm);
  s.brake_front.assign(n, 0.0);
  s.brake_rear.assign(n, 0.0);
  s.kinetic_energy.assign(n + 1, 0.5 * m_dyn * v * v);
  s.battery_energy.assign(n + 1, 1e7);
  s.lap_time = n / v;
  return s;
}

}  // namespace

TEST_CASE("power audit: coasting and lossless chain") {
  VehicleSpec veh;
  PowertrainSpec pt;
  auto trans = make_fgt(4.8);
  auto track = make_track(4.0, std::vector<double>(3, 0.0));
  const double m_dyn = dynamic_mass(veh, trans);

  SUBCASE("zero force leaves only idle and auxiliary draw") {
    auto sol = uniform_solution(3, 30.0, 0.0, m_dyn);
    auto audit = audit_powers(sol, track, veh, pt, trans, nullptr);
    const double omega = 4.8 * 30.0 / veh.wheel_radius;
    const double idle = pt.em_loss_a0 + pt.em_loss_a1 * omega +
                        pt.em_loss_a2 * omega * omega;
    CHECK(audit.powers.gearbox_out[0] == doctest::Approx(0.0));
    CHECK(audit.powers.mechanical[0] == doctest::Approx(0.0));
    CHECK(audit.powers.ac[0] == doctest::Approx(idle));
    CHECK(audit.powers.battery[0] >
          idle / pt.inverter_efficiency + veh.aux_power - 1e-9);
  }

  SUBCASE("lossless chain collapses to one power plus auxiliaries") {
    PowertrainSpec ideal = pt;
    ideal.em_loss_a0 = ideal.em_loss_a1 = ideal.em_loss_a2 = ideal.em_loss_a3 = 0.0;
    ideal.inverter_efficiency = 1.0;
    ideal.battery_loss_coefficient = 0.0;
    auto ideal_trans = make_fgt(4.8, 1.0);
    auto sol = uniform_solution(3, 30.0, 1000.0, dynamic_mass(veh, ideal_trans));
    auto audit = audit_powers(sol, track, veh, ideal, ideal_trans, nullptr);
    CHECK(audit.powers.gearbox_out[1] == doctest::Approx(30000.0));
    CHECK(audit.powers.mechanical[1] == doctest::Approx(30000.0));
    CHECK(audit.powers.ac[1] == doctest::Approx(30000.0));
    CHECK(audit.powers.dc_link[1] == doctest::Approx(30000.0));
    CHECK(audit.powers.battery[1] == doctest::Approx(30000.0 + veh.aux_power));
  }

  SUBCASE("traction ordering |P_b| >= |P_dc| >= |P_ac| >= |P_m| >= |P_gb|") {
    auto sol = uniform_solution(3, 40.0, 3000.0, m_dyn);
    auto audit = audit_powers(sol, track, veh, pt, trans, nullptr);
    auto& p = audit.powers;
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(p.battery[i]) >= std::abs(p.dc_link[i]));
      CHECK(std::abs(p.dc_link[i]) >= std::abs(p.ac[i]));
      CHECK(std::abs(p.ac[i]) >= std::abs(p.mechanical[i]));
      CHECK(std::abs(p.mechanical[i]) >= std::abs(p.gearbox_out[i]));
    }
  }

  SUBCASE("per-gear ratio selection needs a gear trajectory") {
    auto mgt = make_mgt({7.0, 4.2, 2.8});
    auto sol = uniform_solution(3, 30.0, 0.0, dynamic_mass(veh, mgt));
    CHECK_THROWS_AS(audit_powers(sol, track, veh, pt, mgt, nullptr),
                    ValidationError);
    auto gears = constant_gears(3, 2);
    auto audit = audit_powers(sol, track, veh, pt, mgt, &gears);
    const double omega = 4.2 * 30.0 / veh.wheel_radius;
    CHECK(audit.powers.ac[0] ==
          doctest::Approx(pt.em_loss_a0 + pt.em_loss_a1 * omega +
                          pt.em_loss_a2 * omega * omega));
  }
}

TEST_CASE("gear trajectory validation") {
  auto g = constant_gears(5, 2);
  CHECK_NOTHROW(g.validate(5, 3));
  CHECK_THROWS_AS(g.validate(4, 3), ValidationError);
  CHECK_THROWS_AS(g.validate(5, 1), ValidationError);
}

TEST_CASE("config parsing") {
  std::string text =
      "# demo config\n"
      "[vehicle]\n"
      "base_mass = 900\n"
      "speed_cap = 75\n"
      "[transmission]\n"
      "kind = mgt\n"
      "ratios = 7.0, 4.2, 2.8\n"
      "efficiency = 0.97\n"
      "[solver]\n"
      "max_iterations = 150\n"
      "verbose = true\n"
      "[algorithm]\n"
      "damping = 0.4\n";
  auto cfg = parse_config(text);
  CHECK(cfg.vehicle.base_mass == doctest::Approx(900.0));
  CHECK(cfg.vehicle.speed_cap == doctest::Approx(75.0));
  CHECK(cfg.transmission.kind == TransmissionKind::MGT);
  CHECK(cfg.transmission.n_gear == 3);
  CHECK(cfg.transmission.ratios[1] == doctest::Approx(4.2));
  CHECK(cfg.solver.max_iterations == 150);
  CHECK(cfg.solver.verbose);
  CHECK(cfg.algorithm.damping == doctest::Approx(0.4));
  // untouched sections keep defaults
  CHECK(cfg.powertrain.battery_capacity == doctest::Approx(3.0e7));
}

TEST_CASE("config errors carry line numbers") {
  try {
    parse_config("[vehicle]\nbase_mass = 900\nno_such_key = 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_config("[physics]\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[vehicle]\nbase_mass == 900\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[vehicle]\nbase_mass = heavy\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[vehicle]\nbase_mass = -5\n"), ValidationError);
}
