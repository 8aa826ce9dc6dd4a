#pragma once

#include <vector>

#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"

namespace laptime {

// One-hot active-gear sequence over the grid, stored as 1-based gear indices.
struct GearTrajectory {
  std::vector<int> active_gear;

  int n_steps() const { return static_cast<int>(active_gear.size()); }
  void validate(int n_steps, int n_gear) const;
  bool operator==(const GearTrajectory&) const = default;
};

GearTrajectory constant_gears(int n_steps, int gear = 1);

// Per-step trajectories of a solved continuous problem. State arrays
// (kinetic_energy, battery_energy) carry n_steps+1 knots; input and costate
// arrays carry n_steps entries; q[i], v[i] refer to the left knot of step i.
struct ContinuousSolution {
  std::vector<double> kinetic_energy;   // J, knots 0..N
  std::vector<double> battery_energy;   // J, knots 0..N
  std::vector<double> velocity;         // m/s
  std::vector<double> lethargy;         // s/m, q = dt/ds
  std::vector<double> motor_force;      // N at the wheels (F_m)
  std::vector<double> brake_front;      // N
  std::vector<double> brake_rear;       // N
  std::vector<double> cvt_ratio;        // dimensionless, CVT runs only
  std::vector<double> costate_kinetic;  // s/J, dual of the kinetic dynamics
  std::vector<double> costate_battery;  // s/J, dual of the battery dynamics
  double lap_time = 0.0;                // s
  std::vector<double> design_ratios;    // gear ratios the problem was built with

  int n_steps() const { return static_cast<int>(lethargy.size()); }
};

// Maximum admissible kinetic energy per step: the tighter of the straight
// line speed cap and the lateral acceleration limit at the local curvature.
// `mass` is the dynamic (rotational-factor-included) mass used in E = m v^2/2.
std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleSpec& vehicle, double mass);

// Per-step power-chain reconstruction (Fig.-style P_b/P_dc/P_ac/P_m/P_gb).
struct PowerBreakdown {
  std::vector<double> battery;      // W, P_b
  std::vector<double> dc_link;      // W, P_dc
  std::vector<double> ac;           // W, P_ac
  std::vector<double> mechanical;   // W, P_m
  std::vector<double> gearbox_out;  // W, P_gb
};

struct PowerAudit {
  PowerBreakdown powers;
  // Per-step gap between the drain implied by the solved battery/kinetic
  // dynamics and the exact loss-curve reconstruction (W). Positive slack
  // means the convex relaxation over-counted losses at that step.
  std::vector<double> battery_slack;
  std::vector<double> kinetic_slack;
  double max_relative_slack = 0.0;  // max slack / local power scale
};

PowerAudit audit_powers(const ContinuousSolution& sol, const TrackProfile& track,
                        const VehicleSpec& vehicle, const PowertrainSpec& power,
                        const TransmissionSpec& trans, const GearTrajectory* gears);

}  // namespace laptime
