#pragma once

#include <string>
#include <vector>

namespace laptime {

struct VehicleSpec {
  double base_mass = 950.0;              // kg, FGT-equipped reference mass
  double rotational_mass_factor = 1.05;  // >= 1, folded into the dynamic mass
  double aero_coefficient = 0.66;        // kg/m, rho*cd*A/2 lumped
  double rolling_force = 150.0;          // N
  double wheel_radius = 0.31;            // m
  double lateral_accel_max = 30.0;       // m/s^2
  double speed_cap = 80.0;               // m/s
  double brake_force_max_front = 22000.0;  // N
  double brake_force_max_rear = 16000.0;   // N
  double traction_force_max = 9000.0;      // N, driven-axle wheel force
  double aux_power = 1500.0;               // W

  void validate() const;
};

struct PowertrainSpec {
  // Electric machine loss P = a0 + a1*w + a2*w^2 + a3*tau^2 (W, rad/s, N m).
  double em_loss_a0 = 1200.0;
  double em_loss_a1 = 2.0;
  double em_loss_a2 = 0.003;
  double em_loss_a3 = 0.08;
  double em_torque_max = 450.0;    // N m
  double em_speed_max = 1300.0;    // rad/s
  double em_power_max = 250000.0;  // W
  double inverter_efficiency = 0.96;
  double battery_capacity = 3.0e7;            // J
  double battery_consumption_limit = 6.5e6;   // J per lap
  double battery_loss_coefficient = 5.0e-6;   // 1/N, loss force = c*F_dc^2

  void validate() const;

  // Speed minimizing the per-rad spin loss (a0/w + a1 + a2*w), used by the
  // initial gear heuristic.
  double best_efficiency_speed() const;
};

enum class TransmissionKind { FGT, MGT, CVT };

std::string to_string(TransmissionKind kind);

struct TransmissionSpec {
  TransmissionKind kind = TransmissionKind::FGT;
  std::vector<double> ratios = {4.8};  // strictly decreasing, FGT: one entry
  double ratio_min = 0.0;              // CVT only
  double ratio_max = 0.0;              // CVT only
  int n_gear = 1;
  double efficiency = 0.985;
  double mass_penalty_per_gear = 0.0037;  // fraction of base mass per added gear
  double cvt_mass_penalty = 0.026;        // fraction of base mass

  void validate() const;
};

TransmissionSpec make_fgt(double ratio, double efficiency = 0.985);
TransmissionSpec make_mgt(std::vector<double> ratios, double efficiency = 0.975);
TransmissionSpec make_cvt(double ratio_min, double ratio_max,
                          double efficiency = 0.92);

// Translational mass including the per-kind transmission weight penalty,
// before the rotational_mass_factor applied in dynamics.
double effective_mass(const VehicleSpec& vehicle, const TransmissionSpec& trans);

// effective_mass * rotational_mass_factor; the mass used by the kinetic
// energy/velocity relation and the longitudinal dynamics.
double dynamic_mass(const VehicleSpec& vehicle, const TransmissionSpec& trans);

}  // namespace laptime
