#include "laptime/model/specs.hpp"

#include <algorithm>
#include <cmath>

#include "laptime/errors.hpp"

namespace laptime {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}
}  // namespace

void VehicleSpec::validate() const {
  require(base_mass > 0, "vehicle: base_mass must be > 0");
  require(rotational_mass_factor >= 1.0, "vehicle: rotational_mass_factor must be >= 1");
  require(aero_coefficient > 0, "vehicle: aero_coefficient must be > 0");
  require(rolling_force >= 0, "vehicle: rolling_force must be >= 0");
  require(wheel_radius > 0, "vehicle: wheel_radius must be > 0");
  require(lateral_accel_max > 0, "vehicle: lateral_accel_max must be > 0");
  require(speed_cap > 0, "vehicle: speed_cap must be > 0");
  require(brake_force_max_front > 0, "vehicle: brake_force_max_front must be > 0");
  require(brake_force_max_rear > 0, "vehicle: brake_force_max_rear must be > 0");
  require(traction_force_max > 0, "vehicle: traction_force_max must be > 0");
  require(aux_power >= 0, "vehicle: aux_power must be >= 0");
}

void PowertrainSpec::validate() const {
  require(em_loss_a0 >= 0 && em_loss_a1 >= 0 && em_loss_a2 >= 0 && em_loss_a3 >= 0,
          "powertrain: loss coefficients must be >= 0");
  require(em_torque_max > 0, "powertrain: em_torque_max must be > 0");
  require(em_speed_max > 0, "powertrain: em_speed_max must be > 0");
  require(em_power_max > 0, "powertrain: em_power_max must be > 0");
  require(inverter_efficiency > 0 && inverter_efficiency <= 1.0,
          "powertrain: inverter_efficiency must be in (0,1]");
  require(battery_capacity > 0, "powertrain: battery_capacity must be > 0");
  require(battery_consumption_limit > 0 &&
              battery_consumption_limit <= battery_capacity,
          "powertrain: battery_consumption_limit must be in (0, capacity]");
  require(battery_loss_coefficient >= 0,
          "powertrain: battery_loss_coefficient must be >= 0");
}

double PowertrainSpec::best_efficiency_speed() const {
  if (em_loss_a0 > 0 && em_loss_a2 > 0)
    return std::min(std::sqrt(em_loss_a0 / em_loss_a2), em_speed_max);
  return 0.5 * em_speed_max;
}

std::string to_string(TransmissionKind kind) {
  switch (kind) {
    case TransmissionKind::FGT: return "fgt";
    case TransmissionKind::MGT: return "mgt";
    case TransmissionKind::CVT: return "cvt";
  }
  return "?";
}

void TransmissionSpec::validate() const {
  require(efficiency > 0 && efficiency <= 1.0, "transmission: efficiency must be in (0,1]");
  require(mass_penalty_per_gear >= 0, "transmission: mass_penalty_per_gear must be >= 0");
  require(cvt_mass_penalty >= 0, "transmission: cvt_mass_penalty must be >= 0");
  switch (kind) {
    case TransmissionKind::FGT:
      require(ratios.size() == 1 && n_gear == 1, "transmission: FGT needs exactly one ratio");
      require(ratios[0] > 0, "transmission: ratio must be > 0");
      break;
    case TransmissionKind::MGT: {
      require(n_gear == static_cast<int>(ratios.size()),
              "transmission: n_gear != ratios length");
      // A single-gear unit is a valid degenerate MGT: with a zero mass
      // penalty it must reproduce the FGT result, a key benchmark case.
      require(n_gear >= 1 && n_gear <= 4, "transmission: MGT needs 1-4 gears");
      for (int i = 0; i < n_gear; ++i) {
        require(ratios[i] > 0, "transmission: ratios must be > 0");
        if (i > 0)
          require(ratios[i] < ratios[i - 1],
                  "transmission: ratios must be strictly decreasing");
      }
      break;
    }
    case TransmissionKind::CVT:
      require(ratios.empty() && n_gear == 0, "transmission: CVT takes no fixed ratios");
      // A collapsed interval (ratio_min == ratio_max) is a valid degenerate
      // CVT: it behaves like a fixed ratio and is useful as a benchmark.
      require(ratio_min > 0 && ratio_min <= ratio_max,
              "transmission: need 0 < ratio_min <= ratio_max");
      break;
  }
}

TransmissionSpec make_fgt(double ratio, double efficiency) {
  TransmissionSpec t;
  t.kind = TransmissionKind::FGT;
  t.ratios = {ratio};
  t.n_gear = 1;
  t.efficiency = efficiency;
  t.validate();
  return t;
}

TransmissionSpec make_mgt(std::vector<double> ratios, double efficiency) {
  TransmissionSpec t;
  t.kind = TransmissionKind::MGT;
  t.n_gear = static_cast<int>(ratios.size());
  t.ratios = std::move(ratios);
  t.efficiency = efficiency;
  t.validate();
  return t;
}

TransmissionSpec make_cvt(double ratio_min, double ratio_max, double efficiency) {
  TransmissionSpec t;
  t.kind = TransmissionKind::CVT;
  t.ratios.clear();
  t.n_gear = 0;
  t.ratio_min = ratio_min;
  t.ratio_max = ratio_max;
  t.efficiency = efficiency;
  t.validate();
  return t;
}

double effective_mass(const VehicleSpec& vehicle, const TransmissionSpec& trans) {
  switch (trans.kind) {
    case TransmissionKind::FGT:
      return vehicle.base_mass;
    case TransmissionKind::MGT:
      return vehicle.base_mass *
             (1.0 + trans.mass_penalty_per_gear * (trans.n_gear - 1));
    case TransmissionKind::CVT:
      return vehicle.base_mass * (1.0 + trans.cvt_mass_penalty);
  }
  return vehicle.base_mass;
}

double dynamic_mass(const VehicleSpec& vehicle, const TransmissionSpec& trans) {
  return effective_mass(vehicle, trans) * vehicle.rotational_mass_factor;
}

}  // namespace laptime
