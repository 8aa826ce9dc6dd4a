#include "laptime/model/solution.hpp"

#include <algorithm>
#include <cmath>

#include "laptime/errors.hpp"

namespace laptime {

void GearTrajectory::validate(int n_steps, int n_gear) const {
  if (static_cast<int>(active_gear.size()) != n_steps)
    throw ValidationError("gears: length != n_steps");
  for (int g : active_gear)
    if (g < 1 || g > n_gear) throw ValidationError("gears: index out of range");
}

GearTrajectory constant_gears(int n_steps, int gear) {
  GearTrajectory g;
  g.active_gear.assign(n_steps, gear);
  return g;
}

std::vector<double> max_kinetic_energy(const TrackProfile& track,
                                       const VehicleSpec& vehicle, double mass) {
  if (!(mass > 0)) throw ValidationError("max_kinetic_energy: mass must be > 0");
  std::vector<double> emax(track.n_steps);
  const double straight = 0.5 * mass * vehicle.speed_cap * vehicle.speed_cap;
  for (int i = 0; i < track.n_steps; ++i) {
    double e = straight;
    const double k = std::abs(track.curvature[i]);
    if (k > 0)
      e = std::min(e, mass * vehicle.lateral_accel_max / (2.0 * k));
    emax[i] = e;
  }
  return emax;
}

namespace {

double gear_ratio_at(const ContinuousSolution& sol, const TransmissionSpec& trans,
                     const GearTrajectory* gears, int i) {
  switch (trans.kind) {
    case TransmissionKind::FGT:
      return trans.ratios[0];
    case TransmissionKind::MGT:
      if (!gears) throw ValidationError("audit: MGT requires a gear trajectory");
      return trans.ratios[gears->active_gear[i] - 1];
    case TransmissionKind::CVT:
      if (static_cast<int>(sol.cvt_ratio.size()) <= i)
        throw ValidationError("audit: CVT solution lacks cvt_ratio");
      return sol.cvt_ratio[i];
  }
  return trans.ratios[0];
}

}  // namespace

PowerAudit audit_powers(const ContinuousSolution& sol, const TrackProfile& track,
                        const VehicleSpec& vehicle, const PowertrainSpec& power,
                        const TransmissionSpec& trans, const GearTrajectory* gears) {
  const int n = sol.n_steps();
  if (n != track.n_steps)
    throw ValidationError("audit: solution/track step mismatch");
  if (gears) gears->validate(n, trans.n_gear);

  const double m_dyn = dynamic_mass(vehicle, trans);
  const double ds = track.step_length;
  const double eta_gb = trans.efficiency;
  const double eta_inv = power.inverter_efficiency;

  PowerAudit audit;
  auto& p = audit.powers;
  p.battery.resize(n);
  p.dc_link.resize(n);
  p.ac.resize(n);
  p.mechanical.resize(n);
  p.gearbox_out.resize(n);
  audit.battery_slack.resize(n);
  audit.kinetic_slack.resize(n);

  for (int i = 0; i < n; ++i) {
    const double v = sol.velocity[i];
    const double q = sol.lethargy[i];
    const double fm = sol.motor_force[i];
    const double gamma = gear_ratio_at(sol, trans, gears, i);

    const double f_gb = fm >= 0 ? eta_gb * fm : fm / eta_gb;
    const double omega = gamma * v / vehicle.wheel_radius;
    const double tau = fm * vehicle.wheel_radius / gamma;
    const double em_loss = power.em_loss_a0 + power.em_loss_a1 * omega +
                           power.em_loss_a2 * omega * omega +
                           power.em_loss_a3 * tau * tau;
    const double p_m = fm * v;
    const double p_ac = p_m + em_loss;
    const double p_dc = p_ac >= 0 ? p_ac / eta_inv : p_ac * eta_inv;
    const double f_dc = p_dc * q;  // force-domain DC draw, exact where q v = 1
    const double batt_loss = power.battery_loss_coefficient * f_dc * f_dc * v;
    const double p_b = p_dc + batt_loss + vehicle.aux_power;

    p.gearbox_out[i] = f_gb * v;
    p.mechanical[i] = p_m;
    p.ac[i] = p_ac;
    p.dc_link[i] = p_dc;
    p.battery[i] = p_b;

    // Wheel force implied by the solved kinetic dynamics over step i.
    const double aero = 2.0 * vehicle.aero_coefficient / m_dyn * sol.kinetic_energy[i];
    const double f_net =
        (sol.kinetic_energy[i + 1] - sol.kinetic_energy[i]) / ds + aero +
        vehicle.rolling_force + sol.brake_front[i] + sol.brake_rear[i];
    audit.kinetic_slack[i] = (f_gb - f_net) * v;

    // Per-distance battery drain implied by the solved battery dynamics.
    const double drain = (sol.battery_energy[i] - sol.battery_energy[i + 1]) / ds;
    const double drain_exact = p_b * q;
    audit.battery_slack[i] = (drain - drain_exact) * v;

    const double scale =
        std::max({std::abs(p_b), std::abs(p_m), vehicle.aux_power, 1000.0});
    const double rel =
        std::max(std::abs(audit.kinetic_slack[i]), std::abs(audit.battery_slack[i])) /
        scale;
    audit.max_relative_slack = std::max(audit.max_relative_slack, rel);
  }
  return audit;
}

}  // namespace laptime
