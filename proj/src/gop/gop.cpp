#include "laptime/gop/gop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laptime/errors.hpp"

namespace laptime::gop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact per-distance loss chain for one ratio at fixed speed, mirroring the
// power audit: motor force in, gearbox / DC-link / battery quantities out.
// All values SI (N, W, m/s).
struct GearChain {
  double v = 0.0;
  double q = 0.0;        // s/m
  double eta_gb = 1.0;
  double eta_inv = 1.0;
  double bat_c = 0.0;    // 1/N, battery loss force = bat_c * F_dc^2
  double spin_loss = 0.0;  // W, a0 + a1 w + a2 w^2 at this speed
  double tau_loss = 0.0;   // W/N^2, a3 (r/gamma)^2
  double f_lo = 0.0;       // N, motor-force box
  double f_hi = 0.0;
  bool feasible = false;   // wheel speed within the motor limit
};

GearChain make_chain(const VehicleSpec& vehicle, const PowertrainSpec& power,
                     double gearbox_efficiency, double ratio, double v) {
  GearChain c;
  c.v = v;
  c.q = 1.0 / v;
  c.eta_gb = gearbox_efficiency;
  c.eta_inv = power.inverter_efficiency;
  c.bat_c = power.battery_loss_coefficient;
  const double t = ratio / vehicle.wheel_radius;  // rad per m of travel
  const double omega = t * v;
  c.feasible = omega <= power.em_speed_max * (1.0 + 1e-9);
  c.spin_loss = power.em_loss_a0 + power.em_loss_a1 * omega +
                power.em_loss_a2 * omega * omega;
  c.tau_loss = power.em_loss_a3 / (t * t);
  const double f_cap = std::min(power.em_torque_max * t, power.em_power_max * c.q);
  c.f_hi = std::min(f_cap, vehicle.traction_force_max / c.eta_gb);
  c.f_lo = -f_cap;
  return c;
}

double gearbox_force(const GearChain& c, double fm) {
  return fm >= 0 ? c.eta_gb * fm : fm / c.eta_gb;
}

double dc_force(const GearChain& c, double fm) {
  const double p_ac = fm * c.v + c.spin_loss + c.tau_loss * fm * fm;
  const double p_dc = p_ac >= 0 ? p_ac / c.eta_inv : p_ac * c.eta_inv;
  return p_dc * c.q;
}

// Battery drain per distance (J/m, positive discharges).
double battery_drain(const GearChain& c, double fm) {
  const double f_dc = dc_force(c, fm);
  return f_dc + c.bat_c * f_dc * f_dc;
}

// Motor-force-dependent part of the Hamiltonian.
double phi(const GearChain& c, double lam_kin, double lam_bat, double fm) {
  return lam_kin * gearbox_force(c, fm) - lam_bat * battery_drain(c, fm);
}

// Real roots of a x^3 + b x^2 + c x + d = 0, appended to out. Closed form;
// roots get a Newton polish against the exact derivative afterwards, so
// moderate accuracy is enough here.
void real_cubic_roots(double a, double b, double c, double d,
                      std::vector<double>& out) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  if (!(scale > 0)) return;
  if (std::abs(a) <= 1e-14 * scale) {
    if (std::abs(b) <= 1e-14 * scale) {
      if (std::abs(c) > 1e-14 * scale) out.push_back(-d / c);
      return;
    }
    const double disc = c * c - 4.0 * b * d;
    if (disc < 0) return;
    const double s = std::sqrt(disc);
    const double w = -0.5 * (c + (c >= 0 ? s : -s));
    out.push_back(w / b);
    if (w != 0.0) out.push_back(d / w);
    return;
  }
  const double p = b / a, q1 = c / a, r = d / a;
  // Depressed cubic t^3 + A t + B with x = t - p/3.
  const double A = q1 - p * p / 3.0;
  const double B = 2.0 * p * p * p / 27.0 - p * q1 / 3.0 + r;
  const double shift = -p / 3.0;
  const double disc = -4.0 * A * A * A - 27.0 * B * B;
  if (disc >= 0) {
    // Three real roots (possibly repeated): trigonometric form.
    if (A >= 0) {  // only possible when A ~ 0: triple root
      out.push_back(shift + std::cbrt(-B));
      return;
    }
    const double m = 2.0 * std::sqrt(-A / 3.0);
    double arg = 3.0 * B / (A * m);
    arg = std::clamp(arg, -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k)
      out.push_back(shift + m * std::cos(theta - 2.0 * M_PI * k / 3.0));
    return;
  }
  // One real root: Cardano.
  const double s = std::sqrt(B * B / 4.0 + A * A * A / 27.0);
  const double u = std::cbrt(-B / 2.0 + s);
  const double w = std::cbrt(-B / 2.0 - s);
  out.push_back(shift + u + w);
}

struct GearMinimum {
  double phi = kInf;
  double motor_force = 0.0;
};

// Exact minimum of phi over the motor-force box. The function is piecewise
// smooth with kinks where the motor force or the AC-side power changes sign;
// on each piece the stationarity condition is a cubic.
GearMinimum minimize_phi(const GearChain& c, double lam_kin, double lam_bat) {
  GearMinimum best;
  const double f0 = std::clamp(0.0, c.f_lo, c.f_hi);
  best.motor_force = f0;
  best.phi = phi(c, lam_kin, lam_bat, f0);

  // Piece breakpoints: motor-force sign change and AC-power sign changes.
  std::vector<double> cuts;
  if (c.f_lo < 0.0 && c.f_hi > 0.0) cuts.push_back(0.0);
  const double disc = c.v * c.v - 4.0 * c.tau_loss * c.spin_loss;
  if (disc >= 0 && c.tau_loss > 0) {
    const double s = std::sqrt(disc);
    const double w = -0.5 * (c.v + s);
    for (double rt : {w / c.tau_loss, c.spin_loss / w})
      if (rt > c.f_lo && rt < c.f_hi) cuts.push_back(rt);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> edges;
  edges.push_back(c.f_lo);
  for (double x : cuts) edges.push_back(x);
  edges.push_back(c.f_hi);

  const double mu = -lam_bat;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double lo = edges[p], hi = edges[p + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    const double g = mid >= 0 ? c.eta_gb : 1.0 / c.eta_gb;
    const double p_ac_mid = mid * c.v + c.spin_loss + c.tau_loss * mid * mid;
    const double k = p_ac_mid >= 0 ? 1.0 / c.eta_inv : c.eta_inv;

    // On this piece F_dc = k (L0 + f + L2 f^2) with per-distance loss terms.
    const double L0 = c.q * c.spin_loss;
    const double L2 = c.q * c.tau_loss;
    const double al = 2.0 * c.bat_c * k;
    // dphi/df = lam_kin g + mu k (1 + al (L0 + f + L2 f^2)) (1 + 2 L2 f) = 0
    const double mk = mu * k;
    const double a3 = mk * 2.0 * al * L2 * L2;
    const double a2 = mk * 3.0 * al * L2;
    const double a1 = mk * (al + 2.0 * L2 * (1.0 + al * L0));
    const double a0 = mk * (1.0 + al * L0) + lam_kin * g;

    std::vector<double> roots;
    real_cubic_roots(a3, a2, a1, a0, roots);
    std::vector<double> cand{lo, hi};
    for (double rt : roots) {
      if (!(rt >= lo - 1e-9 * (hi - lo) && rt <= hi + 1e-9 * (hi - lo))) continue;
      double f = std::clamp(rt, lo, hi);
      for (int it = 0; it < 2; ++it) {  // polish on the exact derivative
        const double dcf = k * (L0 + f + L2 * f * f);
        const double d1 = lam_kin * g +
                          mk * (1.0 + 2.0 * c.bat_c * dcf) * (1.0 + 2.0 * L2 * f);
        const double d2 = mk * (2.0 * L2 * (1.0 + 2.0 * c.bat_c * dcf) +
                                2.0 * c.bat_c * k * (1.0 + 2.0 * L2 * f) *
                                    (1.0 + 2.0 * L2 * f));
        if (!(std::abs(d2) > 0)) break;
        f = std::clamp(f - d1 / d2, lo, hi);
      }
      cand.push_back(f);
    }
    for (double f : cand) {
      const double val = phi(c, lam_kin, lam_bat, f);
      if (val < best.phi) {
        best.phi = val;
        best.motor_force = f;
      }
    }
  }
  return best;
}

void require_geared(const TransmissionSpec& trans) {
  if (trans.kind == TransmissionKind::CVT)
    throw ValidationError("gear optimization requires a geared transmission");
}

}  // namespace

double hamiltonian_terms(double lethargy, double kinetic_rate,
                         double battery_rate, double costate_kinetic,
                         double costate_battery) {
  return lethargy + costate_kinetic * kinetic_rate +
         costate_battery * battery_rate;
}

double hamiltonian(const VehicleSpec& vehicle, const PowertrainSpec& power,
                   const TransmissionSpec& trans, int gear,
                   double kinetic_energy, double costate_kinetic,
                   double costate_battery, const StepInputs& inputs) {
  require_geared(trans);
  if (gear < 1 || gear > static_cast<int>(trans.ratios.size()))
    throw ValidationError("hamiltonian: gear index out of range");
  if (!(kinetic_energy > 0))
    throw ValidationError("hamiltonian: kinetic energy must be positive");

  const double m_dyn = dynamic_mass(vehicle, trans);
  const double v = std::sqrt(2.0 * kinetic_energy / m_dyn);
  const GearChain c = make_chain(vehicle, power, trans.efficiency,
                                 trans.ratios[gear - 1], v);
  if (!c.feasible) return kInf;

  const double brakes = inputs.brake_front + inputs.brake_rear;
  const double kinetic_rate =
      gearbox_force(c, inputs.motor_force) - brakes - vehicle.rolling_force -
      2.0 * vehicle.aero_coefficient / m_dyn * kinetic_energy;
  const double battery_rate =
      -(battery_drain(c, inputs.motor_force) + vehicle.aux_power * c.q);
  return hamiltonian_terms(c.q, kinetic_rate, battery_rate, costate_kinetic,
                           costate_battery);
}

HamiltonianSample minimize_step(const VehicleSpec& vehicle,
                                const PowertrainSpec& power,
                                const TransmissionSpec& trans, int step,
                                double kinetic_energy, double costate_kinetic,
                                double costate_battery, int previous_gear,
                                double tie_tolerance) {
  require_geared(trans);
  if (!(kinetic_energy > 0))
    throw ValidationError("minimize_step: kinetic energy must be positive");
  if (!(tie_tolerance >= 0))
    throw ValidationError("minimize_step: tie tolerance must be >= 0");

  const int n_gear = static_cast<int>(trans.ratios.size());
  const double m_dyn = dynamic_mass(vehicle, trans);
  const double v = std::sqrt(2.0 * kinetic_energy / m_dyn);

  // Brakes enter every gear's Hamiltonian identically (a linear term with no
  // battery coupling), so the aggregate brake force is bang-bang on the sign
  // of the kinetic costate and does not influence the gear choice.
  const double brake_cap =
      vehicle.brake_force_max_front + vehicle.brake_force_max_rear;
  const double brake = costate_kinetic > 0 ? brake_cap : 0.0;

  HamiltonianSample out;
  out.step = step;
  out.hamiltonian.assign(static_cast<std::size_t>(n_gear), kInf);

  const double q = 1.0 / v;
  const double base =
      q + costate_kinetic * (-brake - vehicle.rolling_force -
                             2.0 * vehicle.aero_coefficient / m_dyn * kinetic_energy) +
      costate_battery * (-vehicle.aux_power * q);

  std::vector<double> forces(static_cast<std::size_t>(n_gear), 0.0);
  double h_min = kInf;
  for (int j = 0; j < n_gear; ++j) {
    const GearChain c =
        make_chain(vehicle, power, trans.efficiency, trans.ratios[j], v);
    if (!c.feasible) continue;
    const GearMinimum gm = minimize_phi(c, costate_kinetic, costate_battery);
    out.hamiltonian[static_cast<std::size_t>(j)] = base + gm.phi;
    forces[static_cast<std::size_t>(j)] = gm.motor_force;
    h_min = std::min(h_min, base + gm.phi);
  }
  if (!(h_min < kInf))
    throw ValidationError("gear optimization: no feasible gear at step " +
                          std::to_string(step) +
                          " (wheel speed above the motor limit in every gear)");

  int chosen = 0;
  for (int j = 0; j < n_gear; ++j) {
    if (out.hamiltonian[static_cast<std::size_t>(j)] > h_min + tie_tolerance)
      continue;
    if (j + 1 == previous_gear) {
      chosen = j + 1;
      break;
    }
    if (chosen == 0) chosen = j + 1;
  }
  out.gear = chosen;
  out.inputs.motor_force = forces[static_cast<std::size_t>(chosen - 1)];
  out.inputs.brake_front = brake * vehicle.brake_force_max_front / brake_cap;
  out.inputs.brake_rear = brake * vehicle.brake_force_max_rear / brake_cap;
  return out;
}

GopResult solve_gop(const ContinuousSolution& sol,
                    const std::vector<double>& costate_kinetic,
                    const std::vector<double>& costate_battery,
                    const VehicleSpec& vehicle, const PowertrainSpec& power,
                    const TransmissionSpec& trans,
                    const GearTrajectory& previous, double tie_tolerance) {
  require_geared(trans);
  const int n = sol.n_steps();
  if (static_cast<int>(costate_kinetic.size()) != n ||
      static_cast<int>(costate_battery.size()) != n)
    throw ValidationError("solve_gop: costate length != n_steps");
  previous.validate(n, trans.n_gear);
  if (static_cast<int>(sol.kinetic_energy.size()) < n)
    throw ValidationError("solve_gop: solution lacks kinetic energy knots");

  GopResult res;
  res.gears.active_gear.resize(static_cast<std::size_t>(n));
  res.inputs.resize(static_cast<std::size_t>(n));
  res.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    HamiltonianSample s = minimize_step(
        vehicle, power, trans, i, sol.kinetic_energy[static_cast<std::size_t>(i)],
        costate_kinetic[static_cast<std::size_t>(i)],
        costate_battery[static_cast<std::size_t>(i)],
        previous.active_gear[static_cast<std::size_t>(i)], tie_tolerance);
    res.gears.active_gear[static_cast<std::size_t>(i)] = s.gear;
    res.inputs[static_cast<std::size_t>(i)] = s.inputs;
    res.samples.push_back(std::move(s));
  }
  return res;
}

}  // namespace laptime::gop
