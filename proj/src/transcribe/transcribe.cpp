#include "laptime/transcribe/transcribe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "laptime/conic/solver.hpp"
#include "laptime/errors.hpp"

namespace laptime::transcribe {
namespace {

// Problems are assembled in MJ / MN / MW so residual tolerances are
// meaningful; extraction converts back to SI.
constexpr double kUnit = 1e6;

// Tiny reward on terminal battery energy (s per MJ). When the consumption
// budget is slack the lap time alone leaves the loss variables and the
// gearbox hypograph degenerate; this tie-break selects the minimal-drain
// point of the optimal face. Along directions where time genuinely trades
// against battery (~0.25 MJ/s) the reward is four orders of magnitude too
// small to move the optimum, so the lap time is unaffected.
constexpr double kDrainTieBreak = 1e-3;

using conic::Cone;
using conic::ConeKind;

struct Assembler {
  std::vector<Eigen::Triplet<double>> coefficients;
  std::vector<double> rhs;
  std::vector<double> cost;
  std::vector<double> unit;  // slot units, see below
  std::vector<Cone> cones;
  int n_vars = 0;

  int block(ConeKind kind, int dim) {
    cones.push_back(Cone{kind, dim});
    cost.resize(static_cast<std::size_t>(n_vars + dim), 0.0);
    unit.resize(static_cast<std::size_t>(n_vars + dim), 1.0);
    const int at = n_vars;
    n_vars += dim;
    return at;
  }
  int nonneg() { return block(ConeKind::Nonnegative, 1); }
  // Slot units keep each cone member near unit magnitude: the solver works
  // on x_hat = x / u while rows and costs stay written in model units here
  // (finish() folds the units in). A rotated cone survives per-slot scaling
  // exactly when ua * ub == uz^2, so units come in such triples; powers of
  // two keep the rescaling lossless.
  int rsoc(double ua = 1.0, double ub = 1.0, double uz = 1.0) {
    const int at = block(ConeKind::RotatedSecondOrder, 3);
    if (ua * ub != uz * uz)
      throw ValidationError("rotated-cone slot units must satisfy ua*ub=uz^2");
    unit[static_cast<std::size_t>(at)] = ua;
    unit[static_cast<std::size_t>(at) + 1] = ub;
    unit[static_cast<std::size_t>(at) + 2] = uz;
    return at;
  }
  int row(double b) {
    rhs.push_back(b);
    return static_cast<int>(rhs.size()) - 1;
  }
  void at(int r, int c, double value) { coefficients.emplace_back(r, c, value); }

  conic::ConicProblem finish() {
    for (auto& t : coefficients) {
      const double u = unit[static_cast<std::size_t>(t.col())];
      if (u != 1.0) t = {t.row(), t.col(), t.value() * u};
    }
    for (std::size_t i = 0; i < cost.size(); ++i) cost[i] *= unit[i];
    conic::ConicProblem p;
    p.equality_matrix.resize(static_cast<int>(rhs.size()), n_vars);
    p.equality_matrix.setFromTriplets(coefficients.begin(), coefficients.end());
    p.equality_rhs = std::move(rhs);
    p.objective = std::move(cost);
    p.cones = std::move(cones);
    p.validate();
    return p;
  }
};

// Natural magnitudes of the cone slots differ by up to eight orders (loss
// epigraphs ~1e-7 of a unit against speeds ~50); these units bring each slot
// to O(1).
constexpr double kUnitQ = 0x1p-5, kUnitVLeth = 0x1p5;
constexpr double kUnitZEm = 0x1p-20, kUnitVEm = 0x1p6, kUnitF = 0x1p-7;
constexpr double kUnitZBat = 0x1p-14;

struct Term {
  int col;
  double coef;
};

// Per-ratio constants of the motor model, in internal units.
struct GearModel {
  double ratio = 0.0;
  double torque_cap = 0.0;  // MN at the wheel
  double speed_cap = 0.0;   // m/s at the wheel
  double loss_const = 0.0;  // MN, from the a1*omega term
  double loss_v = 0.0;      // MN per (m/s), from the a2*omega^2 term
  double loss_z = 0.0;      // MN per loss-cone unit, from the a3*tau^2 term
};

GearModel gear_model(const PowertrainSpec& power, double wheel_radius,
                     double ratio) {
  GearModel g;
  g.ratio = ratio;
  const double t = ratio / wheel_radius;  // rad per m of travel
  g.torque_cap = power.em_torque_max * t / kUnit;
  g.speed_cap = power.em_speed_max / t;
  g.loss_const = power.em_loss_a1 * t / kUnit;
  g.loss_v = power.em_loss_a2 * t * t / kUnit;
  // tau^2 loss per distance: a3 (r/gamma)^2 F^2 / v with F^2/v <= 2 z.
  g.loss_z = 2.0 * power.em_loss_a3 * kUnit / (t * t);
  return g;
}

enum class StepKind { Fixed, Relaxed, Envelope };

struct BuildRequest {
  std::vector<StepKind> mode;     // per step
  std::vector<int> fixed_gear;    // 1-based, Fixed steps only
  std::vector<GearModel> models;  // candidate gear models (Fixed/Relaxed)
  const CvtEnvelope* envelope = nullptr;
  GearModel env_force_caps;  // Envelope: torque cap at ratio_max
  GearModel env_speed_caps;  // Envelope: wheel speed cap at ratio_min
  std::vector<double> design_ratios;
  TransmissionKind kind = TransmissionKind::FGT;
};

Transcription build_core(const TrackProfile& track, const VehicleSpec& vehicle,
                         const PowertrainSpec& power,
                         const TransmissionSpec& trans, const BuildRequest& req,
                         const BoundaryConditions& bc) {
  track.validate();
  vehicle.validate();
  power.validate();
  trans.validate();
  const int N = track.n_steps;
  if (N < 1) throw ValidationError("transcription needs at least one step");
  if (!bc.periodic && !(bc.entry_kinetic_energy > 0.0))
    throw ValidationError("section entry kinetic energy must be positive");

  const double ds = track.step_length;
  const double m_dyn = dynamic_mass(vehicle, trans);
  const double sqrt_m = std::sqrt(m_dyn / kUnit);
  const double k_aero = 2.0 * vehicle.aero_coefficient / m_dyn;  // 1/m
  const double f_roll = vehicle.rolling_force / kUnit;
  const double brake_front_cap = vehicle.brake_force_max_front / kUnit;
  const double brake_rear_cap = vehicle.brake_force_max_rear / kUnit;
  const double traction_cap = vehicle.traction_force_max / kUnit;
  const double p_aux = vehicle.aux_power / kUnit;
  const double p_max = power.em_power_max / kUnit;
  const double eta_gb = trans.efficiency;
  const double eta_inv = power.inverter_efficiency;
  const double capacity = power.battery_capacity / kUnit;
  const double budget = (bc.battery_budget >= 0.0 ? bc.battery_budget
                                                  : power.battery_consumption_limit) /
                        kUnit;
  // battery loss per distance: c F_dc^2 with F_dc^2 <= 2 z_b.
  const double bat_loss = 2.0 * power.battery_loss_coefficient * kUnit;

  std::vector<double> e_max = max_kinetic_energy(track, vehicle, m_dyn);
  for (double& e : e_max) e /= kUnit;

  Assembler a;
  VariableLayout layout;
  layout.n_steps = N;
  layout.steps.resize(static_cast<std::size_t>(N));
  layout.ds = ds;
  layout.m_dyn = m_dyn;
  layout.bc = bc;
  layout.kind = req.kind;
  layout.design_ratios = req.design_ratios;
  if (req.envelope) layout.envelope = *req.envelope;

  const int n_models = static_cast<int>(req.models.size());

  // Pass 1: named variables (cones first, then the nonnegative quantities).
  for (int i = 0; i < N; ++i) {
    StepRefs& s = layout.steps[static_cast<std::size_t>(i)];
    int b = a.rsoc(kUnitQ, kUnitVLeth, 1.0);
    s.q = b;
    s.v = b + 1;
    s.u_leth = b + 2;
    a.cost[static_cast<std::size_t>(s.q)] = ds;  // T = sum q ds
    b = a.rsoc();
    s.ekin = b;
    s.w_vel = b + 1;
    s.u_vel = b + 2;
    const StepKind kind = req.mode[static_cast<std::size_t>(i)];
    s.relaxed = kind == StepKind::Relaxed;
    if (kind == StepKind::Relaxed) {
      for (int j = 0; j < n_models; ++j) {
        b = a.rsoc(kUnitZEm, kUnitVEm, kUnitF);
        s.z_g.push_back(b);
        s.v_g.push_back(b + 1);
        s.f_g.push_back(b + 2);
      }
      for (int j = 0; j < n_models; ++j) s.theta.push_back(a.nonneg());
    } else {
      b = a.rsoc(kUnitZEm, kUnitVEm, kUnitF);
      s.z_em = b;
      s.v_em = b + 1;
      s.fm = b + 2;
    }
    b = a.rsoc(kUnitZBat, 1.0, kUnitF);
    s.z_bat = b;
    s.w_bat = b + 1;
    s.fdc = b + 2;
    s.fgb = a.nonneg();
    s.brk_front = a.nonneg();
    s.brk_rear = a.nonneg();
    s.ebat_next = a.nonneg();
    if (kind == StepKind::Envelope) s.w_abs = a.nonneg();

    switch (kind) {
      case StepKind::Fixed: {
        const GearModel& gm = req.models[static_cast<std::size_t>(
            req.fixed_gear[static_cast<std::size_t>(i)] - 1)];
        s.fgb_offset = gm.torque_cap / eta_gb;
        s.ratio = gm.ratio;
        break;
      }
      case StepKind::Relaxed: {
        double cap = 0.0;
        for (const GearModel& gm : req.models) cap = std::max(cap, gm.torque_cap);
        s.fgb_offset = cap / eta_gb;
        break;
      }
      case StepKind::Envelope:
        s.fgb_offset = req.env_force_caps.torque_cap / eta_gb;
        break;
    }
  }
  layout.ebat0 = a.nonneg();
  layout.ekinN = a.nonneg();
  a.cost[static_cast<std::size_t>(
      layout.steps[static_cast<std::size_t>(N - 1)].ebat_next)] = -kDrainTieBreak;

  // Pass 2: rows. Helper lambdas keep the slack pattern in one place.
  auto upper_bound = [&a](const std::vector<Term>& terms, double ub) {
    const int r = a.row(ub);
    for (const Term& t : terms) a.at(r, t.col, t.coef);
    a.at(r, a.nonneg(), 1.0);
    return r;
  };
  auto lower_bound = [&a](const std::vector<Term>& terms, double lb) {
    const int r = a.row(lb);
    for (const Term& t : terms) a.at(r, t.col, t.coef);
    a.at(r, a.nonneg(), -1.0);
    return r;
  };

  for (int i = 0; i < N; ++i) {
    StepRefs& s = layout.steps[static_cast<std::size_t>(i)];
    const StepKind kind = req.mode[static_cast<std::size_t>(i)];

    int r = a.row(std::sqrt(2.0));
    a.at(r, s.u_leth, 1.0);
    r = a.row(1.0);
    a.at(r, s.w_vel, 1.0);
    r = a.row(0.0);
    a.at(r, s.u_vel, 1.0);
    a.at(r, s.v, -sqrt_m);
    r = a.row(1.0);
    a.at(r, s.w_bat, 1.0);
    if (kind == StepKind::Relaxed) {
      r = a.row(0.0);  // v splits across the gear models
      a.at(r, s.v, 1.0);
      for (int j = 0; j < n_models; ++j) a.at(r, s.v_g[static_cast<std::size_t>(j)], -1.0);
      r = a.row(1.0);  // simplex weights
      for (int j = 0; j < n_models; ++j) a.at(r, s.theta[static_cast<std::size_t>(j)], 1.0);
    } else {
      r = a.row(0.0);
      a.at(r, s.v_em, 1.0);
      a.at(r, s.v, -1.0);
    }

    // Motor force and AC-side loss expression for this step.
    std::vector<Term> fm_terms;
    std::vector<Term> loss_terms = {{s.q, power.em_loss_a0 / kUnit}};
    double loss_const = 0.0;
    switch (kind) {
      case StepKind::Fixed: {
        const GearModel& gm = req.models[static_cast<std::size_t>(
            req.fixed_gear[static_cast<std::size_t>(i)] - 1)];
        fm_terms = {{s.fm, 1.0}};
        loss_terms.push_back({s.v, gm.loss_v});
        loss_terms.push_back({s.z_em, gm.loss_z});
        loss_const = gm.loss_const;
        break;
      }
      case StepKind::Envelope: {
        const CvtEnvelope& env = *req.envelope;
        fm_terms = {{s.fm, 1.0}};
        loss_terms = {{s.q, env.c_q / kUnit}};
        loss_terms.push_back({s.v, env.c_v / kUnit});
        loss_terms.push_back({s.z_em, 2.0 * env.c_z * kUnit});
        loss_terms.push_back({s.w_abs, env.c_w});
        loss_const = env.c_const / kUnit;
        break;
      }
      case StepKind::Relaxed: {
        for (int j = 0; j < n_models; ++j) {
          const GearModel& gm = req.models[static_cast<std::size_t>(j)];
          fm_terms.push_back({s.f_g[static_cast<std::size_t>(j)], 1.0});
          loss_terms.push_back({s.theta[static_cast<std::size_t>(j)], gm.loss_const});
          loss_terms.push_back({s.v_g[static_cast<std::size_t>(j)], gm.loss_v});
          loss_terms.push_back({s.z_g[static_cast<std::size_t>(j)], gm.loss_z});
        }
        break;
      }
    }

    // Kinetic-energy cap and machine operating limits.
    upper_bound({{s.ekin, 1.0}}, e_max[static_cast<std::size_t>(i)]);
    if (kind == StepKind::Fixed) {
      const GearModel& gm = req.models[static_cast<std::size_t>(
          req.fixed_gear[static_cast<std::size_t>(i)] - 1)];
      upper_bound({{s.v, 1.0}}, gm.speed_cap);
      upper_bound({{s.fm, 1.0}}, gm.torque_cap);
      upper_bound({{s.fm, -1.0}}, gm.torque_cap);
    } else if (kind == StepKind::Envelope) {
      upper_bound({{s.v, 1.0}}, req.env_speed_caps.speed_cap);
      upper_bound({{s.fm, 1.0}}, req.env_force_caps.torque_cap);
      upper_bound({{s.fm, -1.0}}, req.env_force_caps.torque_cap);
    } else {
      for (int j = 0; j < n_models; ++j) {
        const GearModel& gm = req.models[static_cast<std::size_t>(j)];
        upper_bound({{s.v_g[static_cast<std::size_t>(j)], 1.0},
                     {s.theta[static_cast<std::size_t>(j)], -gm.speed_cap}},
                    0.0);
        upper_bound({{s.f_g[static_cast<std::size_t>(j)], 1.0},
                     {s.theta[static_cast<std::size_t>(j)], -gm.torque_cap}},
                    0.0);
        upper_bound({{s.f_g[static_cast<std::size_t>(j)], -1.0},
                     {s.theta[static_cast<std::size_t>(j)], -gm.torque_cap}},
                    0.0);
      }
    }
    {
      std::vector<Term> up = fm_terms, dn;
      for (const Term& t : fm_terms) dn.push_back({t.col, -t.coef});
      up.push_back({s.q, -p_max});
      dn.push_back({s.q, -p_max});
      upper_bound(up, 0.0);  // F_m <= P_max q
      upper_bound(dn, 0.0);  // -F_m <= P_max q
    }

    // Gearbox hypograph (F_gb stored shifted by its regen cap).
    {
      std::vector<Term> t1 = {{s.fgb, 1.0}}, t2 = {{s.fgb, 1.0}};
      for (const Term& t : fm_terms) {
        t1.push_back({t.col, -eta_gb * t.coef});
        t2.push_back({t.col, -t.coef / eta_gb});
      }
      upper_bound(t1, s.fgb_offset);  // F_gb <= eta F_m
      upper_bound(t2, s.fgb_offset);  // F_gb <= F_m / eta
    }
    lower_bound({{s.fgb, 1.0}, {s.q, p_max / eta_gb}}, s.fgb_offset);
    if (kind == StepKind::Relaxed) {
      std::vector<Term> t = {{s.fgb, 1.0}};
      for (int j = 0; j < n_models; ++j)
        t.push_back({s.theta[static_cast<std::size_t>(j)],
                     req.models[static_cast<std::size_t>(j)].torque_cap / eta_gb});
      lower_bound(t, s.fgb_offset);  // gear-dependent regen floor
    }
    upper_bound({{s.fgb, 1.0}}, traction_cap + s.fgb_offset);
    upper_bound({{s.brk_front, 1.0}}, brake_front_cap);
    upper_bound({{s.brk_rear, 1.0}}, brake_rear_cap);

    // Inverter split: F_dc >= F_ac / eta on traction, >= eta F_ac on regen.
    for (const double k : {1.0 / eta_inv, eta_inv}) {
      std::vector<Term> t = {{s.fdc, 1.0}};
      for (const Term& f : fm_terms) t.push_back({f.col, -k * f.coef});
      for (const Term& l : loss_terms) t.push_back({l.col, -k * l.coef});
      lower_bound(t, k * loss_const);
    }
    upper_bound({{s.ebat_next, 1.0}}, capacity);
    if (kind == StepKind::Envelope) {
      lower_bound({{s.w_abs, 1.0}, {s.fm, -1.0}}, 0.0);
      lower_bound({{s.w_abs, 1.0}, {s.fm, 1.0}}, 0.0);
    }

    // Forward-Euler dynamics.
    const int ekin_next =
        i + 1 < N ? layout.steps[static_cast<std::size_t>(i + 1)].ekin : layout.ekinN;
    const int ebat_prev =
        i == 0 ? layout.ebat0 : layout.steps[static_cast<std::size_t>(i - 1)].ebat_next;
    s.kinetic_row = a.row(-ds * (f_roll + s.fgb_offset));
    a.at(s.kinetic_row, ekin_next, 1.0);
    a.at(s.kinetic_row, s.ekin, -1.0 + ds * k_aero);
    a.at(s.kinetic_row, s.fgb, -ds);
    a.at(s.kinetic_row, s.brk_front, ds);
    a.at(s.kinetic_row, s.brk_rear, ds);
    s.battery_row = a.row(0.0);
    a.at(s.battery_row, s.ebat_next, 1.0);
    a.at(s.battery_row, ebat_prev, -1.0);
    a.at(s.battery_row, s.fdc, ds);
    a.at(s.battery_row, s.z_bat, ds * bat_loss);
    a.at(s.battery_row, s.q, ds * p_aux);
  }

  layout.ebat0_row = a.row(capacity);
  a.at(layout.ebat0_row, layout.ebat0, 1.0);
  if (bc.periodic) {
    layout.boundary_row = a.row(0.0);
    a.at(layout.boundary_row, layout.ekinN, 1.0);
    a.at(layout.boundary_row, layout.steps[0].ekin, -1.0);
  } else {
    layout.boundary_row = a.row(bc.entry_kinetic_energy / kUnit);
    a.at(layout.boundary_row, layout.steps[0].ekin, 1.0);
  }
  layout.budget_row = lower_bound(
      {{layout.steps[static_cast<std::size_t>(N - 1)].ebat_next, 1.0}},
      capacity - budget);
  upper_bound({{layout.ekinN, 1.0}}, e_max[static_cast<std::size_t>(N - 1)]);

  Transcription out;
  out.problem = a.finish();
  layout.slot_scale = std::move(a.unit);
  out.layout = std::move(layout);
  return out;
}

BuildRequest fixed_request(const PowertrainSpec& power, const VehicleSpec& vehicle,
                           const TransmissionSpec& trans,
                           const GearTrajectory& gears, int n_steps) {
  BuildRequest req;
  req.kind = trans.kind;
  req.mode.assign(static_cast<std::size_t>(n_steps), StepKind::Fixed);
  req.fixed_gear = gears.active_gear;
  for (const double ratio : trans.ratios)
    req.models.push_back(gear_model(power, vehicle.wheel_radius, ratio));
  req.design_ratios = trans.ratios;
  return req;
}

}  // namespace

Transcription build_cop(const TrackProfile& track, const VehicleSpec& vehicle,
                        const PowertrainSpec& power, const TransmissionSpec& trans,
                        const GearTrajectory& gears, const BoundaryConditions& bc) {
  if (trans.kind == TransmissionKind::CVT)
    throw ValidationError("build_cop handles geared transmissions; use build_fgt_cvt");
  gears.validate(track.n_steps, trans.n_gear);
  return build_core(track, vehicle, power, trans,
                    fixed_request(power, vehicle, trans, gears, track.n_steps), bc);
}

Transcription build_fgt_cvt(const TrackProfile& track, const VehicleSpec& vehicle,
                            const PowertrainSpec& power,
                            const TransmissionSpec& trans,
                            const BoundaryConditions& bc) {
  if (trans.kind == TransmissionKind::FGT)
    return build_cop(track, vehicle, power, trans, constant_gears(track.n_steps), bc);
  if (trans.kind != TransmissionKind::CVT)
    throw ValidationError("build_fgt_cvt handles FGT and CVT transmissions");
  trans.validate();
  BuildRequest req;
  req.kind = TransmissionKind::CVT;
  req.design_ratios = {trans.ratio_min, trans.ratio_max};
  const double width = trans.ratio_max - trans.ratio_min;
  if (width <= 1e-9 * std::max(1.0, trans.ratio_min)) {
    // Collapsed ratio interval: the envelope degenerates to the single-ratio
    // model, so build it exactly.
    req.mode.assign(static_cast<std::size_t>(track.n_steps), StepKind::Fixed);
    req.fixed_gear.assign(static_cast<std::size_t>(track.n_steps), 1);
    req.models = {gear_model(power, vehicle.wheel_radius, trans.ratio_min)};
    return build_core(track, vehicle, power, trans, req, bc);
  }
  const CvtEnvelope env = fit_cvt_envelope(vehicle, power, trans);
  req.mode.assign(static_cast<std::size_t>(track.n_steps), StepKind::Envelope);
  req.envelope = &env;
  req.env_force_caps = gear_model(power, vehicle.wheel_radius, trans.ratio_max);
  req.env_speed_caps = gear_model(power, vehicle.wheel_radius, trans.ratio_min);
  return build_core(track, vehicle, power, trans, req, bc);
}

Transcription build_relaxed(const TrackProfile& track, const VehicleSpec& vehicle,
                            const PowertrainSpec& power,
                            const TransmissionSpec& trans,
                            const std::vector<int>& fixed_gears,
                            const BoundaryConditions& bc) {
  if (trans.kind == TransmissionKind::CVT)
    throw ValidationError("gear relaxation applies to geared transmissions only");
  if (static_cast<int>(fixed_gears.size()) != track.n_steps)
    throw ValidationError("fixed_gears length must match the step count");
  BuildRequest req;
  req.kind = trans.kind;
  req.design_ratios = trans.ratios;
  for (const double ratio : trans.ratios)
    req.models.push_back(gear_model(power, vehicle.wheel_radius, ratio));
  req.mode.resize(static_cast<std::size_t>(track.n_steps));
  req.fixed_gear.assign(static_cast<std::size_t>(track.n_steps), 1);
  for (int i = 0; i < track.n_steps; ++i) {
    const int g = fixed_gears[static_cast<std::size_t>(i)];
    if (g < 0 || g > trans.n_gear)
      throw ValidationError("fixed gear out of range at step " + std::to_string(i));
    req.mode[static_cast<std::size_t>(i)] = g == 0 ? StepKind::Relaxed : StepKind::Fixed;
    if (g > 0) req.fixed_gear[static_cast<std::size_t>(i)] = g;
  }
  return build_core(track, vehicle, power, trans, req, bc);
}

namespace {

// Loss-minimizing ratio for a solved (v, F_m) point, used to report the CVT
// ratio trajectory. The per-distance loss is convex in the ratio.
double best_cvt_ratio(double v, double fm, const VehicleSpec& vehicle,
                      const PowertrainSpec& power, double band_lo, double band_hi) {
  const double r = vehicle.wheel_radius;
  const double vv = std::max(v, 1e-9);
  double lo = band_lo;
  double hi = std::min(band_hi, power.em_speed_max * r / vv);
  if (std::abs(fm) > 0.0)
    lo = std::max(lo, std::abs(fm) * r / power.em_torque_max);
  if (!(lo < hi)) return std::clamp(hi, band_lo, band_hi);
  auto slope = [&](double g) {
    return power.em_loss_a1 / r + 2.0 * power.em_loss_a2 * g * vv / (r * r) -
           2.0 * power.em_loss_a3 * r * r * fm * fm / (vv * g * g * g);
  };
  if (slope(lo) >= 0.0) return lo;
  if (slope(hi) <= 0.0) return hi;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) >= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ContinuousSolution extract(const conic::ConicSolution& solution,
                           const VariableLayout& layout,
                           const VehicleSpec& vehicle,
                           const PowertrainSpec& power) {
  if (solution.status != conic::SolveStatus::optimal)
    throw ValidationError("cannot extract trajectories: solver returned " +
                          conic::to_string(solution.status));
  const int N = layout.n_steps;
  const std::vector<double>& y = solution.dual_equality;
  auto x = [&](int i) {
    return solution.primal[static_cast<std::size_t>(i)] *
           layout.slot_scale[static_cast<std::size_t>(i)];
  };
  ContinuousSolution out;
  out.kinetic_energy.reserve(static_cast<std::size_t>(N) + 1);
  out.battery_energy.reserve(static_cast<std::size_t>(N) + 1);
  out.velocity.reserve(static_cast<std::size_t>(N));
  out.lethargy.reserve(static_cast<std::size_t>(N));
  out.motor_force.reserve(static_cast<std::size_t>(N));
  out.brake_front.reserve(static_cast<std::size_t>(N));
  out.brake_rear.reserve(static_cast<std::size_t>(N));
  out.costate_kinetic.reserve(static_cast<std::size_t>(N));
  out.costate_battery.reserve(static_cast<std::size_t>(N));
  out.battery_energy.push_back(x(layout.ebat0) * kUnit);
  for (const StepRefs& s : layout.steps) {
    out.kinetic_energy.push_back(x(s.ekin) * kUnit);
    out.battery_energy.push_back(x(s.ebat_next) * kUnit);
    out.velocity.push_back(x(s.v));
    out.lethargy.push_back(x(s.q));
    double fm = 0.0;
    if (s.relaxed)
      for (const int f : s.f_g) fm += x(f);
    else
      fm = x(s.fm);
    out.motor_force.push_back(fm * kUnit);
    out.brake_front.push_back(x(s.brk_front) * kUnit);
    out.brake_rear.push_back(x(s.brk_rear) * kUnit);
    out.costate_kinetic.push_back(y[s.kinetic_row] / kUnit);
    out.costate_battery.push_back(y[s.battery_row] / kUnit);
  }
  out.kinetic_energy.push_back(x(layout.ekinN) * kUnit);
  double time = 0.0;
  for (const double q : out.lethargy) time += q * layout.ds;
  out.lap_time = time;
  out.design_ratios = layout.design_ratios;
  if (layout.kind == TransmissionKind::CVT) {
    const double lo = layout.design_ratios.at(0);
    const double hi = layout.design_ratios.at(1);
    out.cvt_ratio.reserve(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      if (layout.envelope)
        out.cvt_ratio.push_back(best_cvt_ratio(out.velocity[static_cast<std::size_t>(i)],
                                               out.motor_force[static_cast<std::size_t>(i)],
                                               vehicle, power, lo, hi));
      else
        out.cvt_ratio.push_back(lo);
    }
  }
  return out;
}

std::vector<std::vector<double>> extract_weights(
    const conic::ConicSolution& solution, const VariableLayout& layout) {
  if (solution.status != conic::SolveStatus::optimal)
    throw ValidationError("cannot extract weights: solver returned " +
                          conic::to_string(solution.status));
  std::vector<std::vector<double>> weights(layout.steps.size());
  for (std::size_t i = 0; i < layout.steps.size(); ++i) {
    const StepRefs& s = layout.steps[i];
    if (!s.relaxed) continue;
    weights[i].reserve(s.theta.size());
    for (const int t : s.theta)
      weights[i].push_back(solution.primal[static_cast<std::size_t>(t)] *
                           layout.slot_scale[static_cast<std::size_t>(t)]);
  }
  return weights;
}

CvtEnvelope fit_cvt_envelope(const VehicleSpec& vehicle, const PowertrainSpec& power,
                             const TransmissionSpec& trans,
                             const SolverSettings& settings) {
  if (trans.kind != TransmissionKind::CVT)
    throw ValidationError("loss envelope fitting applies to CVT transmissions");
  trans.validate();
  const double r = vehicle.wheel_radius;
  constexpr int kRatios = 64;
  constexpr int kSpeeds = 21;
  constexpr int kForces = 25;
  const double v_lo = 8.0, v_hi = vehicle.speed_cap;
  const double f_max = power.em_torque_max * trans.ratio_max / r;

  auto loss = [&](double ratio, double v, double f) {
    const double w = ratio * v / r;            // rad/s
    const double tau = f * r / ratio;          // N m
    return (power.em_loss_a0 + power.em_loss_a1 * w + power.em_loss_a2 * w * w +
            power.em_loss_a3 * tau * tau) /
           v;  // N, per distance
  };

  // Pointwise minimum of the per-ratio loss surfaces over the operating grid.
  std::vector<std::array<double, 5>> basis;
  std::vector<double> sample;
  for (int kv = 0; kv < kSpeeds; ++kv) {
    const double v = v_lo + (v_hi - v_lo) * kv / (kSpeeds - 1);
    for (int kf = 0; kf < kForces; ++kf) {
      const double f = f_max * (2.0 * kf / (kForces - 1) - 1.0);
      if (std::abs(f) * v > power.em_power_max) continue;
      double best = -1.0;
      for (int kr = 0; kr < kRatios; ++kr) {
        const double ratio =
            trans.ratio_min +
            (trans.ratio_max - trans.ratio_min) * kr / std::max(1, kRatios - 1);
        if (ratio * v / r > power.em_speed_max) continue;
        if (std::abs(f) * r / ratio > power.em_torque_max) continue;
        const double l = loss(ratio, v, f);
        if (best < 0.0 || l < best) best = l;
      }
      if (best < 0.0) continue;
      basis.push_back({1.0 / v, 1.0, v, f * f / v, std::abs(f)});
      sample.push_back(best);
    }
  }
  if (sample.empty())
    throw ValidationError("CVT envelope grid produced no feasible samples");

  // Minimax fit: minimize g subject to 0 <= sample - surrogate <= g * sample.
  const int K = static_cast<int>(sample.size());
  Assembler a;
  const int c0 = a.block(ConeKind::Nonnegative, 5);
  const int gap = a.nonneg();
  a.cost[static_cast<std::size_t>(gap)] = 1.0;
  // Column scaling keeps the basis entries comparable.
  std::array<double, 5> scale = {1.0, 1.0, 1.0, 1.0, 1.0};
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < 5; ++j)
      scale[static_cast<std::size_t>(j)] = std::max(
          scale[static_cast<std::size_t>(j)],
          std::abs(basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]));
  for (int k = 0; k < K; ++k) {
    const double e = sample[static_cast<std::size_t>(k)];
    int ru = a.row(e);
    for (int j = 0; j < 5; ++j)
      a.at(ru, c0 + j,
           basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] /
               scale[static_cast<std::size_t>(j)]);
    a.at(ru, a.nonneg(), 1.0);
    int rl = a.row(e);
    for (int j = 0; j < 5; ++j)
      a.at(rl, c0 + j,
           basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] /
               scale[static_cast<std::size_t>(j)]);
    a.at(rl, gap, e);
    a.at(rl, a.nonneg(), -1.0);
  }
  SolverSettings tuned = settings;
  tuned.feasibility_tolerance = std::min(tuned.feasibility_tolerance, 1e-9);
  tuned.gap_tolerance = std::min(tuned.gap_tolerance, 1e-9);
  const conic::ConicSolution fit = conic::solve(a.finish(), tuned);
  if (fit.status != conic::SolveStatus::optimal)
    throw ValidationError("CVT envelope fit failed: " + conic::to_string(fit.status));
  CvtEnvelope env;
  env.c_q = fit.primal[c0] / scale[0];
  env.c_const = fit.primal[c0 + 1] / scale[1];
  env.c_v = fit.primal[c0 + 2] / scale[2];
  env.c_z = fit.primal[c0 + 3] / scale[3];
  env.c_w = fit.primal[c0 + 4] / scale[4];
  env.max_rel_gap = fit.primal[gap];
  return env;
}

}  // namespace laptime::transcribe
