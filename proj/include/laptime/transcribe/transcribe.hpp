#pragma once

#include <optional>
#include <vector>

#include "laptime/conic/problem.hpp"
#include "laptime/model/solution.hpp"
#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"
#include "laptime/settings.hpp"

namespace laptime::transcribe {

// Boundary handling: a flying lap ties entry and exit kinetic energy; a track
// section pins the entry energy and leaves the exit free. battery_budget
// overrides powertrain.battery_consumption_limit when >= 0 (sections get an
// allotment proportional to their length).
struct BoundaryConditions {
  bool periodic = true;
  double entry_kinetic_energy = 0.0;  // J, used when !periodic
  double battery_budget = -1.0;       // J, < 0 means use the spec limit
};

// Internally the problem is assembled in MJ / MN / MW so that solver
// tolerances are meaningful; extraction converts back to SI.
//
// Per-step census (FGT / MGT with fixed gears), 31 variables and 22 rows:
//   cones:  lethargy (q, v, u) with u pinned to sqrt(2)  [q v >= 1]
//           velocity (E_kin, w, u) with w = 1, u = sqrt(m) v  [2 E >= m v^2]
//           motor loss (z, w, F_m) with w = v  [2 z v >= F_m^2]
//           battery loss (z_b, w, F_dc) with w = 1  [2 z_b >= F_dc^2]
//   nonneg: F_gb shifted by its regen cap, front/rear brake forces,
//           next battery knot, 15 bound slacks
//   rows:   4 cone-slot pins/ties, kinetic + battery dynamics, 15 bounds
//             (kinetic-energy cap, EM overspeed, torque +/-, power +/-,
//              gearbox hypograph x2, regen power floor, traction cap,
//              brake caps x2, inverter split x2, battery capacity)
// CVT adds |F_m| handling (w_abs + 2 slacks, 2 rows) per step and uses a
// fitted loss envelope in place of the per-gear motor-loss terms.
// Global: E_bat[0], E_kin[N], budget + exit-cap slacks; 4 rows.
struct StepRefs {
  // flat solver indices of the named per-step quantities
  int q = -1, v = -1, u_leth = -1;
  int ekin = -1, w_vel = -1, u_vel = -1;
  int z_em = -1, v_em = -1, fm = -1;      // fixed-gear mode
  int z_bat = -1, w_bat = -1, fdc = -1;
  int fgb = -1;                            // shifted: F_gb = x[fgb] - fgb_offset
  int brk_front = -1, brk_rear = -1;
  int ebat_next = -1;                      // battery knot i+1
  int w_abs = -1;                          // CVT only
  double fgb_offset = 0.0;                 // MN
  double ratio = 0.0;                      // active gear ratio (0 for CVT/relaxed)
  int kinetic_row = -1, battery_row = -1;
  // relaxed (branch-and-bound) mode: per-gear simplex weights and models
  std::vector<int> theta, z_g, v_g, f_g;
  bool relaxed = false;
};

struct CvtEnvelope {
  // Per-distance motor loss surrogate in SI units (N, F_m in N, v in m/s):
  //   c_q / v + c_const + c_v * v + c_z * F_m^2 / v + c_w * |F_m|
  // Fitted to under-approximate the pointwise minimum of the per-ratio loss
  // surfaces over the admissible ratio interval.
  double c_q = 0.0, c_const = 0.0, c_v = 0.0, c_z = 0.0, c_w = 0.0;
  double max_rel_gap = 0.0;  // worst under-approximation gap at the samples
};

struct VariableLayout {
  int n_steps = 0;
  std::vector<StepRefs> steps;
  int ebat0 = -1, ekinN = -1;
  int ebat0_row = -1, boundary_row = -1, budget_row = -1;
  double ds = 0.0;          // m
  double m_dyn = 0.0;       // kg
  BoundaryConditions bc;
  TransmissionKind kind = TransmissionKind::FGT;
  std::vector<double> design_ratios;
  std::optional<CvtEnvelope> envelope;
  // Per-variable slot units: the solver sees x / unit, extraction multiplies
  // back. Keeps every cone internally balanced, which column equilibration
  // alone cannot do (cone members must share one scale to stay a cone).
  std::vector<double> slot_scale;

  static constexpr int kVarsPerStep = 31;
  static constexpr int kRowsPerStep = 22;
  static constexpr int kCvtExtraVarsPerStep = 3;
  static constexpr int kCvtExtraRowsPerStep = 2;
  static constexpr int kGlobalVars = 4;
  static constexpr int kGlobalRows = 4;
};

struct Transcription {
  conic::ConicProblem problem;
  VariableLayout layout;
};

// Fixed-gear continuous problem (MGT with a given gear trajectory, or FGT
// via an all-ones trajectory).
Transcription build_cop(const TrackProfile& track, const VehicleSpec& vehicle,
                        const PowertrainSpec& power, const TransmissionSpec& trans,
                        const GearTrajectory& gears,
                        const BoundaryConditions& bc = {});

// FGT and CVT front door. CVT uses the fitted loss envelope unless the ratio
// interval is collapsed, in which case the single-ratio model is built.
Transcription build_fgt_cvt(const TrackProfile& track, const VehicleSpec& vehicle,
                            const PowertrainSpec& power,
                            const TransmissionSpec& trans,
                            const BoundaryConditions& bc = {});

// Branch-and-bound relaxation: steps with fixed_gears[i] in {1..n_gear} use
// that gear's model; entries of 0 are relaxed to a simplex-weighted convex
// combination of all gear models.
Transcription build_relaxed(const TrackProfile& track, const VehicleSpec& vehicle,
                            const PowertrainSpec& power,
                            const TransmissionSpec& trans,
                            const std::vector<int>& fixed_gears,
                            const BoundaryConditions& bc = {});

// Maps an optimal solver result back to trajectories; throws ValidationError
// carrying the solver status otherwise.
ContinuousSolution extract(const conic::ConicSolution& solution,
                           const VariableLayout& layout,
                           const VehicleSpec& vehicle,
                           const PowertrainSpec& power);

// Per-step simplex weights of a relaxed solve (empty vectors at fixed steps).
std::vector<std::vector<double>> extract_weights(
    const conic::ConicSolution& solution, const VariableLayout& layout);

// Samples the per-gear loss surfaces over a ratio/velocity/force grid and
// fits the under-approximating envelope surrogate by linear programming.
CvtEnvelope fit_cvt_envelope(const VehicleSpec& vehicle,
                             const PowertrainSpec& power,
                             const TransmissionSpec& trans,
                             const SolverSettings& settings = {});

}  // namespace laptime::transcribe
