#pragma once

#include <vector>

#include "laptime/model/solution.hpp"
#include "laptime/model/specs.hpp"

namespace laptime::gop {

// Motor/brake inputs at one step. Forces at the wheel, in N; the motor force
// is signed (negative = regenerative braking), brake forces are >= 0.
struct StepInputs {
  double motor_force = 0.0;
  double brake_front = 0.0;
  double brake_rear = 0.0;
};

// Result of the pointwise Hamiltonian minimization at one step.
struct HamiltonianSample {
  int step = 0;
  // Minimized Hamiltonian per gear, s/m; +inf marks a gear whose wheel speed
  // would exceed the motor speed limit at this step's velocity.
  std::vector<double> hamiltonian;
  int gear = 0;  // 1-based argmin (ties: previous gear, then lowest index)
  StepInputs inputs;
};

struct GopResult {
  GearTrajectory gears;
  std::vector<StepInputs> inputs;
  std::vector<HamiltonianSample> samples;
};

// The Pontryagin sum assembled from already-computed per-distance rates:
// H = q + costate_kinetic * kinetic_rate + costate_battery * battery_rate,
// with q in s/m and the rates in J/m. Split out so reports and tests can
// decompose the Hamiltonian into its three terms.
double hamiltonian_terms(double lethargy, double kinetic_rate,
                         double battery_rate, double costate_kinetic,
                         double costate_battery);

// Hamiltonian of one step at fixed kinetic energy and costates, for gear
// `gear` (1-based) under the given inputs. Uses the exact loss chain (gearbox
// efficiency split, motor loss map, inverter split, battery quadratic loss,
// auxiliary power). Returns +inf when the gear overspeeds the motor at this
// velocity. Units: s/m.
double hamiltonian(const VehicleSpec& vehicle, const PowertrainSpec& power,
                   const TransmissionSpec& trans, int gear,
                   double kinetic_energy, double costate_kinetic,
                   double costate_battery, const StepInputs& inputs);

// Exact minimizer of the Hamiltonian over the motor force and the aggregated
// brake force at fixed state and costates. Per gear the motor-force profile
// is piecewise smooth (gearbox and inverter direction splits); stationary
// points are cubic roots solved in closed form and checked against the box
// given by the torque, power and traction limits. Gears within tie_tolerance
// of the minimum resolve to previous_gear if present, else the lowest index.
// Throws ValidationError when every gear overspeeds.
HamiltonianSample minimize_step(const VehicleSpec& vehicle,
                                const PowertrainSpec& power,
                                const TransmissionSpec& trans, int step,
                                double kinetic_energy, double costate_kinetic,
                                double costate_battery, int previous_gear,
                                double tie_tolerance = 1e-12);

// Per-step Hamiltonian minimization over a whole solved horizon: states come
// from `sol`, costates from the (possibly damped) per-step vectors, and ties
// keep the gear of `previous`. Steps are independent and the result is
// deterministic for identical inputs.
GopResult solve_gop(const ContinuousSolution& sol,
                    const std::vector<double>& costate_kinetic,
                    const std::vector<double>& costate_battery,
                    const VehicleSpec& vehicle, const PowertrainSpec& power,
                    const TransmissionSpec& trans,
                    const GearTrajectory& previous,
                    double tie_tolerance = 1e-12);

}  // namespace laptime::gop
