#pragma once

#include <utility>
#include <vector>

#include "laptime/model/solution.hpp"
#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"
#include "laptime/settings.hpp"
#include "laptime/transcribe/transcribe.hpp"

namespace laptime::driver {

// Per-step costates carried between outer iterations, s/J.
struct DampedCostates {
  std::vector<double> kinetic;
  std::vector<double> battery;

  bool empty() const { return kinetic.empty() && battery.empty(); }
};

// Under-relaxation: (1 - beta) * previous + beta * fresh. An empty previous
// passes fresh through unchanged (first iteration). Length mismatches throw.
DampedCostates damp(const DampedCostates& previous, const DampedCostates& fresh,
                    double beta);

// Heuristic starting gears: a forward-backward velocity envelope at the
// traction/brake limits under the lateral-acceleration caps, then per step
// the feasible gear whose motor speed is closest to the best-efficiency
// speed. Throws when some step has no feasible gear.
GearTrajectory initial_gears(const TrackProfile& track, const VehicleSpec& vehicle,
                             const PowertrainSpec& power,
                             const TransmissionSpec& trans);

struct IterationRecord {
  int k = 0;              // 1-based outer iteration
  double lap_time = 0.0;  // s, from the certified convex solve
  int gear_changes = 0;   // steps where this iteration's gears changed
  double damping = 0.0;   // beta in effect
  int solver_iterations = 0;
  double wall_time_s = 0.0;
  int reverted_steps = 0;  // infeasibility-recovery reversions
};

struct IterativeResult {
  ContinuousSolution solution;  // final convex solve
  GearTrajectory gears;         // gear trajectory of that solve
  std::vector<IterationRecord> trace;
  bool converged = false;
  DampedCostates costates;  // damped costates that reproduce `gears`
};

// Alternation between the fixed-gear convex solve and the pointwise
// Hamiltonian gear optimization, with costate damping. Converges when the
// gear trajectory repeats exactly and the lap time settles within the
// configured tolerance; otherwise returns the best certified iterate with
// converged = false.
IterativeResult run_iterative(const TrackProfile& track, const VehicleSpec& vehicle,
                              const PowertrainSpec& power,
                              const TransmissionSpec& trans,
                              const SolverSettings& solver,
                              const AlgorithmSettings& algo,
                              const transcribe::BoundaryConditions& bc = {});

struct DesignResult {
  TransmissionSpec transmission;
  double lap_time = 0.0;
  int evaluations = 0;          // converged lap-time evaluations performed
  IterativeResult best;         // run behind the best design
  std::vector<std::pair<std::vector<double>, double>> trace;  // (ratios, T)
};

// Ratio design refinement: golden-section over the single ratio (FGT), over
// the top ratio of the span (CVT), or cyclic coordinate passes over all gear
// ratios (MGT, repeated until a full pass improves by < 1e-4 s). `bounds`
// gives one [lo, hi] interval per searched coordinate. Collapsed bounds mean
// a single evaluation.
DesignResult design_search(const TrackProfile& track, const VehicleSpec& vehicle,
                           const PowertrainSpec& power,
                           const TransmissionSpec& seed,
                           const std::vector<std::pair<double, double>>& bounds,
                           const SolverSettings& solver,
                           const AlgorithmSettings& algo,
                           const transcribe::BoundaryConditions& bc = {});

}  // namespace laptime::driver
