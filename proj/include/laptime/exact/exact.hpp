#pragma once

#include <vector>

#include "laptime/model/solution.hpp"
#include "laptime/model/specs.hpp"
#include "laptime/model/track.hpp"
#include "laptime/settings.hpp"
#include "laptime/transcribe/transcribe.hpp"

namespace laptime::exact {

struct ExactSettings {
  int max_exact_steps = 24;    // hard cap on the section length
  long node_budget = 1000000;  // relaxation/leaf evaluations before giving up
  double gap_tolerance = 1e-6;  // s, certified optimality gap
};

// One branch-and-bound node: a partial gear map (0 = undecided) plus the
// lower bound its relaxation certified. Child bounds never drop more than
// 1e-9 below their parent's.
struct BnbNode {
  std::vector<int> fixed;
  double bound = 0.0;  // s
  int depth = 0;
  long id = 0;
};

struct ExactResult {
  GearTrajectory gears;
  ContinuousSolution solution;
  double bound_gap = 0.0;  // s, incumbent minus certified lower bound
  long node_count = 0;
  bool budget_exhausted = false;
};

// Globally optimal gear trajectory on a short non-periodic section by
// best-first branch-and-bound. Each node solves the convex relaxation with
// undecided steps as simplex-weighted gear combinations; branching picks the
// most fractional step (weights closest to uniform) and orders children by
// descending relaxed weight. Certified gap <= settings.gap_tolerance unless
// the node budget runs out, in which case the best incumbent is returned
// with the remaining gap and budget_exhausted set. Throws when the section
// is infeasible for every gear sequence.
ExactResult solve_exact(const TrackProfile& section, const VehicleSpec& vehicle,
                        const PowertrainSpec& power, const TransmissionSpec& trans,
                        const transcribe::BoundaryConditions& bc,
                        const SolverSettings& solver,
                        const ExactSettings& settings = {});

// Brute-force ground truth: one fixed-gear convex solve per gear sequence
// (lexicographic order, first optimum kept on ties). Requires
// n_gear^n_steps <= 1e5. Throws when every sequence is infeasible.
ExactResult enumerate_exhaustive(const TrackProfile& section,
                                 const VehicleSpec& vehicle,
                                 const PowertrainSpec& power,
                                 const TransmissionSpec& trans,
                                 const transcribe::BoundaryConditions& bc,
                                 const SolverSettings& solver);

}  // namespace laptime::exact
