#pragma once

#include "laptime/conic/problem.hpp"
#include "laptime/settings.hpp"

namespace laptime::conic {

// Optional warm-start hook: the point is adopted verbatim when x and s are
// safely interior to their cones, otherwise the solver falls back to its
// cold start. No path-following guarantees are attached to it.
struct InitialPoint {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> s;
};

// Homogeneous self-dual primal-dual path following with Nesterov-Todd
// scaling and a Mehrotra predictor-corrector step. Deterministic.
ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings,
                    const InitialPoint* init = nullptr);

}  // namespace laptime::conic
