#pragma once

#include "laptime/conic/problem.hpp"

namespace laptime::conic {

// Residuals recomputed from scratch, independently of the solver internals.
// All values are absolute (unnormalized) violations.
struct CertifyReport {
  double primal_residual = 0.0;     // ||Ax - b||_2
  double dual_residual = 0.0;       // ||A'y + s - c||_2
  double primal_cone_violation = 0.0;  // max distance of x outside its cones
  double dual_cone_violation = 0.0;    // max distance of s outside its cones
  double complementarity = 0.0;        // |x.s|
  double max_violation = 0.0;          // max of the above, residuals scale-normalized
};

CertifyReport certify(const ConicProblem& problem, const ConicSolution& solution);

}  // namespace laptime::conic
