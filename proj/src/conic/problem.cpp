#include "laptime/conic/problem.hpp"

#include <cmath>

#include "laptime/errors.hpp"

namespace laptime::conic {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::primal_infeasible: return "primal_infeasible";
    case SolveStatus::dual_infeasible: return "dual_infeasible";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

void ConicProblem::validate() const {
  const int n = variable_count();
  const int m = constraint_count();
  if (equality_matrix.cols() != n)
    throw ValidationError("conic: matrix columns != variable count");
  if (equality_matrix.rows() != m)
    throw ValidationError("conic: matrix rows != rhs length");
  long total = 0;
  for (const Cone& k : cones) {
    switch (k.kind) {
      case ConeKind::Nonnegative:
        if (k.dim < 1) throw ValidationError("conic: nonnegative cone dim < 1");
        break;
      case ConeKind::SecondOrder:
        if (k.dim < 2) throw ValidationError("conic: second-order cone dim < 2");
        break;
      case ConeKind::RotatedSecondOrder:
        if (k.dim < 3) throw ValidationError("conic: rotated cone dim < 3");
        break;
    }
    total += k.dim;
  }
  if (total != n)
    throw ValidationError("conic: cone dimensions do not sum to variable count");
  for (double v : objective)
    if (!std::isfinite(v)) throw ValidationError("conic: non-finite objective");
  for (double v : equality_rhs)
    if (!std::isfinite(v)) throw ValidationError("conic: non-finite rhs");
  for (int j = 0; j < equality_matrix.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(equality_matrix, j); it; ++it)
      if (!std::isfinite(it.value()))
        throw ValidationError("conic: non-finite matrix entry");
}

}  // namespace laptime::conic
