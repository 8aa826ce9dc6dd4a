#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace laptime::conic {

enum class ConeKind {
  Nonnegative,        // x_i >= 0, any dimension >= 1
  SecondOrder,        // x_0 >= ||x_1:||, dimension >= 2
  RotatedSecondOrder  // 2 x_0 x_1 >= ||x_2:||^2, x_0,x_1 >= 0, dimension >= 3
};

struct Cone {
  ConeKind kind;
  int dim;
};

// minimize objective . x  subject to  equality_matrix x = equality_rhs,
// x in the product of `cones` (every variable lies in exactly one cone).
struct ConicProblem {
  Eigen::SparseMatrix<double> equality_matrix;
  std::vector<double> equality_rhs;
  std::vector<double> objective;
  std::vector<Cone> cones;

  int variable_count() const { return static_cast<int>(objective.size()); }
  int constraint_count() const { return static_cast<int>(equality_rhs.size()); }
  void validate() const;
};

enum class SolveStatus {
  optimal,
  primal_infeasible,
  dual_infeasible,
  iteration_limit,
  numerical_failure
};

std::string to_string(SolveStatus status);

// dual_equality follows the sensitivity convention: perturbing
// equality_rhs[j] by eps moves the optimal value by dual_equality[j]*eps,
// i.e. A' dual_equality + dual_cone = objective at optimality.
struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<double> primal;         // x (certificate of unboundedness when dual_infeasible)
  std::vector<double> dual_equality;  // y (certificate ray when primal_infeasible)
  std::vector<double> dual_cone;      // s
  double objective_value = 0.0;
  double duality_gap = 0.0;      // |c.x - b.y|
  double primal_residual = 0.0;  // ||Ax - b||_2
  double dual_residual = 0.0;    // ||A'y + s - c||_2
  int iterations = 0;
};

}  // namespace laptime::conic
