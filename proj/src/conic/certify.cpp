#include "laptime/conic/certify.hpp"

#include <algorithm>
#include <cmath>

#include "laptime/errors.hpp"

namespace laptime::conic {

namespace {

// Distance outside the cone, measured after mapping rotated cones onto plain
// second-order ones (an orthogonal change of coordinates).
double cone_violation(const Cone& cone, const double* v) {
  switch (cone.kind) {
    case ConeKind::Nonnegative: {
      double worst = 0.0;
      for (int i = 0; i < cone.dim; ++i) worst = std::max(worst, -v[i]);
      return worst;
    }
    case ConeKind::SecondOrder: {
      double norm = 0.0;
      for (int i = 1; i < cone.dim; ++i) norm += v[i] * v[i];
      return std::max(0.0, std::sqrt(norm) - v[0]);
    }
    case ConeKind::RotatedSecondOrder: {
      const double u0 = (v[0] + v[1]) / std::sqrt(2.0);
      double norm = (v[0] - v[1]) * (v[0] - v[1]) / 2.0;
      for (int i = 2; i < cone.dim; ++i) norm += v[i] * v[i];
      return std::max(0.0, std::sqrt(norm) - u0);
    }
  }
  return 0.0;
}

}  // namespace

CertifyReport certify(const ConicProblem& problem, const ConicSolution& solution) {
  problem.validate();
  if (solution.status != SolveStatus::optimal)
    throw ValidationError("certify: solution status is " +
                          to_string(solution.status));
  const int n = problem.variable_count();
  const int m = problem.constraint_count();
  if (static_cast<int>(solution.primal.size()) != n ||
      static_cast<int>(solution.dual_equality.size()) != m ||
      static_cast<int>(solution.dual_cone.size()) != n)
    throw ValidationError("certify: solution dimensions do not match problem");

  const auto& A = problem.equality_matrix;
  CertifyReport rep;

  // ||Ax - b|| accumulated row-wise from scratch
  std::vector<double> ax(m, 0.0);
  std::vector<double> aty(n, 0.0);
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) {
      ax[it.row()] += it.value() * solution.primal[j];
      aty[j] += it.value() * solution.dual_equality[it.row()];
    }
  double p2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = ax[i] - problem.equality_rhs[i];
    p2 += r * r;
  }
  rep.primal_residual = std::sqrt(p2);

  double d2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double r = aty[j] + solution.dual_cone[j] - problem.objective[j];
    d2 += r * r;
  }
  rep.dual_residual = std::sqrt(d2);

  int off = 0;
  for (const Cone& cone : problem.cones) {
    rep.primal_cone_violation = std::max(
        rep.primal_cone_violation, cone_violation(cone, &solution.primal[off]));
    rep.dual_cone_violation = std::max(
        rep.dual_cone_violation, cone_violation(cone, &solution.dual_cone[off]));
    off += cone.dim;
  }

  double xs = 0.0, cx = 0.0, nb = 0.0, nc = 0.0;
  for (int j = 0; j < n; ++j) {
    xs += solution.primal[j] * solution.dual_cone[j];
    cx += problem.objective[j] * solution.primal[j];
    nc += problem.objective[j] * problem.objective[j];
  }
  for (double v : problem.equality_rhs) nb += v * v;
  rep.complementarity = std::abs(xs);

  rep.max_violation = std::max(
      {rep.primal_residual / (1.0 + std::sqrt(nb)),
       rep.dual_residual / (1.0 + std::sqrt(nc)), rep.primal_cone_violation,
       rep.dual_cone_violation, rep.complementarity / (1.0 + std::abs(cx))});
  return rep;
}

}  // namespace laptime::conic
