#pragma once

// Shared helpers for exercising the cone solver: a tiny problem assembler,
// a random generator of feasible-by-construction instances, and a
// brute-force vertex-enumeration oracle for small LPs.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "laptime/conic/problem.hpp"

namespace testkit {

using laptime::conic::Cone;
using laptime::conic::ConeKind;
using laptime::conic::ConicProblem;

struct ProblemBuilder {
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> b, c;
  std::vector<Cone> cones;
  int nv = 0;

  int add_cone(ConeKind kind, int dim, std::vector<double> cost) {
    cones.push_back({kind, dim});
    const int at = nv;
    nv += dim;
    for (double v : cost) c.push_back(v);
    return at;
  }
  int add_row(double rhs) {
    b.push_back(rhs);
    return static_cast<int>(b.size()) - 1;
  }
  void set(int row, int col, double v) { trips.emplace_back(row, col, v); }

  ConicProblem build() const {
    ConicProblem p;
    p.objective = c;
    p.equality_rhs = b;
    p.cones = cones;
    p.equality_matrix =
        Eigen::SparseMatrix<double>(static_cast<int>(b.size()), nv);
    p.equality_matrix.setFromTriplets(trips.begin(), trips.end());
    p.validate();
    return p;
  }
};

// A strictly feasible, bounded instance built from a known interior
// primal/dual pair: b := A x0, c := A'y0 + s0 guarantee both problems have
// Slater points, hence a finite optimum with zero duality gap.
inline ConicProblem random_feasible_problem(std::mt19937& rng, int max_vars = 50) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  std::uniform_int_distribution<int> kind_pick(0, 2);

  ProblemBuilder pb;
  std::vector<double> x0, s0;
  auto interior_point = [&](const Cone& cone, std::vector<double>& dst) {
    if (cone.kind == ConeKind::Nonnegative) {
      for (int i = 0; i < cone.dim; ++i) dst.push_back(pos(rng));
    } else if (cone.kind == ConeKind::SecondOrder) {
      std::vector<double> tail(cone.dim - 1);
      double norm = 0.0;
      for (double& t : tail) {
        t = unit(rng);
        norm += t * t;
      }
      dst.push_back(std::sqrt(norm) + pos(rng));
      for (double t : tail) dst.push_back(t);
    } else {
      std::vector<double> tail(cone.dim - 2);
      double norm = 0.0;
      for (double& t : tail) {
        t = unit(rng);
        norm += t * t;
      }
      const double a = pos(rng) + std::sqrt(norm / 2.0);
      const double bb = pos(rng) + std::sqrt(norm / 2.0);
      dst.push_back(a);
      dst.push_back(bb);
      for (double t : tail) dst.push_back(t);
    }
  };

  std::uniform_int_distribution<int> n_cones(1, 5);
  const int k = n_cones(rng);
  for (int i = 0; i < k && pb.nv < max_vars - 4; ++i) {
    const int kind = kind_pick(rng);
    Cone cone{ConeKind::Nonnegative, 0};
    if (kind == 0) {
      cone = {ConeKind::Nonnegative,
              std::uniform_int_distribution<int>(1, 6)(rng)};
    } else if (kind == 1) {
      cone = {ConeKind::SecondOrder,
              std::uniform_int_distribution<int>(2, 5)(rng)};
    } else {
      cone = {ConeKind::RotatedSecondOrder,
              std::uniform_int_distribution<int>(3, 5)(rng)};
    }
    pb.add_cone(cone.kind, cone.dim, std::vector<double>(cone.dim, 0.0));
    interior_point(cone, x0);
    interior_point(cone, s0);
  }

  const int n = pb.nv;
  const int m = std::uniform_int_distribution<int>(1, std::max(1, n / 2))(rng);
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      A(i, j) = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.4
                    ? unit(rng)
                    : 0.0;
  // avoid all-zero rows: pin one entry
  for (int i = 0; i < m; ++i)
    if (A.row(i).cwiseAbs().maxCoeff() == 0.0) A(i, i % n) = 1.0;

  Eigen::VectorXd x0v = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
  Eigen::VectorXd s0v = Eigen::Map<Eigen::VectorXd>(s0.data(), n);
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0[i] = unit(rng);

  Eigen::VectorXd bv = A * x0v;
  Eigen::VectorXd cv = A.transpose() * y0 + s0v;
  for (int i = 0; i < m; ++i) pb.add_row(bv[i]);
  for (int j = 0; j < n; ++j) pb.c[j] = cv[j];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (A(i, j) != 0.0) pb.set(i, j, A(i, j));
  return pb.build();
}

// All-nonnegative variant for the LP cross-check.
inline ConicProblem random_feasible_lp(std::mt19937& rng, int n_vars, int n_rows) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  ProblemBuilder pb;
  pb.add_cone(ConeKind::Nonnegative, n_vars, std::vector<double>(n_vars, 0.0));
  Eigen::MatrixXd A(n_rows, n_vars);
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < n_vars; ++j) A(i, j) = unit(rng);
  Eigen::VectorXd x0(n_vars), s0(n_vars), y0(n_rows);
  for (int j = 0; j < n_vars; ++j) x0[j] = pos(rng);
  for (int j = 0; j < n_vars; ++j) s0[j] = pos(rng);
  for (int i = 0; i < n_rows; ++i) y0[i] = unit(rng);
  Eigen::VectorXd bv = A * x0, cv = A.transpose() * y0 + s0;
  for (int i = 0; i < n_rows; ++i) pb.add_row(bv[i]);
  for (int j = 0; j < n_vars; ++j) pb.c[j] = cv[j];
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < n_vars; ++j) pb.set(i, j, A(i, j));
  return pb.build();
}

// Brute-force LP oracle: enumerate basic feasible solutions of
// min c'x, Ax = b, x >= 0 and return the best objective. Assumes the LP is
// bounded and feasible (true for instances from random_feasible_lp).
inline double lp_vertex_optimum(const ConicProblem& p) {
  const int n = p.variable_count();
  const int m = p.constraint_count();
  Eigen::MatrixXd A = Eigen::MatrixXd(p.equality_matrix);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p.equality_rhs.data(), m);
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(p.objective.data(), n);

  std::vector<int> comb(m);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;

  std::function<void(int, int)> rec = [&](int start, int chosen) {
    if (chosen == m) {
      Eigen::MatrixXd B(m, m);
      for (int k = 0; k < m; ++k) B.col(k) = A.col(comb[k]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (!lu.isInvertible()) return;
      Eigen::VectorXd xb = lu.solve(b);
      if ((xb.array() < -1e-9).any()) return;
      double obj = 0.0;
      for (int k = 0; k < m; ++k) obj += c[comb[k]] * xb[k];
      best = std::min(best, obj);
      return;
    }
    for (int i = start; i <= n - (m - chosen); ++i) {
      comb[chosen] = i;
      rec(i + 1, chosen + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace testkit
