#include "laptime/conic/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "laptime/errors.hpp"

namespace laptime::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct SocBlock {
  int offset = 0;
  int dim = 0;
  Eigen::MatrixXd W, Winv, H;  // Nesterov-Todd scaling, H = W^-2
  Vec lambda;                  // scaled point, lambda = W s = W^-1 x
};

// Internally every rotated cone is mapped onto a plain second-order cone by
// the orthogonal involution T: (a, b, z) -> ((a+b)/sqrt2, (a-b)/sqrt2, z),
// which is its own inverse and transforms primal and dual points alike.
struct Canonical {
  std::vector<int> rot_offsets;  // first coordinate of each rotated cone
  std::vector<int> nn_idx;       // all nonnegative coordinates
  std::vector<SocBlock> soc;     // all second-order blocks (incl. rotated)
  int nu = 0;                    // barrier degree
};

void rotate_pairs(const std::vector<int>& offsets, Vec& v) {
  for (int j : offsets) {
    const double a = v[j], b = v[j + 1];
    v[j] = (a + b) / kSqrt2;
    v[j + 1] = (a - b) / kSqrt2;
  }
}

// Smallest positive root of the boundary crossing polynomial for u + a*d to
// stay inside the second-order cone; +inf when the ray never leaves.
double soc_max_step(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& d) {
  const int k = static_cast<int>(u.size());
  const double a = d[0] * d[0] - d.tail(k - 1).squaredNorm();
  const double b = 2.0 * (u[0] * d[0] - u.tail(k - 1).dot(d.tail(k - 1)));
  const double c = u[0] * u[0] - u.tail(k - 1).squaredNorm();
  if (std::abs(a) < 1e-300) {
    if (b >= 0) return kInf;
    return c > 0 ? -c / b : 0.0;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0) return kInf;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
  double best = kInf;
  for (double r : {q / a, std::abs(q) > 0 ? c / q : kInf})
    if (r > 0 && r < best) best = r;
  return best;
}

double nonneg_max_step(double u, double d) {
  return d < 0 ? -u / d : kInf;
}

struct KktSolver {
  int n = 0, m = 0;
  SpMat K;                         // lower triangle of [-H-eI A'; A eI]
  SpMat A, At;
  double reg = 1e-8;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  std::vector<int> nn_slot;                    // value index of (i,i) per nonneg coord
  std::vector<std::vector<int>> soc_slots;     // lower-triangle value indices per block
  std::vector<int> reg_slots;                  // (n+i, n+i) diagonal positions
  bool analyzed = false;

  void setup(const SpMat& a, const Canonical& canon) {
    A = a;
    At = SpMat(a.transpose());
    m = static_cast<int>(a.rows());
    n = static_cast<int>(a.cols());

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(a.nonZeros() + n + m + 16);
    for (int i : canon.nn_idx) trips.emplace_back(i, i, -1.0);
    for (const SocBlock& blk : canon.soc)
      for (int c = 0; c < blk.dim; ++c)
        for (int r = c; r < blk.dim; ++r)
          trips.emplace_back(blk.offset + r, blk.offset + c, -1.0);
    for (int j = 0; j < a.outerSize(); ++j)
      for (SpMat::InnerIterator it(a, j); it; ++it)
        trips.emplace_back(n + static_cast<int>(it.row()), j, it.value());
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, reg);
    K = SpMat(n + m, n + m);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();

    auto slot_of = [&](int r, int c) {
      for (int p = K.outerIndexPtr()[c]; p < K.outerIndexPtr()[c + 1]; ++p)
        if (K.innerIndexPtr()[p] == r) return p;
      throw ValidationError("conic: internal KKT slot lookup failed");
    };
    nn_slot.clear();
    for (int i : canon.nn_idx) nn_slot.push_back(slot_of(i, i));
    soc_slots.clear();
    for (const SocBlock& blk : canon.soc) {
      std::vector<int> slots;
      for (int c = 0; c < blk.dim; ++c)
        for (int r = c; r < blk.dim; ++r)
          slots.push_back(slot_of(blk.offset + r, blk.offset + c));
      soc_slots.push_back(std::move(slots));
    }
    reg_slots.clear();
    for (int i = 0; i < m; ++i) reg_slots.push_back(slot_of(n + i, n + i));
  }

  // Refresh the -H - eps*I block and refactorize. Returns false on breakdown.
  bool factorize(const Canonical& canon, const Vec& h_nn, double eps) {
    double* vals = K.valuePtr();
    for (size_t k = 0; k < nn_slot.size(); ++k)
      vals[nn_slot[k]] = -h_nn[k] - eps;
    for (size_t bi = 0; bi < canon.soc.size(); ++bi) {
      const SocBlock& blk = canon.soc[bi];
      int p = 0;
      for (int c = 0; c < blk.dim; ++c)
        for (int r = c; r < blk.dim; ++r, ++p)
          vals[soc_slots[bi][p]] = -blk.H(r, c) - (r == c ? eps : 0.0);
    }
    for (int s : reg_slots) vals[s] = eps;

    if (!analyzed) {
      ldlt.analyzePattern(K);
      analyzed = true;
    }
    ldlt.factorize(K);
    if (ldlt.info() != Eigen::Success) return false;
    const Vec& d = ldlt.vectorD();
    for (int i = 0; i < d.size(); ++i)
      if (!std::isfinite(d[i]) || d[i] == 0.0) return false;
    return true;
  }

  // K0 * z with the unregularized KKT operator (for iterative refinement).
  Vec apply_unregularized(const Canonical& canon, const Vec& h_nn,
                          const Vec& z) const {
    Vec out(n + m);
    Vec zx = z.head(n), zy = z.tail(m);
    Vec top = At * zy;
    for (size_t k = 0; k < canon.nn_idx.size(); ++k)
      top[canon.nn_idx[k]] -= h_nn[k] * zx[canon.nn_idx[k]];
    for (const SocBlock& blk : canon.soc)
      top.segment(blk.offset, blk.dim) -=
          blk.H * zx.segment(blk.offset, blk.dim);
    out.head(n) = top;
    out.tail(m) = A * zx;
    return out;
  }

  Vec solve(const Canonical& canon, const Vec& h_nn, const Vec& rhs) const {
    Vec z = ldlt.solve(rhs);
    const double target = 1e-14 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    double best_err = kInf;
    Vec best_z = z;
    for (int pass = 0; pass < 8; ++pass) {
      Vec err = rhs - apply_unregularized(canon, h_nn, z);
      const double en = err.lpNorm<Eigen::Infinity>();
      if (en < best_err) {
        best_err = en;
        best_z = z;
      }
      if (en <= target || en > 2.0 * best_err) break;
      z += ldlt.solve(err);
    }
    return best_z;
  }
};

struct Residuals {
  double pres = kInf, dres = kInf, relgap = kInf;
  double pobj = 0, dobj = 0;
  double pres_abs = kInf, dres_abs = kInf;
};

}  // namespace

ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings,
                    const InitialPoint* init) {
  problem.validate();
  settings.validate();

  const int n = problem.variable_count();
  const int m = problem.constraint_count();

  // --- canonicalize cones -------------------------------------------------
  Canonical canon;
  {
    int off = 0;
    for (const Cone& k : problem.cones) {
      if (k.kind == ConeKind::Nonnegative) {
        for (int i = 0; i < k.dim; ++i) canon.nn_idx.push_back(off + i);
        canon.nu += k.dim;
      } else {
        if (k.kind == ConeKind::RotatedSecondOrder)
          canon.rot_offsets.push_back(off);
        SocBlock blk;
        blk.offset = off;
        blk.dim = k.dim;
        blk.W.resize(k.dim, k.dim);
        blk.Winv.resize(k.dim, k.dim);
        blk.H.resize(k.dim, k.dim);
        blk.lambda.resize(k.dim);
        canon.soc.push_back(std::move(blk));
        canon.nu += 1;
      }
      off += k.dim;
    }
  }

  // Objective and matrix in the canonical (rotated -> plain) coordinates.
  Vec c = Eigen::Map<const Vec>(problem.objective.data(), n);
  rotate_pairs(canon.rot_offsets, c);
  Vec b = Eigen::Map<const Vec>(problem.equality_rhs.data(), m);
  SpMat A(m, n);
  {
    std::vector<bool> is_first(n, false), is_second(n, false);
    for (int j : canon.rot_offsets) {
      is_first[j] = true;
      is_second[j + 1] = true;
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(problem.equality_matrix.nonZeros() * 2);
    for (int j = 0; j < problem.equality_matrix.outerSize(); ++j)
      for (SpMat::InnerIterator it(problem.equality_matrix, j); it; ++it) {
        const int r = static_cast<int>(it.row());
        const double v = it.value();
        if (is_first[j]) {
          trips.emplace_back(r, j, v / kSqrt2);
          trips.emplace_back(r, j + 1, v / kSqrt2);
        } else if (is_second[j]) {
          trips.emplace_back(r, j - 1, v / kSqrt2);
          trips.emplace_back(r, j, -v / kSqrt2);
        } else {
          trips.emplace_back(r, j, v);
        }
      }
    A.setFromTriplets(trips.begin(), trips.end());
  }

  // --- Ruiz equilibration (cone-blocks share one column scale) ------------
  Vec dr = Vec::Ones(m), dc = Vec::Ones(n);
  {
    std::vector<std::pair<int, int>> col_groups;  // (offset, dim)
    {
      int off = 0;
      for (const Cone& k : problem.cones) {
        if (k.kind == ConeKind::Nonnegative)
          for (int i = 0; i < k.dim; ++i) col_groups.emplace_back(off + i, 1);
        else
          col_groups.emplace_back(off, k.dim);
        off += k.dim;
      }
    }
    SpMat As = A;
    for (int pass = 0; pass < 5; ++pass) {
      Vec rown = Vec::Zero(m), coln = Vec::Zero(n);
      for (int j = 0; j < As.outerSize(); ++j)
        for (SpMat::InnerIterator it(As, j); it; ++it) {
          const double v = std::abs(it.value());
          rown[it.row()] = std::max(rown[it.row()], v);
          coln[j] = std::max(coln[j], v);
        }
      Vec rs(m), cs(n);
      for (int i = 0; i < m; ++i) rs[i] = rown[i] > 0 ? 1.0 / std::sqrt(rown[i]) : 1.0;
      for (auto [off, dim] : col_groups) {
        double g = 0;
        for (int j = 0; j < dim; ++j) g = std::max(g, coln[off + j]);
        const double s = g > 0 ? 1.0 / std::sqrt(g) : 1.0;
        for (int j = 0; j < dim; ++j) cs[off + j] = s;
      }
      for (int j = 0; j < As.outerSize(); ++j)
        for (SpMat::InnerIterator it(As, j); it; ++it)
          it.valueRef() *= rs[it.row()] * cs[j];
      dr.array() *= rs.array();
      dc.array() *= cs.array();
    }
    A = As;
  }
  b.array() *= dr.array();
  c.array() *= dc.array();

  const double norm_b0 = (b.array() / dr.array()).matrix().norm();
  const double norm_c0 = (c.array() / dc.array()).matrix().norm();
  double norm_a0 = 0.0;
  for (int j = 0; j < A.outerSize(); ++j)
    for (SpMat::InnerIterator it(A, j); it; ++it)
      norm_a0 = std::max(norm_a0,
                         std::abs(it.value() / dr[it.row()] / dc[j]));
  const double cert_scale = std::max(1.0, norm_a0);

  SpMat At = SpMat(A.transpose());

  // --- state --------------------------------------------------------------
  auto cone_identity = [&](Vec& v) {
    v.setZero();
    for (int i : canon.nn_idx) v[i] = 1.0;
    for (const SocBlock& blk : canon.soc) v[blk.offset] = 1.0;
  };
  Vec x(n), s(n), y = Vec::Zero(m);
  cone_identity(x);
  cone_identity(s);
  double tau = 1.0, kappa = 1.0;

  auto interior_margin = [&](const Vec& v) {
    double margin = kInf;
    for (int i : canon.nn_idx) margin = std::min(margin, v[i]);
    for (const SocBlock& blk : canon.soc)
      margin = std::min(margin, v[blk.offset] -
                                    v.segment(blk.offset + 1, blk.dim - 1).norm());
    return margin;
  };

  if (init && static_cast<int>(init->x.size()) == n &&
      static_cast<int>(init->s.size()) == n &&
      static_cast<int>(init->y.size()) == m) {
    Vec xi = Eigen::Map<const Vec>(init->x.data(), n);
    Vec si = Eigen::Map<const Vec>(init->s.data(), n);
    Vec yi = Eigen::Map<const Vec>(init->y.data(), m);
    rotate_pairs(canon.rot_offsets, xi);
    rotate_pairs(canon.rot_offsets, si);
    xi.array() /= dc.array();
    si.array() *= dc.array();
    yi.array() /= dr.array();
    if (interior_margin(xi) > 1e-8 && interior_margin(si) > 1e-8) {
      x = xi;
      s = si;
      y = yi;
    }
  }

  KktSolver kkt;
  kkt.setup(A, canon);

  const double ftol = settings.feasibility_tolerance;
  const double gtol = settings.gap_tolerance;
  const double nu1 = canon.nu + 1;

  ConicSolution out;
  out.primal.assign(n, 0.0);
  out.dual_equality.assign(m, 0.0);
  out.dual_cone.assign(n, 0.0);

  auto finish_point = [&](SolveStatus status) {
    const double t = tau > 1e-300 ? tau : 1.0;
    Vec xo = x / t, so = s / t, yo = y / t;
    xo.array() *= dc.array();
    so.array() /= dc.array();
    yo.array() *= dr.array();
    rotate_pairs(canon.rot_offsets, xo);
    rotate_pairs(canon.rot_offsets, so);
    Eigen::Map<Vec>(out.primal.data(), n) = xo;
    Eigen::Map<Vec>(out.dual_cone.data(), n) = so;
    Eigen::Map<Vec>(out.dual_equality.data(), m) = yo;
    out.status = status;
  };

  auto current_residuals = [&]() {
    Residuals r;
    Vec pvec = (A * x - b * tau).cwiseQuotient(dr) / tau;
    Vec dvec = (At * y + s - c * tau).cwiseQuotient(dc) / tau;
    r.pres_abs = pvec.norm();
    r.dres_abs = dvec.norm();
    r.pres = r.pres_abs / (1.0 + norm_b0);
    r.dres = r.dres_abs / (1.0 + norm_c0);
    r.pobj = c.dot(x) / tau;
    r.dobj = b.dot(y) / tau;
    r.relgap = std::abs(r.pobj - r.dobj) /
               std::max({1.0, std::abs(r.pobj), std::abs(r.dobj)});
    return r;
  };

  Residuals best;
  int iter = 0;
  SolveStatus exit_status = SolveStatus::iteration_limit;
  bool have_certificate = false;

  // scratch
  Vec h_nn(canon.nn_idx.size());
  Vec lam_nn(canon.nn_idx.size());

  for (iter = 0; iter <= settings.max_iterations; ++iter) {
    if (!x.allFinite() || !s.allFinite() || !y.allFinite() ||
        !std::isfinite(tau) || !std::isfinite(kappa)) {
      exit_status = SolveStatus::numerical_failure;
      break;
    }

    Residuals r = current_residuals();
    best = r;
    if (settings.verbose) {
      std::printf("iter %3d  pres %9.2e  dres %9.2e  gap %9.2e  tau %8.2e  kappa %8.2e\n",
                  iter, r.pres, r.dres, r.relgap, tau, kappa);
    }
    if (r.pres <= ftol && r.dres <= ftol && r.relgap <= gtol) {
      exit_status = SolveStatus::optimal;
      break;
    }
    // certificates of infeasibility / unboundedness
    const double bty = b.dot(y);
    if (bty > 0) {
      const double res = (At * y + s).cwiseQuotient(dc).norm() / bty;
      if (res <= ftol * cert_scale) {
        Vec yo = y.cwiseProduct(dr) / bty;
        Vec so = (s / bty).cwiseQuotient(dc);
        rotate_pairs(canon.rot_offsets, so);
        Eigen::Map<Vec>(out.dual_equality.data(), m) = yo;
        Eigen::Map<Vec>(out.dual_cone.data(), n) = so;
        exit_status = SolveStatus::primal_infeasible;
        have_certificate = true;
        break;
      }
    }
    const double ctx = c.dot(x);
    if (ctx < 0) {
      const double res = (A * x).cwiseQuotient(dr).norm() / (-ctx);
      if (res <= ftol * cert_scale) {
        Vec xo = (x / (-ctx)).cwiseProduct(dc);
        rotate_pairs(canon.rot_offsets, xo);
        Eigen::Map<Vec>(out.primal.data(), n) = xo;
        exit_status = SolveStatus::dual_infeasible;
        have_certificate = true;
        break;
      }
    }
    if (iter == settings.max_iterations) {
      exit_status = SolveStatus::iteration_limit;
      break;
    }

    // --- Nesterov-Todd scaling -------------------------------------------
    for (size_t k = 0; k < canon.nn_idx.size(); ++k) {
      const int i = canon.nn_idx[k];
      h_nn[k] = s[i] / x[i];
      lam_nn[k] = std::sqrt(x[i] * s[i]);
    }
    bool scaling_ok = true;
    for (SocBlock& blk : canon.soc) {
      const auto xb = x.segment(blk.offset, blk.dim);
      const auto sb = s.segment(blk.offset, blk.dim);
      const double xjx = xb[0] * xb[0] - xb.tail(blk.dim - 1).squaredNorm();
      const double sjs = sb[0] * sb[0] - sb.tail(blk.dim - 1).squaredNorm();
      if (!(xjx > 0) || !(sjs > 0)) {
        scaling_ok = false;
        break;
      }
      Vec xbar = xb / std::sqrt(xjx), sbar = sb / std::sqrt(sjs);
      const double gamma = std::sqrt((1.0 + xbar.dot(sbar)) / 2.0);
      Vec wbar = xbar;
      wbar[0] += sbar[0];
      wbar.tail(blk.dim - 1) -= sbar.tail(blk.dim - 1);
      wbar /= 2.0 * gamma;
      // W is the quadratic representation of v = sqrt_J(beta*wbar):
      // W = 2vv' - beta*J satisfies W s = W^-1 x (the NT scaled point).
      const double beta = std::pow(xjx / sjs, 0.25);
      Vec v(blk.dim);
      v[0] = std::sqrt(beta * (wbar[0] + 1.0) / 2.0);
      v.tail(blk.dim - 1) = beta * wbar.tail(blk.dim - 1) / (2.0 * v[0]);
      blk.W = 2.0 * v * v.transpose();
      blk.W(0, 0) -= beta;
      for (int i = 1; i < blk.dim; ++i) blk.W(i, i) += beta;
      Vec jv = v;
      jv.tail(blk.dim - 1) = -v.tail(blk.dim - 1);
      blk.Winv = (2.0 * jv * jv.transpose()) / (beta * beta);
      blk.Winv(0, 0) -= 1.0 / beta;
      for (int i = 1; i < blk.dim; ++i) blk.Winv(i, i) += 1.0 / beta;
      blk.H = blk.Winv * blk.Winv;
      blk.lambda = blk.W * sb;
    }
    if (!scaling_ok) {
      exit_status = SolveStatus::numerical_failure;
      break;
    }

    const double mu = (x.dot(s) + tau * kappa) / nu1;

    double eps = settings.static_regularization;
    bool fact = kkt.factorize(canon, h_nn, eps);
    for (int tries = 0; !fact && tries < 2; ++tries) {
      eps *= 100.0;
      fact = kkt.factorize(canon, h_nn, eps);
    }
    if (!fact) {
      exit_status = SolveStatus::numerical_failure;
      break;
    }

    // K [x1;y1] = [c; b]
    Vec rhs1(n + m);
    rhs1.head(n) = c;
    rhs1.tail(m) = b;
    Vec z1 = kkt.solve(canon, h_nn, rhs1);
    const Vec x1 = z1.head(n), y1 = z1.tail(m);
    const double denom = c.dot(x1) - b.dot(y1) - kappa / tau;

    // residuals of the homogeneous system
    Vec rx = At * y + s - c * tau;
    Vec ry = A * x - b * tau;
    const double rt = kappa + c.dot(x) - b.dot(y);

    // one Newton direction for a given sigma and complementarity targets
    Vec dx(n), dy(m), ds(n);
    double dtau = 0, dkappa = 0;
    auto direction = [&](double sigma, const Vec& dc_target, double dk_target) {
      Vec rhs2(n + m);
      Vec winv_ldc(n);
      for (size_t k = 0; k < canon.nn_idx.size(); ++k) {
        const int i = canon.nn_idx[k];
        // W^-1 (lambda \ d) with W = diag(sqrt(x/s)): d / lambda / w
        winv_ldc[i] = dc_target[i] / lam_nn[k] * std::sqrt(s[i] / x[i]);
      }
      for (const SocBlock& blk : canon.soc) {
        const auto dseg = dc_target.segment(blk.offset, blk.dim);
        const auto& lam = blk.lambda;
        const double det =
            lam[0] * lam[0] - lam.tail(blk.dim - 1).squaredNorm();
        Vec q(blk.dim);
        q[0] = (lam[0] * dseg[0] - lam.tail(blk.dim - 1).dot(dseg.tail(blk.dim - 1))) / det;
        q.tail(blk.dim - 1) =
            (dseg.tail(blk.dim - 1) - q[0] * lam.tail(blk.dim - 1)) / lam[0];
        winv_ldc.segment(blk.offset, blk.dim) = blk.Winv * q;
      }
      const double om = 1.0 - sigma;
      rhs2.head(n) = -om * rx - winv_ldc;
      rhs2.tail(m) = -om * ry;
      Vec z2 = kkt.solve(canon, h_nn, rhs2);
      const Vec x2 = z2.head(n), y2 = z2.tail(m);
      dtau = (-om * rt - dk_target / tau - c.dot(x2) + b.dot(y2)) / denom;
      dx = x2 + dtau * x1;
      dy = y2 + dtau * y1;
      // ds = W^-1(lambda \ dc) - H dx
      ds = winv_ldc;
      for (size_t k = 0; k < canon.nn_idx.size(); ++k) {
        const int i = canon.nn_idx[k];
        ds[i] -= h_nn[k] * dx[i];
      }
      for (const SocBlock& blk : canon.soc)
        ds.segment(blk.offset, blk.dim) -= blk.H * dx.segment(blk.offset, blk.dim);
      dkappa = (dk_target - kappa * dtau) / tau;
    };

    auto max_step = [&](const Vec& px, const Vec& ps, double ptau, double pkappa) {
      double a = kInf;
      for (int i : canon.nn_idx) {
        a = std::min(a, nonneg_max_step(x[i], px[i]));
        a = std::min(a, nonneg_max_step(s[i], ps[i]));
      }
      for (const SocBlock& blk : canon.soc) {
        a = std::min(a, soc_max_step(x.segment(blk.offset, blk.dim),
                                     px.segment(blk.offset, blk.dim)));
        a = std::min(a, soc_max_step(s.segment(blk.offset, blk.dim),
                                     ps.segment(blk.offset, blk.dim)));
      }
      a = std::min(a, nonneg_max_step(tau, ptau));
      a = std::min(a, nonneg_max_step(kappa, pkappa));
      return a;
    };

    // predictor: full residual + lambda o lambda elimination
    Vec dc_aff(n);
    for (size_t k = 0; k < canon.nn_idx.size(); ++k)
      dc_aff[canon.nn_idx[k]] = -lam_nn[k] * lam_nn[k];
    for (const SocBlock& blk : canon.soc) {
      const auto& lam = blk.lambda;
      dc_aff[blk.offset] = -lam.squaredNorm();
      dc_aff.segment(blk.offset + 1, blk.dim - 1) =
          -2.0 * lam[0] * lam.tail(blk.dim - 1);
    }
    direction(0.0, dc_aff, -tau * kappa);

    const double alpha_aff = std::min(1.0, max_step(dx, ds, dtau, dkappa));
    double mu_aff = ((x + alpha_aff * dx).dot(s + alpha_aff * ds) +
                     (tau + alpha_aff * dtau) * (kappa + alpha_aff * dkappa)) /
                    nu1;
    mu_aff = std::max(mu_aff, 0.0);
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector: Mehrotra second-order term in the scaled space
    Vec dc_comb = dc_aff;
    {
      Vec u(n), v(n);
      for (size_t k = 0; k < canon.nn_idx.size(); ++k) {
        const int i = canon.nn_idx[k];
        const double w = std::sqrt(x[i] / s[i]);
        u[i] = dx[i] / w;
        v[i] = ds[i] * w;
        dc_comb[i] += -u[i] * v[i] + sigma * mu;
      }
      for (const SocBlock& blk : canon.soc) {
        Vec ub = blk.Winv * dx.segment(blk.offset, blk.dim);
        Vec vb = blk.W * ds.segment(blk.offset, blk.dim);
        dc_comb[blk.offset] += -ub.dot(vb) + sigma * mu;
        dc_comb.segment(blk.offset + 1, blk.dim - 1) -=
            ub[0] * vb.tail(blk.dim - 1) + vb[0] * ub.tail(blk.dim - 1);
      }
    }
    const double dk_comb = -tau * kappa - dtau * dkappa + sigma * mu;
    direction(sigma, dc_comb, dk_comb);

    double alpha = std::min(1.0, 0.98 * max_step(dx, ds, dtau, dkappa));

    // Mehrotra's second-order terms assume the combined step is close to a
    // full step; near a degenerate face the affine direction explodes and the
    // corrector poisons the search direction instead. When the corrected step
    // collapses, fall back to the plain centering direction.
    if (alpha < std::min(0.1, 0.5 * alpha_aff) || alpha < 1e-3) {
      Vec dc_center(n);
      for (size_t k = 0; k < canon.nn_idx.size(); ++k)
        dc_center[canon.nn_idx[k]] = -lam_nn[k] * lam_nn[k] + sigma * mu;
      for (const SocBlock& blk : canon.soc) {
        const auto& lam = blk.lambda;
        dc_center[blk.offset] = -lam.squaredNorm() + sigma * mu;
        dc_center.segment(blk.offset + 1, blk.dim - 1) =
            -2.0 * lam[0] * lam.tail(blk.dim - 1);
      }
      const Vec dx_c = dx, ds_c = ds, dy_c = dy;
      const double dtau_c = dtau, dkappa_c = dkappa;
      direction(sigma, dc_center, -tau * kappa + sigma * mu);
      const double alpha_plain =
          std::min(1.0, 0.98 * max_step(dx, ds, dtau, dkappa));
      if (alpha_plain > alpha) {
        alpha = alpha_plain;
      } else {
        dx = dx_c;
        ds = ds_c;
        dy = dy_c;
        dtau = dtau_c;
        dkappa = dkappa_c;
      }
    }
    if (settings.verbose)
      std::printf("      mu %9.2e  sigma %9.2e  alpha_aff %9.2e  alpha %9.2e\n",
                  mu, sigma, alpha_aff, alpha);
    if (!(alpha > 1e-11)) {
      exit_status = SolveStatus::numerical_failure;
      break;
    }
    x += alpha * dx;
    s += alpha * ds;
    y += alpha * dy;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }

  out.iterations = iter;
  if (!have_certificate) {
    // classify a result near the tolerance edge as optimal if it qualifies
    if (exit_status != SolveStatus::optimal && tau > 0 &&
        std::isfinite(best.pres)) {
      Residuals r = current_residuals();
      if (r.pres <= ftol && r.dres <= ftol && r.relgap <= gtol)
        exit_status = SolveStatus::optimal;
      best = r;
    }
    finish_point(exit_status);
    out.objective_value = best.pobj;
    out.duality_gap = std::abs(best.pobj - best.dobj);
    out.primal_residual = best.pres_abs;
    out.dual_residual = best.dres_abs;
  } else {
    out.status = exit_status;
    out.objective_value = std::numeric_limits<double>::quiet_NaN();
    out.duality_gap = std::numeric_limits<double>::quiet_NaN();
    out.primal_residual = std::numeric_limits<double>::quiet_NaN();
    out.dual_residual = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace laptime::conic
