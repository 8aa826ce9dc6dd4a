#include "laptime/driver/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "laptime/conic/solver.hpp"
#include "laptime/errors.hpp"
#include "laptime/gop/gop.hpp"

namespace laptime::driver {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void require_geared(const TransmissionSpec& trans, const char* what) {
  if (trans.kind == TransmissionKind::CVT)
    throw ValidationError(std::string(what) +
                          " requires a geared transmission; the CVT problem "
                          "is a single convex solve");
}

struct CopSolve {
  conic::SolveStatus status = conic::SolveStatus::numerical_failure;
  ContinuousSolution solution;
  int iterations = 0;
};

CopSolve solve_cop(const TrackProfile& track, const VehicleSpec& vehicle,
                   const PowertrainSpec& power, const TransmissionSpec& trans,
                   const GearTrajectory& gears, const SolverSettings& solver,
                   const transcribe::BoundaryConditions& bc) {
  const transcribe::Transcription tr = transcribe::build_cop(track, vehicle, power, trans, gears, bc);
  const conic::ConicSolution raw = conic::solve(tr.problem, solver);
  CopSolve out;
  out.status = raw.status;
  out.iterations = raw.iterations;
  if (raw.status == conic::SolveStatus::optimal)
    out.solution = transcribe::extract(raw, tr.layout, vehicle, power);
  return out;
}

int count_changes(const GearTrajectory& a, const GearTrajectory& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.active_gear.size(); ++i)
    if (a.active_gear[i] != b.active_gear[i]) ++n;
  return n;
}

}  // namespace

DampedCostates damp(const DampedCostates& previous, const DampedCostates& fresh,
                    double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw ValidationError("damp: beta must be in (0, 1]");
  if (fresh.kinetic.size() != fresh.battery.size())
    throw ValidationError("damp: fresh costate arrays differ in length");
  if (previous.empty()) return fresh;
  if (previous.kinetic.size() != fresh.kinetic.size() ||
      previous.battery.size() != fresh.battery.size())
    throw ValidationError("damp: previous/fresh costate lengths differ");
  DampedCostates out;
  out.kinetic.resize(fresh.kinetic.size());
  out.battery.resize(fresh.battery.size());
  for (std::size_t i = 0; i < fresh.kinetic.size(); ++i)
    out.kinetic[i] = (1.0 - beta) * previous.kinetic[i] + beta * fresh.kinetic[i];
  for (std::size_t i = 0; i < fresh.battery.size(); ++i)
    out.battery[i] = (1.0 - beta) * previous.battery[i] + beta * fresh.battery[i];
  return out;
}

GearTrajectory initial_gears(const TrackProfile& track, const VehicleSpec& vehicle,
                             const PowertrainSpec& power,
                             const TransmissionSpec& trans) {
  require_geared(trans, "initial_gears");
  track.validate();
  vehicle.validate();
  power.validate();
  trans.validate();

  const int n = track.n_steps;
  const double ds = track.step_length;
  const double m_dyn = dynamic_mass(vehicle, trans);
  const double k_aero = 2.0 * vehicle.aero_coefficient / m_dyn;
  const double brake =
      vehicle.brake_force_max_front + vehicle.brake_force_max_rear;

  std::vector<double> e = max_kinetic_energy(track, vehicle, m_dyn);
  // Velocity envelope: accelerate at the traction/power limit, brake at the
  // brake caps, never above the lateral/straight-line cap. Two wrapped
  // passes each way settle the periodic case; a section start only tightens.
  const auto cap = e;  // copy: per-step admissible maximum
  for (int lap = 0; lap < 2; ++lap) {
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      const double v = std::sqrt(2.0 * e[i] / m_dyn);
      const double f_acc =
          std::min(vehicle.traction_force_max,
                   trans.efficiency * power.em_power_max / std::max(v, 1.0));
      const double gain = ds * (f_acc - vehicle.rolling_force - k_aero * e[i]);
      e[j] = std::min(cap[j], std::min(e[j], std::max(e[i] + gain, 0.0)));
    }
    for (int i = n - 1; i >= 0; --i) {
      const int j = (i + 1) % n;
      const double allow =
          e[j] + ds * (brake + vehicle.rolling_force + k_aero * e[j]);
      e[i] = std::min(e[i], allow);
    }
  }

  const double w_best = power.best_efficiency_speed();
  GearTrajectory out;
  out.active_gear.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double v = std::sqrt(2.0 * std::max(e[i], 1.0) / m_dyn);
    int pick = 0;
    double dist = kInf;
    for (int g = 1; g <= trans.n_gear; ++g) {
      const double omega = trans.ratios[g - 1] * v / vehicle.wheel_radius;
      if (omega > power.em_speed_max * (1.0 + 1e-9)) continue;
      const double d = std::abs(omega - w_best);
      if (d < dist) {
        dist = d;
        pick = g;
      }
    }
    if (pick == 0)
      throw ValidationError("initial_gears: no feasible gear at step " +
                            std::to_string(i));
    out.active_gear[static_cast<std::size_t>(i)] = pick;
  }
  return out;
}

IterativeResult run_iterative(const TrackProfile& track, const VehicleSpec& vehicle,
                              const PowertrainSpec& power,
                              const TransmissionSpec& trans,
                              const SolverSettings& solver,
                              const AlgorithmSettings& algo,
                              const transcribe::BoundaryConditions& bc) {
  require_geared(trans, "run_iterative");
  solver.validate();
  algo.validate();

  const int n = track.n_steps;
  double beta = algo.damping;
  int halvings = 0;

  GearTrajectory current = initial_gears(track, vehicle, power, trans);
  std::vector<GearTrajectory> history{current};

  // Gear trajectory behind the last successful solve, plus the Hamiltonian
  // samples that proposed the changes leading to `current`; both drive the
  // infeasibility-recovery reversion.
  GearTrajectory last_ok;
  std::vector<gop::HamiltonianSample> last_samples;

  IterativeResult res;
  DampedCostates damped;
  double best_time = kInf;
  double prev_time = kInf;

  for (int k = 1; k <= algo.max_outer_iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.k = k;
    rec.damping = beta;

    CopSolve cop = solve_cop(track, vehicle, power, trans, current, solver, bc);
    if (cop.status != conic::SolveStatus::optimal) {
      if (k == 1)
        throw ValidationError(
            "run_iterative: initial gear trajectory infeasible (status " +
            std::to_string(static_cast<int>(cop.status)) + ")");
      // Revert proposed gear changes, least Hamiltonian improvement first,
      // until the convex problem is solvable again.
      std::vector<std::pair<double, int>> order;
      for (int i = 0; i < n; ++i) {
        const int now = current.active_gear[static_cast<std::size_t>(i)];
        const int was = last_ok.active_gear[static_cast<std::size_t>(i)];
        if (now == was) continue;
        const auto& h = last_samples[static_cast<std::size_t>(i)].hamiltonian;
        order.emplace_back(h[static_cast<std::size_t>(was - 1)] -
                               h[static_cast<std::size_t>(now - 1)],
                           i);
      }
      if (order.empty())
        throw ValidationError(
            "run_iterative: solver failed on a previously solvable trajectory");
      std::sort(order.begin(), order.end());
      for (const auto& [impr, i] : order) {
        current.active_gear[static_cast<std::size_t>(i)] =
            last_ok.active_gear[static_cast<std::size_t>(i)];
        ++rec.reverted_steps;
        cop = solve_cop(track, vehicle, power, trans, current, solver, bc);
        if (cop.status == conic::SolveStatus::optimal) break;
      }
      if (cop.status != conic::SolveStatus::optimal)
        throw ValidationError(
            "run_iterative: infeasibility recovery exhausted all reversions");
    }

    rec.lap_time = cop.solution.lap_time;
    rec.solver_iterations = cop.iterations;

    DampedCostates fresh;
    fresh.kinetic = cop.solution.costate_kinetic;
    fresh.battery = cop.solution.costate_battery;
    damped = damp(damped, fresh, k == 1 ? 1.0 : beta);

    const gop::GopResult gopped =
        gop::solve_gop(cop.solution, damped.kinetic, damped.battery, vehicle,
                       power, trans, current, algo.gop_tie_tolerance);
    rec.gear_changes = count_changes(gopped.gears, current);
    rec.wall_time_s = seconds_since(t0);
    res.trace.push_back(rec);

    if (cop.solution.lap_time < best_time) {
      best_time = cop.solution.lap_time;
      res.solution = cop.solution;
      res.gears = current;
      res.costates = damped;
    }

    if (rec.gear_changes == 0 && k >= 2 &&
        std::abs(cop.solution.lap_time - prev_time) <= algo.time_tolerance) {
      res.solution = std::move(cop.solution);
      res.gears = current;
      res.costates = damped;
      res.converged = true;
      return res;
    }
    prev_time = cop.solution.lap_time;

    if (rec.gear_changes > 0) {
      // Cycle guard: a revisit of any non-adjacent earlier trajectory means
      // the undamped alternation is orbiting; cool it down.
      bool repeat = false;
      for (const GearTrajectory& h : history)
        if (h == gopped.gears) {
          repeat = true;
          break;
        }
      if (repeat) {
        if (halvings >= 3) return res;  // best incumbent, converged = false
        beta *= 0.5;
        ++halvings;
      }
    }

    last_ok = current;
    last_samples = gopped.samples;
    history.push_back(gopped.gears);
    current = gopped.gears;
  }
  return res;
}

namespace {

// Deterministic golden-section minimization; returns the best evaluated
// point. `eval` returns +inf for designs whose solve fails.
template <typename F>
std::pair<double, double> golden_min(double lo, double hi, double x_tol, F&& eval,
                                     int* evaluations) {
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double best_x = lo, best_f = kInf;
  auto probe = [&](double x) {
    const double f = eval(x);
    ++*evaluations;
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
    return f;
  };
  if (!(hi > lo)) {
    probe(lo);
    return {best_x, best_f};
  }
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = probe(c), fd = probe(d);
  while (b - a > x_tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = probe(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = probe(d);
    }
  }
  return {best_x, best_f};
}

}  // namespace

DesignResult design_search(const TrackProfile& track, const VehicleSpec& vehicle,
                           const PowertrainSpec& power,
                           const TransmissionSpec& seed,
                           const std::vector<std::pair<double, double>>& bounds,
                           const SolverSettings& solver,
                           const AlgorithmSettings& algo,
                           const transcribe::BoundaryConditions& bc) {
  seed.validate();
  const int n_coord = seed.kind == TransmissionKind::MGT ? seed.n_gear : 1;
  if (static_cast<int>(bounds.size()) != n_coord)
    throw ValidationError("design_search: need one ratio bound per searched "
                          "coordinate");
  for (const auto& [lo, hi] : bounds)
    if (!(lo > 0 && lo <= hi))
      throw ValidationError("design_search: bounds must satisfy 0 < lo <= hi");

  DesignResult res;
  res.lap_time = kInf;

  // One converged lap-time evaluation; +inf when the solve fails. Stores the
  // full result behind the incumbent design.
  auto eval_design = [&](const TransmissionSpec& cand) -> double {
    double t = kInf;
    IterativeResult run;
    try {
      if (cand.kind == TransmissionKind::MGT) {
        run = run_iterative(track, vehicle, power, cand, solver, algo, bc);
        t = run.solution.lap_time;
      } else {
        const transcribe::Transcription tr = transcribe::build_fgt_cvt(track, vehicle, power, cand, bc);
        const conic::ConicSolution raw = conic::solve(tr.problem, solver);
        if (raw.status != conic::SolveStatus::optimal) return kInf;
        run.solution = transcribe::extract(raw, tr.layout, vehicle, power);
        if (cand.kind == TransmissionKind::FGT)
          run.gears = constant_gears(track.n_steps, 1);
        run.converged = true;
        t = run.solution.lap_time;
      }
    } catch (const ValidationError&) {
      return kInf;
    }
    res.trace.emplace_back(cand.kind == TransmissionKind::CVT
                               ? std::vector<double>{cand.ratio_min, cand.ratio_max}
                               : cand.ratios,
                           t);
    if (t < res.lap_time) {
      res.lap_time = t;
      res.transmission = cand;
      res.best = std::move(run);
    }
    return t;
  };

  const double x_tol = 1e-3;
  switch (seed.kind) {
    case TransmissionKind::FGT: {
      golden_min(bounds[0].first, bounds[0].second, x_tol,
                 [&](double r) {
                   TransmissionSpec cand = seed;
                   cand.ratios = {r};
                   return eval_design(cand);
                 },
                 &res.evaluations);
      break;
    }
    case TransmissionKind::CVT: {
      const double lo = std::max(bounds[0].first, seed.ratio_min);
      golden_min(lo, std::max(lo, bounds[0].second), x_tol,
                 [&](double top) {
                   TransmissionSpec cand = seed;
                   cand.ratio_max = top;
                   return eval_design(cand);
                 },
                 &res.evaluations);
      break;
    }
    case TransmissionKind::MGT: {
      std::vector<double> ratios = seed.ratios;
      const double margin = 1e-3;
      const int max_passes = 8;
      double pass_start = eval_design(seed);
      ++res.evaluations;
      for (int pass = 0; pass < max_passes; ++pass) {
        for (int i = 0; i < seed.n_gear; ++i) {
          double lo = bounds[static_cast<std::size_t>(i)].first;
          double hi = bounds[static_cast<std::size_t>(i)].second;
          if (i + 1 < seed.n_gear) lo = std::max(lo, ratios[i + 1] + margin);
          if (i > 0) hi = std::min(hi, ratios[i - 1] - margin);
          if (!(lo <= hi)) continue;
          auto [x, f] = golden_min(lo, hi, x_tol,
                                   [&](double r) {
                                     TransmissionSpec cand = seed;
                                     cand.ratios = ratios;
                                     cand.ratios[i] = r;
                                     return eval_design(cand);
                                   },
                                   &res.evaluations);
          if (f < kInf) ratios[i] = x;
        }
        const double pass_end = res.lap_time;
        if (pass_start - pass_end < 1e-4) break;
        pass_start = pass_end;
      }
      break;
    }
  }
  if (!(res.lap_time < kInf))
    throw ValidationError("design_search: no design in bounds was solvable");
  return res;
}

}  // namespace laptime::driver
