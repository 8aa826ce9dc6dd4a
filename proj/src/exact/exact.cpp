#include "laptime/exact/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <string>
#include <utility>

#include "laptime/conic/solver.hpp"
#include "laptime/errors.hpp"

namespace laptime::exact {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relaxation bounds carry solver noise; pruning keeps this much slack so the
// certified gap still holds end to end.
constexpr double kBoundSafety = 2e-7;

void check_section(const TrackProfile& section,
                   const transcribe::BoundaryConditions& bc,
                   const TransmissionSpec& trans) {
  if (trans.kind != TransmissionKind::MGT)
    throw ValidationError("exact: gear search needs an MGT transmission");
  if (bc.periodic)
    throw ValidationError(
        "exact: sections are not periodic; supply an entry kinetic energy");
  if (!(bc.entry_kinetic_energy > 0))
    throw ValidationError("exact: section entry kinetic energy must be > 0");
  section.validate();
}

struct CopOutcome {
  bool feasible = false;
  ContinuousSolution solution;
};

CopOutcome solve_fixed(const TrackProfile& section, const VehicleSpec& vehicle,
                       const PowertrainSpec& power, const TransmissionSpec& trans,
                       const std::vector<int>& gears,
                       const transcribe::BoundaryConditions& bc,
                       const SolverSettings& solver) {
  GearTrajectory g;
  g.active_gear = gears;
  const transcribe::Transcription tr =
      transcribe::build_cop(section, vehicle, power, trans, g, bc);
  const conic::ConicSolution raw = conic::solve(tr.problem, solver);
  CopOutcome out;
  if (raw.status == conic::SolveStatus::optimal) {
    out.feasible = true;
    out.solution = transcribe::extract(raw, tr.layout, vehicle, power);
  }
  return out;
}

struct OpenNode {
  BnbNode node;
  // Per-step simplex weights from the node's relaxation; empty when the
  // relaxation stalled and branching falls back to the lowest free step.
  std::vector<std::vector<double>> weights;
};

struct BoundOrder {
  bool operator()(const OpenNode& a, const OpenNode& b) const {
    if (a.node.bound != b.node.bound) return a.node.bound > b.node.bound;
    return a.node.id > b.node.id;
  }
};

}  // namespace

ExactResult solve_exact(const TrackProfile& section, const VehicleSpec& vehicle,
                        const PowertrainSpec& power, const TransmissionSpec& trans,
                        const transcribe::BoundaryConditions& bc,
                        const SolverSettings& solver, const ExactSettings& settings) {
  check_section(section, bc, trans);
  const int n = section.n_steps;
  if (n > settings.max_exact_steps)
    throw ValidationError("exact: section has " + std::to_string(n) +
                          " steps, limit is " +
                          std::to_string(settings.max_exact_steps));
  const int n_gear = trans.n_gear;

  // Relaxed solves sit on simplex vertices where strict complementarity
  // fails, so their residuals floor around 1e-7; don't ask for more.
  SolverSettings relax = solver;
  relax.feasibility_tolerance = std::max(relax.feasibility_tolerance, 1e-7);
  relax.gap_tolerance = std::max(relax.gap_tolerance, 1e-7);

  ExactResult res;
  double incumbent = kInf;
  std::set<std::vector<int>> leaves_tried;
  bool any_bound_pruned = false;

  auto offer_incumbent = [&](const std::vector<int>& gears) {
    if (!leaves_tried.insert(gears).second) return;
    const CopOutcome cop =
        solve_fixed(section, vehicle, power, trans, gears, bc, solver);
    if (cop.feasible && cop.solution.lap_time < incumbent) {
      incumbent = cop.solution.lap_time;
      res.gears.active_gear = gears;
      res.solution = cop.solution;
    }
  };

  std::priority_queue<OpenNode, std::vector<OpenNode>, BoundOrder> open;
  long next_id = 0;

  // Evaluates one node (relaxation or leaf) and queues it unless pruned.
  auto evaluate_and_push = [&](std::vector<int> fixed, int depth,
                               double parent_bound) {
    ++res.node_count;
    if (std::none_of(fixed.begin(), fixed.end(), [](int g) { return g == 0; })) {
      offer_incumbent(fixed);
      return;
    }
    const transcribe::Transcription tr =
        transcribe::build_relaxed(section, vehicle, power, trans, fixed, bc);
    const conic::ConicSolution raw = conic::solve(tr.problem, relax);
    if (raw.status == conic::SolveStatus::primal_infeasible) return;

    OpenNode entry;
    entry.node.bound = parent_bound;
    if (raw.status == conic::SolveStatus::optimal) {
      const ContinuousSolution sol =
          transcribe::extract(raw, tr.layout, vehicle, power);
      entry.node.bound = std::max(parent_bound, sol.lap_time);
      entry.weights = transcribe::extract_weights(raw, tr.layout);
      // Rounding heuristic: take the heaviest gear at every undecided step.
      std::vector<int> rounded = fixed;
      for (int i = 0; i < n; ++i) {
        if (rounded[static_cast<std::size_t>(i)] != 0) continue;
        const auto& w = entry.weights[static_cast<std::size_t>(i)];
        rounded[static_cast<std::size_t>(i)] = static_cast<int>(
            std::max_element(w.begin(), w.end()) - w.begin() + 1);
      }
      offer_incumbent(rounded);
    }
    if (entry.node.bound - kBoundSafety >= incumbent - settings.gap_tolerance) {
      any_bound_pruned = true;
      return;
    }
    entry.node.id = next_id++;
    entry.node.depth = depth;
    entry.node.fixed = std::move(fixed);
    open.push(std::move(entry));
  };

  evaluate_and_push(std::vector<int>(static_cast<std::size_t>(n), 0), 0, 0.0);

  while (!open.empty()) {
    if (res.node_count >= settings.node_budget) {
      res.budget_exhausted = true;
      break;
    }
    const OpenNode top = open.top();
    open.pop();
    if (top.node.bound - kBoundSafety >= incumbent - settings.gap_tolerance) {
      // Best-first: every remaining node is at least as bad.
      any_bound_pruned = true;
      while (!open.empty()) open.pop();
      break;
    }

    // Branch the most fractional step: the undecided step whose largest
    // weight is smallest (ties to the lowest index); children ordered by
    // descending weight so the relaxation's preference is explored first.
    int branch_step = -1;
    std::vector<int> gear_order(static_cast<std::size_t>(n_gear));
    for (int g = 0; g < n_gear; ++g)
      gear_order[static_cast<std::size_t>(g)] = g + 1;
    if (!top.weights.empty()) {
      double best_peak = 2.0;
      for (int i = 0; i < n; ++i) {
        if (top.node.fixed[static_cast<std::size_t>(i)] != 0) continue;
        const auto& w = top.weights[static_cast<std::size_t>(i)];
        const double peak = *std::max_element(w.begin(), w.end());
        if (peak < best_peak) {
          best_peak = peak;
          branch_step = i;
        }
      }
    } else {
      for (int i = 0; i < n && branch_step < 0; ++i)
        if (top.node.fixed[static_cast<std::size_t>(i)] == 0) branch_step = i;
    }
    if (branch_step < 0) continue;
    if (!top.weights.empty()) {
      const auto& w = top.weights[static_cast<std::size_t>(branch_step)];
      std::stable_sort(gear_order.begin(), gear_order.end(), [&](int a, int b) {
        return w[static_cast<std::size_t>(a - 1)] > w[static_cast<std::size_t>(b - 1)];
      });
    }

    for (int g : gear_order) {
      if (res.node_count >= settings.node_budget) {
        res.budget_exhausted = true;
        break;
      }
      std::vector<int> child = top.node.fixed;
      child[static_cast<std::size_t>(branch_step)] = g;
      evaluate_and_push(std::move(child), top.node.depth + 1, top.node.bound);
    }
    if (res.budget_exhausted) break;
  }

  if (!(incumbent < kInf)) {
    if (res.budget_exhausted)
      throw ValidationError(
          "exact: node budget exhausted before any feasible gear sequence was "
          "found");
    throw ValidationError(
        "exact: every gear sequence on this section is infeasible");
  }

  // Certified lower bound: open nodes are covered by the queue head, pruned
  // subtrees by the pruning threshold; with neither the tree was exhausted.
  double lower = incumbent;
  if (any_bound_pruned) lower = std::min(lower, incumbent - settings.gap_tolerance);
  if (!open.empty()) lower = std::min(lower, open.top().node.bound);
  res.bound_gap = std::max(0.0, incumbent - lower);
  return res;
}

ExactResult enumerate_exhaustive(const TrackProfile& section,
                                 const VehicleSpec& vehicle,
                                 const PowertrainSpec& power,
                                 const TransmissionSpec& trans,
                                 const transcribe::BoundaryConditions& bc,
                                 const SolverSettings& solver) {
  check_section(section, bc, trans);
  const int n = section.n_steps;
  const int n_gear = trans.n_gear;
  double combos = 1.0;
  for (int i = 0; i < n; ++i) {
    combos *= n_gear;
    if (combos > 1e5)
      throw ValidationError("enumerate_exhaustive: n_gear^n_steps exceeds 1e5");
  }

  ExactResult res;
  double best = kInf;
  std::vector<int> gears(static_cast<std::size_t>(n), 1);
  while (true) {
    ++res.node_count;
    const CopOutcome cop =
        solve_fixed(section, vehicle, power, trans, gears, bc, solver);
    if (cop.feasible && cop.solution.lap_time < best) {
      best = cop.solution.lap_time;
      res.gears.active_gear = gears;
      res.solution = cop.solution;
    }
    int i = 0;  // odometer, lowest step spins fastest
    while (i < n && ++gears[static_cast<std::size_t>(i)] > n_gear) {
      gears[static_cast<std::size_t>(i)] = 1;
      ++i;
    }
    if (i == n) break;
  }
  if (!(best < kInf))
    throw ValidationError(
        "enumerate_exhaustive: every gear sequence on this section is "
        "infeasible");
  return res;
}

}  // namespace laptime::exact
