#pragma once

namespace laptime {

struct SolverSettings {
  double feasibility_tolerance = 1e-7;
  double gap_tolerance = 1e-7;
  int max_iterations = 200;
  double static_regularization = 1e-8;
  bool verbose = false;
  void validate() const;
};

struct AlgorithmSettings {
  double damping = 0.5;              // costate under-relaxation factor
  int max_outer_iterations = 50;
  double time_tolerance = 1e-6;      // s, outer-loop convergence on lap time
  double gop_tie_tolerance = 1e-12;  // s/m, Hamiltonian tie band
  void validate() const;
};

}  // namespace laptime
