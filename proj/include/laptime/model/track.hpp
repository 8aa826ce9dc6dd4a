#pragma once

#include <string>
#include <vector>

namespace laptime {

// A closed (or sectional) track sampled on a uniform spatial grid.
// Step i covers the interval [i*step_length, (i+1)*step_length); curvature
// is signed (left-hand corners negative or positive by source convention,
// only |curvature| enters the speed limits).
struct TrackProfile {
  double step_length = 0.0;        // m, uniform
  std::vector<double> curvature;   // 1/m, one entry per step
  int n_steps = 0;
  double total_length = 0.0;       // m
  std::string name;

  void validate() const;
};

// Builds a uniform-grid profile from per-step curvatures.
TrackProfile make_track(double step_length, std::vector<double> curvature,
                        std::string name = "");

// Loads a two-column (arc-length m, curvature 1/m) delimited text file and
// resamples it onto a uniform grid of spacing target_step by linear
// interpolation. Header lines that do not parse as two numbers are skipped
// only on the first row; malformed rows elsewhere raise ParseError with the
// line number. Arc-length must be strictly increasing.
TrackProfile load_track(const std::string& path, double target_step);

// As load_track but from an in-memory stream (used by tests).
TrackProfile load_track_text(const std::string& text, double target_step,
                             const std::string& name);

}  // namespace laptime
