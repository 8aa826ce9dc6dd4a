#pragma once

#include <string>

#include "laptime/model/specs.hpp"
#include "laptime/settings.hpp"

namespace laptime {

struct Config {
  VehicleSpec vehicle;
  PowertrainSpec powertrain;
  TransmissionSpec transmission;
  SolverSettings solver;
  AlgorithmSettings algorithm;
  void validate() const;
};

// INI-style config: sections [vehicle], [powertrain], [transmission],
// [solver], [algorithm]; keys named exactly like the struct fields.
// Unknown sections or keys raise ParseError with the offending line.
Config load_config(const std::string& path);
Config parse_config(const std::string& text, const std::string& name = "<config>");

}  // namespace laptime
