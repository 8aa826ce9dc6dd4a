#pragma once

#include <string>

#include "laptime/conic/problem.hpp"

namespace laptime::conic {

// Plain-text round-trippable dump: header, cone list, then sparse objective,
// rhs and triplet-form matrix. Meant for offline debugging of misbehaving
// instances.
std::string dump_problem(const ConicProblem& problem);
ConicProblem parse_problem(const std::string& text);

void save_problem(const ConicProblem& problem, const std::string& path);
ConicProblem load_problem(const std::string& path);

}  // namespace laptime::conic
