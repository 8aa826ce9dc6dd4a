#include "laptime/model/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "laptime/errors.hpp"

namespace laptime {

void SolverSettings::validate() const {
  if (!(feasibility_tolerance > 0) || !(gap_tolerance > 0))
    throw ValidationError("solver: tolerances must be > 0");
  if (max_iterations < 1) throw ValidationError("solver: max_iterations must be >= 1");
  if (!(static_regularization >= 0))
    throw ValidationError("solver: static_regularization must be >= 0");
}

void AlgorithmSettings::validate() const {
  if (!(damping > 0) || damping > 1.0)
    throw ValidationError("algorithm: damping must be in (0,1]");
  if (max_outer_iterations < 1)
    throw ValidationError("algorithm: max_outer_iterations must be >= 1");
  if (!(time_tolerance > 0)) throw ValidationError("algorithm: time_tolerance must be > 0");
  if (!(gop_tie_tolerance >= 0))
    throw ValidationError("algorithm: gop_tie_tolerance must be >= 0");
}

void Config::validate() const {
  vehicle.validate();
  powertrain.validate();
  transmission.validate();
  solver.validate();
  algorithm.validate();
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, int line) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x))
      throw ParseError("config: bad number '" + v + "'", line);
    return x;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("config: bad number '" + v + "'", line);
  }
}

int to_int(const std::string& v, int line) {
  double x = to_double(v, line);
  int i = static_cast<int>(std::lround(x));
  if (std::abs(x - i) > 1e-12) throw ParseError("config: expected integer", line);
  return i;
}

bool to_bool(const std::string& v, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("config: bad boolean '" + v + "'", line);
}

std::vector<double> to_list(const std::string& v, int line) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ParseError("config: empty list entry", line);
    out.push_back(to_double(item, line));
  }
  if (out.empty()) throw ParseError("config: empty list", line);
  return out;
}

TransmissionKind to_kind(const std::string& v, int line) {
  if (v == "fgt" || v == "FGT") return TransmissionKind::FGT;
  if (v == "mgt" || v == "MGT") return TransmissionKind::MGT;
  if (v == "cvt" || v == "CVT") return TransmissionKind::CVT;
  throw ParseError("config: unknown transmission kind '" + v + "'", line);
}

}  // namespace

Config parse_config(const std::string& text, const std::string& name) {
  Config cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  bool ratios_set = false;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("config: unterminated section", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (section != "vehicle" && section != "powertrain" &&
          section != "transmission" && section != "solver" &&
          section != "algorithm")
        throw ParseError("config: unknown section [" + section + "]", lineno);
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: expected key = value", lineno);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError("config: expected key = value", lineno);
    if (section.empty())
      throw ParseError("config: key before any section", lineno);

    bool known = true;
    if (section == "vehicle") {
      auto& v = cfg.vehicle;
      if (key == "base_mass") v.base_mass = to_double(val, lineno);
      else if (key == "rotational_mass_factor") v.rotational_mass_factor = to_double(val, lineno);
      else if (key == "aero_coefficient") v.aero_coefficient = to_double(val, lineno);
      else if (key == "rolling_force") v.rolling_force = to_double(val, lineno);
      else if (key == "wheel_radius") v.wheel_radius = to_double(val, lineno);
      else if (key == "lateral_accel_max") v.lateral_accel_max = to_double(val, lineno);
      else if (key == "speed_cap") v.speed_cap = to_double(val, lineno);
      else if (key == "brake_force_max_front") v.brake_force_max_front = to_double(val, lineno);
      else if (key == "brake_force_max_rear") v.brake_force_max_rear = to_double(val, lineno);
      else if (key == "traction_force_max") v.traction_force_max = to_double(val, lineno);
      else if (key == "aux_power") v.aux_power = to_double(val, lineno);
      else known = false;
    } else if (section == "powertrain") {
      auto& pt = cfg.powertrain;
      if (key == "em_loss_a0") pt.em_loss_a0 = to_double(val, lineno);
      else if (key == "em_loss_a1") pt.em_loss_a1 = to_double(val, lineno);
      else if (key == "em_loss_a2") pt.em_loss_a2 = to_double(val, lineno);
      else if (key == "em_loss_a3") pt.em_loss_a3 = to_double(val, lineno);
      else if (key == "em_torque_max") pt.em_torque_max = to_double(val, lineno);
      else if (key == "em_speed_max") pt.em_speed_max = to_double(val, lineno);
      else if (key == "em_power_max") pt.em_power_max = to_double(val, lineno);
      else if (key == "inverter_efficiency") pt.inverter_efficiency = to_double(val, lineno);
      else if (key == "battery_capacity") pt.battery_capacity = to_double(val, lineno);
      else if (key == "battery_consumption_limit") pt.battery_consumption_limit = to_double(val, lineno);
      else if (key == "battery_loss_coefficient") pt.battery_loss_coefficient = to_double(val, lineno);
      else known = false;
    } else if (section == "transmission") {
      auto& tr = cfg.transmission;
      if (key == "kind") tr.kind = to_kind(val, lineno);
      else if (key == "ratios") { tr.ratios = to_list(val, lineno); ratios_set = true; }
      else if (key == "ratio_min") tr.ratio_min = to_double(val, lineno);
      else if (key == "ratio_max") tr.ratio_max = to_double(val, lineno);
      else if (key == "n_gear") tr.n_gear = to_int(val, lineno);
      else if (key == "efficiency") tr.efficiency = to_double(val, lineno);
      else if (key == "mass_penalty_per_gear") tr.mass_penalty_per_gear = to_double(val, lineno);
      else if (key == "cvt_mass_penalty") tr.cvt_mass_penalty = to_double(val, lineno);
      else known = false;
    } else if (section == "solver") {
      auto& sv = cfg.solver;
      if (key == "feasibility_tolerance") sv.feasibility_tolerance = to_double(val, lineno);
      else if (key == "gap_tolerance") sv.gap_tolerance = to_double(val, lineno);
      else if (key == "max_iterations") sv.max_iterations = to_int(val, lineno);
      else if (key == "static_regularization") sv.static_regularization = to_double(val, lineno);
      else if (key == "verbose") sv.verbose = to_bool(val, lineno);
      else known = false;
    } else {  // algorithm
      auto& al = cfg.algorithm;
      if (key == "damping") al.damping = to_double(val, lineno);
      else if (key == "max_outer_iterations") al.max_outer_iterations = to_int(val, lineno);
      else if (key == "time_tolerance") al.time_tolerance = to_double(val, lineno);
      else if (key == "gop_tie_tolerance") al.gop_tie_tolerance = to_double(val, lineno);
      else known = false;
    }
    if (!known)
      throw ParseError("config: unknown key '" + key + "' in [" + section + "]",
                       lineno);
  }

  auto& tr = cfg.transmission;
  if (tr.kind == TransmissionKind::CVT) {
    tr.ratios.clear();
    tr.n_gear = 0;
  } else if (ratios_set) {
    tr.n_gear = static_cast<int>(tr.ratios.size());
  }
  cfg.validate();
  (void)name;
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace laptime
