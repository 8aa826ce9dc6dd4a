#include "laptime/model/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "laptime/errors.hpp"

namespace laptime {

void TrackProfile::validate() const {
  if (!(step_length > 0.0)) throw ValidationError("track: step_length must be > 0");
  if (n_steps < 2) throw ValidationError("track: need at least 2 steps");
  if (static_cast<int>(curvature.size()) != n_steps)
    throw ValidationError("track: curvature length != n_steps");
  if (std::abs(total_length - n_steps * step_length) >
      1e-9 * std::max(1.0, total_length))
    throw ValidationError("track: total_length inconsistent with grid");
  for (double k : curvature)
    if (!std::isfinite(k)) throw ValidationError("track: non-finite curvature");
}

TrackProfile make_track(double step_length, std::vector<double> curvature,
                        std::string name) {
  TrackProfile t;
  t.step_length = step_length;
  t.n_steps = static_cast<int>(curvature.size());
  t.curvature = std::move(curvature);
  t.total_length = t.n_steps * step_length;
  t.name = std::move(name);
  t.validate();
  return t;
}

namespace {

struct SamplePoint {
  double s;
  double kappa;
};

std::vector<SamplePoint> parse_rows(const std::string& text) {
  std::vector<SamplePoint> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    std::istringstream ls(line);
    double s, k;
    if (!(ls >> s >> k)) {
      std::string tok;
      std::istringstream probe(line);
      if (!(probe >> tok)) continue;  // blank
      if (tok[0] == '#') continue;    // comment
      if (!saw_data) continue;        // optional header row
      throw ParseError("track: malformed row '" + line + "'", lineno);
    }
    std::string trailing;
    if (ls >> trailing && trailing[0] != '#')
      throw ParseError("track: expected two columns", lineno);
    if (!std::isfinite(s) || !std::isfinite(k))
      throw ParseError("track: non-finite value", lineno);
    saw_data = true;
    rows.push_back({s, k});
  }
  return rows;
}

}  // namespace

TrackProfile load_track_text(const std::string& text, double target_step,
                             const std::string& name) {
  if (!(target_step > 0.0))
    throw ValidationError("track: target_step must be > 0");
  std::vector<SamplePoint> rows = parse_rows(text);
  if (rows.size() < 2) throw ValidationError("track: fewer than 2 data rows");
  for (size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].s > rows[i - 1].s))
      throw ValidationError("track: arc-length must be strictly increasing");

  const double s0 = rows.front().s;
  const double length = rows.back().s - s0;
  const int n = static_cast<int>(std::lround(length / target_step));
  if (n < 2) throw ValidationError("track: resampled grid has fewer than 2 steps");

  // Sample the piecewise-linear curvature at step midpoints (clamped to the
  // source range when the rounded grid overshoots the last sample).
  std::vector<double> kappa(n);
  size_t hint = 0;
  for (int i = 0; i < n; ++i) {
    double s = s0 + (i + 0.5) * target_step;
    s = std::clamp(s, rows.front().s, rows.back().s);
    while (hint + 2 < rows.size() && rows[hint + 1].s < s) ++hint;
    const SamplePoint& a = rows[hint];
    const SamplePoint& b = rows[hint + 1];
    const double w = (s - a.s) / (b.s - a.s);
    kappa[i] = a.kappa + w * (b.kappa - a.kappa);
  }
  return make_track(target_step, std::move(kappa), name);
}

TrackProfile load_track(const std::string& path, double target_step) {
  std::ifstream f(path);
  if (!f) throw ValidationError("track: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_track_text(buf.str(), target_step, path);
}

}  // namespace laptime
