#include "laptime/conic/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "laptime/errors.hpp"

namespace laptime::conic {

namespace {

const char* kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::Nonnegative: return "nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::RotatedSecondOrder: return "rsoc";
  }
  return "?";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string dump_problem(const ConicProblem& p) {
  std::ostringstream out;
  out << "conic-problem v1\n";
  out << "vars " << p.variable_count() << " rows " << p.constraint_count()
      << "\n";
  out << "cones " << p.cones.size() << "\n";
  for (const Cone& c : p.cones) out << kind_name(c.kind) << " " << c.dim << "\n";
  int nnz = 0;
  for (double v : p.objective) nnz += v != 0.0;
  out << "objective " << nnz << "\n";
  for (int j = 0; j < p.variable_count(); ++j)
    if (p.objective[j] != 0.0) out << j << " " << fmt(p.objective[j]) << "\n";
  nnz = 0;
  for (double v : p.equality_rhs) nnz += v != 0.0;
  out << "rhs " << nnz << "\n";
  for (int i = 0; i < p.constraint_count(); ++i)
    if (p.equality_rhs[i] != 0.0) out << i << " " << fmt(p.equality_rhs[i]) << "\n";
  out << "matrix " << p.equality_matrix.nonZeros() << "\n";
  for (int j = 0; j < p.equality_matrix.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.equality_matrix, j);
         it; ++it)
      out << it.row() << " " << j << " " << fmt(it.value()) << "\n";
  out << "end\n";
  return out.str();
}

ConicProblem parse_problem(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    throw ParseError("problem dump: unexpected end of input", lineno);
  };

  next_line();
  if (line != "conic-problem v1")
    throw ParseError("problem dump: bad header '" + line + "'", lineno);

  ConicProblem p;
  int n = 0, m = 0;
  {
    next_line();
    std::istringstream ls(line);
    std::string w1, w2;
    if (!(ls >> w1 >> n >> w2 >> m) || w1 != "vars" || w2 != "rows" || n < 1 ||
        m < 0)
      throw ParseError("problem dump: bad size line", lineno);
  }
  {
    next_line();
    std::istringstream ls(line);
    std::string w;
    int count = 0;
    if (!(ls >> w >> count) || w != "cones" || count < 0)
      throw ParseError("problem dump: bad cone count", lineno);
    for (int i = 0; i < count; ++i) {
      next_line();
      std::istringstream cs(line);
      std::string kind;
      int dim;
      if (!(cs >> kind >> dim))
        throw ParseError("problem dump: bad cone line", lineno);
      Cone c{ConeKind::Nonnegative, dim};
      if (kind == "nonneg") c.kind = ConeKind::Nonnegative;
      else if (kind == "soc") c.kind = ConeKind::SecondOrder;
      else if (kind == "rsoc") c.kind = ConeKind::RotatedSecondOrder;
      else throw ParseError("problem dump: unknown cone '" + kind + "'", lineno);
      p.cones.push_back(c);
    }
  }
  p.objective.assign(n, 0.0);
  p.equality_rhs.assign(m, 0.0);

  auto read_sparse_vec = [&](const char* name, std::vector<double>& dst) {
    next_line();
    std::istringstream ls(line);
    std::string w;
    int count = 0;
    if (!(ls >> w >> count) || w != name || count < 0)
      throw ParseError(std::string("problem dump: expected '") + name + "'",
                       lineno);
    for (int i = 0; i < count; ++i) {
      next_line();
      std::istringstream es(line);
      int idx;
      double val;
      if (!(es >> idx >> val) || idx < 0 || idx >= static_cast<int>(dst.size()))
        throw ParseError("problem dump: bad entry", lineno);
      dst[idx] = val;
    }
  };
  read_sparse_vec("objective", p.objective);
  read_sparse_vec("rhs", p.equality_rhs);

  {
    next_line();
    std::istringstream ls(line);
    std::string w;
    long count = 0;
    if (!(ls >> w >> count) || w != "matrix" || count < 0)
      throw ParseError("problem dump: expected 'matrix'", lineno);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(count);
    for (long i = 0; i < count; ++i) {
      next_line();
      std::istringstream es(line);
      int r, c;
      double val;
      if (!(es >> r >> c >> val) || r < 0 || r >= m || c < 0 || c >= n)
        throw ParseError("problem dump: bad matrix entry", lineno);
      trips.emplace_back(r, c, val);
    }
    p.equality_matrix = Eigen::SparseMatrix<double>(m, n);
    p.equality_matrix.setFromTriplets(trips.begin(), trips.end());
  }
  next_line();
  if (line != "end") throw ParseError("problem dump: expected 'end'", lineno);
  p.validate();
  return p;
}

void save_problem(const ConicProblem& problem, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("problem dump: cannot write '" + path + "'");
  f << dump_problem(problem);
}

ConicProblem load_problem(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("problem dump: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_problem(buf.str());
}

}  // namespace laptime::conic
