#pragma once

// JSON problem files and CSV tables. Numbers are written with 17 significant
// digits; infinite quadratic bounds are written as null.

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pwq/bstat.hpp"
#include "pwq/core.hpp"
#include "pwq/regression.hpp"
#include "pwq/stationarity.hpp"
#include "pwq/valueset.hpp"

namespace pwq::io {

using Json = nlohmann::ordered_json;

inline std::string formatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json toJson(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline Json toJson(const Mat& m) {
  Json a = Json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(toJson(Vec(m.row(r).transpose())));
  return a;
}

inline Json toJson(const QuadraticFn& q) {
  return Json{{"Q", toJson(q.hessian())}, {"q", toJson(q.linear())}, {"c", q.constant()}};
}

inline Json toJson(const Polyhedron& p) {
  return Json{{"A", toJson(p.A())}, {"b", toJson(p.b())}, {"E", toJson(p.E())}, {"d", toJson(p.d())}};
}

inline Json toJson(const MaxOfQuadratics& m) {
  Json a = Json::array();
  for (int i = 0; i < m.size(); ++i) a.push_back(toJson(m[i]));
  return a;
}

inline Json toJson(const DiffMaxProgram& f) {
  return Json{{"plus", toJson(f.plus)}, {"minus", toJson(f.minus)}, {"polyhedron", toJson(f.feasible)}};
}

inline Json toJson(const DQCProgram& p) {
  Json minus = Json::array();
  for (const auto& q : p.minusPieces) minus.push_back(toJson(q));
  return Json{{"plus", Json::array({toJson(p.q1)})},
              {"minus", minus},
              {"polyhedron", toJson(p.linear)},
              {"Qc", toJson(p.Qc)},
              {"c", toJson(p.c)},
              {"beta1", number(p.beta1)},
              {"beta2", number(p.beta2)}};
}

namespace detail {

[[noreturn]] inline void schemaError(const std::string& where, const std::string& what) {
  throw Error("input-error", where + ": " + what);
}

inline double readNumber(const Json& j, const std::string& where) {
  if (!j.is_number()) schemaError(where, "expected a number");
  return j.get<double>();
}

inline Vec readVec(const Json& j, const std::string& where, int expected = -1) {
  if (!j.is_array()) schemaError(where, "expected an array of numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = readNumber(j[i], where + "[" + std::to_string(i) + "]");
  if (expected >= 0 && v.size() != expected)
    schemaError(where, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  return v;
}

inline Mat readMat(const Json& j, const std::string& where, int cols) {
  if (!j.is_array()) schemaError(where, "expected an array of rows");
  Mat m(static_cast<int>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) m.row(r) = readVec(j[r], where + "[" + std::to_string(r) + "]", cols);
  return m;
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) schemaError(where, "expected an object");
  if (!j.contains(key)) schemaError(where, std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::pair<int, int> lineColumn(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline QuadraticFn quadraticFromJson(const Json& j, const std::string& where, int n = -1) {
  const Vec q = detail::readVec(detail::field(j, "q", where), where + ".q", n);
  const int dim = static_cast<int>(q.size());
  const Mat h = detail::readMat(detail::field(j, "Q", where), where + ".Q", dim);
  if (h.rows() != dim) detail::schemaError(where + ".Q", "expected a square matrix of size " + std::to_string(dim));
  const double c = j.contains("c") ? detail::readNumber(j.at("c"), where + ".c") : 0.0;
  return {h, q, c};
}

inline Polyhedron polyhedronFromJson(const Json& j, const std::string& where, int n) {
  if (j.is_null()) return Polyhedron::whole(n);
  auto opt = [&](const char* key) { return j.contains(key) ? j.at(key) : Json::array(); };
  const Mat a = detail::readMat(opt("A"), where + ".A", n);
  const Vec b = detail::readVec(opt("b"), where + ".b", static_cast<int>(a.rows()));
  const Mat e = detail::readMat(opt("E"), where + ".E", n);
  const Vec d = detail::readVec(opt("d"), where + ".d", static_cast<int>(e.rows()));
  return Polyhedron(a, b, e, d);
}

inline std::vector<QuadraticFn> piecesFromJson(const Json& j, const std::string& where, int& n) {
  if (!j.is_array() || j.empty()) detail::schemaError(where, "expected a nonempty array of quadratics");
  std::vector<QuadraticFn> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(quadraticFromJson(j[i], where + "[" + std::to_string(i) + "]", n));
    n = out.back().dim();
  }
  return out;
}

inline DiffMaxProgram diffMaxFromJson(const Json& j) {
  int n = -1;
  auto plus = piecesFromJson(detail::field(j, "plus", "problem"), "problem.plus", n);
  auto minus = piecesFromJson(detail::field(j, "minus", "problem"), "problem.minus", n);
  const Polyhedron x = polyhedronFromJson(j.contains("polyhedron") ? j.at("polyhedron") : Json(), "problem.polyhedron", n);
  return DiffMaxProgram(MaxOfQuadratics(plus), MaxOfQuadratics(minus), x);
}

inline DQCProgram dqcFromJson(const Json& j) {
  int n = -1;
  auto plus = piecesFromJson(detail::field(j, "plus", "problem"), "problem.plus", n);
  if (plus.size() != 1) detail::schemaError("problem.plus", "a quadratically constrained problem has one plus piece");
  auto minus = piecesFromJson(detail::field(j, "minus", "problem"), "problem.minus", n);
  DQCProgram p;
  p.q1 = plus[0];
  p.minusPieces = minus;
  p.linear = polyhedronFromJson(j.contains("polyhedron") ? j.at("polyhedron") : Json(), "problem.polyhedron", n);
  p.Qc = detail::readMat(detail::field(j, "Qc", "problem"), "problem.Qc", n);
  if (p.Qc.rows() != n) detail::schemaError("problem.Qc", "expected a square matrix of size " + std::to_string(n));
  p.c = j.contains("c") ? detail::readVec(j.at("c"), "problem.c", n) : Vec(Vec::Zero(n));
  auto bound = [&](const char* key, double inf) {
    if (!j.contains(key) || j.at(key).is_null()) return inf;
    return detail::readNumber(j.at(key), std::string("problem.") + key);
  };
  p.beta1 = bound("beta1", -kInf);
  p.beta2 = bound("beta2", kInf);
  p.validate();
  return p;
}

/// Parses JSON text; syntax errors report line and column.
inline Json parseJson(const std::string& text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::lineColumn(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error("input-error", name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

inline std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("input-error", path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json readJsonFile(const std::string& path) { return parseJson(readFile(path), path); }

/// A point file is either a JSON array or {"x": [...]}.
inline Vec pointFromJson(const Json& j, int n) {
  if (j.is_object()) return detail::readVec(detail::field(j, "x", "point"), "point.x", n);
  return detail::readVec(j, "point", n);
}

inline Json toJson(const StationarityCertificate& c) {
  Json mult = Json::array();
  for (const auto& m : c.multipliers)
    mult.push_back(Json{{"minusPiece", m.minusPiece},
                        {"lambda", toJson(m.lambda)},
                        {"mu", toJson(m.mu)},
                        {"nu", toJson(m.nu)},
                        {"residual", number(m.residual)},
                        {"passed", m.passed}});
  Json j{{"verdict", toString(c.verdict)},
         {"plusActive", c.plusActive},
         {"minusActive", c.minusActive},
         {"activeRows", c.activeRows},
         {"residual", number(c.residual)},
         {"multipliers", mult}};
  if (c.witnessDirection) {
    j["witnessDirection"] = toJson(*c.witnessDirection);
    j["witnessSlope"] = number(c.witnessSlope);
    j["witnessDifference"] = number(c.witnessDifference);
  }
  return j;
}

inline Json toJson(const BCertificate& c) {
  Json mult = Json::array();
  for (const auto& m : c.multipliers)
    mult.push_back(Json{{"minusPiece", m.minusPiece},
                        {"lambda1", number(m.lambda1)},
                        {"lambda2", number(m.lambda2)},
                        {"mu", toJson(m.mu)},
                        {"nu", toJson(m.nu)},
                        {"residual", number(m.residual)},
                        {"complementarity", number(m.complementarity)},
                        {"passed", m.passed}});
  Json j{{"verdict", toString(c.verdict)},
         {"minusActive", c.minusActive},
         {"beta1Active", c.cone.beta1Active},
         {"beta2Active", c.cone.beta2Active},
         {"activeRows", c.cone.activeRows},
         {"licq", c.licq},
         {"residual", number(c.residual)},
         {"multipliers", mult}};
  if (c.witnessDirection) {
    j["witnessDirection"] = toJson(*c.witnessDirection);
    j["witnessSlope"] = number(c.witnessSlope);
  }
  return j;
}

inline Json toJson(const ValueSet& vs) {
  Json entries = Json::array();
  for (const auto& e : vs.entries())
    entries.push_back(Json{{"value", number(e.value)}, {"witness", toJson(e.witness)}, {"branches", e.branches}});
  return Json{{"scope", vs.scope()}, {"complete", vs.complete()}, {"flags", vs.flags()}, {"values", entries}};
}

/// value,branch,x1..xn with one row per verified point.
inline std::string valueSetCsv(const ValueSet& vs, const std::string& header) {
  std::ostringstream out;
  out << header;
  std::size_t n = 0;
  for (const auto& p : vs.points()) n = std::max<std::size_t>(n, p.x.size());
  out << "value,branch";
  for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
  out << "\n";
  for (const auto& p : vs.points()) {
    out << formatNumber(p.value) << "," << p.branch;
    for (int i = 0; i < p.x.size(); ++i) out << "," << formatNumber(p.x(i));
    out << "\n";
  }
  return out.str();
}

/// Dataset CSV with header x1,...,xd,y. Blank lines and '#' comments are skipped.
inline Dataset parseDatasetCsv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int lineNo = 0, d = -1;
  std::vector<std::vector<double>> rows;
  auto fail = [&](const std::string& what) {
    throw Error("input-error", name + ":" + std::to_string(lineNo) + ": " + what);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
  };
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    if (d < 0) {
      d = static_cast<int>(cells.size()) - 1;
      if (d < 1) fail("header must be x1,...,xd,y");
      for (int i = 0; i < d; ++i)
        if (trim(cells[i]) != "x" + std::to_string(i + 1)) fail("header column " + std::to_string(i + 1) + " must be x" + std::to_string(i + 1));
      if (trim(cells[d]) != "y") fail("last header column must be y");
      continue;
    }
    if (static_cast<int>(cells.size()) != d + 1)
      fail("expected " + std::to_string(d + 1) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      const std::string s = trim(c);
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        fail("not a finite number: '" + s + "'");
      row.push_back(v);
    }
    rows.push_back(row);
  }
  if (d < 0) throw Error("input-error", name + ": missing header");
  if (rows.empty()) throw Error("input-error", name + ": no data rows");
  Dataset data;
  data.x.resize(static_cast<int>(rows.size()), d);
  data.y.resize(static_cast<int>(rows.size()));
  for (std::size_t l = 0; l < rows.size(); ++l) {
    for (int i = 0; i < d; ++i) data.x(l, i) = rows[l][i];
    data.y(l) = rows[l][d];
  }
  return data;
}

inline std::string datasetCsv(const Dataset& data) {
  std::ostringstream out;
  for (int i = 1; i <= data.dim(); ++i) out << "x" << i << ",";
  out << "y\n";
  for (int l = 0; l < data.size(); ++l) {
    for (int i = 0; i < data.dim(); ++i) out << formatNumber(data.x(l, i)) << ",";
    out << formatNumber(data.y(l)) << "\n";
  }
  return out.str();
}

struct RegressConfig {
  int k1 = 2;
  int k2 = 1;
  int starts = 100;
  std::uint64_t seed = 0;
  double tolStep = 1e-8;
  int maxIter = 500;
  double grid = 1e-5;
};

inline RegressConfig regressConfigFromJson(const Json& j) {
  RegressConfig c;
  if (!j.is_object()) detail::schemaError("config", "expected an object");
  auto integer = [&](const char* key, auto& dst, long lo) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < lo)
      detail::schemaError(std::string("config.") + key, "expected an integer >= " + std::to_string(lo));
    dst = static_cast<std::remove_reference_t<decltype(dst)>>(v.get<long long>());
  };
  integer("k1", c.k1, 1);
  integer("k2", c.k2, 0);
  integer("starts", c.starts, 1);
  integer("seed", c.seed, 0);
  integer("maxIter", c.maxIter, 1);
  if (j.contains("tolStep")) c.tolStep = detail::readNumber(j.at("tolStep"), "config.tolStep");
  if (j.contains("grid")) c.grid = detail::readNumber(j.at("grid"), "config.grid");
  if (!(c.tolStep > 0.0)) detail::schemaError("config.tolStep", "must be positive");
  if (!(c.grid > 0.0)) detail::schemaError("config.grid", "must be positive");
  return c;
}

inline void writeFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("input-error", path + ": cannot write file");
  out << content;
}

}  // namespace pwq::io
