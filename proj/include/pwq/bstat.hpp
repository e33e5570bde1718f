#pragma once

// Piecewise quadratic programs with a two-sided quadratic constraint
//   minimize q1(x) - max_i q2i(x)  s.t.  beta1 <= 1/2 x'Qc x + c'x <= beta2,  x in a polyhedron.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pwq/convex.hpp"
#include "pwq/core.hpp"
#include "pwq/enumerate.hpp"
#include "pwq/kink.hpp"
#include "pwq/stationarity.hpp"
#include "pwq/valueset.hpp"

namespace pwq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DQCProgram {
  QuadraticFn q1;
  std::vector<QuadraticFn> minusPieces;
  Mat Qc;
  Vec c;
  double beta1 = -kInf;
  double beta2 = kInf;
  Polyhedron linear;

  int dim() const { return q1.dim(); }
  QuadraticFn constraintFn() const { return {Qc, c, 0.0}; }
  double constraintValue(const Vec& x) const { return 0.5 * x.dot(Qc * x) + c.dot(x); }
  double constraintScale(const Vec& x) const {
    return 1.0 + 0.5 * std::abs(x.dot(Qc * x)) + std::abs(c.dot(x));
  }
  MaxOfQuadratics minus() const { return MaxOfQuadratics(minusPieces); }
  double objective(const Vec& x) const { return q1(x) - minus()(x); }

  void validate() const {
    const int n = dim();
    require(!minusPieces.empty(), "invalid-program", "at least one minus piece is required");
    for (const auto& p : minusPieces) require(p.dim() == n, "dimension-mismatch", "minus piece");
    require(Qc.rows() == n && Qc.cols() == n && c.size() == n, "dimension-mismatch", "quadratic constraint");
    require(linear.dim() == n, "dimension-mismatch", "linear constraints");
    require(beta1 <= beta2, "invalid-program", "beta1 must not exceed beta2");
  }

  bool beta1Active(const Vec& x, double tol = kActiveTolerance) const {
    return std::isfinite(beta1) && std::abs(constraintValue(x) - beta1) <= tol * (constraintScale(x) + std::abs(beta1));
  }
  bool beta2Active(const Vec& x, double tol = kActiveTolerance) const {
    return std::isfinite(beta2) && std::abs(constraintValue(x) - beta2) <= tol * (constraintScale(x) + std::abs(beta2));
  }
  bool feasible(const Vec& x, double tol = kActiveTolerance) const {
    if (!linear.contains(x, tol)) return false;
    const double g = constraintValue(x);
    return (g >= beta1 || beta1Active(x, tol)) && (g <= beta2 || beta2Active(x, tol));
  }
};

/// Linearization cone at x: rows r with r'v <= 0 plus equality rows e'v = 0.
struct LinearizedCone {
  Mat inequalities;
  Mat equalities;
  bool beta1Active = false;
  bool beta2Active = false;
  IndexSet activeRows;

  bool contains(const Vec& v, double tol = 1e-12) const {
    const double s = tol * (1.0 + v.norm());
    return (inequalities.rows() == 0 || (inequalities * v).maxCoeff() <= s) &&
           (equalities.rows() == 0 || (equalities * v).cwiseAbs().maxCoeff() <= s);
  }
};

inline LinearizedCone linearizationCone(const DQCProgram& prog, const Vec& x, double tolAct = kActiveTolerance) {
  prog.validate();
  requireDim(x, prog.dim(), "linearizationCone");
  require(prog.feasible(x, tolAct), "point-not-in-X", "the point is infeasible");
  LinearizedCone cone;
  cone.beta1Active = prog.beta1Active(x, tolAct);
  cone.beta2Active = prog.beta2Active(x, tolAct);
  cone.activeRows = prog.linear.activeRows(x, tolAct);
  const Vec grad = prog.Qc * x + prog.c;
  const int n = prog.dim();
  const int nq = static_cast<int>(cone.beta1Active) + static_cast<int>(cone.beta2Active);
  cone.inequalities.resize(nq + cone.activeRows.size(), n);
  int r = 0;
  if (cone.beta1Active) cone.inequalities.row(r++) = -grad.transpose();
  if (cone.beta2Active) cone.inequalities.row(r++) = grad.transpose();
  for (int j : cone.activeRows) cone.inequalities.row(r++) = prog.linear.A().row(j);
  cone.equalities = prog.linear.E();
  return cone;
}

struct BCertificate {
  struct Multipliers {
    int minusPiece = -1;
    double lambda1 = 0.0;  // for the lower quadratic bound
    double lambda2 = 0.0;  // for the upper quadratic bound
    Vec mu;                // over all linear inequality rows (zero when inactive)
    Vec nu;                // linear equality rows
    double residual = 0.0;
    double complementarity = 0.0;
    bool passed = false;
  };

  Verdict verdict = Verdict::kInconclusive;
  IndexSet minusActive;
  LinearizedCone cone;
  std::vector<Multipliers> multipliers;
  // Valid only under Abadie's constraint qualification; LICQ of the active
  // constraint gradients is a checked sufficient condition.
  bool licq = false;
  std::optional<Vec> witnessDirection;
  double witnessSlope = 0.0;
  double residual = 0.0;

  bool stationary() const { return verdict == Verdict::kStationary; }
};

inline BCertificate checkBStationary(const DQCProgram& prog, const Vec& x, const StationarityOptions& opt = {}) {
  BCertificate cert;
  cert.cone = linearizationCone(prog, x, opt.tolAct);
  const auto& cone = cert.cone;
  const MaxOfQuadratics minus = prog.minus();
  cert.minusActive = minus.activeSet(x, opt.tolAct);

  const int m = prog.linear.numInequalities();
  const double g = prog.constraintValue(x);
  const Vec slack = prog.linear.b() - prog.linear.A() * x;

  std::vector<Vec> active;
  for (int r = 0; r < cone.inequalities.rows(); ++r) active.push_back(cone.inequalities.row(r).transpose());
  for (int r = 0; r < cone.equalities.rows(); ++r) active.push_back(cone.equalities.row(r).transpose());
  if (cone.beta1Active && cone.beta2Active && !active.empty()) active.erase(active.begin());
  cert.licq = checkLICQ(active);

  const Mat g1 = prog.q1.gradient(x);
  double gscale = g1.cwiseAbs().maxCoeff();
  for (int j : cert.minusActive) gscale = std::max(gscale, minus[j].gradient(x).cwiseAbs().maxCoeff());
  const double threshold = opt.tolStat * (1.0 + gscale);

  int failing = -1;
  for (int j : cert.minusActive) {
    const auto fit = detail::multiplierFit(g1, cone.inequalities, cone.equalities, minus[j].gradient(x));
    BCertificate::Multipliers mult;
    mult.minusPiece = j;
    mult.residual = fit.residual;
    mult.mu = Vec::Zero(m);
    if (std::isfinite(fit.residual)) {
      int r = 0;
      if (cone.beta1Active) mult.lambda1 = fit.mu(r++);
      if (cone.beta2Active) mult.lambda2 = fit.mu(r++);
      for (int row : cone.activeRows) mult.mu(row) = fit.mu(r++);
      mult.nu = fit.nu;
      double comp = 0.0;
      if (std::isfinite(prog.beta1)) comp = std::max(comp, std::abs(mult.lambda1 * (g - prog.beta1)));
      if (std::isfinite(prog.beta2)) comp = std::max(comp, std::abs(mult.lambda2 * (prog.beta2 - g)));
      if (m > 0) comp = std::max(comp, mult.mu.cwiseProduct(slack).cwiseAbs().maxCoeff());
      mult.complementarity = comp;
    }
    mult.passed = mult.residual <= threshold && mult.complementarity <= 1e-7;
    cert.residual = std::max(cert.residual, mult.residual);
    if (!mult.passed && failing < 0) failing = j;
    cert.multipliers.push_back(std::move(mult));
  }
  if (failing < 0) {
    cert.verdict = Verdict::kStationary;
    return cert;
  }
  for (const auto& mult : cert.multipliers) {
    if (mult.passed) continue;
    auto [dir, value] =
        detail::steepestFeasibleDirection(g1, cone.inequalities, cone.equalities, minus[mult.minusPiece].gradient(x));
    if (value >= -threshold) continue;
    cert.verdict = Verdict::kNotStationary;
    cert.witnessDirection = dir;
    double slope = prog.q1.gradient(x).dot(dir);
    double best = -kInf;
    for (int j : cert.minusActive) best = std::max(best, minus[j].gradient(x).dot(dir));
    cert.witnessSlope = slope - best;
    return cert;
  }
  cert.verdict = Verdict::kInconclusive;
  return cert;
}

struct BEnumerateOptions {
  double lambdaCap = 1e6;
  bool allowLarge = false;
  int maxRows = 20;
  KinkOptions kink;
  StationarityOptions stationarity;
};

namespace detail {

struct Reduced {
  QuadraticFn objective;   // q1 - q2i on the face
  QuadraticFn constraint;  // 1/2 x'Qc x + c'x on the face
};

inline void addKinks(std::vector<Candidate>& out, ValueSet& vs, const Reduced& r, double beta, double sign,
                     const std::string& branch, const BEnumerateOptions& opt) {
  // (Phat + s lambda Qr) y = -(phat + s lambda cr), lambda in [0, cap].
  const Mat& ph = r.objective.hessian();
  const Vec& pl = r.objective.linear();
  const Mat& qh = r.constraint.hessian();
  const Vec& ql = r.constraint.linear();
  const QuadraticFn target(qh, ql, r.constraint.constant() - beta);

  KinkSystem low{sign * qh, -ph, sign * ql, -pl, target};
  const KinkResult a = findKinkPoints(low, 0.0, 1.0, opt.kink);
  for (const auto& k : a.points) out.push_back({k.x, branch});
  for (const auto& f : a.flags) vs.flag(f, a.complete);

  // lambda in [1, cap] through mu = 1 / lambda in [0, 1].
  KinkSystem high{ph, -sign * qh, pl, -sign * ql, target};
  const KinkResult b = findKinkPoints(high, 0.0, 1.0, opt.kink);
  for (const auto& f : b.flags) vs.flag(f, b.complete);
  for (const auto& k : b.points) {
    if (k.lambda < 1.0 / opt.lambdaCap) {
      vs.flag("lambda-cap-hit");
      continue;
    }
    out.push_back({k.x, branch});
  }
}

}  // namespace detail

inline ValueSet enumerateBValues(const DQCProgram& prog, const BEnumerateOptions& opt = {}) {
  prog.validate();
  const int n = prog.dim();
  const Polyhedron& Z = prog.linear;
  const int m = Z.numInequalities();
  if (m > opt.maxRows && !opt.allowLarge) throw Error("too-large", std::to_string(m) + " inequality rows");
  const MaxOfQuadratics minus = prog.minus();
  ValueSet vs;

  for (std::size_t ib = 0; ib < prog.minusPieces.size(); ++ib) {
    const QuadraticFn obj = prog.q1 - prog.minusPieces[ib];
    for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
      const IndexSet I = detail::maskToSet(mask, m);
      if (!detail::feasiblePoint(Z, I)) continue;
      Mat face(I.size() + Z.numEqualities(), n);
      Vec rhs(face.rows());
      face << Z.rows(I), Z.E();
      rhs << Z.rhs(I), Z.d();
      const AffineSolution sol = solveAffine(face, rhs);
      if (!sol.consistent) continue;
      const Vec& x0 = sol.particular;
      const Mat& W = sol.nullBasis;
      const detail::Reduced red{obj.restricted(x0, W), prog.constraintFn().restricted(x0, W)};

      std::vector<Candidate> cands;
      if (W.cols() == 0) {
        cands.push_back({Vec(0), "face-vertex"});
      } else {
        const AffineSolution st = solveAffine(red.objective.hessian(), -red.objective.linear());
        if (st.consistent) {
          cands.push_back({st.particular, "interior"});
          if (st.nullBasis.cols() > 0) {
            const Polyhedron Y(Z.A() * W, Z.b() - Z.A() * x0);
            const Mat w = nullSpaceBasis(st.nullBasis.transpose()).transpose();
            if (auto y = detail::feasiblePoint(Y, {}, w, w * st.particular)) cands.push_back({*y, "interior"});
          }
        }
        if (std::isfinite(prog.beta2)) detail::addKinks(cands, vs, red, prog.beta2, 1.0, "upper-bound", opt);
        if (std::isfinite(prog.beta1)) detail::addKinks(cands, vs, red, prog.beta1, -1.0, "lower-bound", opt);
      }

      for (const auto& cand : cands) {
        const Vec x = x0 + W * cand.x;
        if (!prog.feasible(x, opt.stationarity.tolAct)) continue;
        if (!detail::isSubset(I, Z.activeRows(x, opt.stationarity.tolAct))) continue;
        const IndexSet a2 = minus.activeSet(x, opt.stationarity.tolAct);
        if (std::find(a2.begin(), a2.end(), static_cast<int>(ib)) == a2.end()) continue;
        if (checkBStationary(prog, x, opt.stationarity).stationary()) vs.add(prog.objective(x), x, cand.branch);
      }
    }
  }
  return vs;
}

/// Values for programs where one quadratic inequality cannot hold strictly on
/// the polyhedron: the feasible set is then the solution set of a convex QP,
/// a finite union of polyhedra P_IJ indexed by complementary row patterns.
struct PatternWitness {
  IndexSet tight;  // I: rows with A_i x = b_i and mu_i >= 0
  Vec x;
  double value = 0.0;
};

struct DegenerateBResult {
  ValueSet values;
  std::vector<PatternWitness> witnesses;
  bool upperSide = true;  // which quadratic bound is never strict
  double level = 0.0;     // the common constraint value on the feasible set
};

inline DegenerateBResult enumerateBValuesDegenerate(const DQCProgram& prog, const BEnumerateOptions& opt = {}) {
  prog.validate();
  const int n = prog.dim();
  const Polyhedron& Z = prog.linear;
  const int m = Z.numInequalities();
  if (m > opt.maxRows && !opt.allowLarge) throw Error("too-large", std::to_string(m) + " inequality rows");

  auto extremum = [&](double sign) -> std::optional<double> {
    if ((sign * prog.constraintFn()).minEigenvalue() < -1e-10) return std::nullopt;
    ConvexProgram cp(n);
    cp.H = (sign * prog.Qc).sparseView();
    cp.g = sign * prog.c;
    cp.A = Z.A().sparseView();
    cp.b = Z.b();
    cp.E = Z.E().sparseView();
    cp.d = Z.d();
    const ConvexResult r = solveConvex(cp);
    if (!r.solved()) return std::nullopt;
    return sign * prog.constraintValue(r.x);
  };

  DegenerateBResult out;
  double sign = 0.0;
  if (std::isfinite(prog.beta2)) {
    if (auto lo = extremum(1.0); lo && std::abs(*lo - prog.beta2) <= 1e-7 * (1.0 + std::abs(prog.beta2))) sign = 1.0;
  }
  if (sign == 0.0 && std::isfinite(prog.beta1)) {
    if (auto hi = extremum(-1.0); hi && std::abs(*hi - prog.beta1) <= 1e-7 * (1.0 + std::abs(prog.beta1))) sign = -1.0;
  }
  if (sign == 0.0) throw Error("assumption-not-met", "both quadratic bounds can hold strictly on the polyhedron");
  out.upperSide = sign > 0.0;
  out.level = sign > 0.0 ? prog.beta2 : prog.beta1;

  const Mat Q = sign * prog.Qc;
  const Vec c = sign * prog.c;
  const MaxOfQuadratics minus = prog.minus();
  EnumerateOptions eopt;
  eopt.allowLarge = true;
  eopt.stationarity = opt.stationarity;

  for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
    const IndexSet I = detail::maskToSet(mask, m);
    const int ni = static_cast<int>(I.size()), me = Z.numEqualities();
    // Lifted variables (x, mu_I, nu): Qx + c + A_I' mu_I + E' nu = 0, A_I x = b_I, A_J x <= b_J, mu_I >= 0.
    const int nv = n + ni + me;
    Mat eq(n + ni + me, nv), ineq(m, nv);
    Vec deq(eq.rows()), bineq(ineq.rows());
    eq.setZero();
    ineq.setZero();
    eq.topLeftCorner(n, n) = Q;
    for (int k = 0; k < ni; ++k) eq.block(0, n + k, n, 1) = Z.A().row(I[k]).transpose();
    if (me > 0) eq.block(0, n + ni, n, me) = Z.E().transpose();
    deq.head(n) = -c;
    for (int k = 0; k < ni; ++k) {
      eq.row(n + k).head(n) = Z.A().row(I[k]);
      deq(n + k) = Z.b()(I[k]);
    }
    for (int k = 0; k < me; ++k) {
      eq.row(n + ni + k).head(n) = Z.E().row(k);
      deq(n + ni + k) = Z.d()(k);
    }
    int r = 0;
    for (int j = 0; j < m; ++j) {
      if (mask & (1UL << j)) continue;
      ineq.row(r).head(n) = Z.A().row(j);
      bineq(r++) = Z.b()(j);
    }
    for (int k = 0; k < ni; ++k) {
      ineq(r, n + k) = -1.0;
      bineq(r++) = 0.0;
    }
    const Polyhedron lifted(ineq, bineq, eq, deq);
    if (!detail::feasiblePoint(lifted, {})) continue;

    for (std::size_t ib = 0; ib < prog.minusPieces.size(); ++ib) {
      const QuadraticFn obj = prog.q1 - prog.minusPieces[ib];
      Mat h = Mat::Zero(nv, nv);
      h.topLeftCorner(n, n) = obj.hessian();
      Vec l = Vec::Zero(nv);
      l.head(n) = obj.linear();
      const ValueSet part = enumerateQPValues(QuadraticFn(h, l, obj.constant()), lifted, eopt);
      for (const auto& pt : part.points()) {
        const Vec x = pt.x.head(n);
        const IndexSet a2 = minus.activeSet(x, opt.stationarity.tolAct);
        if (std::find(a2.begin(), a2.end(), static_cast<int>(ib)) == a2.end()) continue;
        const double v = prog.objective(x);
        out.values.add(v, x, "pattern");
        out.witnesses.push_back({I, x, v});
      }
    }
  }
  return out;
}

}  // namespace pwq
