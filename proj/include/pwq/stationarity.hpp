#pragma once

// Certificates for difference-max programs: directional stationarity over a
// polyhedron, dc-criticality, and small structural tests on active gradients.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pwq/core.hpp"
#include "pwq/lp.hpp"

namespace pwq {

inline constexpr double kStationarityTolerance = 1e-7;

enum class Verdict { kStationary, kNotStationary, kInconclusive };

inline const char* toString(Verdict v) {
  switch (v) {
    case Verdict::kStationary: return "stationary";
    case Verdict::kNotStationary: return "not-stationary";
    default: return "inconclusive";
  }
}

struct StationarityOptions {
  double tolAct = kActiveTolerance;
  double tolStat = kStationarityTolerance;
};

struct StationarityCertificate {
  struct Multipliers {
    int minusPiece = -1;  // the index i-bar in A2
    Vec lambda;           // simplex weights over A1
    Vec mu;               // >= 0 over active inequality rows
    Vec nu;               // free, over equality rows
    double residual = 0.0;
    bool passed = false;
  };

  Verdict verdict = Verdict::kInconclusive;
  IndexSet plusActive, minusActive, activeRows;
  std::vector<Multipliers> multipliers;
  std::optional<Vec> witnessDirection;
  double witnessSlope = 0.0;         // psi'(x; witness)
  double witnessDifference = 0.0;    // sampled one-sided divided difference
  double residual = 0.0;             // worst residual over A2

  bool stationary() const { return verdict == Verdict::kStationary; }
};

namespace detail {

// min ||G lambda + Aa' mu + E' nu - target||_1 over lambda in the simplex,
// mu >= 0, nu free.
inline StationarityCertificate::Multipliers multiplierFit(const Mat& g, const Mat& aa, const Mat& e,
                                                          const Vec& target) {
  const int n = static_cast<int>(target.size());
  const int k = static_cast<int>(g.cols()), ma = static_cast<int>(aa.rows()), me = static_cast<int>(e.rows());
  const int nv = k + ma + me + 2 * n;
  LinearProgram lp(nv);
  for (int i = 0; i < 2 * n; ++i) lp.c(k + ma + me + i) = 1.0;
  for (int i = 0; i < me; ++i) lp.free[k + ma + i] = true;
  for (int r = 0; r < n; ++r) {
    Vec row = Vec::Zero(nv);
    row.head(k) = g.row(r).transpose();
    if (ma > 0) row.segment(k, ma) = aa.col(r);
    if (me > 0) row.segment(k + ma, me) = e.col(r);
    row(k + ma + me + r) = 1.0;
    row(k + ma + me + n + r) = -1.0;
    lp.addEqual(row, target(r));
  }
  Vec simplex = Vec::Zero(nv);
  simplex.head(k).setOnes();
  lp.addEqual(simplex, 1.0);

  StationarityCertificate::Multipliers out;
  const LPResult r = solveLP(lp);
  if (!r.optimal()) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  out.lambda = r.x.head(k);
  out.mu = r.x.segment(k, ma);
  out.nu = r.x.segment(k + ma, me);
  Vec res = g * out.lambda - target;
  if (ma > 0) res += aa.transpose() * out.mu;
  if (me > 0) res += e.transpose() * out.nu;
  out.residual = res.norm();
  return out;
}

// min_D max_l g_l'D - target'D over the box |D| <= 1 intersected with the
// tangent cone {Aa D <= 0, E D = 0}.
inline std::pair<Vec, double> steepestFeasibleDirection(const Mat& g, const Mat& aa, const Mat& e,
                                                        const Vec& target) {
  const int n = static_cast<int>(target.size());
  LinearProgram lp(n + 1);
  for (int i = 0; i <= n; ++i) lp.free[i] = true;
  lp.c.head(n) = -target;
  lp.c(n) = 1.0;
  for (int l = 0; l < g.cols(); ++l) {
    Vec row = Vec::Zero(n + 1);
    row.head(n) = g.col(l);
    row(n) = -1.0;
    lp.addLessEqual(row, 0.0);
  }
  for (int j = 0; j < aa.rows(); ++j) {
    Vec row = Vec::Zero(n + 1);
    row.head(n) = aa.row(j).transpose();
    lp.addLessEqual(row, 0.0);
  }
  for (int j = 0; j < e.rows(); ++j) {
    Vec row = Vec::Zero(n + 1);
    row.head(n) = e.row(j).transpose();
    lp.addEqual(row, 0.0);
  }
  for (int i = 0; i < n; ++i) {
    Vec row = Vec::Zero(n + 1);
    row(i) = 1.0;
    lp.addLessEqual(row, 1.0);
    lp.addLessEqual(-row, 1.0);
  }
  const LPResult r = solveLP(lp);
  if (!r.optimal()) return {Vec::Zero(n), 0.0};
  return {r.x.head(n), r.objective};
}

inline Mat gradientColumns(const MaxOfQuadratics& m, const IndexSet& idx, const Vec& x) {
  Mat g(x.size(), idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) g.col(k) = m[idx[k]].gradient(x);
  return g;
}

}  // namespace detail

/// d-stationarity of f at x: for every i-bar in A2 there must be simplex
/// weights over A1 and nonnegative row multipliers with
///   sum_l lambda_l grad f1_l - grad f2_ibar + A_X' mu (+ E' nu) = 0.
/// When some i-bar fails, a feasible direction of strict descent is returned.
inline StationarityCertificate checkDStationary(const DiffMaxProgram& f, const Vec& x,
                                                const StationarityOptions& opt = {}) {
  requireDim(x, f.dim(), "checkDStationary");
  require(f.feasible.contains(x), "point-not-in-X", "the point violates the polyhedral constraints");

  StationarityCertificate cert;
  std::tie(cert.plusActive, cert.minusActive) = activeSets(f, x, opt.tolAct);
  cert.activeRows = f.feasible.activeRows(x, opt.tolAct);
  const Mat g1 = detail::gradientColumns(f.plus, cert.plusActive, x);
  const Mat aa = f.feasible.rows(cert.activeRows);
  const Mat& e = f.feasible.E();

  double gscale = g1.size() ? g1.cwiseAbs().maxCoeff() : 0.0;
  for (int j : cert.minusActive) gscale = std::max(gscale, f.minus[j].gradient(x).cwiseAbs().maxCoeff());
  const double threshold = opt.tolStat * (1.0 + gscale);

  int failing = -1;
  for (int j : cert.minusActive) {
    auto mult = detail::multiplierFit(g1, aa, e, f.minus[j].gradient(x));
    mult.minusPiece = j;
    mult.passed = mult.residual <= threshold;
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
    auto [dir, value] = detail::steepestFeasibleDirection(g1, aa, e, f.minus[mult.minusPiece].gradient(x));
    if (value >= -threshold) continue;
    cert.verdict = Verdict::kNotStationary;
    cert.witnessDirection = dir;
    cert.witnessSlope = directionalDerivative(f, x, dir, opt.tolAct);
    const double psi0 = evaluate(f, x);
    for (double delta = 1e-6; delta >= 1e-13; delta *= 0.1) {
      const Vec y = x + delta * dir;
      if (!f.feasible.contains(y)) continue;
      cert.witnessDifference = (evaluate(f, y) - psi0) / delta;
      if (cert.witnessDifference < 0.0) break;
    }
    return cert;
  }
  cert.verdict = Verdict::kInconclusive;
  return cert;
}

struct CriticalityResult {
  bool nonempty = false;
  Vec point;  // a common element of (hull1 + cone) and hull2
};

namespace detail {

// Feasibility LP over hull weights a (simplex), b (simplex), cone weights c:
//   G1 a + C c - G2 b = 0, optionally minimizing objective' (G2 b).
inline LPResult criticalityLP(const std::vector<Vec>& hull1, const std::vector<Vec>& hull2,
                              const std::vector<Vec>& cone, const Vec* objective) {
  require(!hull1.empty() && !hull2.empty(), "empty-generators", "subdifferential generator lists must be nonempty");
  const int n = static_cast<int>(hull1.front().size());
  const int k1 = static_cast<int>(hull1.size()), k2 = static_cast<int>(hull2.size()), kc = static_cast<int>(cone.size());
  const int nv = k1 + k2 + kc;
  LinearProgram lp(nv);
  for (int r = 0; r < n; ++r) {
    Vec row(nv);
    for (int i = 0; i < k1; ++i) row(i) = hull1[i](r);
    for (int i = 0; i < k2; ++i) row(k1 + i) = -hull2[i](r);
    for (int i = 0; i < kc; ++i) row(k1 + k2 + i) = cone[i](r);
    lp.addEqual(row, 0.0);
  }
  Vec s1 = Vec::Zero(nv), s2 = Vec::Zero(nv);
  s1.head(k1).setOnes();
  s2.segment(k1, k2).setOnes();
  lp.addEqual(s1, 1.0);
  lp.addEqual(s2, 1.0);
  if (objective)
    for (int i = 0; i < k2; ++i) lp.c(k1 + i) = objective->dot(hull2[i]);
  return solveLP(lp);
}

inline Vec hullPoint(const std::vector<Vec>& gens, const Vec& w, int offset) {
  Vec p = Vec::Zero(gens.front().size());
  for (std::size_t i = 0; i < gens.size(); ++i) p += w(offset + static_cast<int>(i)) * gens[i];
  return p;
}

}  // namespace detail

/// Is (conv(hull1) + cone(cone)) intersected with conv(hull2) nonempty?
inline CriticalityResult checkCritical(const std::vector<Vec>& hull1, const std::vector<Vec>& hull2,
                                       const std::vector<Vec>& cone = {}) {
  CriticalityResult out;
  const LPResult r = detail::criticalityLP(hull1, hull2, cone, nullptr);
  out.nonempty = r.optimal();
  if (out.nonempty) out.point = detail::hullPoint(hull2, r.x, static_cast<int>(hull1.size()));
  return out;
}

/// Extent of the intersection along `direction`: [min, max] of direction'v.
inline std::optional<std::pair<double, double>> criticalIntersectionRange(const std::vector<Vec>& hull1,
                                                                          const std::vector<Vec>& hull2,
                                                                          const std::vector<Vec>& cone,
                                                                          const Vec& direction) {
  const Vec neg = -direction;
  const LPResult lo = detail::criticalityLP(hull1, hull2, cone, &direction);
  const LPResult hi = detail::criticalityLP(hull1, hull2, cone, &neg);
  if (!lo.optimal() || !hi.optimal()) return std::nullopt;
  return std::make_pair(lo.objective, -hi.objective);
}

/// Frechet differentiability of max_i f_i at x: all active gradients coincide.
inline bool isFDifferentiablePoint(const MaxOfQuadratics& m, const Vec& x, double tolAct = kActiveTolerance) {
  const IndexSet act = m.activeSet(x, tolAct);
  const Vec g0 = m[act.front()].gradient(x);
  for (std::size_t k = 1; k < act.size(); ++k) {
    const Vec g = m[act[k]].gradient(x);
    if ((g - g0).norm() > 1e-9 * (1.0 + std::max(g.norm(), g0.norm()))) return false;
  }
  return true;
}

/// grad f_i(x) + c_i is the same vector for every active i.
inline bool checkScMembership(const MaxOfQuadratics& m, const std::vector<Vec>& c, const Vec& x,
                              double tolAct = kActiveTolerance) {
  require(static_cast<int>(c.size()) == m.size(), "dimension-mismatch", "one shift vector per piece");
  const IndexSet act = m.activeSet(x, tolAct);
  const Vec v0 = m[act.front()].gradient(x) + c[act.front()];
  for (std::size_t k = 1; k < act.size(); ++k)
    if ((m[act[k]].gradient(x) + c[act[k]] - v0).cwiseAbs().maxCoeff() > 1e-9) return false;
  return true;
}

inline bool checkLICQ(const std::vector<Vec>& gradients) {
  if (gradients.empty()) return true;
  const int n = static_cast<int>(gradients.front().size());
  if (static_cast<int>(gradients.size()) > n) return false;
  Mat g(n, gradients.size());
  for (std::size_t k = 0; k < gradients.size(); ++k) g.col(k) = gradients[k];
  return numericalRank(g) == static_cast<int>(gradients.size());
}

enum class Curvature { kConvex, kConcave };

enum class CompositeCase {
  kGlobalMinOfPhi,       // convex phi, both one-sided slopes >= 0
  kStationaryForPsi,
  kStationaryForNegPsi,
  kStationaryForBoth,    // concave phi, both one-sided slopes <= 0: psi' vanishes on feasible directions
};

inline const char* toString(CompositeCase c) {
  switch (c) {
    case CompositeCase::kGlobalMinOfPhi: return "global-min-of-phi";
    case CompositeCase::kStationaryForPsi: return "stationary-for-psi";
    case CompositeCase::kStationaryForNegPsi: return "stationary-for-negpsi";
    default: return "stationary-for-both";
  }
}

/// Case split for a d-stationary point of phi(psi(x)) with univariate
/// convex or concave phi, from the one-sided slopes phi'(t; +1), phi'(t; -1).
inline CompositeCase classifyCompositePoint(Curvature curvature, double psiValue, double slopePlus,
                                            double slopeMinus) {
  (void)psiValue;
  if (curvature == Curvature::kConvex) {
    require(slopePlus + slopeMinus >= -1e-12, "inconsistent-slopes",
            "a convex function needs phi'(t;+1) >= -phi'(t;-1)");
    if (slopePlus >= 0.0 && slopeMinus >= 0.0) return CompositeCase::kGlobalMinOfPhi;
    if (slopePlus >= 0.0) return CompositeCase::kStationaryForPsi;
    return CompositeCase::kStationaryForNegPsi;
  }
  require(slopePlus + slopeMinus <= 1e-12, "inconsistent-slopes",
          "a concave function needs phi'(t;+1) <= -phi'(t;-1)");
  if (slopePlus <= 0.0 && slopeMinus <= 0.0) return CompositeCase::kStationaryForBoth;
  if (slopePlus > 0.0) return CompositeCase::kStationaryForPsi;
  return CompositeCase::kStationaryForNegPsi;
}

}  // namespace pwq
