#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pwq/convex.hpp"
#include "pwq/core.hpp"
#include "pwq/kink.hpp"
#include "pwq/lp.hpp"
#include "pwq/stationarity.hpp"
#include "pwq/valueset.hpp"

namespace pwq {

struct EnumerateOptions {
  bool allowLarge = false;  // permit more than maxRows inequality rows
  int maxRows = 20;
  KinkOptions kink;
  StationarityOptions stationarity;
};

struct Candidate {
  Vec x;
  std::string branch;
};

struct CandidateList {
  std::vector<Candidate> points;
  std::vector<std::string> flags;
  bool complete = true;
};

namespace detail {

inline void checkRowCount(int m, const EnumerateOptions& opt) {
  if (m > opt.maxRows && !opt.allowLarge)
    throw Error("too-large", std::to_string(m) + " inequality rows exceed " + std::to_string(opt.maxRows));
}

inline IndexSet maskToSet(unsigned long mask, int m) {
  IndexSet s;
  for (int j = 0; j < m; ++j)
    if (mask & (1UL << j)) s.push_back(j);
  return s;
}

inline bool isSubset(const IndexSet& a, const IndexSet& b) {
  return std::all_of(a.begin(), a.end(), [&](int i) { return std::find(b.begin(), b.end(), i) != b.end(); });
}

// Restriction to a face with rounding-level curvature and slope removed; `scale`
// is the Hessian scale of the unrestricted problem.
inline QuadraticFn cleanRestriction(const QuadraticFn& q, const Vec& x0, const Mat& z, double scale) {
  const QuadraticFn r = q.restricted(x0, z);
  if (r.dim() == 0) return r;
  Vec lin = r.linear();
  if (lin.norm() <= 1e-12 * q.gradient(x0).norm()) lin.setZero();
  Eigen::SelfAdjointEigenSolver<Mat> es(r.hessian());
  Vec ev = es.eigenvalues();
  const double cut = 1e-12 * scale;
  if ((ev.cwiseAbs().array() > cut).all()) return {r.hessian(), lin, r.constant()};
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) <= cut) ev(i) = 0.0;
  const Mat& v = es.eigenvectors();
  const Mat h = v * ev.asDiagonal() * v.transpose();
  return {0.5 * (h + h.transpose()), lin, r.constant()};
}

inline bool passes(const DiffMaxProgram& f, const Vec& x, const StationarityOptions& opt) {
  try {
    return checkDStationary(f, x, opt).stationary();
  } catch (const Error& e) {
    if (e.code() == "point-not-in-X") return false;
    throw;
  }
}

// A point of X with A_J x = b_J, optionally satisfying extra equalities M x = r.
inline std::optional<Vec> feasiblePoint(const Polyhedron& X, const IndexSet& tight, const Mat& m = Mat(),
                                        const Vec& r = Vec()) {
  const int n = X.dim();
  LinearProgram lp(n);
  std::fill(lp.free.begin(), lp.free.end(), true);
  for (int j = 0; j < X.numInequalities(); ++j) {
    if (std::find(tight.begin(), tight.end(), j) != tight.end())
      lp.addEqual(X.A().row(j).transpose(), X.b()(j));
    else
      lp.addLessEqual(X.A().row(j).transpose(), X.b()(j));
  }
  for (int j = 0; j < X.numEqualities(); ++j) lp.addEqual(X.E().row(j).transpose(), X.d()(j));
  for (int j = 0; j < m.rows(); ++j) lp.addEqual(m.row(j).transpose(), r(j));
  const LPResult res = solveLP(lp);
  if (!res.optimal()) return std::nullopt;
  return res.x;
}

// KKT points of q over X, one per row subset J whose KKT system is solvable.
inline std::vector<Vec> qpKktPoints(const QuadraticFn& q, const Polyhedron& X, const EnumerateOptions& opt) {
  const int n = X.dim(), m = X.numInequalities(), me = X.numEqualities();
  checkRowCount(m, opt);
  std::vector<Vec> out;
  for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
    const IndexSet J = maskToSet(mask, m);
    const int nj = static_cast<int>(J.size());
    LinearProgram lp(n + nj + me);
    for (int i = 0; i < n; ++i) lp.free[i] = true;
    for (int i = 0; i < me; ++i) lp.free[n + nj + i] = true;
    for (int r = 0; r < n; ++r) {
      Vec row(n + nj + me);
      row.head(n) = q.hessian().row(r).transpose();
      for (int k = 0; k < nj; ++k) row(n + k) = X.A()(J[k], r);
      for (int k = 0; k < me; ++k) row(n + nj + k) = X.E()(k, r);
      lp.addEqual(row, -q.linear()(r));
    }
    for (int j = 0; j < m; ++j) {
      Vec row = Vec::Zero(n + nj + me);
      row.head(n) = X.A().row(j).transpose();
      if (mask & (1UL << j))
        lp.addEqual(row, X.b()(j));
      else
        lp.addLessEqual(row, X.b()(j));
    }
    for (int j = 0; j < me; ++j) {
      Vec row = Vec::Zero(n + nj + me);
      row.head(n) = X.E().row(j).transpose();
      lp.addEqual(row, X.d()(j));
    }
    const LPResult r = solveLP(lp);
    if (r.optimal()) out.push_back(r.x.head(n));
  }
  return out;
}

// Points y with sign * r(y) > 0, preferring those inside Y when given.
inline std::vector<Vec> pointsWithSign(const QuadraticFn& r, double sign, const Polyhedron* Y = nullptr) {
  const int k = r.dim();
  const QuadraticFn s = sign * r;
  std::vector<Vec> tries{Vec::Zero(k)};
  if (k > 0) {
    tries.push_back(s.hessian().completeOrthogonalDecomposition().solve(-s.linear()));
    Eigen::SelfAdjointEigenSolver<Mat> es(s.hessian());
    std::vector<Vec> dirs;
    for (int i = 0; i < k; ++i)
      if (es.eigenvalues()(i) > 0.0) dirs.push_back(es.eigenvectors().col(i));
    if (s.linear().norm() > 0.0) dirs.push_back(s.linear().normalized());
    for (const auto& d : dirs)
      for (double t : {1.0, 10.0, 100.0, 1000.0}) {
        tries.push_back(t * d);
        tries.push_back(-t * d);
      }
    if (Y) {
      const Mat none(0, k);
      if (auto y = feasiblePoint(*Y, {}, none, Vec())) tries.push_back(*y);
    }
  }
  std::optional<Vec> best, bestInside;
  for (const auto& y : tries) {
    const double v = s(y);
    if (!(v > 0.0)) continue;
    if (!best || v > s(*best)) best = y;
    if (Y && Y->contains(y) && (!bestInside || v > s(*bestInside))) bestInside = y;
  }
  std::vector<Vec> out;
  if (bestInside) out.push_back(*bestInside);
  if (best && (!bestInside || (*best - *bestInside).norm() > 0.0)) out.push_back(*best);
  return out;
}

inline void addSmoothBranch(CandidateList& out, const Mat& m, const Vec& rhs, const QuadraticFn& psi1, double sign,
                            const std::string& branch, const Polyhedron* Y) {
  const AffineSolution sol = solveAffine(m, rhs);
  if (!sol.consistent) return;
  if (sol.nullBasis.cols() == 0) {
    if (sign * psi1(sol.particular) > 0.0) out.points.push_back({sol.particular, branch});
    return;
  }
  // The stationary set is an affine subspace on which the smooth value is constant.
  std::optional<Polyhedron> restrictedY;
  if (Y) {
    const Mat a = Y->A() * sol.nullBasis;
    const Vec b = Y->b() - Y->A() * sol.particular;
    restrictedY = Polyhedron(a, b);
  }
  const QuadraticFn r = psi1.restricted(sol.particular, sol.nullBasis);
  for (const auto& y : pointsWithSign(r, sign, restrictedY ? &*restrictedY : nullptr))
    out.points.push_back({sol.particular + sol.nullBasis * y, branch});
}

}  // namespace detail

/// Stationary points of max(psi1, 0) - psi2 on R^n, before verification.
/// Y (optional) is a polyhedron used only to choose representatives of
/// degenerate stationary subspaces.
inline CandidateList problem5Candidates(const QuadraticFn& psi1, const QuadraticFn& psi2,
                                        const EnumerateOptions& opt = {}, const Polyhedron* Y = nullptr) {
  require(psi1.dim() == psi2.dim(), "dimension-mismatch", "problem5Candidates");
  CandidateList out;
  const Mat& P = psi1.hessian();
  const Mat& Q = psi2.hessian();
  const Vec& p = psi1.linear();
  const Vec& q = psi2.linear();

  detail::addSmoothBranch(out, P - Q, q - p, psi1, 1.0, "smooth-positive", Y);
  detail::addSmoothBranch(out, Q, -q, psi1, -1.0, "smooth-negative", Y);

  KinkOptions kopt = opt.kink;
  kopt.value = [&psi2](const Vec& x) { return -psi2(x); };
  const KinkResult kink = findKinkPoints({P, Q, p, q, psi1}, 0.0, 1.0, kopt);
  for (const auto& k : kink.points) out.points.push_back({k.x, k.branch});
  out.flags = kink.flags;
  out.complete = kink.complete;
  return out;
}

inline ValueSet enumerateProblem5Values(const QuadraticFn& psi1, const QuadraticFn& psi2,
                                        const EnumerateOptions& opt = {}) {
  const int n = psi1.dim();
  const DiffMaxProgram f{MaxOfQuadratics({psi1, QuadraticFn::zero(n)}), MaxOfQuadratics({psi2})};
  const CandidateList cands = problem5Candidates(psi1, psi2, opt);
  ValueSet vs;
  for (const auto& fl : cands.flags) vs.flag(fl, cands.complete);
  for (const auto& c : cands.points)
    if (detail::passes(f, c.x, opt.stationarity)) vs.add(evaluate(f, c.x), c.x, c.branch);
  return vs;
}

inline ValueSet enumerateQPValues(const QuadraticFn& q, const Polyhedron& X, const EnumerateOptions& opt = {}) {
  require(q.dim() == X.dim(), "dimension-mismatch", "enumerateQPValues");
  const DiffMaxProgram f(MaxOfQuadratics({q}), MaxOfQuadratics({QuadraticFn::zero(q.dim())}), X);
  ValueSet vs;
  for (const auto& x : detail::qpKktPoints(q, X, opt))
    if (detail::passes(f, x, opt.stationarity)) vs.add(q(x), x, "qp-face");
  return vs;
}

inline ValueSet enumeratePLQValues(const PLQFunction& f, const EnumerateOptions& opt = {}) {
  const int n = f.domain.dim();
  std::vector<Polyhedron> pieces;
  for (const auto& cell : f.cells) pieces.push_back(intersect(cell.region, f.domain));
  ValueSet vs;
  for (std::size_t k = 0; k < f.cells.size(); ++k) {
    for (const auto& x : detail::qpKktPoints(f.cells[k].piece, pieces[k], opt)) {
      bool ok = true;
      for (std::size_t l = 0; l < f.cells.size() && ok; ++l) {
        if (!pieces[l].contains(x)) continue;
        const DiffMaxProgram g(MaxOfQuadratics({f.cells[l].piece}), MaxOfQuadratics({QuadraticFn::zero(n)}),
                               pieces[l]);
        ok = detail::passes(g, x, opt.stationarity);
      }
      if (ok) vs.add(f.cells[k].piece(x), x, "plq-cell-" + std::to_string(k));
    }
  }
  return vs;
}

inline ValueSet enumerateConvexMinusMaxConcave(const DiffMaxProgram& f, const EnumerateOptions& opt = {}) {
  const int n = f.dim();
  const int k1 = f.plus.size(), k2 = f.minus.size();
  for (int i = 0; i < k1; ++i)
    if (f.plus[i].minEigenvalue() < -1e-10) throw Error("not-convex", "plus piece " + std::to_string(i));
  for (int j = 0; j < k2; ++j)
    if (f.minus[j].maxEigenvalue() > 1e-10) throw Error("not-concave", "minus piece " + std::to_string(j));

  const Polyhedron& X = f.feasible;
  ValueSet vs;
  for (int j = 0; j < k2; ++j) {
    const int nv = k1 == 1 ? n : n + 1;
    ConvexProgram cp(nv);
    Mat a = Mat::Zero(X.numInequalities(), nv), e = Mat::Zero(X.numEqualities(), nv);
    a.leftCols(n) = X.A();
    e.leftCols(n) = X.E();
    cp.A = a.sparseView();
    cp.b = X.b();
    cp.E = e.sparseView();
    cp.d = X.d();
    if (k1 == 1) {
      const QuadraticFn phi = f.plus[0] - f.minus[j];
      cp.H = phi.hessian().sparseView();
      cp.g = phi.linear();
    } else {
      cp.g(n) = 1.0;
      for (int i = 0; i < k1; ++i) {
        const QuadraticFn phi = f.plus[i] - f.minus[j];
        Mat h = Mat::Zero(nv, nv);
        h.topLeftCorner(n, n) = phi.hessian();
        Vec l(nv);
        l << phi.linear(), -1.0;
        cp.quad.push_back({h.sparseView(), l, phi.constant()});
      }
    }
    const ConvexResult r = solveConvex(cp);
    if (!r.solved()) {
      vs.flag("convex-program-unsolved", true);
      continue;
    }
    const Vec x = r.x.head(n);
    if (detail::passes(f, x, opt.stationarity)) vs.add(evaluate(f, x), x, "convex-min-" + std::to_string(j));
  }
  return vs;
}

inline ValueSet enumerateTwoPieceDiffMax(const DiffMaxProgram& f, const EnumerateOptions& opt = {}) {
  const int n = f.dim();
  const Polyhedron& X = f.feasible;
  const int m = X.numInequalities();
  detail::checkRowCount(m, opt);
  const int k1 = f.plus.size(), k2 = f.minus.size();
  ValueSet vs;
  vs.setScope("D~");
  double hscale = 0.0;
  for (int i = 0; i < k1; ++i) hscale = std::max(hscale, f.plus[i].hessian().norm());
  for (int j = 0; j < k2; ++j) hscale = std::max(hscale, f.minus[j].hessian().norm());

  for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
    const IndexSet I = detail::maskToSet(mask, m);
    if (!detail::feasiblePoint(X, I)) continue;
    Mat face(I.size() + X.numEqualities(), n);
    Vec rhs(face.rows());
    face << X.rows(I), X.E();
    rhs << X.rhs(I), X.d();
    const AffineSolution sol = solveAffine(face, rhs);
    if (!sol.consistent) continue;
    const Vec& x0 = sol.particular;
    const Mat& Z = sol.nullBasis;
    const Polyhedron Y(X.A() * Z, X.b() - X.A() * x0);

    auto consider = [&](const Vec& x, const std::string& branch) {
      if (!X.contains(x) || !detail::isSubset(I, X.activeRows(x))) return;
      if (f.plus.activeSet(x).size() > 2) return;
      if (detail::passes(f, x, opt.stationarity)) vs.add(evaluate(f, x), x, branch);
    };

    if (Z.cols() == 0) {
      consider(x0, "face-vertex");
      continue;
    }
    for (int j = 0; j < k2; ++j) {
      for (int i = 0; i < k1; ++i) {
        // |A1| = 1: smooth stationary points of plus_i - minus_j on the face.
        const QuadraticFn r = detail::cleanRestriction(f.plus[i] - f.minus[j], x0, Z, hscale);
        const AffineSolution st = solveAffine(r.hessian(), -r.linear());
        if (!st.consistent) continue;
        if (st.nullBasis.cols() == 0) {
          consider(x0 + Z * st.particular, "smooth");
        } else {
          // Degenerate: any point of the stationary subspace inside X represents its value.
          const Mat w = nullSpaceBasis(st.nullBasis.transpose()).transpose();
          if (auto y = detail::feasiblePoint(Y, {}, w, w * st.particular)) consider(x0 + Z * *y, "smooth");
        }
      }
      for (int i1 = 0; i1 < k1; ++i1)
        for (int i2 = 0; i2 < k1; ++i2) {
          if (i1 == i2) continue;
          const QuadraticFn a = detail::cleanRestriction(f.plus[i1] - f.plus[i2], x0, Z, hscale);
          const QuadraticFn b = detail::cleanRestriction(f.minus[j] - f.plus[i2], x0, Z, hscale);
          const CandidateList cands = problem5Candidates(a, b, opt, &Y);
          for (const auto& fl : cands.flags) vs.flag(fl, cands.complete);
          for (const auto& c : cands.points) consider(x0 + Z * c.x, "pair-" + c.branch);
        }
    }
  }
  return vs;
}

struct SimplexNewtonResult {
  bool converged = false;
  std::string failure;  // "no-convergence" or "singular-jacobian"
  Vec lambda;
  Vec x;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool licq = false;
  bool nonnegative = false;
};

namespace detail {

inline Mat pencilAt(const std::vector<QuadraticFn>& pieces, const QuadraticFn& q2, const Vec& lambda) {
  Mat m = q2.hessian();
  for (std::size_t i = 0; i < pieces.size(); ++i) m -= lambda(i) * pieces[i].hessian();
  return m;
}

}  // namespace detail

/// Newton's method on lambda -> (ties between pieces at x(lambda), sum lambda - 1),
/// where x(lambda) solves grad q2 = sum lambda_i grad piece_i.
inline SimplexNewtonResult solveSimplexNewton(const std::vector<QuadraticFn>& pieces, const QuadraticFn& q2,
                                              const Vec& lambda0, int maxIter = 100) {
  const int k = static_cast<int>(pieces.size());
  require(k > 0 && lambda0.size() == k, "dimension-mismatch", "solveSimplexNewton");
  if (q2.minEigenvalue() <= 1e-8) throw Error("not-strictly-convex", "q2 Hessian must be positive definite");
  for (const auto& p : pieces)
    if (p.maxEigenvalue() >= 1e-8) throw Error("not-concave", "pieces must have negative semidefinite Hessians");

  SimplexNewtonResult out;
  Vec lambda = lambda0;
  auto solveX = [&](const Vec& l, Eigen::FullPivLU<Mat>& lu) {
    Vec rhs = -q2.linear();
    for (int i = 0; i < k; ++i) rhs += l(i) * pieces[i].linear();
    lu.compute(detail::pencilAt(pieces, q2, l));
    return Vec(lu.solve(rhs));
  };
  for (int it = 0; it <= maxIter; ++it) {
    Eigen::FullPivLU<Mat> lu;
    const Vec x = solveX(lambda, lu);
    if (!lu.isInvertible() || !x.allFinite()) {
      out.failure = "singular-jacobian";
      out.lambda = lambda;
      return out;
    }
    Vec F(k);
    for (int i = 0; i + 1 < k; ++i) F(i) = pieces[i](x) - pieces[k - 1](x);
    F(k - 1) = lambda.sum() - 1.0;
    out.iterations = it;
    out.residual = F.norm();
    if (out.residual <= 1e-10) {
      out.converged = true;
      out.lambda = lambda;
      out.x = x;
      std::vector<Vec> grads;
      for (const auto& p : pieces) grads.push_back(p.gradient(x));
      out.licq = checkLICQ(grads);
      out.nonnegative = (lambda.array() >= -1e-12).all();
      return out;
    }
    if (it == maxIter) break;
    const int n = static_cast<int>(x.size());
    Mat grads(n, k);
    for (int i = 0; i < k; ++i) grads.col(i) = pieces[i].gradient(x);
    const Mat dx = lu.solve(grads);
    Mat J(k, k);
    for (int i = 0; i + 1 < k; ++i) J.row(i) = (grads.col(i) - grads.col(k - 1)).transpose() * dx;
    J.row(k - 1).setOnes();
    Eigen::JacobiSVD<Mat> svd(J);
    const Vec& s = svd.singularValues();
    if (s(k - 1) == 0.0 || s(0) / s(k - 1) > 1e12) {
      out.failure = "singular-jacobian";
      out.lambda = lambda;
      return out;
    }
    lambda -= J.fullPivLu().solve(F);
  }
  out.failure = "no-convergence";
  out.lambda = lambda;
  return out;
}

/// Points of the k-simplex with coordinates in {0, 1/res, ..., 1}.
inline std::vector<Vec> simplexGrid(int k, int res) {
  std::vector<Vec> out;
  Vec cur = Vec::Zero(k);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == k - 1) {
      cur(i) = static_cast<double>(left) / res;
      out.push_back(cur);
      return;
    }
    for (int a = 0; a <= left; ++a) {
      cur(i) = static_cast<double>(a) / res;
      rec(i + 1, left - a);
    }
  };
  rec(0, res);
  return out;
}

/// Distinct zeros found from every start on the 1/8 simplex grid.
inline std::vector<SimplexNewtonResult> simplexNewtonMultistart(const std::vector<QuadraticFn>& pieces,
                                                                const QuadraticFn& q2, int res = 8) {
  std::vector<SimplexNewtonResult> zeros;
  for (const auto& start : simplexGrid(static_cast<int>(pieces.size()), res)) {
    const auto r = solveSimplexNewton(pieces, q2, start);
    if (!r.converged) continue;
    const bool seen = std::any_of(zeros.begin(), zeros.end(),
                                  [&](const SimplexNewtonResult& z) { return (z.lambda - r.lambda).norm() <= 1e-6; });
    if (!seen) zeros.push_back(r);
  }
  return zeros;
}

}  // namespace pwq
