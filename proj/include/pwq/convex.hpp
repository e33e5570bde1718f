#pragma once

// Primal-dual interior-point method (Mehrotra predictor-corrector) for
// convex programs with a quadratic objective, linear constraints and
// convex quadratic inequalities:
//
//   minimize   0.5 x'Hx + g'x
//   subject to A x <= b,  E x = d,  0.5 x'H_i x + g_i'x + c_i <= 0.
//
// Linear algebra is sparse (LDL' of the regularized quasi-definite KKT
// matrix), so structured problems with many epigraph variables stay cheap.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pwq/types.hpp"

namespace pwq {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct QuadraticConstraint {
  SpMat hessian;
  Vec linear;
  double constant = 0.0;
  double operator()(const Vec& x) const { return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant; }
  Vec gradient(const Vec& x) const { return hessian * x + linear; }
};

struct ConvexProgram {
  int n = 0;
  SpMat H;
  Vec g;
  SpMat A;
  Vec b;
  SpMat E;
  Vec d;
  std::vector<QuadraticConstraint> quad;

  explicit ConvexProgram(int dim = 0) : n(dim), H(dim, dim), g(Vec::Zero(dim)), A(0, dim), b(0), E(0, dim), d(0) {}

  double objective(const Vec& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
  int numInequalities() const { return static_cast<int>(A.rows() + quad.size()); }
};

enum class ConvexStatus { kSolved, kNotConverged };

struct ConvexResult {
  ConvexStatus status = ConvexStatus::kNotConverged;
  Vec x;
  Vec z;  // inequality multipliers: linear rows first, then quadratic rows
  Vec y;  // equality multipliers
  double objective = std::numeric_limits<double>::quiet_NaN();
  double kktResidual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool solved() const { return status == ConvexStatus::kSolved; }
};

struct ConvexOptions {
  double tol = 1e-10;
  int maxIter = 200;
  bool polish = true;  // active-set refinement for linearly constrained problems
};

namespace detail {

inline double infNorm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline double maxStepPositive(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

struct Residuals {
  Vec rd, rp, re;
  double dual, primal, eq, mu, kkt;
};

// Dense active-set polish for purely linear constraints: re-solve the
// equality-constrained QP on the rows the interior-point iterate marks as
// binding, and keep it only when it is feasible, no worse, and dual feasible.
inline void polishLinear(const ConvexProgram& p, ConvexResult& r) {
  const int n = p.n;
  const Mat A = Mat(p.A), E = Mat(p.E), H = Mat(p.H);
  const Vec slack = p.b - A * r.x;
  std::vector<int> act;
  for (int i = 0; i < A.rows(); ++i)
    if (slack(i) <= 1e-6 * (1.0 + std::abs(p.b(i))) && r.z(i) > slack(i)) act.push_back(i);
  const int ma = static_cast<int>(act.size()), me = static_cast<int>(E.rows());
  Mat k = Mat::Zero(n + ma + me, n + ma + me);
  Vec rhs = Vec::Zero(n + ma + me);
  k.topLeftCorner(n, n) = H;
  rhs.head(n) = -p.g;
  for (int i = 0; i < ma; ++i) {
    k.block(n + i, 0, 1, n) = A.row(act[i]);
    k.block(0, n + i, n, 1) = A.row(act[i]).transpose();
    rhs(n + i) = p.b(act[i]);
  }
  if (me > 0) {
    k.block(n + ma, 0, me, n) = E;
    k.block(0, n + ma, n, me) = E.transpose();
    rhs.tail(me) = p.d;
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(k);
  const Vec sol = cod.solve(rhs);
  if ((k * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return;
  const Vec x = sol.head(n);
  if (!x.allFinite()) return;
  const Vec s2 = p.b - A * x;
  for (int i = 0; i < s2.size(); ++i)
    if (s2(i) < -1e-12 * (1.0 + std::abs(p.b(i)))) return;
  for (int i = 0; i < ma; ++i)
    if (sol(n + i) < -1e-9) return;
  const double obj = p.objective(x);
  if (obj > r.objective + 1e-12 * (1.0 + std::abs(r.objective))) return;
  r.x = x;
  r.objective = obj;
  r.z.setZero();
  for (int i = 0; i < ma; ++i) r.z(act[i]) = std::max(0.0, sol(n + i));
  if (me > 0) r.y = sol.tail(me);
}

}  // namespace detail

inline ConvexResult solveConvex(const ConvexProgram& p, const Vec& start = Vec(), const ConvexOptions& opt = {}) {
  const int n = p.n;
  const int ml = static_cast<int>(p.A.rows());
  const int mq = static_cast<int>(p.quad.size());
  const int m = ml + mq;
  const int me = static_cast<int>(p.E.rows());

  Vec x = start.size() == n ? start : Vec::Zero(n);
  auto cons = [&](const Vec& v) {
    Vec c(m);
    if (ml > 0) c.head(ml) = p.A * v - p.b;
    for (int i = 0; i < mq; ++i) c(ml + i) = p.quad[i](v);
    return c;
  };
  auto jacobian = [&](const Vec& v) {
    Triplets t;
    for (int k = 0; k < p.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(p.A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < mq; ++i) {
      const Vec gi = p.quad[i].gradient(v);
      for (int j = 0; j < n; ++j)
        if (gi(j) != 0.0) t.emplace_back(ml + i, j, gi(j));
    }
    SpMat jm(m, n);
    jm.setFromTriplets(t.begin(), t.end());
    return jm;
  };

  Vec s = (-cons(x)).cwiseMax(1.0);
  Vec z = Vec::Ones(m);
  Vec y = Vec::Zero(me);

  const double gscale = 1.0 + detail::infNorm(p.g);
  const double bscale = 1.0 + std::max(detail::infNorm(p.b), detail::infNorm(p.d));
  const double delta = 1e-10;

  ConvexResult res;
  auto residuals = [&](const Vec& xv, const Vec& sv, const Vec& zv, const Vec& yv, const SpMat& jm) {
    detail::Residuals r;
    r.rd = p.H * xv + p.g;
    if (m > 0) r.rd += jm.transpose() * zv;
    if (me > 0) r.rd += p.E.transpose() * yv;
    r.rp = cons(xv) + sv;
    r.re = me > 0 ? Vec(p.E * xv - p.d) : Vec(0);
    r.mu = m > 0 ? sv.dot(zv) / m : 0.0;
    r.dual = detail::infNorm(r.rd) / gscale;
    r.primal = detail::infNorm(r.rp) / bscale;
    r.eq = detail::infNorm(r.re) / bscale;
    r.kkt = std::max({r.dual, r.primal, r.eq, r.mu});
    return r;
  };

  for (int iter = 0; iter < opt.maxIter; ++iter) {
    const SpMat jm = jacobian(x);
    const auto r = residuals(x, s, z, y, jm);
    res.iterations = iter;
    if (r.kkt <= opt.tol) {
      res.status = ConvexStatus::kSolved;
      break;
    }

    // W + J' S^{-1} Z J, bordered by the equality rows.
    SpMat w = p.H;
    for (int i = 0; i < mq; ++i) w += z(ml + i) * p.quad[i].hessian;
    Vec dvec = z.cwiseQuotient(s);
    SpMat k = w + SpMat(jm.transpose() * dvec.asDiagonal() * jm);
    Triplets t;
    for (int c = 0; c < k.outerSize(); ++c)
      for (SpMat::InnerIterator it(k, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, delta);
    for (int c = 0; c < p.E.outerSize(); ++c)
      for (SpMat::InnerIterator it(p.E, c); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n + it.row(), it.value());
      }
    for (int i = 0; i < me; ++i) t.emplace_back(n + i, n + i, -delta);
    SpMat kkt(n + me, n + me);
    kkt.setFromTriplets(t.begin(), t.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(kkt);
    if (ldlt.info() != Eigen::Success) break;

    auto solveDir = [&](const Vec& rc, Vec& dx, Vec& ds, Vec& dz, Vec& dy) {
      Vec top = -r.rd;
      if (m > 0) top -= jm.transpose() * ((-rc + z.cwiseProduct(r.rp)).cwiseQuotient(s));
      Vec rhs(n + me);
      rhs.head(n) = top;
      if (me > 0) rhs.tail(me) = -r.re;
      Vec sol = ldlt.solve(rhs);
      for (int refine = 0; refine < 2; ++refine) {
        Vec res2 = rhs - kkt * sol;
        for (int i = 0; i < n; ++i) res2(i) += delta * sol(i);
        for (int i = 0; i < me; ++i) res2(n + i) -= delta * sol(n + i);
        sol += ldlt.solve(res2);
      }
      dx = sol.head(n);
      dy = sol.tail(me);
      ds = -r.rp - jm * dx;
      dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Vec dx, ds, dz, dy;
    if (m == 0) {
      solveDir(Vec(0), dx, ds, dz, dy);
      x += dx;
      y += dy;
      continue;
    }
    const Vec rcAff = s.cwiseProduct(z);
    solveDir(rcAff, dx, ds, dz, dy);
    const double aP = detail::maxStepPositive(s, ds), aD = detail::maxStepPositive(z, dz);
    const double alpha = std::min(aP, aD);
    const double muAff = (s + alpha * ds).dot(z + alpha * dz) / m;
    const double sigma = std::pow(std::max(0.0, muAff / std::max(r.mu, 1e-300)), 3.0);
    const Vec rc = rcAff + ds.cwiseProduct(dz) - Vec::Constant(m, sigma * r.mu);
    solveDir(rc, dx, ds, dz, dy);
    const double step = std::min(1.0, 0.99 * std::min(detail::maxStepPositive(s, ds), detail::maxStepPositive(z, dz)));
    x += step * dx;
    s += step * ds;
    z += step * dz;
    y += step * dy;
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);
  }
  const auto fin = residuals(x, s, z, y, jacobian(x));
  res.kktResidual = fin.kkt;
  res.x = x;
  res.z = z;
  res.y = y;
  res.objective = p.objective(x);
  if (fin.kkt <= opt.tol) res.status = ConvexStatus::kSolved;
  if (opt.polish && mq == 0 && res.solved() && n + ml <= 400) detail::polishLinear(p, res);
  return res;
}

}  // namespace pwq
