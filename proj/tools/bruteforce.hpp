#pragma once

// Multistart brute force for difference-max programs: projected subgradient
// descent, Newton polish on the detected structure, and a sampled slope filter.
// It only evaluates pieces and gradients, so it can cross-check the enumerators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "pwq/core.hpp"

namespace oracle {

using pwq::Mat;
using pwq::Vec;

inline Vec unitDirection(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec d(n);
  do {
    for (int i = 0; i < n; ++i) d(i) = g(rng);
  } while (d.norm() < 1e-12);
  return d / d.norm();
}

// Euclidean projection onto {A x <= b, E x = d} by Dykstra's alternating
// projections over the individual rows.
inline Vec projectPolyhedron(const pwq::Polyhedron& X, const Vec& y, int sweeps = 200) {
  const int m = X.numInequalities(), me = X.numEqualities();
  if (m + me == 0) return y;
  if (me == 0 && ((X.A() * y - X.b()).array() <= 0.0).all()) return y;
  Vec x = y;
  Mat inc = Mat::Zero(y.size(), m + me);
  Vec z(y.size());
  for (int s = 0; s < sweeps; ++s) {
    double moved = 0.0;
    for (int r = 0; r < m + me; ++r) {
      const bool eq = r >= m;
      const auto a = eq ? X.E().row(r - m) : X.A().row(r);
      const double b = eq ? X.d()(r - m) : X.b()(r);
      z = x + inc.col(r);
      const double viol = a.dot(z) - b;
      const double shift = (eq || viol > 0.0) ? viol / a.squaredNorm() : 0.0;
      inc.col(r) = shift * a.transpose();
      moved += (z - shift * a.transpose() - x).squaredNorm();
      x = z - shift * a.transpose();
    }
    if (moved < 1e-30) break;
  }
  return x;
}

inline double pieceMax(const pwq::MaxOfQuadratics& m, const Vec& x, int* arg = nullptr) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.size(); ++i) {
    const double v = m[i](x);
    if (v > best) {
      best = v;
      if (arg) *arg = i;
    }
  }
  return best;
}

inline double value(const pwq::DiffMaxProgram& f, const Vec& x) { return pieceMax(f.plus, x) - pieceMax(f.minus, x); }

// Smallest one-sided divided difference of f over random unit directions that
// keep x + t d inside X.
inline double sampledSlope(const pwq::DiffMaxProgram& f, const Vec& x, int samples, std::mt19937_64& rng,
                           double t = 1e-7) {
  const int n = static_cast<int>(x.size());
  const Mat nullE = f.feasible.numEqualities() > 0 ? Mat(Eigen::FullPivLU<Mat>(f.feasible.E()).kernel())
                                                   : Mat(Mat::Identity(n, n));
  const double fx = value(f, x);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec d = nullE * unitDirection(static_cast<int>(nullE.cols()), rng);
    d.normalize();
    const Vec y = x + t * d;
    if (f.feasible.numInequalities() > 0 && ((f.feasible.A() * y - f.feasible.b()).array() > 1e-12).any()) continue;
    best = std::min(best, (value(f, y) - fx) / t);
  }
  return best;
}

struct OraclePoint {
  Vec x;
  double value = 0.0;
};

struct OracleOptions {
  int starts = 10000;
  int iterations = 2000;
  double startBox = 3.0;   // starts uniform in [-startBox, startBox]^n, then projected
  double fenceBox = 20.0;  // runs leaving this box are discarded
  double structureTol = 1e-3;
  double filter = -1e-4;
  int filterSamples = 2000;
};

namespace detail {

// Newton on the stationarity system of a guessed structure: plus pieces I
// tied, rows R tight, one minus piece j, multipliers (lambda on I, mu on R):
//   sum lambda_i grad f_i - grad g_j + A_R' mu + E' nu = 0, sum lambda = 1,
//   f_i = f_{i0}, A_R x = b_R, E x = d.
inline std::optional<Vec> polishStructure(const pwq::DiffMaxProgram& f, const Vec& x0, const std::vector<int>& I,
                                          const std::vector<int>& R, int j) {
  const int n = static_cast<int>(x0.size()), ki = static_cast<int>(I.size()), kr = static_cast<int>(R.size());
  const int me = f.feasible.numEqualities();
  const int nv = n + ki + kr + me;
  const Mat& A = f.feasible.A();
  const Mat& E = f.feasible.E();
  auto residual = [&](const Vec& z) {
    const Vec x = z.head(n);
    Vec r(nv);
    Vec st = -f.minus[j].gradient(x);
    for (int a = 0; a < ki; ++a) st += z(n + a) * f.plus[I[a]].gradient(x);
    for (int a = 0; a < kr; ++a) st += z(n + ki + a) * A.row(R[a]).transpose();
    for (int a = 0; a < me; ++a) st += z(n + ki + kr + a) * E.row(a).transpose();
    r.head(n) = st;
    int k = n;
    r(k++) = z.segment(n, ki).sum() - 1.0;
    for (int a = 1; a < ki; ++a) r(k++) = f.plus[I[a]](x) - f.plus[I[0]](x);
    for (int a = 0; a < kr; ++a) r(k++) = A.row(R[a]).dot(x) - f.feasible.b()(R[a]);
    for (int a = 0; a < me; ++a) r(k++) = E.row(a).dot(x) - f.feasible.d()(a);
    return r;
  };
  // Multiplier guess by least squares at x0.
  Mat g(n, ki + kr + me);
  for (int a = 0; a < ki; ++a) g.col(a) = f.plus[I[a]].gradient(x0);
  for (int a = 0; a < kr; ++a) g.col(ki + a) = A.row(R[a]).transpose();
  for (int a = 0; a < me; ++a) g.col(ki + kr + a) = E.row(a).transpose();
  Mat ga(n + 1, ki + kr + me);
  ga.topRows(n) = g;
  ga.row(n).setZero();
  ga.row(n).head(ki).setOnes();
  Vec rhs(n + 1);
  rhs.head(n) = f.minus[j].gradient(x0);
  rhs(n) = 1.0;
  Vec z(nv);
  z.head(n) = x0;
  z.tail(nv - n) = ga.completeOrthogonalDecomposition().solve(rhs);
  Vec r = residual(z);
  for (int it = 0; it < 60 && r.norm() > 1e-13; ++it) {
    Mat jac(nv, nv);
    for (int c = 0; c < nv; ++c) {
      const double h = 1e-7 * (1.0 + std::abs(z(c)));
      Vec zp = z, zm = z;
      zp(c) += h;
      zm(c) -= h;
      jac.col(c) = (residual(zp) - residual(zm)) / (2.0 * h);
    }
    const Vec step = jac.completeOrthogonalDecomposition().solve(-r);
    z += step;
    r = residual(z);
    if (!z.allFinite()) return std::nullopt;
  }
  if (r.norm() > 1e-10) return std::nullopt;
  if ((z.segment(n, ki).array() < -1e-8).any() || (z.segment(n + ki, kr).array() < -1e-8).any()) return std::nullopt;
  return Vec(z.head(n));
}

inline std::vector<int> nearActive(const pwq::MaxOfQuadratics& m, const Vec& x, double tol) {
  const double top = pieceMax(m, x);
  std::vector<int> out;
  for (int i = 0; i < m.size(); ++i)
    if (m[i](x) >= top - tol * (1.0 + std::abs(top))) out.push_back(i);
  return out;
}

inline std::vector<std::vector<int>> subsetsContaining(const std::vector<int>& set, int must) {
  std::vector<std::vector<int>> out;
  const int k = static_cast<int>(set.size());
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<int> s;
    for (int a = 0; a < k; ++a)
      if (mask & (1u << a)) s.push_back(set[a]);
    if (must < 0 || std::find(s.begin(), s.end(), must) != s.end()) out.push_back(s);
  }
  return out;
}

}  // namespace detail

// d-stationary points of a difference-max program found by projected
// subgradient descent from random starts, polished by Newton on the detected
// structure and filtered by sampled directional slopes.
inline std::vector<OraclePoint> bruteForceStationary(const pwq::DiffMaxProgram& f, std::uint64_t seed,
                                                     const OracleOptions& opt = {}) {
  const int n = f.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-opt.startBox, opt.startBox);
  std::vector<Vec> limits;
  const pwq::Polyhedron& X = f.feasible;
  Vec hx(n), g(n), gm(n), y(n);
  // Index of the largest piece at x; its gradient is left in grad.
  auto argmaxGradient = [&](const pwq::MaxOfQuadratics& m, const Vec& x, Vec& grad) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.size(); ++i) {
      hx.noalias() = m[i].hessian() * x;
      const double v = 0.5 * x.dot(hx) + m[i].linear().dot(x) + m[i].constant();
      if (v > best) {
        best = v;
        grad = hx + m[i].linear();
      }
    }
  };
  auto inside = [&](const Vec& v) {
    if (X.numEqualities() > 0) return false;
    for (int r = 0; r < X.numInequalities(); ++r)
      if (X.A().row(r).dot(v) > X.b()(r)) return false;
    return true;
  };
  for (int s = 0; s < opt.starts; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = u(rng);
    x = projectPolyhedron(X, x);
    bool escaped = false;
    for (int k = 1; k <= opt.iterations; ++k) {
      argmaxGradient(f.plus, x, g);
      argmaxGradient(f.minus, x, gm);
      g -= gm;
      y = x - (1.0 / k) / std::max(1.0, g.norm()) * g;
      if (!inside(y)) y = projectPolyhedron(X, y, 50);
      // A point the projection returns unchanged stays fixed for all shorter steps.
      const bool fixed = (y - x).norm() <= 1e-14 * (1.0 + x.norm());
      x.swap(y);
      if (x.cwiseAbs().maxCoeff() > opt.fenceBox) {
        escaped = true;
        break;
      }
      if (fixed) break;
    }
    if (escaped) continue;
    bool seen = false;
    for (const auto& y : limits) seen = seen || (y - x).norm() < 1e-4;
    if (!seen) limits.push_back(x);
  }

  std::vector<OraclePoint> out;
  for (const auto& x : limits) {
    const auto plusAct = detail::nearActive(f.plus, x, opt.structureTol);
    const auto minusAct = detail::nearActive(f.minus, x, opt.structureTol);
    std::vector<int> rows;
    for (int r = 0; r < f.feasible.numInequalities(); ++r)
      if (f.feasible.A().row(r).dot(x) >= f.feasible.b()(r) - opt.structureTol) rows.push_back(r);
    int top = 0;
    pieceMax(f.plus, x, &top);
    std::optional<Vec> polished;
    for (const auto& I : detail::subsetsContaining(plusAct, top)) {
      for (const auto& R : detail::subsetsContaining(rows, -1)) {
        for (int j : minusAct) {
          auto p = detail::polishStructure(f, x, I, R, j);
          if (p && (*p - x).norm() < 10.0 * opt.structureTol + 1e-2 && f.feasible.contains(*p, 1e-9)) {
            polished = p;
            break;
          }
        }
        if (polished) break;
      }
      if (polished) break;
    }
    if (!polished) continue;
    if (sampledSlope(f, *polished, opt.filterSamples, rng) < opt.filter) continue;
    bool dup = false;
    for (const auto& o : out) dup = dup || (o.x - *polished).norm() < 1e-6;
    if (!dup) out.push_back({*polished, value(f, *polished)});
  }
  return out;
}

// Distinct values of f (values within tol merged).
inline std::vector<double> distinctValues(const std::vector<OraclePoint>& pts, double tol = 1e-6) {
  std::vector<double> v;
  for (const auto& p : pts) v.push_back(p.value);
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

}  // namespace oracle
