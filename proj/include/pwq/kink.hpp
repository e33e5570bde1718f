#pragma once

// Points x with (lambda P - Q) x = q - lambda p and target(x) = 0 for some
// lambda in [lo, hi]. This is the kink system of max(f1, 0) - f2 (target = f1,
// stationarity lambda grad f1 = grad f2) and, after a change of variable, the
// multiplier system of a quadratically constrained program.
//
// Case 1 takes the real roots of det(lambda P - Q), where the solution set is
// an affine subspace. Case 2 runs along the rational curve between roots,
// where the target becomes a polynomial in lambda.

#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pwq/core.hpp"
#include "pwq/linalg.hpp"
#include "pwq/lp.hpp"

namespace pwq {

struct KinkSystem {
  Mat P, Q;
  Vec p, q;
  QuadraticFn target;
};

struct KinkPoint {
  Vec x;
  double lambda = 0.0;
  std::string branch;
};

struct KinkOptions {
  double sweepBox = 10.0;
  int sweepPoints = 100;
  double singularTol = 1e-7;    // relative singular-value cut at determinant roots
  double zeroPolyTol = 1e-10;   // relative size below which the target polynomial vanishes
  int gridPoints = 101;         // lambda grid for pencils singular everywhere
  std::function<double(const Vec&)> value;  // optional: checked for constancy on vanishing intervals
};

struct KinkResult {
  std::vector<KinkPoint> points;
  std::vector<std::string> flags;
  bool complete = true;
  std::vector<double> detRoots;

  void flag(const std::string& f, bool stillComplete = false) {
    flags.push_back(f);
    complete = complete && stillComplete;
  }
};

namespace detail {

inline double targetTolerance(const QuadraticFn& t, const Vec& x) {
  const double xn = x.norm();
  return 1e-8 * (1.0 + std::abs(t.constant()) + t.linear().norm() * xn + t.hessian().norm() * xn * xn);
}

// Real solutions of a y^2 + b y + c = 0; an identically satisfied equation
// yields the single representative y = 0.
inline std::vector<double> solveQuadratic(double a, double b, double c) {
  const double scale = std::abs(a) + std::abs(b) + std::abs(c);
  if (scale == 0.0) return {0.0};
  if (std::abs(a) <= 1e-13 * scale) {
    if (std::abs(b) <= 1e-13 * scale) return std::abs(c) <= 1e-13 * scale ? std::vector<double>{0.0} : std::vector<double>{};
    return {-c / b};
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < -1e-13 * (b * b + std::abs(4.0 * a * c))) return {};
  if (disc <= 0.0) return {-b / (2.0 * a)};
  const double s = std::sqrt(disc);
  const double qq = -0.5 * (b + (b >= 0.0 ? s : -s));
  std::vector<double> out{qq / a};
  if (qq != 0.0) out.push_back(c / qq);
  return out;
}

struct SingularSolve {
  std::vector<Vec> points;
  int nullity = 0;
};

// Points of {M x = rhs} on which target vanishes, for a numerically singular M.
inline SingularSolve targetOnAffineSolutions(const Mat& m, const Vec& rhs, const QuadraticFn& target,
                                             const KinkOptions& opt, double scale = 0.0) {
  SingularSolve out;
  const int n = static_cast<int>(m.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double cut = opt.singularTol * std::max({smax, scale, 1e-300});
  Vec x0 = Vec::Zero(n);
  std::vector<int> nullIdx;
  for (int i = 0; i < n; ++i) {
    const double beta = svd.matrixU().col(i).dot(rhs);
    if (s(i) > cut) {
      x0 += (beta / s(i)) * svd.matrixV().col(i);
    } else {
      if (std::abs(beta) > 1e-7 * (1.0 + rhs.norm())) return out;  // inconsistent
      nullIdx.push_back(i);
    }
  }
  out.nullity = static_cast<int>(nullIdx.size());
  Mat z(n, nullIdx.size());
  for (std::size_t k = 0; k < nullIdx.size(); ++k) z.col(k) = svd.matrixV().col(nullIdx[k]);
  const QuadraticFn r = target.restricted(x0, z);
  const Mat& h = r.hessian();
  const Vec& g = r.linear();
  const double c = r.constant();

  if (out.nullity == 0) {
    if (std::abs(c) <= targetTolerance(target, x0)) out.points.push_back(x0);
    return out;
  }
  if (out.nullity == 1) {
    for (double y : solveQuadratic(0.5 * h(0, 0), g(0), c)) out.points.push_back(x0 + y * z.col(0));
    return out;
  }
  // Two or more free directions: sweep the first, solve exactly in the second.
  const int steps = std::max(2, opt.sweepPoints);
  std::vector<double> grid{0.0};
  for (int k = 0; k < steps; ++k) grid.push_back(-opt.sweepBox + 2.0 * opt.sweepBox * k / (steps - 1));
  for (double y1 : grid) {
    const double a = 0.5 * h(1, 1);
    const double b = h(0, 1) * y1 + g(1);
    const double cc = 0.5 * h(0, 0) * y1 * y1 + g(0) * y1 + c;
    for (double y2 : solveQuadratic(a, b, cc)) out.points.push_back(x0 + y1 * z.col(0) + y2 * z.col(1));
  }
  return out;
}

// Gauss-Newton polish of F(x, lambda) = [(lambda P - Q) x - q + lambda p; target(x)].
inline void refineKink(const KinkSystem& s, Vec& x, double& lambda, double lo, double hi) {
  const int n = static_cast<int>(x.size());
  auto residual = [&](const Vec& xv, double l) {
    Vec f(n + 1);
    f.head(n) = (l * s.P - s.Q) * xv - s.q + l * s.p;
    f(n) = s.target(xv);
    return f;
  };
  Vec f = residual(x, lambda);
  for (int it = 0; it < 40 && f.norm() > 0.0; ++it) {
    Mat j(n + 1, n + 1);
    j.topLeftCorner(n, n) = lambda * s.P - s.Q;
    j.topRightCorner(n, 1) = s.P * x + s.p;
    j.bottomLeftCorner(1, n) = s.target.gradient(x).transpose();
    j(n, n) = 0.0;
    const Vec step = j.completeOrthogonalDecomposition().solve(-f);
    if (!step.allFinite()) return;
    const Vec x2 = x + step.head(n);
    const double l2 = std::clamp(lambda + step(n), lo, hi);
    const Vec f2 = residual(x2, l2);
    if (!(f2.norm() < f.norm())) return;
    x = x2;
    lambda = l2;
    f = f2;
  }
}

}  // namespace detail

inline KinkResult findKinkPoints(const KinkSystem& s, double lo, double hi, const KinkOptions& opt = {}) {
  KinkResult out;
  const int n = static_cast<int>(s.P.rows());
  const double pencilScale = 1.0 + s.P.norm() + s.Q.norm();

  auto caseOne = [&](double lambda, const std::string& branch) {
    const Mat m = lambda * s.P - s.Q;
    const Vec rhs = s.q - lambda * s.p;
    auto sol = detail::targetOnAffineSolutions(m, rhs, s.target, opt, std::abs(lambda) * s.P.norm() + s.Q.norm());
    if (sol.nullity > 2) out.flag("case1-nullity-above-2");
    for (auto& x : sol.points) out.points.push_back({x, lambda, branch});
  };

  const Polynomial det = detPolynomial(s.P, s.Q);
  if (det.degree() < 0) {
    const bool pZero = s.P.norm() <= 1e-14 * pencilScale && s.p.norm() == 0.0 ? true : s.P.norm() <= 1e-14 * pencilScale;
    if (pZero && s.target.isAffine()) {
      // -Q x + lambda p = q and target(x) = 0 are linear in (x, lambda).
      LinearProgram lp(n + 1);
      for (int i = 0; i < n; ++i) lp.free[i] = true;
      for (int r = 0; r < n; ++r) {
        Vec row(n + 1);
        row.head(n) = -s.Q.row(r).transpose();
        row(n) = s.p(r);
        lp.addEqual(row, s.q(r));
      }
      Vec trow(n + 1);
      trow.head(n) = s.target.linear();
      trow(n) = 0.0;
      lp.addEqual(trow, -s.target.constant());
      Vec lrow = Vec::Zero(n + 1);
      lrow(n) = 1.0;
      lp.addLessEqual(lrow, hi);
      lp.addLessEqual(-lrow, -lo);
      for (double sense : {1.0, -1.0}) {
        lp.c.setZero();
        lp.c(n) = sense;
        const LPResult r = solveLP(lp);
        if (r.optimal()) out.points.push_back({r.x.head(n), r.x(n), "kink-affine"});
      }
      return out;
    }
    out.flag("singular-pencil-everywhere");
    for (int k = 0; k < opt.gridPoints; ++k) {
      const double lambda = lo + (hi - lo) * k / std::max(1, opt.gridPoints - 1);
      caseOne(lambda, "kink-grid");
    }
    return out;
  }

  // Case 1: determinant roots.
  if (det.degree() > 0) out.detRoots = realRootsInInterval(det, lo, hi);
  for (double r : out.detRoots) caseOne(r, "kink-case1");

  // Case 2: along x(lambda) = -N(lambda) / det(lambda).
  const RationalCurve curve = parametricInverseCurve(s.P, s.Q, s.p, s.q);
  const Mat& h = s.target.hessian();
  Polynomial quad, lin;
  for (int i = 0; i < n; ++i) {
    lin = lin + s.target.linear()(i) * curve.numerator[i];
    for (int j = 0; j < n; ++j)
      if (h(i, j) != 0.0) quad = quad + (0.5 * h(i, j)) * (curve.numerator[i] * curve.numerator[j]);
  }
  const Polynomial linTerm = -1.0 * (curve.denominator * lin);
  const Polynomial constTerm = s.target.constant() * (curve.denominator * curve.denominator);
  const Polynomial poly = quad + linTerm + constTerm;
  const double scale = std::max({quad.maxAbsCoeff(), linTerm.maxAbsCoeff(), constTerm.maxAbsCoeff()});

  auto pointAt = [&](double lambda) -> Vec {
    return (lambda * s.P - s.Q).fullPivLu().solve(s.q - lambda * s.p);
  };

  if (poly.maxAbsCoeff() <= opt.zeroPolyTol * scale) {
    // target vanishes along the whole curve: one representative per interval.
    std::vector<double> breaks{lo};
    for (double r : out.detRoots)
      if (r > breaks.back() + 1e-9 && r < hi - 1e-9) breaks.push_back(r);
    breaks.push_back(hi);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double a = breaks[k], b = breaks[k + 1];
      if (b - a <= 1e-9) continue;
      const double mid = 0.5 * (a + b);
      out.points.push_back({pointAt(mid), mid, "kink-case2-constant"});
      if (opt.value) {
        double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
        for (int t = 0; t < 20; ++t) {
          const double l = a + (b - a) * (t + 0.5) / 20.0;
          const double v = opt.value(pointAt(l));
          vmin = std::min(vmin, v);
          vmax = std::max(vmax, v);
        }
        if (vmax - vmin > 1e-6 * (1.0 + std::abs(vmax))) out.flag("case2-value-not-constant", true);
      }
    }
    return out;
  }

  for (double r : realRootsInInterval(poly, lo, hi)) {
    bool nearDetRoot = false;
    for (double d : out.detRoots) nearDetRoot = nearDetRoot || std::abs(r - d) <= 1e-9 * (1.0 + std::abs(d));
    if (nearDetRoot) continue;
    Vec x = pointAt(r);
    double lambda = r;
    if (!x.allFinite()) continue;
    detail::refineKink(s, x, lambda, lo, hi);
    if (std::abs(s.target(x)) <= detail::targetTolerance(s.target, x)) out.points.push_back({x, lambda, "kink-case2"});
  }
  return out;
}

}  // namespace pwq
