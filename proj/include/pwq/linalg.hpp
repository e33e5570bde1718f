#pragma once

// Dense kernels: numerical rank and null spaces, real polynomials with
// Sturm-sequence root isolation, and the polynomial representation of the
// parametric solve lambda -> (lambda P - Q)^{-1} (lambda p - q).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pwq/error.hpp"
#include "pwq/types.hpp"

namespace pwq {

inline constexpr double kRankTolerance = 1e-10;

inline int numericalRank(const Mat& m, double relTol = kRankTolerance) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(m);
  qr.setThreshold(relTol);
  if (qr.maxPivot() == 0.0) return 0;
  return static_cast<int>(qr.rank());
}

/// Orthonormal basis of ker(M), one column per free direction.
///
/// Column-pivoted QR of M^T: the trailing n - rank columns of the orthogonal
/// factor span the orthogonal complement of range(M^T).
inline Mat nullSpaceBasis(const Mat& m, int cols = -1) {
  const int n = cols >= 0 ? cols : static_cast<int>(m.cols());
  if (m.rows() == 0) return Mat::Identity(n, n);
  Eigen::ColPivHouseholderQR<Mat> qr(m.transpose());
  qr.setThreshold(kRankTolerance);
  const int rank = qr.maxPivot() == 0.0 ? 0 : static_cast<int>(qr.rank());
  if (rank == 0) return Mat::Identity(n, n);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q.rightCols(n - rank);
}

struct AffineSolution {
  Vec particular;  // least-norm solution
  Mat nullBasis;   // directions along which the solution set extends
  double residual = 0.0;
  bool consistent = false;
};

// Solution set of M x = rhs as particular + span(nullBasis).
inline AffineSolution solveAffine(const Mat& m, const Vec& rhs, double tol = 1e-9) {
  AffineSolution out;
  const auto n = m.cols();
  if (m.rows() == 0) {
    out.particular = Vec::Zero(n);
    out.nullBasis = Mat::Identity(n, n);
    out.consistent = true;
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(m);
  cod.setThreshold(kRankTolerance);
  out.particular = cod.solve(rhs);
  out.residual = (m * out.particular - rhs).norm();
  const double scale = 1.0 + rhs.norm() + m.norm() * out.particular.norm();
  out.consistent = out.residual <= tol * scale;
  out.nullBasis = nullSpaceBasis(m);
  return out;
}

/// Real polynomial with ascending-degree coefficients.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {}
  static Polynomial constant(double v) { return Polynomial({v}); }
  static Polynomial monomial(double coeff, int degree) {
    std::vector<double> c(degree + 1, 0.0);
    c[degree] = coeff;
    return Polynomial(std::move(c));
  }
  // prod (x - r) over the given roots
  static Polynomial fromRoots(const std::vector<double>& roots, double lead = 1.0) {
    Polynomial p = constant(lead);
    for (double r : roots) p = p * Polynomial({-r, 1.0});
    return p;
  }

  const std::vector<double>& coeffs() const { return c_; }
  std::vector<double>& coeffs() { return c_; }

  double maxAbsCoeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }
  bool isZero(double relTol = 0.0, double scale = 0.0) const {
    return maxAbsCoeff() <= relTol * scale;
  }
  // Degree after dropping exact zeros; -1 for the zero polynomial.
  int degree() const {
    for (int k = static_cast<int>(c_.size()) - 1; k >= 0; --k)
      if (c_[k] != 0.0) return k;
    return -1;
  }
  double leading() const {
    const int d = degree();
    return d < 0 ? 0.0 : c_[d];
  }

  // Zero out coefficients below relTol * max|coeff| and drop the top zeros.
  Polynomial& trim(double relTol = 1e-12) {
    const double cut = relTol * maxAbsCoeff();
    for (double& v : c_)
      if (std::abs(v) <= cut) v = 0.0;
    c_.resize(std::max(degree() + 1, 0));
    return *this;
  }

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial();
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
    for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }
  friend Polynomial operator*(double s, const Polynomial& a) {
    Polynomial r = a;
    for (double& v : r.c_) v *= s;
    return r;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.c_.empty() || b.c_.empty()) return Polynomial();
    std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(c));
  }

  // Remainder of a / b (b must have a nonzero leading coefficient).
  static Polynomial remainder(const Polynomial& a, const Polynomial& b) {
    const int db = b.degree();
    std::vector<double> r = a.c_;
    r.resize(std::max(a.degree() + 1, 0));
    const double lead = b.c_[db];
    for (int k = static_cast<int>(r.size()) - 1; k >= db; --k) {
      const double f = r[k] / lead;
      if (f == 0.0) continue;
      for (int j = 0; j <= db; ++j) r[k - db + j] -= f * b.c_[j];
      r[k] = 0.0;
    }
    r.resize(std::min<std::size_t>(r.size(), static_cast<std::size_t>(std::max(db, 0))));
    return Polynomial(std::move(r));
  }

 private:
  std::vector<double> c_;
};

/// Sturm chain p0 = p, p1 = p', p_{k+1} = -rem(p_{k-1}, p_k).
class SturmSequence {
 public:
  explicit SturmSequence(const Polynomial& p) {
    Polynomial p0 = p;
    p0.trim(1e-14);
    normalize(p0);
    chain_.push_back(p0);
    if (p0.degree() <= 0) return;
    Polynomial p1 = p0.derivative();
    normalize(p1);
    chain_.push_back(p1);
    while (chain_.back().degree() > 0) {
      const Polynomial& a = chain_[chain_.size() - 2];
      const Polynomial& b = chain_.back();
      Polynomial r = Polynomial::remainder(a, b);
      // Remainders at round-off level mean b is (numerically) the gcd.
      const double scale = std::max(a.maxAbsCoeff(), b.maxAbsCoeff());
      for (double& v : r.coeffs())
        if (std::abs(v) <= 1e-11 * scale) v = 0.0;
      r.trim(0.0);
      if (r.degree() < 0) break;
      r = -1.0 * r;
      normalize(r);
      chain_.push_back(r);
    }
  }

  int signChanges(double x) const {
    int changes = 0;
    int prev = 0;
    for (const auto& q : chain_) {
      const double v = q(x);
      const int s = (v > 0.0) - (v < 0.0);
      if (s == 0) continue;
      if (prev != 0 && s != prev) ++changes;
      prev = s;
    }
    return changes;
  }

  // Distinct roots in the half-open interval (lo, hi].
  int countRoots(double lo, double hi) const { return signChanges(lo) - signChanges(hi); }

  const std::vector<Polynomial>& chain() const { return chain_; }

 private:
  static void normalize(Polynomial& q) {
    const double m = q.maxAbsCoeff();
    if (m > 0.0) q = (1.0 / m) * q;
  }
  std::vector<Polynomial> chain_;
};

/// All distinct real roots of poly in [lo, hi], ascending.
///
/// Sturm counts isolate the roots; each isolating interval is shrunk to
/// width 1e-12 (by sign bisection when p changes sign across it, otherwise
/// by further Sturm bisection, which also handles even multiplicities).
inline std::vector<double> realRootsInInterval(const Polynomial& poly, double lo, double hi) {
  require(lo <= hi, "bad-interval", "realRootsInInterval needs lo <= hi");
  Polynomial p = poly;
  require(p.maxAbsCoeff() > 0.0, "zero-polynomial", "realRootsInInterval on p == 0");
  p.trim(1e-14);
  if (p.degree() <= 0) return {};

  const double widen = 1e-10 * (1.0 + std::abs(lo) + std::abs(hi));
  const double a0 = lo - widen;
  const double b0 = hi + widen;
  const SturmSequence sturm(p);
  const double width = 1e-12;
  std::vector<double> roots;

  struct Cell {
    double a, b;
    int va, vb;
  };
  std::vector<Cell> stack{{a0, b0, sturm.signChanges(a0), sturm.signChanges(b0)}};
  while (!stack.empty()) {
    Cell c = stack.back();
    stack.pop_back();
    const int count = c.va - c.vb;
    if (count <= 0) continue;
    const double w = c.b - c.a;
    if (w <= width * (1.0 + std::abs(c.a))) {
      roots.push_back(0.5 * (c.a + c.b));
      continue;
    }
    if (count == 1) {
      double fa = p(c.a), fb = p(c.b);
      if (fa * fb < 0.0) {
        double a = c.a, b = c.b;
        while (b - a > width * (1.0 + std::abs(a))) {
          const double m = 0.5 * (a + b);
          const double fm = p(m);
          if (fm == 0.0) {
            a = b = m;
            break;
          }
          if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        roots.push_back(0.5 * (a + b));
        continue;
      }
    }
    const double m = 0.5 * (c.a + c.b);
    const int vm = sturm.signChanges(m);
    stack.push_back({m, c.b, vm, c.vb});
    stack.push_back({c.a, m, c.va, vm});
  }

  std::sort(roots.begin(), roots.end());
  std::vector<double> out;
  for (double r : roots) {
    if (r < lo - widen || r > hi + widen) continue;
    r = std::clamp(r, lo, hi);
    if (!out.empty() && std::abs(r - out.back()) <= 1e-9 * (1.0 + std::abs(r))) continue;
    out.push_back(r);
  }
  return out;
}

// Upper bound on the modulus of every root (Cauchy).
inline double cauchyRootBound(const Polynomial& poly) {
  Polynomial p = poly;
  p.trim(1e-14);
  const int d = p.degree();
  if (d <= 0) return 0.0;
  double m = 0.0;
  for (int k = 0; k < d; ++k) m = std::max(m, std::abs(p.coeffs()[k] / p.coeffs()[d]));
  return 1.0 + m;
}

/// Chebyshev points of the first kind mapped to [lo, hi].
inline std::vector<double> chebyshevNodes(int count, double lo = 0.0, double hi = 1.0) {
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) {
    const double c = std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * count));
    t[k] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * c;
  }
  return t;
}

// Least-squares polynomial of the given degree through (nodes, values).
inline Polynomial interpolate(const std::vector<double>& nodes, const Vec& values, int degree) {
  const int m = static_cast<int>(nodes.size());
  Mat v(m, degree + 1);
  for (int i = 0; i < m; ++i) {
    double pw = 1.0;
    for (int k = 0; k <= degree; ++k) {
      v(i, k) = pw;
      pw *= nodes[i];
    }
  }
  Vec c = v.colPivHouseholderQr().solve(values);
  return Polynomial(std::vector<double>(c.data(), c.data() + c.size()));
}

/// Coefficients of lambda -> det(lambda P - Q).
///
/// Interpolates determinant values at n + 1 Chebyshev nodes on [0, 1]. A
/// polynomial whose node values are all negligible against the Hadamard
/// bound is returned as the zero polynomial.
inline Polynomial detPolynomial(const Mat& p, const Mat& q) {
  require(p.rows() == p.cols() && q.rows() == q.cols() && p.rows() == q.rows(), "dimension-mismatch",
          "detPolynomial needs square matrices of equal size");
  const int n = static_cast<int>(p.rows());
  if (n == 0) return Polynomial::constant(1.0);
  const auto nodes = chebyshevNodes(n + 1);
  Vec vals(n + 1);
  double bound = 0.0;
  for (int k = 0; k <= n; ++k) {
    const Mat m = nodes[k] * p - q;
    vals(k) = m.fullPivLu().determinant();
    double h = 1.0;
    for (int r = 0; r < n; ++r) h *= m.row(r).norm();
    bound = std::max(bound, h);
  }
  if (vals.cwiseAbs().maxCoeff() <= 1e-13 * bound) return Polynomial();
  Polynomial out = interpolate(nodes, vals, n);
  out.trim(1e-12);
  return out;
}

/// x(lambda) = numerator(lambda) / denominator(lambda), one numerator per coordinate.
struct RationalCurve {
  std::vector<Polynomial> numerator;
  Polynomial denominator;

  int dim() const { return static_cast<int>(numerator.size()); }
  Vec numeratorAt(double lambda) const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v(i) = numerator[i](lambda);
    return v;
  }
  Vec operator()(double lambda) const { return numeratorAt(lambda) / denominator(lambda); }
};

namespace detail {

// Interpolation nodes on [0, 1] kept at least `gap` away from the given roots.
inline std::vector<double> nodesAwayFrom(int count, const std::vector<double>& roots, double gap = 1e-3) {
  auto nodes = chebyshevNodes(count);
  for (double& t : nodes) {
    for (int guard = 0; guard < 1000; ++guard) {
      bool close = false;
      for (double r : roots)
        if (std::abs(t - r) < gap) close = true;
      if (!close) break;
      t += 0.37 * gap;
    }
  }
  return nodes;
}

}  // namespace detail

/// Rational representation of lambda -> (lambda P - Q)^{-1} (lambda p - q).
///
/// The denominator is det(lambda P - Q); every numerator coordinate has
/// degree <= n and is fitted to det * x at n + 2 nodes.
inline RationalCurve parametricInverseCurve(const Mat& pm, const Mat& qm, const Vec& pv, const Vec& qv) {
  const int n = static_cast<int>(pm.rows());
  RationalCurve curve;
  curve.denominator = detPolynomial(pm, qm);
  require(curve.denominator.degree() >= 0, "singular-pencil", "det(lambda P - Q) vanishes identically");
  const auto roots = curve.denominator.degree() > 0
                         ? realRootsInInterval(curve.denominator, -0.5, 1.5)
                         : std::vector<double>{};
  const auto nodes = detail::nodesAwayFrom(n + 2, roots);
  Mat samples(n + 2, n);
  for (int k = 0; k < n + 2; ++k) {
    const double t = nodes[k];
    const Vec x = (t * pm - qm).fullPivLu().solve(t * pv - qv);
    samples.row(k) = (curve.denominator(t) * x).transpose();
  }
  curve.numerator.reserve(n);
  for (int i = 0; i < n; ++i) curve.numerator.push_back(interpolate(nodes, samples.col(i), n));
  return curve;
}

/// Matrices C^0..C^{n-1} with (A + tB)^{-1} = (sum_k t^k C^k) / det(A + tB),
/// i.e. the adjugate of A + tB as a matrix polynomial in t.
inline std::vector<Mat> adjugatePolynomial(const Mat& a, const Mat& b) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return {};
  const auto nodes = chebyshevNodes(n, -1.0, 1.0);
  std::vector<Mat> adj;
  for (double t : nodes) {
    const Mat m = a + t * b;
    Eigen::FullPivLU<Mat> lu(m);
    // det * inverse; nodes hitting a singular point would need the cofactor
    // route, which interpolation avoids by construction for generic pencils
    adj.push_back(lu.determinant() * lu.inverse());
  }
  std::vector<Mat> coeffs(n, Mat::Zero(n, n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      Vec vals(n);
      for (int k = 0; k < n; ++k) vals(k) = adj[k](r, c);
      const Polynomial poly = interpolate(nodes, vals, n - 1);
      for (int k = 0; k < static_cast<int>(poly.coeffs().size()) && k < n; ++k) coeffs[k](r, c) = poly.coeffs()[k];
    }
  return coeffs;
}

}  // namespace pwq
