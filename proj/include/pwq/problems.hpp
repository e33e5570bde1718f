#pragma once

#include <Eigen/QR>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "pwq/bstat.hpp"
#include "pwq/core.hpp"

namespace pwq {

/// max(x, 0) written as psi1 - psi2 with psi1, psi2 convex piecewise affine:
///   psi1(x) = (2n+1)x - n(n+1), psi2(x) = 2nx - n(n+1) on [n, n+1), both 0 for x <= 0.
/// Pieces n = 0..nMax are kept; the last one extends to the right.
struct Remark3Pair {
  int nMax = 10;

  MaxOfQuadratics psi1() const {
    std::vector<QuadraticFn> pieces{QuadraticFn::affine(Vec::Zero(1), 0.0)};
    for (int n = 0; n <= nMax; ++n)
      pieces.push_back(QuadraticFn::affine(Vec::Constant(1, 2.0 * n + 1), -double(n) * (n + 1)));
    return MaxOfQuadratics(pieces);
  }
  MaxOfQuadratics psi2() const {
    std::vector<QuadraticFn> pieces{QuadraticFn::affine(Vec::Zero(1), 0.0)};
    for (int n = 1; n <= nMax; ++n)
      pieces.push_back(QuadraticFn::affine(Vec::Constant(1, 2.0 * n), -double(n) * (n + 1)));
    return MaxOfQuadratics(pieces);
  }
  DiffMaxProgram program() const { return {psi1(), psi2()}; }
  double upperBound() const { return nMax + 1.0; }

  // Subdifferential of a convex max of affine pieces: the hull of active slopes.
  static std::pair<double, double> subdifferential(const MaxOfQuadratics& m, double x) {
    const Vec p = Vec::Constant(1, x);
    double lo = kInf, hi = -kInf;
    for (int i : m.activeSet(p, 0.0)) {
      const double s = m[i].linear()(0);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return {lo, hi};
  }
  std::pair<double, double> subdiff1(double x) const { return subdifferential(psi1(), x); }
  std::pair<double, double> subdiff2(double x) const { return subdifferential(psi2(), x); }
};

inline Remark3Pair makeRemark3(int nMax) {
  require(nMax >= 1, "invalid-argument", "nMax must be at least 1");
  return Remark3Pair{nMax};
}

/// A continuously differentiable difference of convex functions on the real
/// line with a stationary point t = 2n and value 2n + 2 in every period.
struct Remark12Fn {
  double tLo = -10.0, tHi = 10.0;

  struct Local {
    double n;
    bool firstHalf;
  };
  Local locate(double t) const {
    require(t >= tLo && t <= tHi, "out-of-domain", "t outside the truncated domain");
    const double n = std::floor(t / 2.0);
    return {n, t - 2.0 * n < 1.0};
  }
  double phi1(double t) const {
    const auto [n, first] = locate(t);
    return first ? 1.5 * t * t - 2 * n * t + 2 * n * n + n + 1 : 0.5 * t * t + 2 * (n + 1) * t - 2 * n * n - 3 * n;
  }
  double phi2(double t) const {
    const auto [n, first] = locate(t);
    return first ? 0.5 * t * t + 2 * n * t - 2 * n * n - n - 1 : 1.5 * t * t - 2 * (n + 1) * t + 2 * n * n + 3 * n;
  }
  double phi(double t) const { return phi1(t) - phi2(t); }
  double dphi1(double t) const {
    const auto [n, first] = locate(t);
    return first ? 3 * t - 2 * n : t + 2 * (n + 1);
  }
  double dphi2(double t) const {
    const auto [n, first] = locate(t);
    return first ? t + 2 * n : 3 * t - 2 * (n + 1);
  }
  double dphi(double t) const {
    const auto [n, first] = locate(t);
    return first ? 2 * t - 4 * n : -2 * t + 4 * (n + 1);
  }
};

inline Remark12Fn makeRemark12(double tLo, double tHi) {
  require(tLo < tHi, "invalid-argument", "empty interval");
  return Remark12Fn{tLo, tHi};
}

enum class PenaltyForm { kMinPenalty, kQuadraticPenalty, kRegularized };

/// Complementarity-constrained program  min f(x, y)  s.t.  0 <= y _|_ F(x, y) = q + Nx + My >= 0,
/// (x, y) in Z, reformulated as a piecewise program.
struct MPCCData {
  QuadraticFn f;  // over z = (x, y)
  Vec q;
  Mat N, M;
  Polyhedron Z;
  double gamma = 1.0;
  double epsilon = 0.0;

  int nx() const { return static_cast<int>(N.cols()); }
  int m() const { return static_cast<int>(q.size()); }
};

namespace detail {

// Rows of y >= 0 and F(x, y) >= 0 intersected with Z.
inline Polyhedron complementarityRegion(const MPCCData& d) {
  const int nx = d.nx(), m = d.m(), n = nx + m;
  Mat a = Mat::Zero(2 * m, n);
  Vec b = Vec::Zero(2 * m);
  a.block(0, nx, m, m) = -Mat::Identity(m, m);
  a.block(m, 0, m, nx) = -d.N;
  a.block(m, nx, m, m) = -d.M;
  b.tail(m) = d.q;
  return intersect(Polyhedron(a, b), d.Z);
}

// y'F(x, y) as a quadratic in z = (x, y).
inline QuadraticFn complementarityProduct(const MPCCData& d) {
  const int nx = d.nx(), m = d.m(), n = nx + m;
  Mat h = Mat::Zero(n, n);
  h.block(nx, 0, m, nx) = d.N;
  h.block(0, nx, nx, m) = d.N.transpose();
  h.block(nx, nx, m, m) = d.M + d.M.transpose();
  Vec l = Vec::Zero(n);
  l.tail(m) = d.q;
  return {h, l, 0.0};
}

}  // namespace detail

inline std::variant<DiffMaxProgram, DQCProgram> makeMPCCPenalty(const MPCCData& d, PenaltyForm form) {
  const int nx = d.nx(), m = d.m(), n = nx + m;
  require(d.N.rows() == m && d.M.rows() == m && d.M.cols() == m && d.f.dim() == n && d.Z.dim() == n,
          "dimension-mismatch", "MPCC data");
  const Polyhedron region = detail::complementarityRegion(d);
  switch (form) {
    case PenaltyForm::kMinPenalty: {
      if (m > 12) throw Error("too-large", "min-penalty needs 2^m pieces; m must be at most 12");
      // gamma * sum_i min(y_i, F_i) = -max_I -gamma (sum_{i in I} y_i + sum_{i not in I} F_i)
      std::vector<QuadraticFn> minus;
      for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
        Vec l = Vec::Zero(n);
        double c = 0.0;
        for (int i = 0; i < m; ++i) {
          if (mask & (1UL << i)) {
            l(nx + i) += 1.0;
          } else {
            l.head(nx) += d.N.row(i).transpose();
            l.tail(m) += d.M.row(i).transpose();
            c += d.q(i);
          }
        }
        minus.push_back(QuadraticFn::affine(-d.gamma * l, -d.gamma * c));
      }
      return DiffMaxProgram(MaxOfQuadratics({d.f}), MaxOfQuadratics(minus), region);
    }
    case PenaltyForm::kQuadraticPenalty:
      return DiffMaxProgram(MaxOfQuadratics({d.f + d.gamma * detail::complementarityProduct(d)}),
                            MaxOfQuadratics({QuadraticFn::zero(n)}), region);
    case PenaltyForm::kRegularized: {
      const QuadraticFn prod = detail::complementarityProduct(d);
      return DQCProgram{d.f, {QuadraticFn::zero(n)}, prod.hessian(), prod.linear(), -kInf, d.epsilon, region};
    }
  }
  throw Error("unsupported", "unknown penalty form");
}

/// min 1/2 x'P0 x + p0'x  s.t.  1/2 x'Qx <= beta2.
inline DQCProgram makeTrustRegion(const Mat& p0, const Vec& lin, const Mat& q, double beta2) {
  const int n = static_cast<int>(p0.rows());
  return DQCProgram{QuadraticFn(p0, lin, 0.0), {QuadraticFn::zero(n)}, q, Vec::Zero(n), -kInf, beta2,
                    Polyhedron::whole(n)};
}

/// min x'Dx - p0'x  s.t.  ||x|| = beta.
inline DQCProgram makeSphereProblem(const Mat& d, const Vec& p0, double beta) {
  const int n = static_cast<int>(d.rows());
  return DQCProgram{QuadraticFn(2.0 * d, -p0, 0.0), {QuadraticFn::zero(n)}, 2.0 * Mat::Identity(n, n),
                    Vec::Zero(n), beta * beta, beta * beta, Polyhedron::whole(n)};
}

/// Reproducible random problems.
struct InstanceDims {
  int n = 2;
  int k1 = 2;
  int k2 = 2;
  int m = 4;  // inequality rows (qp, twopiece)
};

struct Instance {
  std::string kind;
  std::optional<DiffMaxProgram> program;  // problem5, qp, twopiece, convex
  std::optional<DQCProgram> dqc;          // dqc
  std::vector<QuadraticFn> pieces;        // prop9b: concave pieces
  std::optional<QuadraticFn> q2;          // prop9b: strictly convex quadratic
};

namespace detail {

class InstanceRng {
 public:
  explicit InstanceRng(std::uint64_t seed) : rng_(seed) {}
  double normal() { return n_(rng_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * u_(rng_); }
  Vec vector(int n, double s = 1.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = s * normal();
    return v;
  }
  Mat orthogonal(int n) {
    Mat g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = normal();
    Eigen::HouseholderQR<Mat> qr(g);
    return qr.householderQ() * Mat::Identity(n, n);
  }
  // Symmetric matrix with eigenvalues uniform in [lo, hi].
  Mat symmetric(int n, double lo, double hi) {
    const Mat q = orthogonal(n);
    Vec ev(n);
    for (int i = 0; i < n; ++i) ev(i) = uniform(lo, hi);
    return q * ev.asDiagonal() * q.transpose();
  }
  QuadraticFn quadratic(int n, double lo, double hi) {
    Mat h = symmetric(n, lo, hi);
    Vec l = vector(n);
    return {h, l, normal()};
  }
  // The box [-1, 1]^n plus random cuts keeping the origin strictly inside.
  Polyhedron polytope(int n, int rows) {
    Polyhedron box = Polyhedron::box(Vec::Constant(n, -1.0), Vec::Constant(n, 1.0));
    const int cuts = std::max(0, rows - 2 * n);
    if (cuts == 0) return box;
    Mat a(cuts, n);
    Vec b(cuts);
    for (int k = 0; k < cuts; ++k) {
      a.row(k) = vector(n).normalized().transpose();
      b(k) = uniform(0.3, 0.9);
    }
    return intersect(box, Polyhedron(a, b));
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> n_{0.0, 1.0};
  std::uniform_real_distribution<double> u_{0.0, 1.0};
};

}  // namespace detail

inline Instance randomInstance(const std::string& kind, const InstanceDims& dims, std::uint64_t seed) {
  detail::InstanceRng rng(seed);
  const int n = dims.n;
  require(n >= 1, "invalid-argument", "dimension must be positive");
  Instance out;
  out.kind = kind;
  if (kind == "problem5") {
    QuadraticFn psi1 = rng.quadratic(n, -2.0, 2.0);
    while (psi1.hessian().norm() < 1e-3) psi1 = rng.quadratic(n, -2.0, 2.0);
    const QuadraticFn psi2 = rng.quadratic(n, -2.0, -0.1);
    out.program = DiffMaxProgram(MaxOfQuadratics({psi1, QuadraticFn::zero(n)}), MaxOfQuadratics({psi2}));
  } else if (kind == "qp") {
    const QuadraticFn q = rng.quadratic(n, -2.0, 2.0);
    out.program = DiffMaxProgram(MaxOfQuadratics({q}), MaxOfQuadratics({QuadraticFn::zero(n)}),
                                 rng.polytope(n, std::max(dims.m, 2 * n)));
  } else if (kind == "twopiece") {
    std::vector<QuadraticFn> plus, minus;
    for (int i = 0; i < dims.k1; ++i) plus.push_back(rng.quadratic(n, -2.0, 2.0));
    for (int j = 0; j < dims.k2; ++j) minus.push_back(rng.quadratic(n, -2.0, 2.0));
    out.program = DiffMaxProgram(MaxOfQuadratics(plus), MaxOfQuadratics(minus),
                                 rng.polytope(n, std::max(dims.m, 2 * n)));
  } else if (kind == "convex") {
    std::vector<QuadraticFn> plus, minus;
    for (int i = 0; i < dims.k1; ++i) plus.push_back(rng.quadratic(n, 0.1, 2.0));
    for (int j = 0; j < dims.k2; ++j) minus.push_back(rng.quadratic(n, -2.0, 0.0));
    out.program = DiffMaxProgram(MaxOfQuadratics(plus), MaxOfQuadratics(minus),
                                 rng.polytope(n, std::max(dims.m, 2 * n)));
  } else if (kind == "prop9b") {
    for (int i = 0; i < dims.k1; ++i) out.pieces.push_back(rng.quadratic(n, -2.0, 0.0));
    out.q2 = rng.quadratic(n, 0.1, 2.0);
  } else if (kind == "dqc") {
    // Objective over a sphere: the constraint is an equality.
    std::vector<QuadraticFn> minus;
    for (int j = 0; j < std::max(dims.k2, 1); ++j) minus.push_back(rng.quadratic(n, -2.0, 2.0));
    const double beta = rng.uniform(0.5, 2.0);
    out.dqc = DQCProgram{rng.quadratic(n, -2.0, 2.0), minus, 2.0 * Mat::Identity(n, n), Vec::Zero(n),
                         beta * beta, beta * beta, Polyhedron::whole(n)};
  } else {
    throw Error("unsupported", "unknown instance kind '" + kind + "'");
  }
  return out;
}

/// Concave pieces and a strictly convex quadratic for which lambdaHat (in the
/// simplex) is a zero of the tie/multiplier map at xHat: all pieces are equal
/// at xHat and grad q2(xHat) = sum_i lambdaHat_i grad piece_i(xHat).
struct PlantedSimplexZero {
  std::vector<QuadraticFn> pieces;
  QuadraticFn q2;
  Vec lambdaHat;
  Vec xHat;
};

inline PlantedSimplexZero plantSimplexZero(int n, const Vec& lambdaHat, std::uint64_t seed) {
  detail::InstanceRng rng(seed);
  const int k = static_cast<int>(lambdaHat.size());
  PlantedSimplexZero out;
  out.lambdaHat = lambdaHat;
  out.xHat = rng.vector(n);
  Vec combo = Vec::Zero(n);
  for (int i = 0; i < k; ++i) {
    const Mat h = rng.symmetric(n, -2.0, -0.1);
    const Vec l = rng.vector(n);
    const QuadraticFn raw(h, l, 0.0);
    out.pieces.emplace_back(h, l, -raw(out.xHat));
    combo += lambdaHat(i) * out.pieces.back().gradient(out.xHat);
  }
  const Mat p = rng.symmetric(n, 0.5, 2.0);
  out.q2 = QuadraticFn(p, combo - p * out.xHat, rng.normal());
  return out;
}

}  // namespace pwq
