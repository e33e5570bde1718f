#pragma once

// Quadratic pieces, pointwise maxima of them, polyhedra, and the
// difference-max objective max_i f1_i(x) - max_j f2_j(x) over a polyhedron.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pwq/error.hpp"
#include "pwq/linalg.hpp"
#include "pwq/types.hpp"

namespace pwq {

inline constexpr double kActiveTolerance = 1e-8;

inline void requireDim(const Vec& x, int n, const char* what) {
  require(x.size() == n, "dimension-mismatch",
          std::string(what) + ": expected dimension " + std::to_string(n) + ", got " + std::to_string(x.size()));
}

/// 0.5 x'Hx + q'x + c with H stored symmetrized.
class QuadraticFn {
 public:
  QuadraticFn() = default;
  QuadraticFn(Mat hessian, Vec linear, double constant)
      : h_(std::move(hessian)), q_(std::move(linear)), c_(constant) {
    require(h_.rows() == h_.cols() && h_.rows() == q_.size(), "dimension-mismatch",
            "quadratic needs an n x n Hessian and an n-vector");
    h_ = 0.5 * (h_ + h_.transpose()).eval();
  }
  static QuadraticFn zero(int n) { return {Mat::Zero(n, n), Vec::Zero(n), 0.0}; }
  static QuadraticFn affine(Vec a, double c) {
    const auto n = a.size();
    return {Mat::Zero(n, n), std::move(a), c};
  }

  int dim() const { return static_cast<int>(q_.size()); }
  const Mat& hessian() const { return h_; }
  const Vec& linear() const { return q_; }
  double constant() const { return c_; }

  double operator()(const Vec& x) const { return 0.5 * x.dot(h_ * x) + q_.dot(x) + c_; }
  Vec gradient(const Vec& x) const { return h_ * x + q_; }

  bool isAffine(double tol = 0.0) const { return h_.cwiseAbs().maxCoeff() <= tol; }
  double minEigenvalue() const {
    if (dim() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Mat>(h_, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  }
  double maxEigenvalue() const {
    if (dim() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Mat>(h_, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  }
  bool isConvex(double tol = 1e-10) const { return minEigenvalue() >= -tol; }
  bool isConcave(double tol = 1e-10) const { return maxEigenvalue() <= tol; }

  /// y -> f(x0 + Z y)
  QuadraticFn restricted(const Vec& x0, const Mat& z) const {
    return {z.transpose() * h_ * z, z.transpose() * gradient(x0), (*this)(x0)};
  }

  friend QuadraticFn operator+(const QuadraticFn& a, const QuadraticFn& b) {
    return {a.h_ + b.h_, a.q_ + b.q_, a.c_ + b.c_};
  }
  friend QuadraticFn operator-(const QuadraticFn& a, const QuadraticFn& b) {
    return {a.h_ - b.h_, a.q_ - b.q_, a.c_ - b.c_};
  }
  friend QuadraticFn operator*(double s, const QuadraticFn& a) { return {s * a.h_, s * a.q_, s * a.c_}; }

 private:
  Mat h_;
  Vec q_;
  double c_ = 0.0;
};

/// Pointwise maximum of k >= 1 quadratics sharing one dimension.
class MaxOfQuadratics {
 public:
  MaxOfQuadratics() = default;
  explicit MaxOfQuadratics(std::vector<QuadraticFn> pieces) : pieces_(std::move(pieces)) {
    require(!pieces_.empty(), "empty-max", "a max needs at least one piece");
    for (const auto& p : pieces_)
      require(p.dim() == pieces_.front().dim(), "dimension-mismatch", "pieces of a max differ in dimension");
  }

  int dim() const { return pieces_.empty() ? 0 : pieces_.front().dim(); }
  int size() const { return static_cast<int>(pieces_.size()); }
  const std::vector<QuadraticFn>& pieces() const { return pieces_; }
  const QuadraticFn& operator[](int i) const { return pieces_[i]; }

  double operator()(const Vec& x) const {
    double m = pieces_.front()(x);
    for (std::size_t i = 1; i < pieces_.size(); ++i) m = std::max(m, pieces_[i](x));
    return m;
  }

  // { i : f_i(x) >= max - tol (1 + |max|) }
  IndexSet activeSet(const Vec& x, double tol = kActiveTolerance) const {
    std::vector<double> v(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) v[i] = pieces_[i](x);
    const double m = *std::max_element(v.begin(), v.end());
    IndexSet out;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] >= m - tol * (1.0 + std::abs(m))) out.push_back(static_cast<int>(i));
    return out;
  }

  // max over active pieces of grad f_i(x)' d
  double directionalDerivative(const Vec& x, const Vec& d, double tol = kActiveTolerance) const {
    double best = -std::numeric_limits<double>::infinity();
    for (int i : activeSet(x, tol)) best = std::max(best, pieces_[i].gradient(x).dot(d));
    return best;
  }

 private:
  std::vector<QuadraticFn> pieces_;
};

/// { x : A x <= b, E x = d }
class Polyhedron {
 public:
  Polyhedron() = default;
  Polyhedron(Mat a, Vec b, Mat e, Vec d) : a_(std::move(a)), b_(std::move(b)), e_(std::move(e)), d_(std::move(d)) {
    require(a_.rows() == b_.size() && e_.rows() == d_.size(), "dimension-mismatch", "polyhedron row counts");
    require(a_.cols() == e_.cols() || a_.rows() == 0 || e_.rows() == 0, "dimension-mismatch",
            "polyhedron column counts");
    n_ = static_cast<int>(std::max(a_.cols(), e_.cols()));
    if (a_.rows() == 0) a_.resize(0, n_);
    if (e_.rows() == 0) e_.resize(0, n_);
  }
  Polyhedron(Mat a, Vec b) : Polyhedron(a, b, Mat(0, a.cols()), Vec(0)) {}
  static Polyhedron whole(int n) { return Polyhedron(Mat(0, n), Vec(0), Mat(0, n), Vec(0)); }
  static Polyhedron box(const Vec& lo, const Vec& hi) {
    const auto n = lo.size();
    Mat a(2 * n, n);
    a << Mat::Identity(n, n), -Mat::Identity(n, n);
    Vec b(2 * n);
    b << hi, -lo;
    return {a, b};
  }

  int dim() const { return n_; }
  int numInequalities() const { return static_cast<int>(a_.rows()); }
  int numEqualities() const { return static_cast<int>(e_.rows()); }
  const Mat& A() const { return a_; }
  const Vec& b() const { return b_; }
  const Mat& E() const { return e_; }
  const Vec& d() const { return d_; }

  bool contains(const Vec& x, double tol = 1e-8) const {
    requireDim(x, n_, "Polyhedron::contains");
    const Vec ax = a_ * x;
    for (int j = 0; j < numInequalities(); ++j)
      if (ax(j) > b_(j) + tol * (1.0 + std::abs(b_(j)))) return false;
    const Vec ex = e_ * x;
    for (int j = 0; j < numEqualities(); ++j)
      if (std::abs(ex(j) - d_(j)) > tol * (1.0 + std::abs(d_(j)))) return false;
    return true;
  }

  // { j : |A_j x - b_j| <= tol (1 + |b_j|) }
  IndexSet activeRows(const Vec& x, double tol = kActiveTolerance) const {
    const Vec ax = a_ * x;
    IndexSet out;
    for (int j = 0; j < numInequalities(); ++j)
      if (std::abs(ax(j) - b_(j)) <= tol * (1.0 + std::abs(b_(j)))) out.push_back(j);
    return out;
  }

  // Largest step along dir keeping the inequality rows satisfied.
  double maxStep(const Vec& x, const Vec& dir) const {
    double t = std::numeric_limits<double>::infinity();
    const Vec ax = a_ * x;
    const Vec ad = a_ * dir;
    for (int j = 0; j < numInequalities(); ++j)
      if (ad(j) > 1e-14) t = std::min(t, std::max(0.0, b_(j) - ax(j)) / ad(j));
    return t;
  }

  Mat rows(const IndexSet& idx) const {
    Mat m(idx.size(), n_);
    for (std::size_t k = 0; k < idx.size(); ++k) m.row(k) = a_.row(idx[k]);
    return m;
  }
  Vec rhs(const IndexSet& idx) const {
    Vec v(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) v(k) = b_(idx[k]);
    return v;
  }

 private:
  Mat a_, e_;
  Vec b_, d_;
  int n_ = 0;
};

inline Polyhedron intersect(const Polyhedron& x, const Polyhedron& y) {
  require(x.dim() == y.dim(), "dimension-mismatch", "intersect");
  const int n = x.dim();
  Mat a(x.numInequalities() + y.numInequalities(), n), e(x.numEqualities() + y.numEqualities(), n);
  Vec b(a.rows()), d(e.rows());
  a << x.A(), y.A();
  b << x.b(), y.b();
  e << x.E(), y.E();
  d << x.d(), y.d();
  return {a, b, e, d};
}

/// plus(x) - minus(x) over a polyhedron.
struct DiffMaxProgram {
  MaxOfQuadratics plus;
  MaxOfQuadratics minus;
  Polyhedron feasible;

  DiffMaxProgram() = default;
  DiffMaxProgram(MaxOfQuadratics p, MaxOfQuadratics m, Polyhedron x)
      : plus(std::move(p)), minus(std::move(m)), feasible(std::move(x)) {
    require(plus.dim() == minus.dim() && plus.dim() == feasible.dim(), "dimension-mismatch",
            "plus, minus and polyhedron must share a dimension");
  }
  DiffMaxProgram(MaxOfQuadratics p, MaxOfQuadratics m) : plus(std::move(p)), minus(std::move(m)) {
    require(plus.dim() == minus.dim(), "dimension-mismatch", "plus and minus must share a dimension");
    feasible = Polyhedron::whole(plus.dim());
  }

  int dim() const { return plus.dim(); }
};

inline double evaluate(const DiffMaxProgram& f, const Vec& x) {
  requireDim(x, f.dim(), "evaluate");
  return f.plus(x) - f.minus(x);
}

inline std::pair<IndexSet, IndexSet> activeSets(const DiffMaxProgram& f, const Vec& x,
                                                double tolAct = kActiveTolerance) {
  requireDim(x, f.dim(), "activeSets");
  require(tolAct >= 0.0, "bad-tolerance", "tol_act must be nonnegative");
  return {f.plus.activeSet(x, tolAct), f.minus.activeSet(x, tolAct)};
}

/// psi'(x; d) = max_{A1} grad f1_i' d - max_{A2} grad f2_j' d
inline double directionalDerivative(const DiffMaxProgram& f, const Vec& x, const Vec& dir,
                                    double tolAct = kActiveTolerance) {
  requireDim(x, f.dim(), "directionalDerivative");
  requireDim(dir, f.dim(), "directionalDerivative");
  return f.plus.directionalDerivative(x, dir, tolAct) - f.minus.directionalDerivative(x, dir, tolAct);
}

/// Piecewise linear-quadratic function: one quadratic per polyhedral cell.
struct PLQFunction {
  struct Cell {
    Polyhedron region;
    QuadraticFn piece;
  };
  std::vector<Cell> cells;
  Polyhedron domain;

  int dim() const { return domain.dim(); }

  IndexSet cellsContaining(const Vec& x, double tol = 1e-9) const {
    IndexSet out;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].region.contains(x, tol)) out.push_back(static_cast<int>(i));
    return out;
  }

  double operator()(const Vec& x) const {
    const auto idx = cellsContaining(x);
    require(!idx.empty(), "point-not-in-X", "no PLQ cell contains the point");
    return cells[idx.front()].piece(x);
  }
};

/// Largest disagreement between cell quadratics at sampled points shared by
/// two cells. Shared points are found by bisecting segments that join a
/// random point of one cell to a random point of the other.
template <typename Rng>
double plqContinuityDefect(const PLQFunction& f, Rng& rng, int samplesPerPair = 100, double box = 10.0) {
  std::uniform_real_distribution<double> u(-box, box);
  double worst = 0.0;
  const int n = f.dim();
  for (std::size_t i = 0; i < f.cells.size(); ++i)
    for (std::size_t j = i + 1; j < f.cells.size(); ++j) {
      int found = 0;
      for (int attempt = 0; attempt < 50 * samplesPerPair && found < samplesPerPair; ++attempt) {
        Vec x(n);
        for (int k = 0; k < n; ++k) x(k) = u(rng);
        const bool ini = f.cells[i].region.contains(x), inj = f.cells[j].region.contains(x);
        if (ini && inj) {
          worst = std::max(worst, std::abs(f.cells[i].piece(x) - f.cells[j].piece(x)));
          ++found;
          continue;
        }
        Vec y(n);
        for (int k = 0; k < n; ++k) y(k) = u(rng);
        const bool y_in_i = f.cells[i].region.contains(y), y_in_j = f.cells[j].region.contains(y);
        if (!((ini && y_in_j) || (inj && y_in_i))) continue;
        Vec a = ini ? x : y, b = ini ? y : x;  // a in i, b in j
        for (int it = 0; it < 60; ++it) {
          const Vec m = 0.5 * (a + b);
          if (f.cells[i].region.contains(m, 0.0)) a = m; else b = m;
        }
        if (f.cells[i].region.contains(a, 1e-9) && f.cells[j].region.contains(a, 1e-9)) {
          worst = std::max(worst, std::abs(f.cells[i].piece(a) - f.cells[j].piece(a)));
          ++found;
        }
      }
    }
  return worst;
}

/// Max representation of a PLQ function whose cell quadratics are all
/// convex (f = max_i q_i) or all concave (f = -max_i (-q_i)).
///
/// The candidate is accepted only when it reproduces f on `probes`; nullopt
/// means "unsupported", not failure: whether every piecewise quadratic
/// admits a difference-max form is not settled.
inline std::optional<DiffMaxProgram> plqToDiffMax(const PLQFunction& f, const std::vector<Vec>& probes = {}) {
  require(!f.cells.empty(), "empty-plq", "PLQ function without cells");
  const int n = f.dim();
  if (f.cells.size() == 1)
    return DiffMaxProgram(MaxOfQuadratics({f.cells[0].piece}), MaxOfQuadratics({QuadraticFn::zero(n)}), f.domain);

  bool convex = true, concave = true;
  for (const auto& c : f.cells) {
    convex = convex && c.piece.isConvex();
    concave = concave && c.piece.isConcave();
  }
  auto matches = [&](const DiffMaxProgram& g) {
    for (const auto& x : probes) {
      if (f.cellsContaining(x).empty()) continue;
      if (std::abs(evaluate(g, x) - f(x)) > 1e-8 * (1.0 + std::abs(f(x)))) return false;
    }
    return true;
  };
  if (convex) {
    std::vector<QuadraticFn> pieces;
    for (const auto& c : f.cells) pieces.push_back(c.piece);
    DiffMaxProgram g(MaxOfQuadratics(pieces), MaxOfQuadratics({QuadraticFn::zero(n)}), f.domain);
    if (matches(g)) return g;
  }
  if (concave) {
    std::vector<QuadraticFn> pieces;
    for (const auto& c : f.cells) pieces.push_back(-1.0 * c.piece);
    DiffMaxProgram g(MaxOfQuadratics({QuadraticFn::zero(n)}), MaxOfQuadratics(pieces), f.domain);
    if (matches(g)) return g;
  }
  return std::nullopt;
}

}  // namespace pwq
