#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pwq;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
QuadraticFn q1(double h, double l, double c) { return {Mat::Constant(1, 1, h), v1(l), c}; }

// max(x, 0) - 0 on the real line
DiffMaxProgram relu() {
  return DiffMaxProgram(MaxOfQuadratics({q1(0, 1, 0), q1(0, 0, 0)}), MaxOfQuadratics({q1(0, 0, 0)}));
}

DiffMaxProgram randomProgram(int n, int k1, int k2, std::mt19937_64& rng) {
  std::vector<QuadraticFn> plus, minus;
  for (int i = 0; i < k1; ++i)
    plus.emplace_back(oracle::randomSymmetric(n, rng), oracle::randomVector(n, rng), oracle::randomVector(1, rng)(0));
  for (int i = 0; i < k2; ++i)
    minus.emplace_back(oracle::randomSymmetric(n, rng), oracle::randomVector(n, rng), oracle::randomVector(1, rng)(0));
  return DiffMaxProgram(MaxOfQuadratics(plus), MaxOfQuadratics(minus));
}

}  // namespace

TEST(Evaluate, Examples) {
  EXPECT_DOUBLE_EQ(evaluate(relu(), v1(3.0)), 3.0);
  const DiffMaxProgram f(MaxOfQuadratics({q1(1, 0, -0.5), q1(0, 0, 0)}), MaxOfQuadratics({q1(0, 1, 0)}));
  EXPECT_DOUBLE_EQ(evaluate(f, v1(1.0)), -1.0);
  const DiffMaxProgram g(MaxOfQuadratics({q1(2, 1, 3)}), MaxOfQuadratics({q1(-1, 4, 1)}));
  for (double x : {-2.0, 0.5, 7.0}) EXPECT_DOUBLE_EQ(evaluate(g, v1(x)), q1(2, 1, 3)(v1(x)) - q1(-1, 4, 1)(v1(x)));
}

TEST(Evaluate, DimensionMismatchThrows) {
  try {
    evaluate(relu(), Vec::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "dimension-mismatch");
  }
}

TEST(Evaluate, QuadraticIsSymmetrized) {
  Mat h(2, 2);
  h << 1, 2, 0, 1;
  const QuadraticFn q(h, Vec::Zero(2), 0.0);
  EXPECT_DOUBLE_EQ(q.hessian()(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(q.hessian()(1, 0), 1.0);
  const Vec x = Eigen::Vector2d(1.5, -2.0);
  EXPECT_TRUE(q.gradient(x).isApprox(q.hessian() * x));
}

TEST(ActiveSets, Examples) {
  auto [a1, a2] = activeSets(relu(), v1(0.0), 0.0);
  EXPECT_EQ(a1, (IndexSet{0, 1}));
  std::tie(a1, a2) = activeSets(relu(), v1(1.0), 0.0);
  EXPECT_EQ(a1, (IndexSet{0}));
  EXPECT_EQ(a2, (IndexSet{0}));
}

TEST(ActiveSets, MatchesExactArithmetic) {
  // Rational-valued instances with planted exact ties.
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> small(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2;
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = small(rng) / 4.0;
    std::vector<QuadraticFn> pieces;
    for (int k = 0; k < 4; ++k) {
      Mat h(n, n);
      h << small(rng), small(rng), 0, small(rng);
      h(1, 0) = h(0, 1);
      Vec l(n);
      l << small(rng) / 2.0, small(rng) / 2.0;
      pieces.emplace_back(h, l, small(rng) / 8.0);
    }
    const MaxOfQuadratics m(pieces);
    std::vector<oracle::Rational> vals;
    for (const auto& p : pieces) {
      oracle::Rational v = oracle::exact(p.constant());
      for (int i = 0; i < n; ++i) {
        v += oracle::exact(p.linear()(i)) * oracle::exact(x(i));
        for (int j = 0; j < n; ++j)
          v += oracle::Rational(1, 2) * oracle::exact(p.hessian()(i, j)) * oracle::exact(x(i)) * oracle::exact(x(j));
      }
      vals.push_back(v);
    }
    const oracle::Rational best = *std::max_element(vals.begin(), vals.end());
    const auto exactCount = std::count(vals.begin(), vals.end(), best);
    EXPECT_EQ(static_cast<long>(m.activeSet(x, 1e-8).size()), exactCount);
  }
}

TEST(DirectionalDerivative, Examples) {
  EXPECT_DOUBLE_EQ(directionalDerivative(relu(), v1(0.0), v1(-1.0)), 0.0);
  EXPECT_DOUBLE_EQ(directionalDerivative(relu(), v1(1.0), v1(-1.0)), -1.0);
}

TEST(DirectionalDerivative, MatchesRichardsonDifference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    const auto f = randomProgram(n, 1 + trial % 3, 1 + (trial / 3) % 3, rng);
    const Vec x = oracle::randomVector(n, rng);
    const Vec d = oracle::randomDirection(n, rng);
    const double h = 1e-4;
    const double fx = evaluate(f, x);
    const double dd1 = (evaluate(f, x + h * d) - fx) / h;
    const double dd2 = (evaluate(f, x + 0.5 * h * d) - fx) / (0.5 * h);
    const double richardson = 2.0 * dd2 - dd1;
    EXPECT_NEAR(directionalDerivative(f, x, d), richardson, 1e-5);
  }
}

TEST(DirectionalDerivative, AtPlantedKink) {
  // Two plus pieces tied at x: the derivative is the max of both slopes.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2;
    const Vec x = oracle::randomVector(n, rng);
    QuadraticFn a(oracle::randomSymmetric(n, rng), oracle::randomVector(n, rng), 0.0);
    QuadraticFn b(oracle::randomSymmetric(n, rng), oracle::randomVector(n, rng), 0.0);
    b = QuadraticFn(b.hessian(), b.linear(), a(x) - b(x) + b.constant());
    const DiffMaxProgram f(MaxOfQuadratics({a, b}), MaxOfQuadratics({QuadraticFn::zero(n)}));
    const Vec d = oracle::randomDirection(n, rng);
    const double expected = std::max(a.gradient(x).dot(d), b.gradient(x).dot(d));
    EXPECT_NEAR(directionalDerivative(f, x, d), expected, 1e-12 * (1.0 + std::abs(expected)));
    const double h = 1e-6;
    EXPECT_NEAR((evaluate(f, x + h * d) - evaluate(f, x)) / h, expected, 1e-4);
  }
}

TEST(DirectionalDerivative, PositivelyHomogeneous) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = randomProgram(3, 2, 2, rng);
    const Vec x = oracle::randomVector(3, rng), d = oracle::randomVector(3, rng);
    const double t = 0.1 + 5.0 * (trial % 7);
    const double base = directionalDerivative(f, x, d);
    EXPECT_NEAR(directionalDerivative(f, x, t * d), t * base, 1e-12 * (1.0 + std::abs(t * base)));
  }
}

TEST(Evaluate, MaxPruningInvariance) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = randomProgram(2, 4, 3, rng);
    const Vec x = oracle::randomVector(2, rng);
    const auto [a1, a2] = activeSets(f, x, 0.0);
    std::vector<QuadraticFn> plus, minus;
    for (int i = 0; i < f.plus.size(); ++i)
      if (std::find(a1.begin(), a1.end(), i) != a1.end() || i % 2 == 0) plus.push_back(f.plus[i]);
    for (int j : a2) minus.push_back(f.minus[j]);
    const DiffMaxProgram g{MaxOfQuadratics(plus), MaxOfQuadratics(minus)};
    EXPECT_DOUBLE_EQ(evaluate(g, x), evaluate(f, x));
  }
}

TEST(Polyhedron, ContainsAndActiveRows) {
  const Polyhedron box = Polyhedron::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  EXPECT_TRUE(box.contains(Eigen::Vector2d(1.0, 0.0)));
  EXPECT_FALSE(box.contains(Eigen::Vector2d(1.1, 0.0)));
  EXPECT_EQ(box.activeRows(Eigen::Vector2d(1.0, -1.0)), (IndexSet{0, 3}));
  const Vec x = Eigen::Vector2d(1.0 - 1e-9, 0.5);
  EXPECT_TRUE(box.activeRows(x, 1e-12).empty());
  EXPECT_EQ(box.activeRows(x, 1e-8), (IndexSet{0}));
}

TEST(PLQ, ConversionExamples) {
  PLQFunction single{{{Polyhedron::whole(1), q1(1, 2, 3)}}, Polyhedron::whole(1)};
  auto g = plqToDiffMax(single);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(g->plus.size(), 1);
  EXPECT_EQ(g->minus.size(), 1);
  EXPECT_TRUE(g->minus[0].hessian().isZero());

  Mat up(1, 1), down(1, 1);
  up << -1;
  down << 1;
  PLQFunction absval{{{Polyhedron(up, v1(0)), q1(0, 1, 0)}, {Polyhedron(down, v1(0)), q1(0, -1, 0)}},
                     Polyhedron::whole(1)};
  std::vector<Vec> probes;
  for (double x = -3; x <= 3; x += 0.25) probes.push_back(v1(x));
  g = plqToDiffMax(absval, probes);
  ASSERT_TRUE(g.has_value());
  for (const auto& x : probes) EXPECT_DOUBLE_EQ(evaluate(*g, x), std::abs(x(0)));

  // |x^2 - 1| split at |x| = 1: one convex cell, one concave cell.
  Mat outer(2, 1);
  outer << 1, -1;
  PLQFunction bowl{{{Polyhedron(outer, Vec::Constant(2, 1.0)), q1(-2, 0, 1)},
                    {Polyhedron(Mat::Constant(1, 1, 1.0), v1(-1)), q1(2, 0, -1)},
                    {Polyhedron(Mat::Constant(1, 1, -1.0), v1(-1)), q1(2, 0, -1)}},
                   Polyhedron::whole(1)};
  EXPECT_FALSE(bowl.cells[0].piece.isConvex());
  EXPECT_FALSE(bowl.cells[1].piece.isConcave());
  EXPECT_FALSE(plqToDiffMax(bowl, probes).has_value());
}

TEST(PLQ, ContinuityDefect) {
  Mat left(1, 1), right(1, 1);
  left << 1;
  right << -1;
  PLQFunction f{{{Polyhedron(left, v1(0)), q1(2, 0, 0)}, {Polyhedron(right, v1(0)), q1(0, 1, 0)}},
                Polyhedron::box(v1(-1), v1(1))};
  std::mt19937_64 rng(1);
  EXPECT_LE(plqContinuityDefect(f, rng, 100, 1.0), 1e-8);
  PLQFunction broken = f;
  broken.cells[1].piece = q1(0, 1, 0.5);
  EXPECT_GT(plqContinuityDefect(broken, rng, 100, 1.0), 0.4);
}
