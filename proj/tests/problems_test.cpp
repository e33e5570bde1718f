#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pwq;

TEST(Remark3, DecompositionAndSubdifferentials) {
  const Remark3Pair r = makeRemark3(10);
  const MaxOfQuadratics p1 = r.psi1(), p2 = r.psi2();
  for (double x = -3.0; x <= 11.0; x += 0.125) {
    const Vec v = Vec::Constant(1, x);
    EXPECT_NEAR(p1(v) - p2(v), std::max(x, 0.0), 1e-12);
  }
  for (int n = 1; n <= 10; ++n) {
    EXPECT_EQ(r.subdiff1(n), std::make_pair(2.0 * n - 1, 2.0 * n + 1));
    EXPECT_EQ(r.subdiff2(n), std::make_pair(2.0 * n - 2, 2.0 * n));
  }
  EXPECT_EQ(r.subdiff1(0), std::make_pair(0.0, 1.0));
  EXPECT_EQ(r.subdiff2(0), std::make_pair(0.0, 0.0));
  EXPECT_EQ(r.subdiff1(-1), std::make_pair(0.0, 0.0));
}

TEST(Remark3, CriticalButNotStationary) {
  const Remark3Pair r = makeRemark3(10);
  const DiffMaxProgram f = r.program();
  for (int n = 1; n <= 10; ++n) {
    const auto [a1, b1] = r.subdiff1(n);
    const auto [a2, b2] = r.subdiff2(n);
    EXPECT_TRUE(checkCritical({Vec::Constant(1, a1), Vec::Constant(1, b1)},
                              {Vec::Constant(1, a2), Vec::Constant(1, b2)})
                    .nonempty);
    EXPECT_EQ(checkDStationary(f, Vec::Constant(1, n)).verdict, Verdict::kNotStationary);
  }
  EXPECT_TRUE(checkDStationary(f, Vec::Constant(1, -1.0)).stationary());
  EXPECT_TRUE(checkDStationary(f, Vec::Constant(1, 0.0)).stationary());
}

TEST(Remark12, ClosedForms) {
  const Remark12Fn r = makeRemark12(-10.0, 10.0);
  for (int n = -5; n <= 4; ++n) EXPECT_NEAR(r.phi(2.0 * n), 2.0 * n + 2.0, 1e-10);
  double prev1 = -kInf, prev2 = -kInf;
  for (int k = 0; k <= 2000; ++k) {
    const double t = -10.0 + 20.0 * k / 2000.0 * (1.0 - 1e-12);
    EXPECT_NEAR(r.phi(t), r.phi1(t) - r.phi2(t), 1e-10);
    EXPECT_GE(r.dphi(t), -1e-12);
    EXPECT_GE(r.dphi1(t), prev1 - 1e-12);
    EXPECT_GE(r.dphi2(t), prev2 - 1e-12);
    prev1 = r.dphi1(t);
    prev2 = r.dphi2(t);
  }
  EXPECT_THROW(r.phi(11.0), Error);
}

TEST(MPCC, MinPenaltyMatchesDefinition) {
  // min (x - 1)^2 / 2 + (y - 1)^2 / 2  s.t. 0 <= y _|_ x + y >= 0
  MPCCData d{QuadraticFn(Mat::Identity(2, 2), Vec::Constant(2, -1.0), 1.0), Vec::Zero(1), Mat::Ones(1, 1),
             Mat::Ones(1, 1), Polyhedron::whole(2), 2.0, 0.1};
  const auto f = std::get<DiffMaxProgram>(makeMPCCPenalty(d, PenaltyForm::kMinPenalty));
  EXPECT_EQ(f.minus.size(), 2);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const Vec z = oracle::randomVector(2, rng).cwiseAbs();
    const double expected = d.f(z) + d.gamma * std::min(z(1), z(0) + z(1));
    EXPECT_NEAR(evaluate(f, z), expected, 1e-12);
  }
  EXPECT_FALSE(f.feasible.contains(Eigen::Vector2d(0.0, -1.0)));
}

TEST(MPCC, QuadraticPenaltyAndRegularization) {
  MPCCData d{QuadraticFn(Mat::Identity(2, 2), Vec::Zero(2), 0.0), Vec::Constant(1, 0.5), Mat::Constant(1, 1, 2.0),
             Mat::Ones(1, 1), Polyhedron::whole(2), 3.0, 0.25};
  const auto q = std::get<DiffMaxProgram>(makeMPCCPenalty(d, PenaltyForm::kQuadraticPenalty));
  const auto r = std::get<DQCProgram>(makeMPCCPenalty(d, PenaltyForm::kRegularized));
  const Vec z = Eigen::Vector2d(0.3, 0.7);
  const double product = z(1) * (0.5 + 2.0 * z(0) + z(1));
  EXPECT_NEAR(evaluate(q, z), d.f(z) + 3.0 * product, 1e-12);
  EXPECT_NEAR(r.constraintValue(z), product, 1e-12);
  EXPECT_EQ(r.beta2, 0.25);
}

TEST(MPCC, TooManyPairsThrows) {
  const int m = 13;
  MPCCData d{QuadraticFn::zero(m + 1), Vec::Zero(m), Mat::Zero(m, 1), Mat::Zero(m, m), Polyhedron::whole(m + 1), 1.0,
             0.0};
  try {
    makeMPCCPenalty(d, PenaltyForm::kMinPenalty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "too-large");
  }
}

TEST(RandomInstance, SeedDeterminesInstance) {
  const auto a = randomInstance("twopiece", {}, 9);
  const auto b = randomInstance("twopiece", {}, 9);
  const auto c = randomInstance("twopiece", {}, 10);
  EXPECT_EQ(a.program->plus[1].hessian(), b.program->plus[1].hessian());
  EXPECT_EQ(a.program->feasible.A(), b.program->feasible.A());
  EXPECT_NE(a.program->plus[1].hessian(), c.program->plus[1].hessian());
  try {
    randomInstance("nope", {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unsupported");
  }
}

TEST(RandomInstance, QPContainsOrigin) {
  InstanceDims d;
  d.n = 3;
  d.m = 6;
  for (int seed = 0; seed < 10; ++seed) EXPECT_TRUE(randomInstance("qp", d, seed).program->feasible.contains(Vec::Zero(3)));
}

TEST(PlantedZero, IsAZero) {
  Vec lh(2);
  lh << 0.4, 0.6;
  const PlantedSimplexZero p = plantSimplexZero(3, lh, 2);
  Vec combo = Vec::Zero(3);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(p.pieces[i](p.xHat), 0.0, 1e-12);
    combo += lh(i) * p.pieces[i].gradient(p.xHat);
  }
  EXPECT_LE((p.q2.gradient(p.xHat) - combo).norm(), 1e-12);
}
