// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"

using namespace pwq;

namespace {

struct Outcome {
  bool pass = true;
  int failures = 0;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail.str("");
    pass = false;
    if (++failures > 5) return;
    if (failures > 1) detail << "; ";
    detail << why;
  }
};

Vec v1(double a) { return Vec::Constant(1, a); }

std::vector<Vec> activeGradients(const MaxOfQuadratics& m, const Vec& x) {
  std::vector<Vec> g;
  for (int i : m.activeSet(x)) g.push_back(m[i].gradient(x));
  return g;
}

bool hasValidWitness(const DiffMaxProgram& f, const Vec& x, const StationarityCertificate& c) {
  if (!c.witnessDirection) return false;
  const Vec& d = *c.witnessDirection;
  return f.feasible.contains(x + 1e-6 * d) && directionalDerivative(f, x, d) < -1e-9;
}

// ---------------------------------------------------------------------------

void criterion1(Outcome& out) {
  const Remark3Pair r = makeRemark3(10);
  const DiffMaxProgram dc = r.program();
  const MaxOfQuadratics p1 = r.psi1(), p2 = r.psi2();
  for (int n = 0; n <= 10; ++n) {
    const Vec x = v1(n);
    const auto h1 = activeGradients(p1, x), h2 = activeGradients(p2, x);
    if (!checkCritical(h1, h2).nonempty) out.fail("x=" + std::to_string(n) + " not critical");
    const auto range = criticalIntersectionRange(h1, h2, {}, v1(1.0));
    if (!range) {
      out.fail("x=" + std::to_string(n) + " empty intersection");
      continue;
    }
    const double lo = 2.0 * n - 1, hi = 2.0 * n;
    if (std::abs(range->first - lo) > 1e-12 || std::abs(range->second - hi) > 1e-12) {
      std::ostringstream s;
      s << "x=" << n << " intersection [" << range->first << ", " << range->second << "], expected [" << lo << ", "
        << hi << "]";
      out.fail(s.str());
    }
  }
  const DiffMaxProgram relu{MaxOfQuadratics({QuadraticFn::zero(1), QuadraticFn::affine(v1(1.0), 0.0)}),
                            MaxOfQuadratics({QuadraticFn::zero(1)}), Polyhedron::whole(1)};
  int points = 0;
  for (double x = -3.0; x <= 11.0; x += 0.125) {
    for (const DiffMaxProgram* f : {&relu, &dc}) {
      const auto c = checkDStationary(*f, v1(x));
      ++points;
      if (x <= 0.0 && !c.stationary()) out.fail("x=" + std::to_string(x) + " should be stationary");
      if (x > 0.0 && (c.verdict != Verdict::kNotStationary || !hasValidWitness(*f, v1(x), c)))
        out.fail("x=" + std::to_string(x) + " should be non-stationary with a witness");
    }
  }
  if (out.pass) out.detail << "11 critical points, " << points << " stationarity checks";
}

void criterion2(Outcome& out) {
  const Remark12Fn r = makeRemark12(-10.0, 10.5);
  for (int n = -5; n <= 5; ++n)
    if (std::abs(r.phi(2.0 * n) - (2.0 * n + 2.0)) > 1e-10) out.fail("phi(" + std::to_string(2 * n) + ")");
  const int grid = 10000;
  double prev1 = -kInf, prev2 = -kInf, worstSplit = 0.0, minSlope = kInf, worstFd = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double t = -10.0 + 20.5 * k / (grid - 1.0) * (1.0 - 1e-12);
    minSlope = std::min(minSlope, r.dphi(t));
    worstSplit = std::max(worstSplit, std::abs(r.phi(t) - (r.phi1(t) - r.phi2(t))));
    if (r.dphi1(t) < prev1 - 1e-12 || r.dphi2(t) < prev2 - 1e-12) out.fail("derivative decreases at t=" + std::to_string(t));
    prev1 = r.dphi1(t);
    prev2 = r.dphi2(t);
    const double h = 1e-6;
    if (t - h >= r.tLo && t + h <= r.tHi && std::abs(t - std::round(t)) > 2 * h)
      worstFd = std::max(worstFd, std::abs((r.phi(t + h) - r.phi(t - h)) / (2 * h) - r.dphi(t)));
  }
  if (minSlope < -1e-12) out.fail("phi' reaches " + std::to_string(minSlope));
  if (worstSplit > 1e-10) out.fail("phi != phi1 - phi2");
  if (worstFd > 1e-5) out.fail("closed-form derivative disagrees with differences");
  if (out.pass) out.detail << "min phi' " << minSlope << ", derivative check " << worstFd;
}

std::string checkAgainstOracle(const DiffMaxProgram& f, const ValueSet& vs, std::uint64_t seed, int& found) {
  for (const auto& p : vs.points()) {
    const auto c = checkDStationary(f, p.x);
    if (!c.stationary() || c.residual > 1e-6) return "witness of " + std::to_string(p.value) + " fails";
  }
  oracle::OracleOptions o;
  o.starts = 10000;
  for (const auto& p : oracle::bruteForceStationary(f, seed, o)) {
    ++found;
    if (!vs.contains(p.value, 1e-5)) return "oracle value " + std::to_string(p.value) + " missing";
  }
  return "";
}

void criterion3(Outcome& out) {
  int found = 0;
  for (int seed = 0; seed < 50; ++seed) {
    InstanceDims d;
    d.n = 1 + seed % 3;
    const Instance inst = randomInstance("problem5", d, 1000 + seed);
    const DiffMaxProgram& f = *inst.program;
    const std::string err = checkAgainstOracle(f, enumerateProblem5Values(f.plus[0], f.minus[0]), seed, found);
    if (!err.empty()) out.fail("seed " + std::to_string(1000 + seed) + ": " + err);
  }
  if (out.pass) out.detail << "50 instances, " << found << " oracle values matched";
}

void criterion4(Outcome& out) {
  const ValueSet base = enumerateQPValues(QuadraticFn(Mat::Constant(1, 1, -1.0), v1(0.0), 0.0),
                                          Polyhedron::box(v1(-1.0), v1(1.0)));
  auto vals = base.values();
  std::sort(vals.begin(), vals.end());
  if (vals != std::vector<double>{-0.5, 0.0}) out.fail("-x^2/2 on [-1,1] values differ from {-1/2, 0}");
  int found = 0;
  for (int seed = 0; seed < 20; ++seed) {
    InstanceDims d;
    d.n = 1 + seed % 3;
    d.m = std::min(6, 2 * d.n + seed % 3);
    const Instance inst = randomInstance("qp", d, 2000 + seed);
    const DiffMaxProgram& f = *inst.program;
    const std::string err = checkAgainstOracle(f, enumerateQPValues(f.plus[0], f.feasible), seed, found);
    if (!err.empty()) out.fail("seed " + std::to_string(2000 + seed) + ": " + err);
  }
  if (out.pass) out.detail << "20 QPs, " << found << " oracle values matched";
}

QuadraticFn liftAlong(const QuadraticFn& q, const Vec& w) {
  return {w * q.hessian()(0, 0) * w.transpose(), w * q.linear()(0), q.constant()};
}

// A one-dimensional instance composed with x -> w'x: every stationary point
// lies on a line of stationary points sharing its active sets.
DiffMaxProgram liftedInstance(int seed) {
  InstanceDims d;
  d.n = 1;
  d.m = 2;
  const DiffMaxProgram g = *randomInstance("twopiece", d, 3000 + seed).program;
  std::mt19937_64 rng(seed);
  const Vec w = oracle::randomDirection(2 + seed % 2, rng);
  std::vector<QuadraticFn> plus, minus;
  for (int i = 0; i < g.plus.size(); ++i) plus.push_back(liftAlong(g.plus[i], w));
  for (int j = 0; j < g.minus.size(); ++j) minus.push_back(liftAlong(g.minus[j], w));
  return {MaxOfQuadratics(plus), MaxOfQuadratics(minus), Polyhedron(g.feasible.A() * w.transpose(), g.feasible.b())};
}

void criterion5(Outcome& out) {
  int pairs = 0, witnesses = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const DiffMaxProgram f = liftedInstance(seed);
    const ValueSet vs = enumerateTwoPieceDiffMax(f);
    const auto& pts = vs.points();
    witnesses += static_cast<int>(pts.size());
    for (std::size_t a = 0; a < pts.size(); ++a) {
      const Vec& xb = pts[a].x;
      std::vector<Vec> c;
      for (int i = 0; i < f.plus.size(); ++i) c.push_back(-f.plus[i].gradient(xb));
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        const Vec& y = pts[b].x;
        if (activeSets(f, xb) != activeSets(f, y)) continue;
        if (f.feasible.activeRows(xb) != f.feasible.activeRows(y)) continue;
        if (!checkScMembership(f.plus, c, xb) || !checkScMembership(f.plus, c, y)) continue;
        ++pairs;
        worst = std::max(worst, std::abs(evaluate(f, xb) - evaluate(f, y)));
      }
    }
  }
  if (pairs == 0) out.fail("no qualifying witness pairs");
  if (worst > 1e-6) out.fail("value gap " + std::to_string(worst));
  if (out.pass) out.detail << pairs << " pairs among " << witnesses << " witnesses, largest gap " << worst;
}

void criterion6(Outcome& out) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.15, 1.0);
  int zeros = 0;
  for (int t = 0; t < 10; ++t) {
    const int k = 2 + t % 2, n = 2 + t % 2;
    Vec lh(k);
    for (int i = 0; i < k; ++i) lh(i) = u(rng);
    lh /= lh.sum();
    const PlantedSimplexZero pl = plantSimplexZero(n, lh, 600 + t);
    const auto found = simplexNewtonMultistart(pl.pieces, pl.q2);
    bool recovered = false;
    for (std::size_t a = 0; a < found.size(); ++a) {
      const auto& z = found[a];
      recovered = recovered || (z.lambda - lh).norm() <= 1e-8;
      // Jacobian of the tie system at the zero.
      Mat grads(n, k);
      for (int i = 0; i < k; ++i) grads.col(i) = pl.pieces[i].gradient(z.x);
      Mat pencil = pl.q2.hessian();
      for (int i = 0; i < k; ++i) pencil -= z.lambda(i) * pl.pieces[i].hessian();
      const Mat dx = pencil.fullPivLu().solve(grads);
      Mat J(k, k);
      for (int i = 0; i + 1 < k; ++i) J.row(i) = (grads.col(i) - grads.col(k - 1)).transpose() * dx;
      J.row(k - 1).setOnes();
      const Vec s = Eigen::JacobiSVD<Mat>(J).singularValues();
      if (s(k - 1) <= 1e-10 * s(0)) out.fail("instance " + std::to_string(t) + ": singular Jacobian at a zero");
      for (std::size_t b = 0; b < a; ++b)
        if ((found[b].lambda - z.lambda).norm() <= 1e-3) out.fail("instance " + std::to_string(t) + ": zeros not isolated");
    }
    zeros += static_cast<int>(found.size());
    if (!recovered) out.fail("instance " + std::to_string(t) + ": planted zero not recovered");
  }
  if (out.pass) out.detail << "10 planted zeros recovered, " << zeros << " zeros in total";
}

std::vector<double> circleMinima(const DQCProgram& prog, double beta, int grid) {
  auto at = [&](double t) {
    Vec x(2);
    x << beta * std::cos(t), beta * std::sin(t);
    return prog.objective(x);
  };
  const double h = 2.0 * M_PI / grid;
  std::vector<double> out;
  for (int k = 0; k < grid; ++k) {
    const double t = k * h;
    if (!(at(t) <= at(t - h) && at(t) <= at(t + h))) continue;
    double a = t - h, b = t + h;
    for (int it = 0; it < 200; ++it) {
      const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
      if (at(m1) <= at(m2))
        b = m2;
      else
        a = m1;
    }
    out.push_back(at(0.5 * (a + b)));
  }
  return out;
}

void criterion7(Outcome& out) {
  auto tr = enumerateBValues(makeTrustRegion(-Mat::Identity(1, 1), Vec::Zero(1), Mat::Identity(1, 1), 0.5)).values();
  std::sort(tr.begin(), tr.end());
  if (tr != std::vector<double>{-0.5, 0.0}) out.fail("trust-region values differ from {-1/2, 0}");
  Mat dm(2, 2);
  dm << 1, 0, 0, 2;
  auto sp = enumerateBValues(makeSphereProblem(dm, Vec::Zero(2), 1.0)).values();
  std::sort(sp.begin(), sp.end());
  if (sp.size() != 2 || std::abs(sp[0] - 1.0) > 1e-8 || std::abs(sp[1] - 2.0) > 1e-8)
    out.fail("sphere values differ from {1, 2}");
  int matched = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Instance inst = randomInstance("dqc", {}, 700 + seed);
    const DQCProgram& prog = *inst.dqc;
    const ValueSet vs = enumerateBValues(prog);
    for (const auto& p : vs.points())
      if (!checkBStationary(prog, p.x).stationary()) out.fail("seed " + std::to_string(700 + seed) + ": bad witness");
    for (double m : circleMinima(prog, std::sqrt(prog.beta2), 4000)) {
      ++matched;
      if (!vs.contains(m, 1e-6)) out.fail("seed " + std::to_string(700 + seed) + ": missing " + std::to_string(m));
    }
  }
  if (out.pass) out.detail << "analytic values exact, " << matched << " sampled minima matched";
}

Dataset reluData(int n) {
  Dataset d;
  d.x.resize(n, 1);
  d.y.resize(n);
  for (int l = 0; l < n; ++l) {
    d.x(l, 0) = -2.0 + 4.0 * l / (n - 1);
    d.y(l) = std::max(d.x(l, 0), 0.0);
  }
  return d;
}

Dataset plantedData(int n) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Dataset d;
  d.x.resize(n, 2);
  d.y.resize(n);
  for (int l = 0; l < n; ++l) {
    d.x(l, 0) = u(rng);
    d.x(l, 1) = u(rng);
    d.y(l) = std::max(1.5 * d.x(l, 0) - 0.5 * d.x(l, 1) + 0.3, -0.7 * d.x(l, 0) + d.x(l, 1) - 0.2);
  }
  return d;
}

struct Fit {
  std::string name;
  RegressionModel model;
  Dataset data;
};

std::vector<Fit> fits() { return {{"relu", RegressionModel(1, 2, 0), reluData(200)}, {"planted", RegressionModel(2, 2, 0), plantedData(200)}}; }

std::vector<MMTrace> runStarts(const Fit& fit, int starts, std::uint64_t seed) {
  std::vector<MMTrace> out;
  for (const auto& s : multistartPoints(fit.model, fit.data, starts, seed)) out.push_back(runMM(fit.model, fit.data, s));
  return out;
}

std::vector<double> finals(const std::vector<MMTrace>& tr, std::size_t count) {
  std::vector<double> v;
  for (std::size_t k = 0; k < count; ++k) v.push_back(tr[k].finalValue());
  return v;
}

void criterion8(Outcome& out) {
  int flagged = 0;
  for (const Fit& fit : fits()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto runs = runStarts(fit, 200, seed);
      const std::string tag = fit.name + " seed " + std::to_string(seed);
      double best = kInf;
      for (std::size_t k = 0; k < 100; ++k) best = std::min(best, runs[k].finalValue());
      if (best > 1e-8) out.fail(tag + ": best of 100 starts " + std::to_string(best));
      for (const auto& tr : runs) {
        for (std::size_t k = 1; k < tr.objectiveValues.size(); ++k)
          if (tr.objectiveValues[k] > tr.objectiveValues[k - 1] + 1e-10) out.fail(tag + ": objective increased");
        if (tr.stationarity.verdict == Verdict::kStationary) continue;
        if (tr.stationarity.verdict == Verdict::kInconclusive || tr.terminationReason != "step-tolerance")
          ++flagged;
        else
          out.fail(tag + ": unflagged non-stationary terminal point");
      }
      const auto c100 = clusterValues(finals(runs, 100)).size();
      const auto c200 = clusterValues(finals(runs, 200)).size();
      if (c200 > c100) out.fail(tag + ": clusters " + std::to_string(c100) + " -> " + std::to_string(c200));
    }
  }
  if (out.pass) out.detail << "2 datasets x 5 seeds, " << flagged << " flagged terminal points";
}

void criterion9(Outcome& out) {
  std::mt19937_64 rng(9);
  int checked = 0;
  for (const Fit& fit : fits()) {
    for (const auto& tr : runStarts(fit, 5, 90)) {
      const Vec theta = tr.finalPoint();
      const double fstar = fit.model.objective(theta, fit.data);
      double lowest = kInf;
      for (int s = 0; s < 1000; ++s) {
        const Vec dir = oracle::randomDirection(theta.size(), rng);
        const double r = 1e-4 * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / theta.size());
        lowest = std::min(lowest, fit.model.objective(theta + r * dir, fit.data));
      }
      ++checked;
      if (lowest < fstar - 1e-9)
        out.fail(fit.name + ": sample below limit value by " + std::to_string(fstar - lowest));
    }
  }
  if (out.pass) out.detail << checked << " limit points";
}

void criterion10(Outcome& out) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2.0, 2.0), unit(0.0, 1.0), lead(0.5, 4.0);
  int cases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    const Mat p = oracle::randomSymmetric(n, rng), q = oracle::randomSymmetric(n, rng);
    const Polynomial d = detPolynomial(p, q);
    for (int k = 0; k < 5; ++k) {
      const double t = u(rng);
      double scale = 1.0;
      for (int r = 0; r < n; ++r) scale *= (t * p - q).row(r).norm();
      if (std::abs(d(t) - oracle::exactPencilDet(p, q, t)) > 1e-8 * std::max(1.0, scale)) out.fail("detPolynomial");
    }
    ++cases;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    const Mat p = oracle::symmetricWithSpectrum(n, 0.5, 2.0, rng), q = oracle::randomSymmetric(n, rng);
    const Vec pv = oracle::randomVector(n, rng), qv = oracle::randomVector(n, rng);
    const auto curve = parametricInverseCurve(p, q, pv, qv);
    const double dscale = std::pow(1.0 + p.norm() + q.norm(), n);
    for (int k = 0; k < 10; ++k) {
      const double t = unit(rng);
      if (std::abs(curve.denominator(t)) < 1e-6 * dscale) continue;
      const Vec direct = (t * p - q).fullPivLu().solve(t * pv - qv);
      if ((curve(t) - direct).norm() > 1e-8 * std::max(1.0, direct.norm())) out.fail("parametricInverseCurve");
    }
    ++cases;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int deg = 1 + trial % 7;
    std::vector<double> roots;
    while (static_cast<int>(roots.size()) < deg) {
      const double r = 1.5 * u(rng);
      bool far = true;
      for (double s : roots) far = far && std::abs(r - s) > 1e-2;
      if (far) roots.push_back(r);
    }
    std::sort(roots.begin(), roots.end());
    const auto found = realRootsInInterval(Polynomial::fromRoots(roots, lead(rng)), -2.0, 2.0);
    std::vector<double> inside;
    for (double r : roots)
      if (r >= -2.0 && r <= 2.0) inside.push_back(r);
    bool ok = found.size() == inside.size();
    for (std::size_t k = 0; ok && k < inside.size(); ++k) ok = std::abs(found[k] - inside[k]) <= 1e-9;
    if (!ok) out.fail("realRootsInInterval");
    ++cases;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int cols = 5, rank = 1 + trial % 3;
    const Mat m = oracle::randomMatrix(3, rank, rng) * oracle::randomMatrix(rank, cols, rng);
    const Mat z = nullSpaceBasis(m);
    if (z.cols() != cols - rank || (m * z).norm() > 1e-10 * (1.0 + m.norm()) ||
        (z.transpose() * z - Mat::Identity(z.cols(), z.cols())).norm() > 1e-12)
      out.fail("nullSpaceBasis");
    ++cases;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    const Mat a = oracle::randomMatrix(n, n, rng), b = oracle::randomMatrix(n, n, rng);
    const auto c = adjugatePolynomial(a, b);
    for (int k = 0; k < 5; ++k) {
      const double t = u(rng) / 2.0;
      const Mat m = a + t * b;
      const double dt = m.determinant();
      if (std::abs(dt) < 1e-3) continue;
      Mat acc = Mat::Zero(n, n);
      for (int j = n - 1; j >= 0; --j) acc = acc * t + c[j];
      const Mat inv = m.inverse();
      if ((acc / dt - inv).norm() > 1e-8 * inv.norm()) out.fail("adjugatePolynomial");
    }
    ++cases;
  }
  if (out.pass) out.detail << cases << " cases";
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    double limitSeconds;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> all{{1, 1.0, criterion1},   {2, 1.0, criterion2},   {3, 300.0, criterion3},
                                   {4, 60.0, criterion4},  {5, 60.0, criterion5},  {6, 60.0, criterion6},
                                   {7, 60.0, criterion7},  {8, 600.0, criterion8}, {9, 60.0, criterion9},
                                   {10, 60.0, criterion10}};
  int failures = 0;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limitSeconds) out.fail("runtime over " + std::to_string(c.limitSeconds) + " s");
    failures += out.pass ? 0 : 1;
    std::printf("CRITERION %d %s (%.2f s) %s\n", c.id, out.pass ? "PASS" : "FAIL", secs, out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
