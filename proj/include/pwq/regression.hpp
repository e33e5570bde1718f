#pragma once

// Least-squares fitting of a difference of two max-affine functions,
//   F(theta) = 1/(2N) sum_l (max_i (a_i'x_l + alpha_i) - max_j (b_j'x_l + beta_j) - y_l)^2,
// by majorization-minimization.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pwq/convex.hpp"
#include "pwq/core.hpp"
#include "pwq/lp.hpp"
#include "pwq/stationarity.hpp"

namespace pwq {

struct Dataset {
  Mat x;  // N x d
  Vec y;  // N
  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(x.cols()); }
  double scale() const {
    const double sx = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    const double sy = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    return std::max({sx, sy, 1.0});
  }
};

/// Parameters theta = (a_1, alpha_1, ..., a_k1, alpha_k1, b_1, beta_1, ..., b_k2, beta_k2).
/// With k2 = 0 the subtracted max is identically zero.
struct RegressionModel {
  int d = 1;
  int k1 = 1;
  int k2 = 0;
  Polyhedron constraintSet;

  RegressionModel() = default;
  RegressionModel(int dim, int plusPieces, int minusPieces)
      : d(dim), k1(plusPieces), k2(minusPieces), constraintSet(Polyhedron::whole((k1 + k2) * (dim + 1))) {}
  RegressionModel(int dim, int plusPieces, int minusPieces, Polyhedron x)
      : d(dim), k1(plusPieces), k2(minusPieces), constraintSet(std::move(x)) {
    require(constraintSet.dim() == numParams(), "dimension-mismatch", "constraint set");
  }

  int numParams() const { return (k1 + k2) * (d + 1); }
  int plusOffset(int i) const { return i * (d + 1); }
  int minusOffset(int j) const { return (k1 + j) * (d + 1); }

  // Affine value of piece starting at offset for sample z = (x, 1).
  double pieceValue(const Vec& theta, int offset, const Vec& x) const {
    return theta.segment(offset, d).dot(x) + theta(offset + d);
  }
  std::pair<double, int> plusMax(const Vec& theta, const Vec& x) const {
    int best = 0;
    double v = pieceValue(theta, plusOffset(0), x);
    for (int i = 1; i < k1; ++i) {
      const double w = pieceValue(theta, plusOffset(i), x);
      if (w > v) v = w, best = i;
    }
    return {v, best};
  }
  std::pair<double, int> minusMax(const Vec& theta, const Vec& x) const {
    if (k2 == 0) return {0.0, -1};
    int best = 0;
    double v = pieceValue(theta, minusOffset(0), x);
    for (int j = 1; j < k2; ++j) {
      const double w = pieceValue(theta, minusOffset(j), x);
      if (w > v) v = w, best = j;
    }
    return {v, best};
  }
  double predict(const Vec& theta, const Vec& x) const { return plusMax(theta, x).first - minusMax(theta, x).first; }

  double objective(const Vec& theta, const Dataset& data) const {
    requireDim(theta, numParams(), "RegressionModel::objective");
    double s = 0.0;
    for (int l = 0; l < data.size(); ++l) {
      const double r = predict(theta, data.x.row(l).transpose()) - data.y(l);
      s += r * r;
    }
    return s / (2.0 * data.size());
  }
};

/// Convex majorizer of the objective touching it at the anchor. Each sample term
/// (t - y)^2 / 2N is split into a nondecreasing and a nonincreasing convex part;
/// the concave occurrence of each max inside those parts is replaced by the
/// linearization at the anchor (lowest active index on ties).
struct Surrogate {
  Vec anchor;
  std::vector<int> plusPiece;   // active plus piece per sample at the anchor
  std::vector<int> minusPiece;  // active minus piece per sample (-1 when k2 = 0)
};

inline Surrogate buildSurrogate(const RegressionModel& model, const Dataset& data, const Vec& anchor) {
  requireDim(anchor, model.numParams(), "buildSurrogate");
  require(model.constraintSet.contains(anchor), "point-not-in-X", "anchor outside the constraint set");
  Surrogate s{anchor, {}, {}};
  for (int l = 0; l < data.size(); ++l) {
    const Vec x = data.x.row(l).transpose();
    s.plusPiece.push_back(model.plusMax(anchor, x).second);
    s.minusPiece.push_back(model.minusMax(anchor, x).second);
  }
  return s;
}

inline double surrogateValue(const RegressionModel& model, const Dataset& data, const Surrogate& s,
                             const Vec& theta) {
  const int n = data.size();
  double total = 0.0;
  for (int l = 0; l < n; ++l) {
    const Vec x = data.x.row(l).transpose();
    const double u = model.plusMax(theta, x).first;
    const double v = model.minusMax(theta, x).first;
    const double lu = model.pieceValue(theta, model.plusOffset(s.plusPiece[l]), x);
    const double lv = model.k2 ? model.pieceValue(theta, model.minusOffset(s.minusPiece[l]), x) : 0.0;
    const double up = std::max(u - lv - data.y(l), 0.0);
    const double down = std::max(data.y(l) - (lu - v), 0.0);
    total += up * up + down * down;
  }
  return total / (2.0 * n);
}

struct SurrogateSolve {
  Vec theta;
  double value = 0.0;  // surrogate value at theta, without the proximal term
  bool converged = false;
  double kktResidual = 0.0;
};

/// Minimizes surrogate + (tau/2)||theta - anchor||^2 over the constraint set as
/// a convex QP in (theta, t, s, p, r).
inline SurrogateSolve minimizeSurrogate(const RegressionModel& model, const Dataset& data, const Surrogate& s,
                                        double tau = 1e-6) {
  const int P = model.numParams(), N = data.size(), d = model.d;
  const int it0 = P, is0 = P + N, ip0 = P + 2 * N, ir0 = P + 3 * N;
  const int nv = P + 4 * N;
  ConvexProgram cp(nv);

  Triplets h;
  for (int k = 0; k < P; ++k) h.emplace_back(k, k, tau);
  for (int l = 0; l < N; ++l) {
    h.emplace_back(ip0 + l, ip0 + l, 1.0 / N);
    h.emplace_back(ir0 + l, ir0 + l, 1.0 / N);
  }
  cp.H.setFromTriplets(h.begin(), h.end());
  cp.g.head(P) = -tau * s.anchor;

  Triplets a;
  std::vector<double> b;
  int row = 0;
  auto addPiece = [&](int offset, double sign, const Vec& x) {
    for (int k = 0; k < d; ++k)
      if (x(k) != 0.0) a.emplace_back(row, offset + k, sign * x(k));
    a.emplace_back(row, offset + d, sign);
  };
  for (int l = 0; l < N; ++l) {
    const Vec x = data.x.row(l).transpose();
    for (int i = 0; i < model.k1; ++i) {  // plus_i(theta) - Lv(theta) - t <= 0
      addPiece(model.plusOffset(i), 1.0, x);
      if (model.k2) addPiece(model.minusOffset(s.minusPiece[l]), -1.0, x);
      a.emplace_back(row++, it0 + l, -1.0);
      b.push_back(0.0);
    }
    const int jcount = std::max(model.k2, 1);
    for (int j = 0; j < jcount; ++j) {  // s - Lu(theta) + minus_j(theta) <= 0
      a.emplace_back(row, is0 + l, 1.0);
      addPiece(model.plusOffset(s.plusPiece[l]), -1.0, x);
      if (model.k2) addPiece(model.minusOffset(j), 1.0, x);
      ++row;
      b.push_back(0.0);
    }
    a.emplace_back(row, it0 + l, 1.0);  // t - p <= y
    a.emplace_back(row++, ip0 + l, -1.0);
    b.push_back(data.y(l));
    a.emplace_back(row++, ip0 + l, -1.0);  // p >= 0
    b.push_back(0.0);
    a.emplace_back(row, is0 + l, -1.0);  // y - s - r <= 0
    a.emplace_back(row++, ir0 + l, -1.0);
    b.push_back(-data.y(l));
    a.emplace_back(row++, ir0 + l, -1.0);  // r >= 0
    b.push_back(0.0);
  }
  const Polyhedron& X = model.constraintSet;
  for (int j = 0; j < X.numInequalities(); ++j) {
    for (int k = 0; k < P; ++k)
      if (X.A()(j, k) != 0.0) a.emplace_back(row, k, X.A()(j, k));
    ++row;
    b.push_back(X.b()(j));
  }
  cp.A.resize(row, nv);
  cp.A.setFromTriplets(a.begin(), a.end());
  cp.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
  if (X.numEqualities() > 0) {
    Mat e = Mat::Zero(X.numEqualities(), nv);
    e.leftCols(P) = X.E();
    cp.E = e.sparseView();
    cp.d = X.d();
  }

  ConvexOptions opt;
  opt.tol = 1e-13;
  opt.maxIter = 300;
  opt.polish = false;
  const ConvexResult r = solveConvex(cp, Vec(), opt);

  SurrogateSolve out;
  out.converged = r.solved();
  out.kktResidual = r.kktResidual;
  const double anchorValue = surrogateValue(model, data, s, s.anchor);
  out.theta = s.anchor;
  out.value = anchorValue;
  if (r.x.size() == nv && r.x.allFinite()) {
    const Vec theta = r.x.head(P);
    const double v = surrogateValue(model, data, s, theta);
    // Never accept a step that increases the proximal surrogate.
    if (v + 0.5 * tau * (theta - s.anchor).squaredNorm() <= anchorValue && X.contains(theta)) {
      out.theta = theta;
      out.value = v;
    }
  }
  return out;
}

struct RegressionStationarity {
  Verdict verdict = Verdict::kInconclusive;
  double worstSlope = 0.0;   // min over checked selections of the directional derivative bound
  Vec direction;             // a descent direction when not stationary
  long selections = 0;       // number of tie selections examined
  bool capped = false;       // more tie selections than the cap
  bool stationary() const { return verdict == Verdict::kStationary; }
};

/// d-stationarity of the regression objective. The directional derivative is
///   F'(theta; D) = 1/N sum_l r_l (max_{i in I_l} g_i(D) - max_{j in J_l} h_j(D)),
/// a convex minus a concave piecewise linear function of D. Every selection of
/// one active piece in the concave terms gives an LP over the unit box
/// intersected with the tangent cone of the constraint set.
inline RegressionStationarity checkRegressionStationary(const RegressionModel& model, const Dataset& data,
                                                        const Vec& theta, long maxSelections = 4096,
                                                        double tolAct = kActiveTolerance,
                                                        double tolStat = kStationarityTolerance) {
  const int P = model.numParams(), N = data.size(), d = model.d;
  require(model.constraintSet.contains(theta), "point-not-in-X", "theta outside the constraint set");
  struct Term {
    double weight;                  // >= 0
    std::vector<int> convexPieces;  // offsets whose max enters with +weight
    std::vector<int> concavePieces; // offsets whose max enters with -weight
    Vec z;
  };
  std::vector<Term> terms;
  double gscale = 0.0;
  for (int l = 0; l < N; ++l) {
    const Vec x = data.x.row(l).transpose();
    const double r = model.predict(theta, x) - data.y(l);
    if (r == 0.0) continue;
    const double u = model.plusMax(theta, x).first, v = model.minusMax(theta, x).first;
    std::vector<int> ip, jm;
    for (int i = 0; i < model.k1; ++i)
      if (std::abs(model.pieceValue(theta, model.plusOffset(i), x) - u) <= tolAct * (1.0 + std::abs(u)))
        ip.push_back(model.plusOffset(i));
    for (int j = 0; j < model.k2; ++j)
      if (std::abs(model.pieceValue(theta, model.minusOffset(j), x) - v) <= tolAct * (1.0 + std::abs(v)))
        jm.push_back(model.minusOffset(j));
    Vec z(d + 1);
    z << x, 1.0;
    const double w = std::abs(r) / N;
    gscale = std::max(gscale, w * z.cwiseAbs().maxCoeff());
    // r > 0: +r max_I - r max_J; r < 0: |r| max_J - |r| max_I.
    if (r > 0)
      terms.push_back({w, ip, jm, z});
    else
      terms.push_back({w, jm, ip, z});
  }

  RegressionStationarity out;
  std::vector<int> choice(terms.size(), 0);
  long total = 1;
  for (const auto& t : terms) {
    const long c = std::max<long>(1, static_cast<long>(t.concavePieces.size()));
    if (total > maxSelections / c) {
      total = maxSelections + 1;
      break;
    }
    total *= c;
  }
  out.capped = total > maxSelections;

  const Polyhedron& X = model.constraintSet;
  const Mat aa = X.rows(X.activeRows(theta, tolAct));
  std::vector<int> multi;  // terms whose convex part needs an epigraph variable
  for (std::size_t k = 0; k < terms.size(); ++k)
    if (terms[k].convexPieces.size() > 1) multi.push_back(static_cast<int>(k));
  const int nv = P + static_cast<int>(multi.size());
  const double threshold = tolStat * (1.0 + gscale);

  out.worstSlope = 0.0;
  bool done = false;
  while (!done && out.selections < std::min(total, maxSelections)) {
    LinearProgram lp(nv);
    std::fill(lp.free.begin(), lp.free.end(), true);
    int e = P;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const Term& t = terms[k];
      if (t.convexPieces.size() == 1) {
        lp.c.segment(t.convexPieces[0], d + 1) += t.weight * t.z;
      } else if (t.convexPieces.size() > 1) {
        lp.c(e) = t.weight;
        for (int off : t.convexPieces) {
          Vec row = Vec::Zero(nv);
          row.segment(off, d + 1) = t.z;
          row(e) = -1.0;
          lp.addLessEqual(row, 0.0);
        }
        ++e;
      }
      if (!t.concavePieces.empty()) lp.c.segment(t.concavePieces[choice[k]], d + 1) -= t.weight * t.z;
    }
    for (int j = 0; j < aa.rows(); ++j) {
      Vec row = Vec::Zero(nv);
      row.head(P) = aa.row(j).transpose();
      lp.addLessEqual(row, 0.0);
    }
    for (int j = 0; j < X.numEqualities(); ++j) {
      Vec row = Vec::Zero(nv);
      row.head(P) = X.E().row(j).transpose();
      lp.addEqual(row, 0.0);
    }
    for (int k = 0; k < P; ++k) {
      Vec row = Vec::Zero(nv);
      row(k) = 1.0;
      lp.addLessEqual(row, 1.0);
      lp.addLessEqual(-row, 1.0);
    }
    const LPResult r = solveLP(lp);
    ++out.selections;
    if (r.optimal() && r.objective < out.worstSlope) {
      out.worstSlope = r.objective;
      out.direction = r.x.head(P);
    }
    if (out.worstSlope < -threshold) break;
    // next selection (mixed-radix counter)
    done = true;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const int c = static_cast<int>(terms[k].concavePieces.size());
      if (c <= 1) continue;
      if (++choice[k] < c) {
        done = false;
        break;
      }
      choice[k] = 0;
    }
  }
  if (out.worstSlope < -threshold)
    out.verdict = Verdict::kNotStationary;
  else
    out.verdict = out.capped ? Verdict::kInconclusive : Verdict::kStationary;
  return out;
}

struct MMTrace {
  std::vector<Vec> iterates;
  std::vector<double> surrogateValues;  // surrogate at the new iterate, anchored at the previous one
  std::vector<double> objectiveValues;  // objective at every iterate, starting with the initial point
  std::vector<double> stepNorms;
  std::string terminationReason;
  std::optional<Vec> polished;  // least-squares refinement of the last iterate on its own pieces
  double polishedValue = 0.0;
  RegressionStationarity stationarity;
  int iterations() const { return static_cast<int>(stepNorms.size()); }
  double finalValue() const { return polished ? polishedValue : objectiveValues.back(); }
  const Vec& finalPoint() const { return polished ? *polished : iterates.back(); }
};

struct MMOptions {
  int maxIter = 500;
  double tolStep = 1e-8;
  double tau = 1e-6;
  bool polish = true;
  bool checkStationarity = true;
};

/// With the active pieces of every sample frozen the objective is a linear
/// least-squares problem; its minimum-norm correction is accepted only if it
/// stays feasible and lowers the objective.
inline std::optional<Vec> polishFit(const RegressionModel& model, const Dataset& data, const Vec& theta) {
  const int P = model.numParams(), N = data.size(), d = model.d;
  Mat m = Mat::Zero(N, P);
  Vec res(N);
  for (int l = 0; l < N; ++l) {
    const Vec x = data.x.row(l).transpose();
    const int i = model.plusMax(theta, x).second;
    m.row(l).segment(model.plusOffset(i), d) = x.transpose();
    m(l, model.plusOffset(i) + d) = 1.0;
    if (model.k2) {
      const int j = model.minusMax(theta, x).second;
      m.row(l).segment(model.minusOffset(j), d) -= x.transpose();
      m(l, model.minusOffset(j) + d) -= 1.0;
    }
    res(l) = data.y(l) - model.predict(theta, x);
  }
  const Polyhedron& X = model.constraintSet;
  Vec step;
  if (X.numEqualities() > 0) {
    const Mat z = nullSpaceBasis(X.E(), P);
    step = z * (m * z).completeOrthogonalDecomposition().solve(res);
  } else {
    step = m.completeOrthogonalDecomposition().solve(res);
  }
  const Vec candidate = theta + step;
  if (!candidate.allFinite() || !X.contains(candidate)) return std::nullopt;
  if (!(model.objective(candidate, data) < model.objective(theta, data))) return std::nullopt;
  return candidate;
}

inline MMTrace runMM(const RegressionModel& model, const Dataset& data, const Vec& theta0, const MMOptions& opt = {}) {
  MMTrace trace;
  Vec theta = theta0;
  trace.iterates.push_back(theta);
  trace.objectiveValues.push_back(model.objective(theta, data));
  trace.terminationReason = "max-iterations";
  for (int k = 0; k < opt.maxIter; ++k) {
    const Surrogate s = buildSurrogate(model, data, theta);
    const SurrogateSolve sol = minimizeSurrogate(model, data, s, opt.tau);
    const double step = (sol.theta - theta).norm();
    theta = sol.theta;
    trace.iterates.push_back(theta);
    trace.surrogateValues.push_back(sol.value);
    trace.objectiveValues.push_back(model.objective(theta, data));
    trace.stepNorms.push_back(step);
    if (step <= opt.tolStep) {
      trace.terminationReason = "step-tolerance";
      break;
    }
  }
  if (opt.polish) {
    Vec cur = theta;
    for (int k = 0; k < 5; ++k) {
      auto next = polishFit(model, data, cur);
      if (!next) break;
      cur = *next;
      trace.polished = cur;
      trace.polishedValue = model.objective(cur, data);
    }
  }
  if (opt.checkStationarity) trace.stationarity = checkRegressionStationary(model, data, trace.finalPoint());
  return trace;
}

/// Starts drawn uniformly from [-R, R]^P by one generator, so the first k
/// starts of a longer run coincide with a shorter run using the same seed.
inline std::vector<Vec> multistartPoints(const RegressionModel& model, const Dataset& data, int starts,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double radius = 2.0 * data.scale();
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Vec> out;
  for (int s = 0; s < starts; ++s) {
    Vec t(model.numParams());
    for (int k = 0; k < t.size(); ++k) t(k) = u(rng);
    out.push_back(t);
  }
  return out;
}

struct Cluster {
  double representative = 0.0;
  int count = 0;
};

/// Groups sorted values whose consecutive gaps are at most grid; the
/// representative is the cluster mean.
inline std::vector<Cluster> clusterValues(std::vector<double> values, double grid = 1e-5) {
  require(!values.empty(), "empty-input", "clusterValues needs at least one value");
  require(grid > 0.0, "invalid-argument", "grid must be positive");
  std::sort(values.begin(), values.end());
  std::vector<Cluster> out;
  double sum = values[0], last = values[0];
  int count = 1;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] - last <= grid) {
      sum += values[k];
      ++count;
    } else {
      out.push_back({sum / count, count});
      sum = values[k];
      count = 1;
    }
    last = values[k];
  }
  out.push_back({sum / count, count});
  return out;
}

}  // namespace pwq
