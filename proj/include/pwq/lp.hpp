#pragma once

// Dense two-phase tableau simplex with Bland's anti-cycling rule. Sized for
// the desk-scale certificate problems in this library (tens of rows).

#include <cmath>
#include <limits>
#include <vector>

#include "pwq/types.hpp"

namespace pwq {

/// minimize c'x  s.t.  Aub x <= bub,  Aeq x = beq,  x_j >= 0 unless free[j].
struct LinearProgram {
  Vec c;
  Mat Aub;
  Vec bub;
  Mat Aeq;
  Vec beq;
  std::vector<bool> free;

  explicit LinearProgram(int n = 0) : c(Vec::Zero(n)), Aub(0, n), bub(0), Aeq(0, n), beq(0), free(n, false) {}
  int numVars() const { return static_cast<int>(c.size()); }

  void addLessEqual(const Vec& row, double rhs) {
    Aub.conservativeResize(Aub.rows() + 1, numVars());
    Aub.row(Aub.rows() - 1) = row.transpose();
    bub.conservativeResize(bub.size() + 1);
    bub(bub.size() - 1) = rhs;
  }
  void addEqual(const Vec& row, double rhs) {
    Aeq.conservativeResize(Aeq.rows() + 1, numVars());
    Aeq.row(Aeq.rows() - 1) = row.transpose();
    beq.conservativeResize(beq.size() + 1);
    beq(beq.size() - 1) = rhs;
  }
};

enum class LPStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LPResult {
  LPStatus status = LPStatus::kIterationLimit;
  Vec x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double phase1 = 0.0;  // optimal sum of artificials
  bool optimal() const { return status == LPStatus::kOptimal; }
};

namespace detail {

class Tableau {
 public:
  Tableau(Mat t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  int cols() const { return static_cast<int>(t_.cols()) - 1; }
  Mat& raw() { return t_; }
  std::vector<int>& basis() { return basis_; }

  // Objective row holds reduced costs; t(m, rhs) = -objective.
  void setObjective(const Vec& cost) {
    const int m = rows(), n = cols();
    t_.row(m).setZero();
    t_.row(m).head(n) = cost.transpose();
    for (int i = 0; i < m; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) t_.row(m) -= cb * t_.row(i);
    }
  }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i < t_.rows(); ++i)
      if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
    basis_[r] = c;
  }

  // Returns kOptimal, kUnbounded or kIterationLimit.
  LPStatus run(const std::vector<bool>& enterable, double tol, long maxIter) {
    const int m = rows(), n = cols();
    for (long it = 0; it < maxIter; ++it) {
      int enter = -1;
      for (int j = 0; j < n; ++j)
        if (enterable[j] && t_(m, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return LPStatus::kOptimal;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a <= tol) continue;
        const double ratio = t_(i, n) / a;
        if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return LPStatus::kUnbounded;
      pivot(leave, enter);
    }
    return LPStatus::kIterationLimit;
  }

 private:
  Mat t_;
  std::vector<int> basis_;
};

}  // namespace detail

inline LPResult solveLP(const LinearProgram& lp, double tol = 1e-10, long maxIter = 200000) {
  const int n = lp.numVars();
  const int mu = static_cast<int>(lp.Aub.rows());
  const int me = static_cast<int>(lp.Aeq.rows());
  const int m = mu + me;

  // Columns: structural (free vars split in two), slacks, artificials.
  std::vector<int> colOf(n), negCol(n, -1);
  int ncol = 0;
  for (int j = 0; j < n; ++j) {
    colOf[j] = ncol++;
    if (lp.free[j]) negCol[j] = ncol++;
  }
  const int slack0 = ncol;
  ncol += mu;
  const int art0 = ncol;
  ncol += m;

  Mat t = Mat::Zero(m + 1, ncol + 1);
  auto fillRow = [&](int i, const Eigen::RowVectorXd& a, double rhs, int slackCol) {
    const double s = rhs < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      t(i, colOf[j]) = s * a(j);
      if (negCol[j] >= 0) t(i, negCol[j]) = -s * a(j);
    }
    if (slackCol >= 0) t(i, slackCol) = s;
    t(i, art0 + i) = 1.0;
    t(i, ncol) = s * rhs;
  };
  for (int i = 0; i < mu; ++i) fillRow(i, lp.Aub.row(i), lp.bub(i), slack0 + i);
  for (int i = 0; i < me; ++i) fillRow(mu + i, lp.Aeq.row(i), lp.beq(i), -1);

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = art0 + i;
  detail::Tableau tab(std::move(t), std::move(basis));

  LPResult res;
  Vec cost1 = Vec::Zero(ncol);
  cost1.tail(m).setOnes();
  tab.setObjective(cost1);
  std::vector<bool> enterable(ncol, true);
  const LPStatus s1 = tab.run(enterable, tol, maxIter);
  if (s1 == LPStatus::kIterationLimit) return res;
  res.phase1 = -tab.raw()(m, ncol);
  double bscale = 1.0;
  for (int i = 0; i < mu; ++i) bscale = std::max(bscale, std::abs(lp.bub(i)));
  for (int i = 0; i < me; ++i) bscale = std::max(bscale, std::abs(lp.beq(i)));
  if (res.phase1 > 1e-9 * bscale) {
    res.status = LPStatus::kInfeasible;
    return res;
  }

  // Drive zero-level artificials out of the basis; rows where no
  // structural pivot exists are redundant and stay with a frozen artificial.
  for (int i = 0; i < m; ++i) {
    if (tab.basis()[i] < art0) continue;
    for (int j = 0; j < art0; ++j)
      if (std::abs(tab.raw()(i, j)) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
  }
  for (int j = art0; j < ncol; ++j) enterable[j] = false;

  Vec cost2 = Vec::Zero(ncol);
  for (int j = 0; j < n; ++j) {
    cost2(colOf[j]) = lp.c(j);
    if (negCol[j] >= 0) cost2(negCol[j]) = -lp.c(j);
  }
  tab.setObjective(cost2);
  const LPStatus s2 = tab.run(enterable, tol, maxIter);
  if (s2 != LPStatus::kOptimal) {
    res.status = s2;
    return res;
  }
  Vec z = Vec::Zero(ncol);
  for (int i = 0; i < m; ++i) z(tab.basis()[i]) = tab.raw()(i, ncol);
  res.x.resize(n);
  for (int j = 0; j < n; ++j) res.x(j) = z(colOf[j]) - (negCol[j] >= 0 ? z(negCol[j]) : 0.0);
  res.objective = lp.c.dot(res.x);
  res.status = LPStatus::kOptimal;
  return res;
}

}  // namespace pwq
