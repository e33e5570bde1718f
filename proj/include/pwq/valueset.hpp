#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pwq/types.hpp"

namespace pwq {

inline constexpr double kValueMergeTolerance = 1e-6;

/// Distinct stationary values, each with one witness point and the branch
/// tags that produced it.
class ValueSet {
 public:
  struct Entry {
    double value = 0.0;
    Vec witness;
    std::vector<std::string> branches;
  };
  struct Point {
    double value = 0.0;
    Vec x;
    std::string branch;
  };

  explicit ValueSet(double mergeTol = kValueMergeTolerance) : tol_(mergeTol) {}

  void add(double value, const Vec& witness, const std::string& branch) {
    if (std::none_of(points_.begin(), points_.end(), [&](const Point& p) { return (p.x - witness).norm() <= 1e-9; }))
      points_.push_back({value, witness, branch});
    for (auto& e : entries_)
      if (std::abs(e.value - value) <= tol_) {
        if (std::find(e.branches.begin(), e.branches.end(), branch) == e.branches.end()) e.branches.push_back(branch);
        return;
      }
    entries_.push_back({value, witness, {branch}});
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
  }

  void merge(const ValueSet& other) {
    for (const auto& e : other.entries_)
      for (const auto& b : e.branches) add(e.value, e.witness, b);
    for (const auto& f : other.flags_) flag(f, other.complete_);
  }

  // Record a condition; incomplete flags mean some branch could not be exhausted.
  void flag(const std::string& what, bool stillComplete = false) {
    if (std::find(flags_.begin(), flags_.end(), what) == flags_.end()) flags_.push_back(what);
    complete_ = complete_ && stillComplete;
  }

  bool contains(double value, double tol) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return std::abs(e.value - value) <= tol; });
  }

  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& e : entries_) v.push_back(e.value);
    return v;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  // Every verified point that was added, not only one witness per value.
  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool complete() const { return complete_; }
  const std::vector<std::string>& flags() const { return flags_; }
  const std::string& scope() const { return scope_; }
  void setScope(std::string s) { scope_ = std::move(s); }

 private:
  double tol_;
  std::vector<Entry> entries_;
  std::vector<Point> points_;
  std::vector<std::string> flags_;
  bool complete_ = true;
  std::string scope_ = "all";
};

}  // namespace pwq
