#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here is used by the library itself.

#include <boost/multiprecision/cpp_int.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "bruteforce.hpp"
#include "pwq/pwq.hpp"

namespace oracle {

using pwq::Mat;
using pwq::Vec;
using Rational = boost::multiprecision::cpp_rational;

inline Rational exact(double v) { return Rational(v); }

// Determinant by Laplace expansion along the first row, in exact arithmetic.
inline Rational cofactorDet(const std::vector<std::vector<Rational>>& m) {
  const std::size_t n = m.size();
  if (n == 0) return Rational(1);
  if (n == 1) return m[0][0];
  Rational acc = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (m[0][c] == 0) continue;
    std::vector<std::vector<Rational>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<Rational> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != c) row.push_back(m[r][k]);
      minor.push_back(row);
    }
    const Rational term = m[0][c] * cofactorDet(minor);
    acc += (c % 2 == 0) ? term : Rational(-term);
  }
  return acc;
}

// det(t P - Q) evaluated exactly for a double t.
inline double exactPencilDet(const Mat& p, const Mat& q, double t) {
  const int n = static_cast<int>(p.rows());
  std::vector<std::vector<Rational>> m(n, std::vector<Rational>(n));
  const Rational rt = exact(t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = rt * exact(p(i, j)) - exact(q(i, j));
  return static_cast<double>(cofactorDet(m));
}

inline Mat randomMatrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline Mat randomSymmetric(int n, std::mt19937_64& rng) {
  const Mat a = randomMatrix(n, n, rng);
  return 0.5 * (a + a.transpose());
}

// Symmetric matrix with eigenvalues drawn uniformly from [lo, hi].
inline Mat symmetricWithSpectrum(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::HouseholderQR<Mat> qr(randomMatrix(n, n, rng));
  const Mat q = qr.householderQ();
  Vec ev(n);
  for (int i = 0; i < n; ++i) ev(i) = u(rng);
  return q * ev.asDiagonal() * q.transpose();
}

inline Vec randomVector(int n, std::mt19937_64& rng, double scale = 1.0) {
  return randomMatrix(n, 1, rng, scale).col(0);
}

// Random unit vector, uniform on the sphere.
inline Vec randomDirection(int n, std::mt19937_64& rng) {
  Vec d = randomVector(n, rng);
  while (d.norm() < 1e-12) d = randomVector(n, rng);
  return d / d.norm();
}

}  // namespace oracle
