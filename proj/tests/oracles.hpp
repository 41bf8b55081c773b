#pragma once

// Independent reference computations for the test suites. None of these call
// into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

// Number of eigenvalues of the symmetric matrix `a` strictly below x, by
// Sylvester's law of inertia on the LDL^T pivots of a - x I.
inline std::size_t count_below(const std::vector<double>& a, std::size_t n, double x) {
  std::vector<double> m(a);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] -= x;
  std::size_t negative = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double pivot = m[k * n + k];
    if (pivot == 0.0) pivot = -1e-300;
    if (pivot < 0.0) ++negative;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m[i * n + k] / pivot;
      for (std::size_t j = k + 1; j < n; ++j) m[i * n + j] -= f * m[k * n + j];
    }
  }
  return negative;
}

// All eigenvalues ascending by bisection on the inertia count.
inline std::vector<double> bisection_eigenvalues(const std::vector<double>& a, std::size_t n) {
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += std::abs(a[i * n + j]);
    radius = std::max(radius, r);
  }
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lo = -radius - 1.0, hi = radius + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, radius); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(a, n, mid) > k) hi = mid;
      else lo = mid;
    }
    out[k] = 0.5 * (lo + hi);
  }
  return out;
}

// Eigenvalues of a symmetric 3x3 matrix from the roots of its characteristic
// polynomial (trigonometric form), ascending.
inline std::vector<double> cubic_eigenvalues(const std::vector<double>& a) {
  const double a00 = a[0], a01 = a[1], a02 = a[2], a11 = a[4], a12 = a[5], a22 = a[8];
  // det(A - l I) = -(l^3 - c2 l^2 + c1 l - c0)
  const double c2 = a00 + a11 + a22;
  const double c1 = a00 * a11 + a00 * a22 + a11 * a22 - a01 * a01 - a02 * a02 - a12 * a12;
  const double c0 = a00 * a11 * a22 + 2 * a01 * a02 * a12 - a00 * a12 * a12 - a11 * a02 * a02 - a22 * a01 * a01;
  const double shift = c2 / 3.0;
  const double p = c1 - c2 * c2 / 3.0;
  const double q = -(2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0);
  std::vector<double> r(3);
  if (p > -1e-300) {
    r = {shift, shift, shift};
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) r[k] = shift + m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
  }
  std::sort(r.begin(), r.end());
  // acos loses half the digits at a double root; a double root of p is a
  // simple root of p', so take it from there. Simple roots get Newton steps.
  auto poly = [&](double l) { return ((l - c2) * l + c1) * l - c0; };
  auto deriv = [&](double l) { return (3.0 * l - 2.0 * c2) * l + c1; };
  const double disc = std::max(c2 * c2 - 3.0 * c1, 0.0);
  const double crit[2] = {(c2 - std::sqrt(disc)) / 3.0, (c2 + std::sqrt(disc)) / 3.0};
  std::vector<double> out = r;
  for (int k = 0; k < 3; ++k) {
    const bool paired = (k > 0 && r[k] - r[k - 1] < 1e-7) || (k < 2 && r[k + 1] - r[k] < 1e-7);
    if (paired) {
      out[k] = std::abs(crit[0] - r[k]) < std::abs(crit[1] - r[k]) ? crit[0] : crit[1];
    } else {
      for (int it = 0; it < 3; ++it) {
        const double d = deriv(out[k]);
        if (d != 0.0) out[k] -= poly(out[k]) / d;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Minimum over every injective row -> column map of an R x C cost (R <= C).
inline double exhaustive_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> perm(cols);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += cost[r * cols + perm[r]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Lowest within-cluster sum of squares over all 2-partitions of m points.
inline double exhaustive_two_means(const std::vector<double>& pts, std::size_t dim) {
  const std::size_t m = pts.size() / dim;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << m); ++mask) {
    if (mask & 1) continue;  // each split once
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> mu(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (((mask >> i) & 1) != static_cast<std::size_t>(side)) continue;
        ++count;
        for (std::size_t d = 0; d < dim; ++d) mu[d] += pts[i * dim + d];
      }
      for (double& v : mu) v /= static_cast<double>(count);
      for (std::size_t i = 0; i < m; ++i) {
        if (((mask >> i) & 1) != static_cast<std::size_t>(side)) continue;
        for (std::size_t d = 0; d < dim; ++d) total += (pts[i * dim + d] - mu[d]) * (pts[i * dim + d] - mu[d]);
      }
    }
    best = std::min(best, total);
  }
  return best;
}

inline double soft_dice_cost(const std::vector<double>& p, const std::vector<double>& q) {
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pq += p[i] * q[i];
    pp += p[i] * p[i];
    qq += q[i] * q[i];
  }
  return 1.0 - 2.0 * pq / (pp + qq + 1e-6);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace oracle
