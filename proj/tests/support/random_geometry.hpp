// Seeded random generators for test geometries and vectors. Everything takes
// an explicit engine so each test case controls its own sequence.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <random>

#include "fractfem/geometry.hpp"

namespace fractfem {
namespace testsupport {

inline double uniform(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec2 randomPoint(std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
  return Vec2{uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline double triangleArea(const Triangle& T) {
  return 0.5 * ((T[1].x - T[0].x) * (T[2].y - T[0].y) -
                (T[1].y - T[0].y) * (T[2].x - T[0].x));
}

inline double triangleDiam(const Triangle& T) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vec2 e{T[(i + 1) % 3].x - T[i].x, T[(i + 1) % 3].y - T[i].y};
    d = std::max(d, std::hypot(e.x, e.y));
  }
  return d;
}

// Well-shaped random triangle: area at least minShape * diameter^2 so the
// graded quadratures of both the production path and the oracle behave.
inline Triangle randomTriangle(std::mt19937& rng, double minShape = 0.08) {
  while (true) {
    Triangle T{randomPoint(rng), randomPoint(rng), randomPoint(rng)};
    const double d = triangleDiam(T);
    if (d < 0.3) continue;
    const double a = triangleArea(T);
    if (a < 0.0) std::swap(T[1], T[2]);
    if (std::fabs(a) >= minShape * d * d) return T;
  }
}

// Completes points a, b to a CCW triangle with a third point on the left of
// a -> b, rejecting thin shapes.
inline Triangle completeTriangle(std::mt19937& rng, Vec2 a, Vec2 b,
                                 double minShape = 0.08) {
  while (true) {
    const Vec2 c = randomPoint(rng, -1.5, 1.5);
    Triangle T{a, b, c};
    const double ar = triangleArea(T);
    if (ar <= 0.0) continue;
    const double d = triangleDiam(T);
    if (ar >= minShape * d * d) return T;
  }
}

inline Eigen::VectorXd randomVector(std::mt19937& rng, int n, double amp = 1.0) {
  std::normal_distribution<double> g(0.0, amp);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace testsupport
}  // namespace fractfem
