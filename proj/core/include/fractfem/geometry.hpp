// Small 2D point/vector helpers shared by mesh, quadrature and assembly code.

#pragma once

#include <array>
#include <cmath>

namespace fractfem {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double a) const { return {a * x, a * y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

inline Vec2 operator*(double a, const Vec2& v) { return {a * v.x, a * v.y}; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double sqNorm(const Vec2& a) { return a.x * a.x + a.y * a.y; }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }

using Triangle = std::array<Vec2, 3>;

inline double triangleArea(const Triangle& t) {
  return 0.5 * std::abs(cross(t[1] - t[0], t[2] - t[0]));
}

inline double triangleDiameter(const Triangle& t) {
  const double a = dist(t[0], t[1]);
  const double b = dist(t[1], t[2]);
  const double c = dist(t[0], t[2]);
  return std::max(a, std::max(b, c));
}

// Distance between two closed convex point sets given by their corners,
// adequate for triangle/segment pairs: zero when they intersect is not
// required by callers (touching pairs are classified by shared vertices
// first), so this returns the min over segment-segment distances.
double segmentDistance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                       const Vec2& b1);
double triangleDistance(const Triangle& a, const Triangle& b);
double triangleSegmentDistance(const Triangle& a, const Vec2& b0, const Vec2& b1);
double pointSegmentDistance(const Vec2& p, const Vec2& a, const Vec2& b);
// Distance to the triangle boundary; callers only use it for exterior points.
double pointTriangleDistance(const Vec2& p, const Triangle& t);

}  // namespace fractfem
