#include "pair_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fractfem/quadrature.hpp"

namespace fractfem {
namespace oracle {
namespace {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

constexpr double kPi = 3.14159265358979323846;

// Affine representation f(x) = c + g.x of a P1 function on one triangle.
struct Affine {
  double c = 0.0;
  Vec2 g{0.0, 0.0};
  double at(Vec2 x) const { return c + g.x * x.x + g.y * x.y; }
};

Affine affineFromNodal(const Triangle& T, double n0, double n1, double n2) {
  Eigen::Matrix3d M;
  M << 1.0, T[0].x, T[0].y, 1.0, T[1].x, T[1].y, 1.0, T[2].x, T[2].y;
  const Eigen::Vector3d sol =
      M.fullPivLu().solve(Eigen::Vector3d(n0, n1, n2));
  return Affine{sol[0], Vec2{sol[1], sol[2]}};
}

void orientCcw(Triangle& T) {
  if (cross(T[1] - T[0], T[2] - T[0]) < 0.0) std::swap(T[1], T[2]);
}

// Intersection of the ray x + r w, r >= 0, with a CCW triangle.
bool clipRay(Vec2 x, Vec2 w, const Triangle& T, double scale, double& lo,
             double& hi) {
  lo = 0.0;
  hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const Vec2 E = T[(i + 1) % 3] - T[i];
    const double A = cross(E, x - T[i]);
    const double B = cross(E, w);
    if (std::fabs(B) < 1e-14 * scale) {
      if (A < 0.0) return false;
      continue;
    }
    const double r = -A / B;
    if (B > 0.0) {
      if (r > lo) lo = r;
    } else {
      if (r < hi) hi = r;
    }
  }
  return hi > lo;
}

// Gauss nodes over [a, b], chunked geometrically toward both endpoints so
// endpoint derivative singularities are resolved.
template <class F>
void gradedInterval(double a, double b, int depth, const Rule1D& rule, F&& f) {
  const double mid = 0.5 * (a + b);
  for (int side = 0; side < 2; ++side) {
    const double o = side == 0 ? a : b;
    for (int k = 0; k <= depth; ++k) {
      const double t1 = std::ldexp(1.0, -k);
      const double t0 = k == depth ? 0.0 : std::ldexp(1.0, -k - 1);
      const double lo = o + t0 * (mid - o);
      const double hi = o + t1 * (mid - o);
      for (std::size_t i = 0; i < rule.x.size(); ++i) {
        f(lo + (hi - lo) * rule.x[i], std::fabs(hi - lo) * rule.w[i]);
      }
    }
  }
}

// Inner integral over the second element along rays from x, with the radial
// part done in closed form. Accumulates all union-function combinations.
struct PairInner {
  Triangle Tt;  // CCW copy of the second element
  double scale = 1.0;
  int nU = 0;
  bool identical = false;
  double s = 0.5;
  std::array<Affine, 6> onK, onKt;
  int thetaDepth = 11;
  Rule1D thetaRule;

  void eval(Vec2 x, double wOuter, Matrix6& M) const {
    double gu[6];
    for (int a = 0; a < nU; ++a) {
      gu[a] = identical ? 0.0 : onK[a].at(x) - onKt[a].at(x);
    }

    const double a0 = std::atan2(Tt[0].y - x.y, Tt[0].x - x.x);
    auto offset = [&](int i) {
      double d = std::atan2(Tt[i].y - x.y, Tt[i].x - x.x) - a0;
      if (identical) {
        while (d < 0.0) d += 2.0 * kPi;
        while (d >= 2.0 * kPi) d -= 2.0 * kPi;
      } else {
        while (d <= -kPi) d += 2.0 * kPi;
        while (d > kPi) d -= 2.0 * kPi;
      }
      return d;
    };
    double v[3] = {0.0, offset(1), offset(2)};
    std::sort(v, v + 3);
    double segs[4] = {v[0], v[1], v[2], v[0] + 2.0 * kPi};
    const int nSec = identical ? 3 : 2;

    const double p3 = 2.0 - 2.0 * s;
    const bool logMid = std::fabs(1.0 - 2.0 * s) < 1e-9;

    for (int sec = 0; sec < nSec; ++sec) {
      const double t0 = segs[sec], t1 = segs[sec + 1];
      if (!(t1 - t0 > 1e-13)) continue;
      gradedInterval(t0, t1, thetaDepth, thetaRule, [&](double t, double wt) {
        const double th = a0 + t;
        const Vec2 w{std::cos(th), std::sin(th)};
        double r0, r1;
        if (!clipRay(x, w, Tt, scale, r0, r1)) return;
        if (!(r1 > r0)) return;
        double au[6];
        for (int a = 0; a < nU; ++a) au[a] = dot(onKt[a].g, w);
        const double z3 = (std::pow(r1, p3) - std::pow(r0, p3)) / p3;
        const double W = wOuter * wt;
        if (identical) {
          for (int a = 0; a < nU; ++a) {
            for (int b = 0; b < nU; ++b) {
              M(a, b) += W * au[a] * au[b] * z3;
            }
          }
          return;
        }
        if (!(r0 > 0.0)) return;  // x on the element boundary, measure zero
        const double z1 =
            (std::pow(r0, -2.0 * s) - std::pow(r1, -2.0 * s)) / (2.0 * s);
        const double z2 = logMid ? std::log(r1 / r0)
                                 : (std::pow(r1, 1.0 - 2.0 * s) -
                                    std::pow(r0, 1.0 - 2.0 * s)) /
                                       (1.0 - 2.0 * s);
        for (int a = 0; a < nU; ++a) {
          for (int b = 0; b < nU; ++b) {
            M(a, b) += W * (gu[a] * gu[b] * z1 -
                            (gu[a] * au[b] + gu[b] * au[a]) * z2 +
                            au[a] * au[b] * z3);
          }
        }
      });
    }
  }
};

// Sum of geometrically shrinking chunk integrals with an entrywise geometric
// tail estimate from the last two chunks.
template <class Mat>
struct ChunkAccum {
  Mat total = Mat::Zero();
  Mat prev = Mat::Zero(), last = Mat::Zero();
  int count = 0;
  void push(const Mat& c) {
    total += c;
    prev = last;
    last = c;
    ++count;
  }
  void addTail() {
    if (count < 2) return;
    for (int a = 0; a < Mat::RowsAtCompileTime; ++a) {
      for (int b = 0; b < Mat::ColsAtCompileTime; ++b) {
        const double p = prev(a, b);
        if (p == 0.0) continue;
        const double r = last(a, b) / p;
        if (r > 1e-9 && r < 0.997) total(a, b) += last(a, b) * r / (1.0 - r);
      }
    }
  }
};

// x(u, v) = (1-v) (A + u (B-A)) + v C maps the unit square onto the triangle
// with Jacobian 2|K|(1-v); v = 0 is the edge A-B. The inner integrals seen
// along a row at height v develop features of width ~v at the row ends (the
// edge endpoints), so u is graded toward both ends with a depth that tracks
// the v level.
template <class Mat, class Body>
Mat edgeGradedOuter(Vec2 A, Vec2 B, Vec2 C, int depth, const Rule1D& ru,
                    const Rule1D& rv, Body&& body) {
  const double twoArea = std::fabs(cross(B - A, C - A));
  ChunkAccum<Mat> acc;
  for (int k = 0; k < depth; ++k) {
    const double vHi = std::ldexp(1.0, -k);
    const double vLo = std::ldexp(1.0, -k - 1);
    const int uDepth = std::min(k + 6, 48);
    Mat chunk = Mat::Zero();
    for (std::size_t iv = 0; iv < rv.x.size(); ++iv) {
      const double vv = vLo + (vHi - vLo) * rv.x[iv];
      const double wv = (vHi - vLo) * rv.w[iv];
      gradedInterval(0.0, 1.0, uDepth, ru, [&](double uu, double wu) {
        const Vec2 x = (1.0 - vv) * (A + uu * (B - A)) + vv * C;
        body(x, twoArea * (1.0 - vv) * wu * wv, chunk);
      });
    }
    acc.push(chunk);
  }
  acc.addTail();
  return acc.total;
}

// x(l, t) = A + l (B + t (C-B) - A) with Jacobian 2|K| l; l = 0 is vertex A.
template <class Mat, class Body>
Mat vertexGradedOuter(Vec2 A, Vec2 B, Vec2 C, int depth, const Rule1D& rt,
                      const Rule1D& rl, Body&& body) {
  const double twoArea = std::fabs(cross(B - A, C - A));
  ChunkAccum<Mat> acc;
  for (int k = 0; k < depth; ++k) {
    const double lHi = std::ldexp(1.0, -k);
    const double lLo = std::ldexp(1.0, -k - 1);
    Mat chunk = Mat::Zero();
    for (std::size_t il = 0; il < rl.x.size(); ++il) {
      const double l = lLo + (lHi - lLo) * rl.x[il];
      const double wl = (lHi - lLo) * rl.w[il];
      for (std::size_t it = 0; it < rt.x.size(); ++it) {
        const Vec2 E = B + rt.x[it] * (C - B);
        const Vec2 x = A + l * (E - A);
        body(x, twoArea * l * rt.w[it] * wl, chunk);
      }
    }
    acc.push(chunk);
  }
  acc.addTail();
  return acc.total;
}

template <class Mat, class Body>
Mat plainOuter(Vec2 A, Vec2 B, Vec2 C, const Rule1D& ru, const Rule1D& rv,
               Body&& body) {
  const double twoArea = std::fabs(cross(B - A, C - A));
  Mat chunk = Mat::Zero();
  for (std::size_t iv = 0; iv < rv.x.size(); ++iv) {
    for (std::size_t iu = 0; iu < ru.x.size(); ++iu) {
      const double vv = rv.x[iv];
      const Vec2 x = (1.0 - vv) * (A + ru.x[iu] * (B - A)) + vv * C;
      body(x, twoArea * (1.0 - vv) * ru.w[iu] * rv.w[iv], chunk);
    }
  }
  return chunk;
}

}  // namespace

Eigen::Matrix<double, 6, 6> pairIntegral(const Triangle& K, const Triangle& Kt,
                                         const std::array<int, 3>& locK,
                                         const std::array<int, 3>& locKt,
                                         int unionSize, double s,
                                         const OracleSettings& acc) {
  if (unionSize < 3 || unionSize > 6) {
    throw std::invalid_argument("pairIntegral: unionSize out of range");
  }
  PairInner inner;
  inner.nU = unionSize;
  inner.s = s;
  inner.identical = unionSize == 3;
  inner.Tt = Kt;
  orientCcw(inner.Tt);
  inner.scale = triangleDiameter(Kt);
  inner.thetaDepth = acc.thetaDepth;
  inner.thetaRule = gaussLegendre01(12);
  for (int a = 0; a < unionSize; ++a) {
    inner.onK[a] = affineFromNodal(K, locK[0] == a ? 1.0 : 0.0,
                                   locK[1] == a ? 1.0 : 0.0,
                                   locK[2] == a ? 1.0 : 0.0);
    inner.onKt[a] = affineFromNodal(Kt, locKt[0] == a ? 1.0 : 0.0,
                                    locKt[1] == a ? 1.0 : 0.0,
                                    locKt[2] == a ? 1.0 : 0.0);
  }
  auto body = [&](Vec2 x, double w, Matrix6& M) { inner.eval(x, w, M); };

  const Rule1D ru = gaussLegendre01(acc.outerOrder);
  const Rule1D rv = gaussLegendre01(acc.innerOrder);
  const int depth = acc.depth;

  bool inKt[6] = {false, false, false, false, false, false};
  for (int j = 0; j < 3; ++j) inKt[locKt[j]] = true;
  int sharedIdx[3], otherIdx[3], nShared = 0, nOther = 0;
  for (int i = 0; i < 3; ++i) {
    if (inKt[locK[i]]) {
      sharedIdx[nShared++] = i;
    } else {
      otherIdx[nOther++] = i;
    }
  }

  if (unionSize == 3) {
    const Vec2 G = (1.0 / 3.0) * (K[0] + K[1] + K[2]);
    Matrix6 M = Matrix6::Zero();
    for (int e = 0; e < 3; ++e) {
      M += edgeGradedOuter<Matrix6>(K[e], K[(e + 1) % 3], G, depth, ru, rv,
                                    body);
    }
    return M;
  }
  if (nShared == 2) {
    return edgeGradedOuter<Matrix6>(K[sharedIdx[0]], K[sharedIdx[1]],
                                    K[otherIdx[0]], depth, ru, rv, body);
  }
  if (nShared == 1) {
    return vertexGradedOuter<Matrix6>(K[sharedIdx[0]], K[otherIdx[0]],
                                      K[otherIdx[1]], depth, ru, rv, body);
  }
  return plainOuter<Matrix6>(K[0], K[1], K[2], gaussLegendre01(24),
                             gaussLegendre01(24), body);
}

Eigen::Matrix3d elementEdgeIntegral(const Triangle& K, Vec2 e0, Vec2 e1,
                                    double s, const OracleSettings& acc) {
  const Vec2 t = e1 - e0;
  const double L = norm(t);
  if (!(L > 0.0)) throw std::invalid_argument("degenerate edge");
  const Vec2 that = (1.0 / L) * t;
  const Vec2 n{-that.y, that.x};
  const double scale = std::max(L, triangleDiameter(K));
  const Rule1D phiRule = gaussLegendre01(12);

  std::array<Affine, 3> lam;
  for (int a = 0; a < 3; ++a) {
    lam[a] = affineFromNodal(K, a == 0 ? 1.0 : 0.0, a == 1 ? 1.0 : 0.0,
                             a == 2 ? 1.0 : 0.0);
  }

  auto innerLine = [&](Vec2 x) -> double {
    const double del = dot(n, x - e0);
    const double ad = std::fabs(del);
    if (ad < 1e-14 * scale) return 0.0;
    const double p = dot(that, x - e0);
    const double phi0 = std::atan((p - L) / ad);
    const double phi1 = std::atan(p / ad);
    double I = 0.0;
    gradedInterval(phi0, phi1, 9, phiRule, [&](double ph, double w) {
      I += w * std::pow(std::cos(ph), 2.0 * s);
    });
    return (del > 0.0 ? 1.0 : -1.0) * std::pow(ad, -2.0 * s) * I;
  };

  auto body = [&](Vec2 x, double w, Eigen::Matrix3d& M) {
    const double inn = innerLine(x);
    if (inn == 0.0) return;
    double lv[3];
    for (int a = 0; a < 3; ++a) lv[a] = lam[a].at(x);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) M(a, b) += w * inn * lv[a] * lv[b];
    }
  };

  auto samePoint = [&](Vec2 a, Vec2 b) {
    return std::fabs(a.x - b.x) < 1e-12 * scale &&
           std::fabs(a.y - b.y) < 1e-12 * scale;
  };
  int at0 = -1, at1 = -1;
  for (int i = 0; i < 3; ++i) {
    if (samePoint(K[i], e0)) at0 = i;
    if (samePoint(K[i], e1)) at1 = i;
  }

  const Rule1D ru = gaussLegendre01(acc.outerOrder);
  const Rule1D rv = gaussLegendre01(acc.innerOrder);
  const int depth = acc.depth;
  if (at0 >= 0 && at1 >= 0) {
    const int other = 3 - at0 - at1;
    return edgeGradedOuter<Eigen::Matrix3d>(K[at0], K[at1], K[other], depth,
                                            ru, rv, body);
  }
  if (at0 >= 0 || at1 >= 0) {
    const int shared = at0 >= 0 ? at0 : at1;
    return vertexGradedOuter<Eigen::Matrix3d>(K[shared], K[(shared + 1) % 3],
                                              K[(shared + 2) % 3], depth, ru,
                                              rv, body);
  }
  return plainOuter<Eigen::Matrix3d>(K[0], K[1], K[2], gaussLegendre01(24),
                                     gaussLegendre01(24), body);
}

}  // namespace oracle
}  // namespace fractfem
