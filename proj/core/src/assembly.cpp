#include "fractfem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "fractfem/duffy.hpp"
#include "fractfem/gammafn.hpp"
#include "fractfem/parallel.hpp"

namespace fractfem {

BilinearParams makeBilinearParams(double s, int d) {
  BilinearParams p;
  p.s = s;
  p.d = d;
  p.Cds = fracLaplaceNormalization(d, s);
  return p;
}

namespace {

int pointsFor(int order) { return (order + 2) / 2; }

struct PairQuadPoint {
  double psi[6];
  double phi[3];
  double w;
};

struct PairRule {
  int unionSize = 0;
  std::vector<PairQuadPoint> pts;
};

// Element-element touching rules. The radial coordinates with fractional
// Jacobian powers integrate to explicit moments; only the coordinates the
// shape tables depend on carry Gauss points.
PairRule makeElementElementRule(int c, double s, int order) {
  const DuffyTables tab = duffyTables(PairKind::ElementElement, c, s);
  const int n = pointsFor(order);
  const Rule1D gl = gaussLegendre01(n);
  PairRule rule;
  rule.unionSize = tab.unionSize();
  const double m4 = 1.0 / (4.0 - 2.0 * s);
  const double m3 = 1.0 / (3.0 - 2.0 * s);
  const double m2 = 1.0 / (2.0 - 2.0 * s);
  std::array<double, 4> eta = {0.0, 0.0, 0.0, 0.0};
  if (c == 3) {
    // Factor 2: the three identical-element terms cover half the product
    // domain, the other half follows by symmetry of the integrand.
    const double mom = 2.0 * m4 * m3 * m2;
    for (int l = 0; l < 3; ++l)
      for (int q = 0; q < n; ++q) {
        PairQuadPoint p{};
        eta = {0.0, 0.0, 0.0, gl.x[q]};
        tab.psiBar(l, eta, p.psi);
        p.w = mom * gl.w[q];
        rule.pts.push_back(p);
      }
  } else if (c == 2) {
    const double mom = m4 * m3;
    for (int l = 0; l < 5; ++l)
      for (int q2 = 0; q2 < n; ++q2)
        for (int q3 = 0; q3 < n; ++q3) {
          PairQuadPoint p{};
          eta = {0.0, 0.0, gl.x[q2], gl.x[q3]};
          tab.psiBar(l, eta, p.psi);
          p.w = mom * gl.w[q2] * gl.w[q3];
          if (l > 0) p.w *= gl.x[q2];
          rule.pts.push_back(p);
        }
  } else {
    for (int l = 0; l < 2; ++l)
      for (int q1 = 0; q1 < n; ++q1)
        for (int q2 = 0; q2 < n; ++q2)
          for (int q3 = 0; q3 < n; ++q3) {
            PairQuadPoint p{};
            eta = {0.0, gl.x[q1], gl.x[q2], gl.x[q3]};
            tab.psiBar(l, eta, p.psi);
            p.w = m4 * gl.w[q1] * gl.w[q2] * gl.w[q3] * gl.x[q2];
            rule.pts.push_back(p);
          }
  }
  return rule;
}

// Element-edge touching rules. The eta0 direction enters the shape values
// polynomially (degree <= 2 in products), so a 3-point rule matching the
// fractional weight is exact there.
PairRule makeElementEdgeRule(int c, double s, int order, bool interiorOnly) {
  const DuffyTables tab = duffyTables(PairKind::ElementEdge, c, s, interiorOnly);
  const int n = pointsFor(order);
  const Rule1D gl = gaussLegendre01(n);
  const Rule1D glSmall = gaussLegendre01(3);
  PairRule rule;
  rule.unionSize = tab.unionSize();
  std::array<double, 4> eta = {0.0, 0.0, 0.0, 0.0};
  if (c == 2) {
    if (interiorOnly) {
      const double mom = 1.0 / (3.0 - 2.0 * s) - 1.0 / (4.0 - 2.0 * s);
      for (int l = 0; l < 3; ++l)
        for (int q1 = 0; q1 < n; ++q1) {
          PairQuadPoint p{};
          eta = {0.0, gl.x[q1], 0.0, 0.0};
          tab.psiBar(l, eta, p.psi);
          tab.phi(l, eta, p.phi);
          p.w = mom * gl.w[q1];
          rule.pts.push_back(p);
        }
    } else {
      const Rule1D jac = gaussJacobi01(3, 1.0, -2.0 * s);
      for (int l = 0; l < 3; ++l)
        for (int q0 = 0; q0 < 3; ++q0)
          for (int q1 = 0; q1 < n; ++q1)
            for (int q2 = 0; q2 < 3; ++q2) {
              PairQuadPoint p{};
              eta = {jac.x[q0], gl.x[q1], glSmall.x[q2], 0.0};
              tab.psiBar(l, eta, p.psi);
              tab.phi(l, eta, p.phi);
              p.w = jac.w[q0] * gl.w[q1] * glSmall.w[q2];
              rule.pts.push_back(p);
            }
    }
  } else {
    const Rule1D jac = gaussJacobi01(3, 0.0, 1.0 - 2.0 * s);
    for (int l = 0; l < 2; ++l)
      for (int q0 = 0; q0 < 3; ++q0)
        for (int q1 = 0; q1 < n; ++q1)
          for (int q2 = 0; q2 < n; ++q2) {
            PairQuadPoint p{};
            eta = {jac.x[q0], gl.x[q1], gl.x[q2], 0.0};
            tab.psiBar(l, eta, p.psi);
            tab.phi(l, eta, p.phi);
            p.w = jac.w[q0] * gl.w[q1] * gl.w[q2];
            if (l == 1) p.w *= gl.x[q1];
            rule.pts.push_back(p);
          }
  }
  return rule;
}

}  // namespace

struct PairAssembler::Rules {
  PairRule ee[3];        // shared-vertex count c at index c-1
  PairRule edge[2];
  std::vector<TriangleRule> tri;   // by order, 1-based
  std::vector<Rule1D> line;
  double expo = 0.0;               // -(1+s)
};

PairAssembler::PairAssembler(const BilinearParams& params, const OrderPlan& plan,
                             bool boundaryDofsActive)
    : params_(params), plan_(plan), rules_(new Rules) {
  const double s = params.s;
  rules_->expo = -(1.0 + s);
  for (int c = 1; c <= 3; ++c)
    rules_->ee[c - 1] = makeElementElementRule(c, s, plan.kT);
  // With boundary vertices excluded from the DoF set (s >= 1/2), only the
  // interior entry of the edge-of-element table is integrable and needed.
  const bool interiorOnly = s >= 0.5;
  (void)boundaryDofsActive;
  rules_->edge[1] = makeElementEdgeRule(2, s, plan.kTboundary, interiorOnly);
  rules_->edge[0] = makeElementEdgeRule(1, s, plan.kTboundary, false);
  rules_->tri.resize(plan.maxOrder + 1);
  rules_->line.resize(plan.maxOrder + 1);
  for (int k = 1; k <= plan.maxOrder; ++k) {
    rules_->tri[k] = simplexGauss(k);
    rules_->line[k] = gaussLegendre01(pointsFor(k));
  }
}

PairAssembler::~PairAssembler() = default;

namespace {

void accumulateDifferenceForm(const PairRule& rule, const Vec2* X, double expo,
                              Eigen::Matrix<double, 6, 6>& out) {
  const int m = rule.unionSize;
  for (const PairQuadPoint& p : rule.pts) {
    double sx = 0.0, sy = 0.0;
    for (int k = 0; k < m; ++k) {
      sx += p.psi[k] * X[k].x;
      sy += p.psi[k] * X[k].y;
    }
    const double val = p.w * std::pow(sx * sx + sy * sy, expo);
    for (int i = 0; i < m; ++i) {
      const double vi = val * p.psi[i];
      for (int j = i; j < m; ++j) out(i, j) += vi * p.psi[j];
    }
  }
}

double maxVertexRadius(const Triangle& T, const Vec2& c) {
  return std::max({dist(T[0], c), dist(T[1], c), dist(T[2], c)});
}

}  // namespace

PairLocal PairAssembler::pairIndexed(const Triangle& K,
                                     const std::array<int, 3>& gK,
                                     const Triangle& Kt,
                                     const std::array<int, 3>& gKt) const {
  PairLocal res;
  int sharedA[3], sharedB[3], nShared = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (gK[a] == gKt[b]) {
        sharedA[nShared] = a;
        sharedB[nShared] = b;
        ++nShared;
      }
  res.shared = nShared;
  Vec2 X[6];

  if (nShared == 3) {
    res.unionSize = 3;
    for (int a = 0; a < 3; ++a) {
      res.locK[a] = a;
      X[a] = K[a];
    }
    for (int k = 0; k < 3; ++k) res.locKt[sharedB[k]] = sharedA[k];
  } else if (nShared == 2) {
    res.unionSize = 4;
    res.locK[sharedA[0]] = 0;
    res.locK[sharedA[1]] = 1;
    res.locKt[sharedB[0]] = 0;
    res.locKt[sharedB[1]] = 1;
    const int aFree = 3 - sharedA[0] - sharedA[1];
    const int bFree = 3 - sharedB[0] - sharedB[1];
    res.locK[aFree] = 2;
    res.locKt[bFree] = 3;
    X[0] = K[sharedA[0]];
    X[1] = K[sharedA[1]];
    X[2] = K[aFree];
    X[3] = Kt[bFree];
  } else if (nShared == 1) {
    res.unionSize = 5;
    res.locK[sharedA[0]] = 0;
    res.locKt[sharedB[0]] = 0;
    int slot = 1;
    for (int a = 0; a < 3; ++a)
      if (a != sharedA[0]) {
        res.locK[a] = slot;
        X[slot] = K[a];
        ++slot;
      }
    slot = 3;
    for (int b = 0; b < 3; ++b)
      if (b != sharedB[0]) {
        res.locKt[b] = slot;
        X[slot] = Kt[b];
        ++slot;
      }
    X[0] = K[sharedA[0]];
  } else {
    res.unionSize = 6;
    for (int a = 0; a < 3; ++a) {
      res.locK[a] = a;
      res.locKt[a] = 3 + a;
      X[a] = K[a];
      X[3 + a] = Kt[a];
    }
  }

  const double scale =
      2.0 * params_.Cds * triangleArea(K) * triangleArea(Kt);

  if (nShared > 0) {
    accumulateDifferenceForm(rules_->ee[nShared - 1], X, rules_->expo, res.a);
  } else {
    // Separated pair: tensor simplex Gauss with a distance-driven order.
    const Vec2 cK = (K[0] + K[1] + K[2]) * (1.0 / 3.0);
    const Vec2 cKt = (Kt[0] + Kt[1] + Kt[2]) * (1.0 / 3.0);
    const double lower =
        dist(cK, cKt) - maxVertexRadius(K, cK) - maxVertexRadius(Kt, cKt);
    int order;
    if (lower >= plan_.cutoffD)
      order = plan_.farOrder;
    else
      order = plan_.kNT(triangleDistance(K, Kt));
    const TriangleRule& tr = rules_->tri[order];
    const int nq = static_cast<int>(tr.nodes.size());
    // Mapped nodes and barycentric values for both elements.
    double lx[3][256], px[256], py[256], qx[256], qy[256], ly[3][256];
    for (int q = 0; q < nq; ++q) {
      const double u = tr.nodes[q].x, v = tr.nodes[q].y;
      px[q] = K[0].x + u * (K[1].x - K[0].x) + v * (K[2].x - K[0].x);
      py[q] = K[0].y + u * (K[1].y - K[0].y) + v * (K[2].y - K[0].y);
      qx[q] = Kt[0].x + u * (Kt[1].x - Kt[0].x) + v * (Kt[2].x - Kt[0].x);
      qy[q] = Kt[0].y + u * (Kt[1].y - Kt[0].y) + v * (Kt[2].y - Kt[0].y);
      lx[0][q] = ly[0][q] = 1.0 - u - v;
      lx[1][q] = ly[1][q] = u;
      lx[2][q] = ly[2][q] = v;
    }
    const double expo = rules_->expo;
    double psi[6];
    for (int a = 0; a < nq; ++a) {
      for (int b = 0; b < nq; ++b) {
        const double dx = px[a] - qx[b];
        const double dy = py[a] - qy[b];
        const double val =
            tr.weights[a] * tr.weights[b] * std::pow(dx * dx + dy * dy, expo);
        psi[0] = lx[0][a];
        psi[1] = lx[1][a];
        psi[2] = lx[2][a];
        psi[3] = -ly[0][b];
        psi[4] = -ly[1][b];
        psi[5] = -ly[2][b];
        for (int i = 0; i < 6; ++i) {
          const double vi = val * psi[i];
          for (int j = i; j < 6; ++j) res.a(i, j) += vi * psi[j];
        }
      }
    }
  }

  for (int i = 0; i < res.unionSize; ++i) {
    res.a(i, i) *= scale;
    for (int j = i + 1; j < res.unionSize; ++j) {
      res.a(i, j) *= scale;
      res.a(j, i) = res.a(i, j);
    }
  }
  return res;
}

PairLocal PairAssembler::pair(const Triangle& K, const Triangle& Kt) const {
  // Synthesize vertex ids from coordinate equality.
  std::array<int, 3> gK = {0, 1, 2};
  std::array<int, 3> gKt;
  int nextId = 3;
  for (int b = 0; b < 3; ++b) {
    gKt[b] = nextId;
    for (int a = 0; a < 3; ++a)
      if (Kt[b].x == K[a].x && Kt[b].y == K[a].y) {
        gKt[b] = a;
        break;
      }
    if (gKt[b] == nextId) ++nextId;
  }
  return pairIndexed(K, gK, Kt, gKt);
}

Eigen::Matrix3d PairAssembler::boundary(const Triangle& K, const Vec2& e0,
                                        const Vec2& e1) const {
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  const Vec2 t = e1 - e0;
  const double len = norm(t);
  if (len <= 0.0) throw std::invalid_argument("degenerate boundary edge");
  const Vec2 nrm{-t.y / len, t.x / len};  // domain lies left of e0->e1

  int matchK[3];  // union slot of each K vertex, -1 pending
  int nShared = 0;
  int eSlotOfVertex[2] = {-1, -1};
  for (int a = 0; a < 3; ++a) {
    matchK[a] = -1;
    if (K[a].x == e0.x && K[a].y == e0.y) {
      matchK[a] = 0;
      eSlotOfVertex[0] = a;
      ++nShared;
    } else if (K[a].x == e1.x && K[a].y == e1.y) {
      matchK[a] = 1;
      eSlotOfVertex[1] = a;
      ++nShared;
    }
  }

  const double scale = params_.Cds * triangleArea(K) * len / params_.s;
  const double expo = rules_->expo;

  if (nShared == 2) {
    // e is an edge of K; union = K's vertices with the edge first.
    Vec2 X[3];
    int loc[3];
    for (int a = 0; a < 3; ++a) {
      loc[a] = (matchK[a] >= 0) ? matchK[a] : 2;
      X[loc[a]] = K[a];
    }
    const PairRule& rule = rules_->edge[1];
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (const PairQuadPoint& p : rule.pts) {
      double sx = 0.0, sy = 0.0;
      for (int k = 0; k < 3; ++k) {
        sx += p.psi[k] * X[k].x;
        sy += p.psi[k] * X[k].y;
      }
      const double g = nrm.x * sx + nrm.y * sy;
      const double val = p.w * g * std::pow(sx * sx + sy * sy, expo);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) M(i, j) += val * p.phi[i] * p.phi[j];
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int i = std::min(loc[a], loc[b]);
        const int j = std::max(loc[a], loc[b]);
        out(a, b) = scale * M(i, j);
      }
    return out;
  }

  if (nShared == 1) {
    // Union: shared vertex, K's other two, e's far endpoint.
    const int aShared = (eSlotOfVertex[0] >= 0) ? eSlotOfVertex[0]
                                                : eSlotOfVertex[1];
    const Vec2 eFar = (eSlotOfVertex[0] >= 0) ? e1 : e0;
    Vec2 X[4];
    int loc[3];
    X[0] = K[aShared];
    loc[aShared] = 0;
    int slot = 1;
    for (int a = 0; a < 3; ++a)
      if (a != aShared) {
        loc[a] = slot;
        X[slot] = K[a];
        ++slot;
      }
    X[3] = eFar;
    const PairRule& rule = rules_->edge[0];
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (const PairQuadPoint& p : rule.pts) {
      double sx = 0.0, sy = 0.0;
      for (int k = 0; k < 4; ++k) {
        sx += p.psi[k] * X[k].x;
        sy += p.psi[k] * X[k].y;
      }
      const double g = nrm.x * sx + nrm.y * sy;
      const double val = p.w * g * std::pow(sx * sx + sy * sy, expo);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) M(i, j) += val * p.phi[i] * p.phi[j];
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int i = std::min(loc[a], loc[b]);
        const int j = std::max(loc[a], loc[b]);
        out(a, b) = scale * M(i, j);
      }
    return out;
  }

  // Separated element and edge.
  const double d = triangleSegmentDistance(K, e0, e1);
  const int order = plan_.kNTboundary(d);
  const TriangleRule& tr = rules_->tri[order];
  const Rule1D& lr = rules_->line[order];
  for (size_t a = 0; a < tr.nodes.size(); ++a) {
    const double u = tr.nodes[a].x, v = tr.nodes[a].y;
    const Vec2 x{K[0].x + u * (K[1].x - K[0].x) + v * (K[2].x - K[0].x),
                 K[0].y + u * (K[1].y - K[0].y) + v * (K[2].y - K[0].y)};
    const double lam[3] = {1.0 - u - v, u, v};
    for (size_t b = 0; b < lr.x.size(); ++b) {
      const Vec2 y{e0.x + lr.x[b] * t.x, e0.y + lr.x[b] * t.y};
      const double dx = x.x - y.x, dy = x.y - y.y;
      const double g = nrm.x * dx + nrm.y * dy;
      const double val = tr.weights[a] * lr.w[b] * g *
                         std::pow(dx * dx + dy * dy, expo);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) out(i, j) += val * lam[i] * lam[j];
    }
  }
  out *= scale;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

namespace {

struct Triple {
  int i, j;
  double v;
};

struct TriData {
  Triangle coords;
  std::array<int, 3> verts;
  std::array<int, 3> dofs;
};

}  // namespace

Eigen::MatrixXd assembleDense(const TriangleMesh& mesh, const DofMap& dofs,
                              const BilinearParams& params,
                              const OrderPlan& plan,
                              const AssembleOptions& opts) {
  const int n = dofs.n;
  if (n > opts.denseCap)
    throw std::runtime_error("assembleDense: problem size exceeds dense cap");
  const int nt = static_cast<int>(mesh.triangles.size());

  std::vector<TriData> tris(nt);
  for (int t = 0; t < nt; ++t) {
    tris[t].coords = mesh.triangleCoords(t);
    tris[t].verts = mesh.triangles[t];
    for (int a = 0; a < 3; ++a)
      tris[t].dofs[a] = dofs.dofOfVertex[mesh.triangles[t][a]];
  }

  PairAssembler pa(params, plan, dofs.boundaryIncluded);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);

  auto computeRow = [&](int t1, std::vector<Triple>& buf) {
    const TriData& T1 = tris[t1];
    for (int t2 = t1; t2 < nt; ++t2) {
      const TriData& T2 = tris[t2];
      PairLocal blk = pa.pairIndexed(T1.coords, T1.verts, T2.coords, T2.verts);
      const double f = (t1 == t2) ? 1.0 : 2.0;
      int ug[6];
      for (int k = 0; k < 3; ++k) {
        ug[blk.locK[k]] = T1.dofs[k];
        ug[blk.locKt[k]] = T2.dofs[k];
      }
      for (int p = 0; p < blk.unionSize; ++p) {
        if (ug[p] < 0) continue;
        for (int q = 0; q < blk.unionSize; ++q) {
          if (ug[q] < 0) continue;
          buf.push_back({ug[p], ug[q], f * blk.a(p, q)});
        }
      }
    }
  };

  if (opts.threads <= 1) {
    std::vector<Triple> buf;
    for (int t1 = 0; t1 < nt; ++t1) {
      buf.clear();
      computeRow(t1, buf);
      for (const Triple& tr : buf) A(tr.i, tr.j) += tr.v;
    }
  } else {
    orderedChunkReduce<std::vector<Triple>>(
        nt, opts.threads,
        [&](int t1, std::vector<Triple>& buf) { computeRow(t1, buf); },
        [&](std::vector<Triple>& buf) {
          for (const Triple& tr : buf) A(tr.i, tr.j) += tr.v;
        });
  }

  if (opts.includeBoundaryTerm && !mesh.boundaryEdges.empty()) {
    const int nb = static_cast<int>(mesh.boundaryEdges.size());
    auto computeBoundaryRow = [&](int t, std::vector<Triple>& buf) {
      const TriData& T = tris[t];
      for (int e = 0; e < nb; ++e) {
        const Vec2 p0 = mesh.vertices[mesh.boundaryEdges[e][0]];
        const Vec2 p1 = mesh.vertices[mesh.boundaryEdges[e][1]];
        const Eigen::Matrix3d B = pa.boundary(T.coords, p0, p1);
        for (int a = 0; a < 3; ++a) {
          if (T.dofs[a] < 0) continue;
          for (int b = 0; b < 3; ++b) {
            if (T.dofs[b] < 0) continue;
            buf.push_back({T.dofs[a], T.dofs[b], B(a, b)});
          }
        }
      }
    };
    if (opts.threads <= 1) {
      std::vector<Triple> buf;
      for (int t = 0; t < nt; ++t) {
        buf.clear();
        computeBoundaryRow(t, buf);
        for (const Triple& tr : buf) A(tr.i, tr.j) += tr.v;
      }
    } else {
      orderedChunkReduce<std::vector<Triple>>(
          nt, opts.threads,
          [&](int t, std::vector<Triple>& buf) { computeBoundaryRow(t, buf); },
          [&](std::vector<Triple>& buf) {
            for (const Triple& tr : buf) A(tr.i, tr.j) += tr.v;
          });
    }
  }

  return A;
}

Eigen::SparseMatrix<double> assembleMass(const TriangleMesh& mesh,
                                         const DofMap& dofs) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.triangles.size() * 9);
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double area = triangleArea(mesh.triangleCoords(t));
    for (int a = 0; a < 3; ++a) {
      const int i = dofs.dofOfVertex[mesh.triangles[t][a]];
      if (i < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int j = dofs.dofOfVertex[mesh.triangles[t][b]];
        if (j < 0) continue;
        trips.emplace_back(i, j, area / (a == b ? 6.0 : 12.0));
      }
    }
  }
  Eigen::SparseMatrix<double> M(dofs.n, dofs.n);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

Eigen::VectorXd lumpedMass(const TriangleMesh& mesh, const DofMap& dofs) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dofs.n);
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double third = triangleArea(mesh.triangleCoords(t)) / 3.0;
    for (int a = 0; a < 3; ++a) {
      const int i = dofs.dofOfVertex[mesh.triangles[t][a]];
      if (i >= 0) m[i] += third;
    }
  }
  return m;
}

Eigen::VectorXd assembleLoad(const TriangleMesh& mesh, const DofMap& dofs,
                             const std::function<double(Vec2)>& f, int order) {
  const TriangleRule rule = simplexGauss(order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dofs.n);
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Triangle K = mesh.triangleCoords(t);
    const double twoArea = 2.0 * triangleArea(K);
    for (size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = rule.nodes[q].x, v = rule.nodes[q].y;
      const Vec2 x{K[0].x + u * (K[1].x - K[0].x) + v * (K[2].x - K[0].x),
                   K[0].y + u * (K[1].y - K[0].y) + v * (K[2].y - K[0].y)};
      const double wf = twoArea * rule.weights[q] * f(x);
      const double lam[3] = {1.0 - u - v, u, v};
      for (int a = 0; a < 3; ++a) {
        const int i = dofs.dofOfVertex[mesh.triangles[t][a]];
        if (i >= 0) b[i] += wf * lam[a];
      }
    }
  }
  return b;
}

Eigen::VectorXd assembleLoadFromInterpolant(
    const LinearOperator& fineOp, const Eigen::VectorXd& fineInterpolant,
    const std::vector<const Prolongation*>& chain) {
  if (fineInterpolant.size() != fineOp.size())
    throw std::invalid_argument(
        "assembleLoadFromInterpolant: interpolant size mismatch");
  Eigen::VectorXd y(fineOp.size());
  fineOp.apply(fineInterpolant, y);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    if ((*it)->nFine != y.size())
      throw std::invalid_argument(
          "assembleLoadFromInterpolant: prolongation chain mismatch");
    Eigen::VectorXd coarse((*it)->nCoarse);
    (*it)->applyTranspose(y.data(), coarse.data());
    y = std::move(coarse);
  }
  return y;
}

namespace {

void writeOneTriplet(std::ostream& os, int i, int j, double v) {
  char line[64];
  std::snprintf(line, sizeof(line), "%d %d %.17g\n", i, j, v);
  os << line;
}

}  // namespace

void writeTriplets(std::ostream& os, const Eigen::MatrixXd& A, double dropTol) {
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (std::abs(A(i, j)) > dropTol) writeOneTriplet(os, i, j, A(i, j));
}

void writeTriplets(std::ostream& os, const Eigen::SparseMatrix<double>& A) {
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      writeOneTriplet(os, static_cast<int>(it.row()),
                      static_cast<int>(it.col()), it.value());
}

}  // namespace fractfem
