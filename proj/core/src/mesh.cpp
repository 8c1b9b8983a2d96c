#include "fractfem/mesh.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fractfem {

double pointSegmentDistance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double den = sqNorm(ab);
  double t = den > 0.0 ? dot(p - a, ab) / den : 0.0;
  t = std::max(0.0, std::min(1.0, t));
  return dist(p, a + t * ab);
}

double pointTriangleDistance(const Vec2& p, const Triangle& t) {
  double d = pointSegmentDistance(p, t[0], t[1]);
  d = std::min(d, pointSegmentDistance(p, t[1], t[2]));
  d = std::min(d, pointSegmentDistance(p, t[2], t[0]));
  return d;
}

namespace {

bool segmentsIntersect(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                       const Vec2& b1) {
  const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = cross(q - p, r - p);
    if (v > 0.0) return 1;
    if (v < 0.0) return -1;
    return 0;
  };
  const int o1 = orient(a0, a1, b0);
  const int o2 = orient(a0, a1, b1);
  const int o3 = orient(b0, b1, a0);
  const int o4 = orient(b0, b1, a1);
  return o1 != o2 && o3 != o4;
}

}  // namespace

double segmentDistance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                       const Vec2& b1) {
  if (segmentsIntersect(a0, a1, b0, b1)) return 0.0;
  double d = pointSegmentDistance(a0, b0, b1);
  d = std::min(d, pointSegmentDistance(a1, b0, b1));
  d = std::min(d, pointSegmentDistance(b0, a0, a1));
  d = std::min(d, pointSegmentDistance(b1, a0, a1));
  return d;
}

double triangleDistance(const Triangle& a, const Triangle& b) {
  double d = std::numeric_limits<double>::max();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      d = std::min(d, segmentDistance(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]));
    }
  }
  return d;
}

double triangleSegmentDistance(const Triangle& a, const Vec2& b0, const Vec2& b1) {
  double d = std::numeric_limits<double>::max();
  for (int i = 0; i < 3; ++i) {
    d = std::min(d, segmentDistance(a[i], a[(i + 1) % 3], b0, b1));
  }
  return d;
}

TriangleMesh buildDiskMesh(int level) {
  if (level < 0) throw std::invalid_argument("buildDiskMesh: level must be >= 0");
  TriangleMesh mesh;
  mesh.projectToUnitCircle = true;
  mesh.vertices = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}};
  mesh.boundaryEdges = {{1, 2}, {2, 3}, {3, 4}, {4, 1}};
  mesh.level = 0;
  for (int l = 0; l < level; ++l) mesh = refineUniform(mesh);
  return mesh;
}

TriangleMesh refineUniform(const TriangleMesh& mesh) {
  TriangleMesh fine;
  fine.projectToUnitCircle = mesh.projectToUnitCircle;
  fine.level = mesh.level + 1;
  fine.vertices = mesh.vertices;
  fine.parentVertices.reserve(mesh.vertices.size());
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
    fine.parentVertices.push_back({v, v});
  }

  std::map<std::pair<int, int>, bool> boundarySet;
  for (const auto& e : mesh.boundaryEdges) {
    boundarySet[{std::min(e[0], e[1]), std::max(e[0], e[1])}] = true;
  }

  // Midpoints are created on first encounter while scanning triangles in
  // order, which keeps the vertex numbering deterministic.
  std::map<std::pair<int, int>, int> midpointOf;
  const auto midpoint = [&](int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = midpointOf.find(key);
    if (it != midpointOf.end()) return it->second;
    Vec2 m = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    if (mesh.projectToUnitCircle && boundarySet.count(key)) {
      const double r = norm(m);
      m = (1.0 / r) * m;
    }
    const int idx = static_cast<int>(fine.vertices.size());
    fine.vertices.push_back(m);
    fine.parentVertices.push_back({key.first, key.second});
    midpointOf.emplace(key, idx);
    return idx;
  };

  fine.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    const int v0 = tri[0], v1 = tri[1], v2 = tri[2];
    const int m01 = midpoint(v0, v1);
    const int m12 = midpoint(v1, v2);
    const int m02 = midpoint(v0, v2);
    fine.triangles.push_back({v0, m01, m02});
    fine.triangles.push_back({m01, v1, m12});
    fine.triangles.push_back({m02, m12, v2});
    fine.triangles.push_back({m01, m12, m02});
  }

  fine.boundaryEdges.reserve(2 * mesh.boundaryEdges.size());
  for (const auto& e : mesh.boundaryEdges) {
    const int m = midpoint(e[0], e[1]);
    fine.boundaryEdges.push_back({e[0], m});
    fine.boundaryEdges.push_back({m, e[1]});
  }
  return fine;
}

void validateMesh(const TriangleMesh& mesh) {
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv) {
        throw std::runtime_error("validateMesh: triangle vertex index out of range");
      }
    }
    const Vec2 a = mesh.vertices[tri[0]];
    const Vec2 b = mesh.vertices[tri[1]];
    const Vec2 c = mesh.vertices[tri[2]];
    if (cross(b - a, c - a) <= 0.0) {
      throw std::runtime_error("validateMesh: triangle with non-positive area");
    }
  }
  std::map<std::pair<int, int>, int> edgeCount;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      edgeCount[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  std::map<std::pair<int, int>, int> boundary;
  for (const auto& e : mesh.boundaryEdges) {
    boundary[{std::min(e[0], e[1]), std::max(e[0], e[1])}]++;
  }
  for (const auto& [edge, count] : edgeCount) {
    if (count > 2) throw std::runtime_error("validateMesh: edge shared by > 2 triangles");
    const bool onBoundary = boundary.count(edge) > 0;
    if (count == 1 && !onBoundary) {
      throw std::runtime_error("validateMesh: single-triangle edge missing from boundary list");
    }
    if (count == 2 && onBoundary) {
      throw std::runtime_error("validateMesh: interior edge listed as boundary");
    }
  }
  for (const auto& [edge, count] : boundary) {
    if (count != 1) throw std::runtime_error("validateMesh: duplicate boundary edge");
    auto it = edgeCount.find(edge);
    if (it == edgeCount.end() || it->second != 1) {
      throw std::runtime_error("validateMesh: boundary edge not matching exactly one triangle");
    }
  }
}

void saveMesh(const TriangleMesh& mesh, std::ostream& out) {
  out << "vertices " << mesh.vertices.size() << " triangles "
      << mesh.triangles.size() << " boundary " << mesh.boundaryEdges.size()
      << "\n";
  char buf[80];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x, v.y);
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  for (const auto& e : mesh.boundaryEdges) {
    out << e[0] << ' ' << e[1] << '\n';
  }
}

TriangleMesh loadMesh(std::istream& in) {
  std::string kw;
  std::size_t nv = 0, nt = 0, nb = 0;
  in >> kw >> nv;
  if (kw != "vertices") throw std::runtime_error("loadMesh: expected 'vertices'");
  in >> kw >> nt;
  if (kw != "triangles") throw std::runtime_error("loadMesh: expected 'triangles'");
  in >> kw >> nb;
  if (kw != "boundary") throw std::runtime_error("loadMesh: expected 'boundary'");
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) in >> v.x >> v.y;
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) in >> t[0] >> t[1] >> t[2];
  mesh.boundaryEdges.resize(nb);
  for (auto& e : mesh.boundaryEdges) in >> e[0] >> e[1];
  if (!in) throw std::runtime_error("loadMesh: truncated or malformed mesh file");
  validateMesh(mesh);
  return mesh;
}

void saveMeshFile(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("saveMeshFile: cannot open " + path);
  saveMesh(mesh, out);
}

TriangleMesh loadMeshFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("loadMeshFile: cannot open " + path);
  return loadMesh(in);
}

double maxElementDiameter(const TriangleMesh& mesh) {
  double h = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    h = std::max(h, triangleDiameter(mesh.triangleCoords(static_cast<int>(t))));
  }
  return h;
}

double minElementDiameter(const TriangleMesh& mesh) {
  double h = std::numeric_limits<double>::max();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    h = std::min(h, triangleDiameter(mesh.triangleCoords(static_cast<int>(t))));
  }
  return h;
}

std::vector<bool> boundaryVertexFlags(const TriangleMesh& mesh) {
  std::vector<bool> flags(mesh.vertices.size(), false);
  for (const auto& e : mesh.boundaryEdges) {
    flags[e[0]] = true;
    flags[e[1]] = true;
  }
  return flags;
}

std::vector<std::vector<int>> vertexStars(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> stars(mesh.vertices.size());
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    for (int k = 0; k < 3; ++k) stars[mesh.triangles[t][k]].push_back(t);
  }
  return stars;
}

DofMap buildDofMap(const TriangleMesh& mesh, double s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw std::invalid_argument("buildDofMap: s must be in (0,1)");
  }
  if (s < 0.5) return buildDofMapAllVertices(mesh);
  DofMap map;
  map.boundaryIncluded = false;
  const auto onBoundary = boundaryVertexFlags(mesh);
  map.dofOfVertex.assign(mesh.vertices.size(), -1);
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
    if (!onBoundary[v]) {
      map.dofOfVertex[v] = map.n++;
      map.vertexOfDof.push_back(v);
    }
  }
  return map;
}

DofMap buildDofMapAllVertices(const TriangleMesh& mesh) {
  DofMap map;
  map.boundaryIncluded = true;
  map.dofOfVertex.resize(mesh.vertices.size());
  map.vertexOfDof.resize(mesh.vertices.size());
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
    map.dofOfVertex[v] = v;
    map.vertexOfDof[v] = v;
  }
  map.n = static_cast<int>(mesh.vertices.size());
  return map;
}

void Prolongation::apply(const double* coarse, double* fine) const {
  for (int i = 0; i < nFine; ++i) {
    double v = 0.0;
    for (int k = 0; k < 2; ++k) {
      if (cols[i][k] >= 0) v += weights[i][k] * coarse[cols[i][k]];
    }
    fine[i] = v;
  }
}

void Prolongation::applyTranspose(const double* fine, double* coarse) const {
  for (int j = 0; j < nCoarse; ++j) coarse[j] = 0.0;
  for (int i = 0; i < nFine; ++i) {
    for (int k = 0; k < 2; ++k) {
      if (cols[i][k] >= 0) coarse[cols[i][k]] += weights[i][k] * fine[i];
    }
  }
}

Prolongation buildProlongation(const TriangleMesh& coarse,
                               const TriangleMesh& fine,
                               const DofMap& coarseDofs,
                               const DofMap& fineDofs) {
  if (fine.parentVertices.size() != fine.vertices.size()) {
    throw std::runtime_error("buildProlongation: fine mesh lacks parent tracking");
  }
  if (coarseDofs.dofOfVertex.size() != coarse.vertices.size()) {
    throw std::runtime_error("buildProlongation: coarse DoF map does not match mesh");
  }
  Prolongation P;
  P.nCoarse = coarseDofs.n;
  P.nFine = fineDofs.n;
  P.cols.assign(fineDofs.n, {-1, -1});
  P.weights.assign(fineDofs.n, {0.0, 0.0});
  for (int v = 0; v < static_cast<int>(fine.vertices.size()); ++v) {
    const int i = fineDofs.dofOfVertex[v];
    if (i < 0) continue;
    const auto [a, b] = fine.parentVertices[v];
    if (a == b) {
      P.cols[i][0] = coarseDofs.dofOfVertex[a];
      P.weights[i][0] = 1.0;
    } else {
      P.cols[i][0] = coarseDofs.dofOfVertex[a];
      P.cols[i][1] = coarseDofs.dofOfVertex[b];
      P.weights[i][0] = 0.5;
      P.weights[i][1] = 0.5;
    }
  }
  return P;
}

}  // namespace fractfem
