// Triangulations of the unit disk (built-in family) and general polygonal
// domains (user supplied), uniform refinement, DoF maps, and the plain-text
// mesh format.

#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "fractfem/geometry.hpp"

namespace fractfem {

struct TriangleMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  // Boundary edges (a, b) directed so the domain lies to the left; for a
  // counter-clockwise outer boundary the inward normal is the left rotation
  // of b - a.
  std::vector<std::array<int, 2>> boundaryEdges;
  int level = 0;

  // True for meshes of the built-in disk family: refinement projects
  // newly created boundary vertices radially onto |x| = 1.
  bool projectToUnitCircle = false;

  // For meshes produced by refineUniform: parentVertices[v] = {a, b} are the
  // coarse vertex indices whose edge midpoint created v (a == b for vertices
  // carried over from the coarse mesh). Empty for meshes built from scratch.
  std::vector<std::array<int, 2>> parentVertices;

  Triangle triangleCoords(int t) const {
    const auto& tri = triangles[t];
    return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
  }
};

// Coarse 4-triangle fan over the unit disk refined `level` times, boundary
// vertices projected onto the circle after each refinement.
TriangleMesh buildDiskMesh(int level);

// Splits every triangle into four by edge midpoints. Boundary edges are
// split in place preserving orientation; for disk meshes the new boundary
// midpoints are projected onto |x| = 1.
TriangleMesh refineUniform(const TriangleMesh& mesh);

// Structural validation: positive areas, conforming edges (each interior
// edge in exactly two triangles, each boundary edge in exactly one and
// present in the boundary list). Throws std::runtime_error on violation.
void validateMesh(const TriangleMesh& mesh);

// Plain-text format: header "vertices <nv> triangles <nt> boundary <nb>",
// then "x y" lines, "i j k" lines, "i j" lines (0-based indices).
void saveMesh(const TriangleMesh& mesh, std::ostream& out);
TriangleMesh loadMesh(std::istream& in);
void saveMeshFile(const TriangleMesh& mesh, const std::string& path);
TriangleMesh loadMeshFile(const std::string& path);

double maxElementDiameter(const TriangleMesh& mesh);
double minElementDiameter(const TriangleMesh& mesh);

std::vector<bool> boundaryVertexFlags(const TriangleMesh& mesh);

// Triangles incident to each vertex, in deterministic (triangle-index) order.
std::vector<std::vector<int>> vertexStars(const TriangleMesh& mesh);

struct DofMap {
  std::vector<int> dofOfVertex;  // -1 when the vertex carries no DoF
  std::vector<int> vertexOfDof;
  int n = 0;
  bool boundaryIncluded = false;
};

// For s >= 1/2 boundary vertices carry no DoF; for s < 1/2 all vertices do.
DofMap buildDofMap(const TriangleMesh& mesh, double s);

// All vertices carry DoFs regardless of s (regional form / Neumann analogue).
DofMap buildDofMapAllVertices(const TriangleMesh& mesh);

// P1 interpolation from a coarse DoF vector to a fine one across one
// refinement step: carried vertices copy their value, midpoints average the
// two parents; vertices without a coarse DoF contribute zero.
// Returned as a row-compressed structure applied by prolongate/restrict.
struct Prolongation {
  // For each fine DoF: up to two (coarseDof, weight) pairs.
  std::vector<std::array<int, 2>> cols;
  std::vector<std::array<double, 2>> weights;
  int nCoarse = 0;
  int nFine = 0;

  void apply(const double* coarse, double* fine) const;
  // Transpose action (restriction).
  void applyTranspose(const double* fine, double* coarse) const;
};

Prolongation buildProlongation(const TriangleMesh& coarse,
                               const TriangleMesh& fine,
                               const DofMap& coarseDofs,
                               const DofMap& fineDofs);

}  // namespace fractfem
