#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fractfem/analysis.hpp"
#include "fractfem/mesh.hpp"
#include "support/random_geometry.hpp"

using namespace fractfem;

TEST_CASE("mesh: disk family validates and stays quasi-uniform") {
  std::vector<double> hs, logHs, levels, ns, invHs;
  for (int L = 0; L <= 6; ++L) {
    const TriangleMesh m = buildDiskMesh(L);
    CHECK_NOTHROW(validateMesh(m));
    CHECK(m.level == L);
    const double hMax = maxElementDiameter(m);
    const double hMin = minElementDiameter(m);
    CHECK(hMax / hMin <= 4.0);
    // Every vertex at distance <= 1 from the origin, boundary ones on the
    // circle.
    const auto onBd = boundaryVertexFlags(m);
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      const double r = std::hypot(m.vertices[v].x, m.vertices[v].y);
      CHECK(r <= 1.0 + 1e-12);
      if (onBd[v]) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    }
    if (L >= 1) {
      hs.push_back(hMax);
      levels.push_back(L);
      logHs.push_back(std::log2(hMax));
      ns.push_back(double(m.vertices.size()));
      invHs.push_back(1.0 / hMax);
    }
  }

  // log2(h) falls by about one per level.
  double num = 0.0, den = 0.0;
  const double mx = 3.5, my = [&] {
    double t = 0.0;
    for (double v : logHs) t += v;
    return t / logHs.size();
  }();
  for (std::size_t i = 0; i < logHs.size(); ++i) {
    num += (levels[i] - mx) * (logHs[i] - my);
    den += (levels[i] - mx) * (levels[i] - mx);
  }
  const double slope = num / den;
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.05));

  // Vertex count scales like h^-2.
  const double growth = fitRate(hs, ns);
  CHECK(growth >= -2.1);
  CHECK(growth <= -1.9);
}

TEST_CASE("mesh: refinement splits boundary edges through projected midpoints") {
  for (int L = 0; L <= 3; ++L) {
    const TriangleMesh coarse = buildDiskMesh(L);
    const TriangleMesh fine = refineUniform(coarse);
    CHECK(fine.boundaryEdges.size() == 2 * coarse.boundaryEdges.size());

    auto findVertex = [&](Vec2 p) {
      for (std::size_t v = 0; v < fine.vertices.size(); ++v) {
        if (std::fabs(fine.vertices[v].x - p.x) < 1e-12 &&
            std::fabs(fine.vertices[v].y - p.y) < 1e-12) {
          return int(v);
        }
      }
      return -1;
    };
    std::set<std::pair<int, int>> fineEdges;
    for (const auto& e : fine.boundaryEdges) fineEdges.insert({e[0], e[1]});

    for (const auto& e : coarse.boundaryEdges) {
      const Vec2 a = coarse.vertices[e[0]];
      const Vec2 b = coarse.vertices[e[1]];
      Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
      const double r = std::hypot(mid.x, mid.y);
      mid = {mid.x / r, mid.y / r};
      const int ia = findVertex(a), ib = findVertex(b), im = findVertex(mid);
      REQUIRE(ia >= 0);
      REQUIRE(ib >= 0);
      REQUIRE(im >= 0);
      // Both halves present with preserved orientation.
      CHECK(fineEdges.count({ia, im}) == 1);
      CHECK(fineEdges.count({im, ib}) == 1);
    }
  }
}

TEST_CASE("mesh: DoF maps split on s = 1/2 and stay contiguous") {
  const TriangleMesh m = buildDiskMesh(3);
  const auto onBd = boundaryVertexFlags(m);
  std::mt19937 rng(777);
  for (int c = 0; c < 120; ++c) {
    const double s = testsupport::uniform(rng, 0.01, 0.99);
    const DofMap dm = buildDofMap(m, s);
    CHECK(dm.boundaryIncluded == (s < 0.5));
    std::vector<bool> seen(dm.n, false);
    int count = 0;
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      const int d = dm.dofOfVertex[v];
      if (s >= 0.5 && onBd[v]) {
        CHECK(d == -1);
        continue;
      }
      REQUIRE(d >= 0);
      REQUIRE(d < dm.n);
      CHECK(!seen[d]);
      seen[d] = true;
      CHECK(dm.vertexOfDof[d] == int(v));
      ++count;
    }
    CHECK(count == dm.n);
  }
  const DofMap all = buildDofMapAllVertices(m);
  CHECK(all.n == int(m.vertices.size()));
  CHECK(all.boundaryIncluded);
}

TEST_CASE("mesh: text format round-trips exactly") {
  for (int L = 0; L <= 3; ++L) {
    const TriangleMesh m = buildDiskMesh(L);
    std::ostringstream os;
    saveMesh(m, os);
    const std::string text = os.str();
    std::istringstream is(text);
    const TriangleMesh back = loadMesh(is);
    REQUIRE(back.vertices.size() == m.vertices.size());
    REQUIRE(back.triangles.size() == m.triangles.size());
    REQUIRE(back.boundaryEdges.size() == m.boundaryEdges.size());
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      CHECK(back.vertices[v].x == m.vertices[v].x);
      CHECK(back.vertices[v].y == m.vertices[v].y);
    }
    CHECK(back.triangles == m.triangles);
    CHECK(back.boundaryEdges == m.boundaryEdges);
    std::ostringstream os2;
    saveMesh(back, os2);
    CHECK(os2.str() == text);
    CHECK_NOTHROW(validateMesh(back));
  }
}

TEST_CASE("mesh: level-0 disk golden bytes") {
  std::ostringstream os;
  saveMesh(buildDiskMesh(0), os);
  const std::string expect =
      "vertices 5 triangles 4 boundary 4\n"
      "0 0\n"
      "1 0\n"
      "0 1\n"
      "-1 0\n"
      "0 -1\n"
      "0 1 2\n"
      "0 2 3\n"
      "0 3 4\n"
      "0 4 1\n"
      "1 2\n"
      "2 3\n"
      "3 4\n"
      "4 1\n";
  CHECK(os.str() == expect);
}

TEST_CASE("mesh: prolongation interpolates and transposes") {
  std::mt19937 rng(4242);
  for (double s : {0.25, 0.75}) {
    for (int L = 0; L <= 3; ++L) {
      const TriangleMesh coarse = buildDiskMesh(L);
      const TriangleMesh fine = refineUniform(coarse);
      const DofMap dc = buildDofMap(coarse, s);
      const DofMap df = buildDofMap(fine, s);
      const Prolongation P = buildProlongation(coarse, fine, dc, df);
      REQUIRE(P.nCoarse == dc.n);
      REQUIRE(P.nFine == df.n);

      for (int rep = 0; rep < 15; ++rep) {
        const Eigen::VectorXd c = testsupport::randomVector(rng, dc.n);
        Eigen::VectorXd f(df.n);
        P.apply(c.data(), f.data());
        // Carried coarse vertices keep their value.
        for (std::size_t v = 0; v < coarse.vertices.size(); ++v) {
          const int cd = dc.dofOfVertex[v];
          if (cd < 0) continue;
          // Same vertex exists in the fine mesh with the same index: the
          // refinement appends midpoints after the carried vertices.
          const int fd = df.dofOfVertex[v];
          REQUIRE(fd >= 0);
          CHECK(f[fd] == doctest::Approx(c[cd]).epsilon(1e-14));
        }
        // Adjoint identity <P c, y> = <c, P^T y>.
        const Eigen::VectorXd y = testsupport::randomVector(rng, df.n);
        Eigen::VectorXd cty(dc.n);
        P.applyTranspose(y.data(), cty.data());
        CHECK(f.dot(y) ==
              doctest::Approx(c.dot(cty)).epsilon(1e-12).scale(
                  std::max(1.0, std::fabs(f.dot(y)))));
      }
    }
  }
}

TEST_CASE("mesh: vertex stars cover all triangles") {
  const TriangleMesh m = buildDiskMesh(2);
  const auto stars = vertexStars(m);
  REQUIRE(stars.size() == m.vertices.size());
  std::size_t incidences = 0;
  for (std::size_t v = 0; v < stars.size(); ++v) {
    for (int t : stars[v]) {
      const auto& tri = m.triangles[t];
      CHECK((tri[0] == int(v) || tri[1] == int(v) || tri[2] == int(v)));
    }
    incidences += stars[v].size();
  }
  CHECK(incidences == 3 * m.triangles.size());
}
