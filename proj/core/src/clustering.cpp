#include "fractfem/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fractfem/parallel.hpp"

namespace fractfem {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Chebyshev points of the first kind on [-1, 1] and their barycentric
// weights, cached per order.
struct ChebRef {
  std::array<double, 16> t{}, w{};
};

const ChebRef& chebRef(int m) {
  static const std::array<ChebRef, 17> table = [] {
    std::array<ChebRef, 17> tb{};
    for (int mm = 1; mm <= 16; ++mm) {
      for (int k = 0; k < mm; ++k) {
        const double ang = (2.0 * k + 1.0) * kPi / (2.0 * mm);
        tb[mm].t[k] = std::cos(ang);
        tb[mm].w[k] = (k % 2 ? -1.0 : 1.0) * std::sin(ang);
      }
    }
    return tb;
  }();
  return table[m];
}

void lagrange1D(double c, double half, int m, double x, double* out) {
  const ChebRef& ref = chebRef(m);
  const double u = (x - c) / half;
  for (int k = 0; k < m; ++k) {
    if (std::abs(u - ref.t[k]) < 1e-13) {
      std::fill(out, out + m, 0.0);
      out[k] = 1.0;
      return;
    }
  }
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    out[k] = ref.w[k] / (u - ref.t[k]);
    sum += out[k];
  }
  const double inv = 1.0 / sum;
  for (int k = 0; k < m; ++k) out[k] *= inv;
}

struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  void absorb(const Rect& o) {
    x0 = std::min(x0, o.x0);
    x1 = std::max(x1, o.x1);
    y0 = std::min(y0, o.y0);
    y1 = std::max(y1, o.y1);
  }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

}  // namespace

void ClusterTree::chebAxis(int v, std::vector<double>& xs,
                           std::vector<double>& ys) const {
  xs.assign(chebX.begin() + static_cast<std::ptrdiff_t>(v) * m,
            chebX.begin() + static_cast<std::ptrdiff_t>(v + 1) * m);
  ys.assign(chebY.begin() + static_cast<std::ptrdiff_t>(v) * m,
            chebY.begin() + static_cast<std::ptrdiff_t>(v + 1) * m);
}

void ClusterTree::lagrangeAt(int v, Vec2 p, double* out) const {
  double lx[16], ly[16];
  const ClusterNode& nd = nodes[v];
  lagrange1D(nd.cx, nd.half, m, p.x, lx);
  lagrange1D(nd.cy, nd.half, m, p.y, ly);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out[a * m + b] = lx[a] * ly[b];
}

double clusterDistance(const ClusterNode& a, const ClusterNode& b) {
  const double dx = std::max(0.0, std::abs(a.cx - b.cx) - (a.half + b.half));
  const double dy = std::max(0.0, std::abs(a.cy - b.cy) - (a.half + b.half));
  return std::sqrt(dx * dx + dy * dy);
}

ClusterTree buildClusterTree(const TriangleMesh& mesh, const DofMap& dofs,
                             int leafSize, int m) {
  if (leafSize < 1)
    throw std::invalid_argument("buildClusterTree: leafSize must be >= 1");
  if (m < 2 || m > 16)
    throw std::invalid_argument("buildClusterTree: order m out of range [2,16]");
  const int n = dofs.n;
  if (n == 0) throw std::invalid_argument("buildClusterTree: empty DoF set");

  const auto stars = vertexStars(mesh);
  std::vector<Rect> itemBox(n);
  std::vector<Vec2> itemPt(n);
  for (int i = 0; i < n; ++i) {
    const int v = dofs.vertexOfDof[i];
    itemPt[i] = mesh.vertices[v];
    Rect b{itemPt[i].x, itemPt[i].x, itemPt[i].y, itemPt[i].y};
    for (int t : stars[v]) {
      for (int k = 0; k < 3; ++k) {
        const Vec2 q = mesh.vertices[mesh.triangles[t][k]];
        b.x0 = std::min(b.x0, q.x);
        b.x1 = std::max(b.x1, q.x);
        b.y0 = std::min(b.y0, q.y);
        b.y1 = std::max(b.y1, q.y);
      }
    }
    itemBox[i] = b;
  }

  ClusterTree tree;
  tree.m = m;
  tree.perm.resize(n);
  std::iota(tree.perm.begin(), tree.perm.end(), 0);
  tree.atomOfItem.assign(n, -1);
  tree.singletonOfItem.assign(n, -1);

  const auto rectOf = [&](int begin, int end) {
    Rect r = itemBox[tree.perm[begin]];
    for (int p = begin + 1; p < end; ++p) r.absorb(itemBox[tree.perm[p]]);
    return r;
  };
  const auto makeNode = [&](int parent, int level, int begin, int end) {
    ClusterNode nd;
    nd.parent = parent;
    nd.level = level;
    nd.begin = begin;
    nd.end = end;
    const Rect r = rectOf(begin, end);
    nd.cx = 0.5 * (r.x0 + r.x1);
    nd.cy = 0.5 * (r.y0 + r.y1);
    nd.half = 0.5 * std::max(r.x1 - r.x0, r.y1 - r.y0);
    if (nd.half <= 0.0) nd.half = 1e-12;
    return nd;
  };

  tree.nodes.push_back(makeNode(-1, 0, 0, n));

  // Pre-order construction; children of a node occupy consecutive indices.
  std::function<void(int)> process = [&](int v) {
    const int begin = tree.nodes[v].begin;
    const int end = tree.nodes[v].end;
    const int level = tree.nodes[v].level;
    const int cnt = end - begin;
    tree.maxLevel = std::max(tree.maxLevel, level);

    if (cnt <= leafSize) {
      tree.nodes[v].atom = true;
      tree.atomNodes.push_back(v);
      if (cnt == 1) {
        tree.nodes[v].singleton = true;
        tree.atomOfItem[tree.perm[begin]] = v;
        tree.singletonOfItem[tree.perm[begin]] = v;
        return;
      }
      const int fc = static_cast<int>(tree.nodes.size());
      tree.nodes[v].firstChild = fc;
      tree.nodes[v].childCount = cnt;
      for (int p = begin; p < end; ++p) {
        ClusterNode c = makeNode(v, level + 1, p, p + 1);
        c.singleton = true;
        tree.nodes.push_back(c);
        tree.atomOfItem[tree.perm[p]] = v;
        tree.singletonOfItem[tree.perm[p]] = fc + (p - begin);
      }
      tree.maxLevel = std::max(tree.maxLevel, level + 1);
      return;
    }

    const Rect r = rectOf(begin, end);
    const bool alongX = (r.x1 - r.x0) >= (r.y1 - r.y0);
    const double mid = alongX ? 0.5 * (r.x0 + r.x1) : 0.5 * (r.y0 + r.y1);
    const auto coord = [&](int item) {
      return alongX ? itemPt[item].x : itemPt[item].y;
    };
    auto* base = tree.perm.data();
    auto* splitAt = std::stable_partition(
        base + begin, base + end, [&](int item) { return coord(item) <= mid; });
    int cut = static_cast<int>(splitAt - base);
    if (cut == begin || cut == end) {
      // Degenerate geometric split: fall back to a median split.
      std::sort(base + begin, base + end, [&](int a, int b) {
        if (coord(a) != coord(b)) return coord(a) < coord(b);
        return a < b;
      });
      cut = begin + cnt / 2;
    }

    const int fc = static_cast<int>(tree.nodes.size());
    tree.nodes[v].firstChild = fc;
    tree.nodes[v].childCount = 2;
    tree.nodes.push_back(makeNode(v, level + 1, begin, cut));
    tree.nodes.push_back(makeNode(v, level + 1, cut, end));
    process(fc);
    process(fc + 1);
  };
  process(0);

  const int nn = static_cast<int>(tree.nodes.size());
  tree.chebX.resize(static_cast<std::size_t>(nn) * m);
  tree.chebY.resize(static_cast<std::size_t>(nn) * m);
  const ChebRef& ref = chebRef(m);
  for (int v = 0; v < nn; ++v) {
    const ClusterNode& nd = tree.nodes[v];
    for (int k = 0; k < m; ++k) {
      tree.chebX[static_cast<std::size_t>(v) * m + k] = nd.cx + nd.half * ref.t[k];
      tree.chebY[static_cast<std::size_t>(v) * m + k] = nd.cy + nd.half * ref.t[k];
    }
  }
  tree.shiftX.assign(static_cast<std::size_t>(nn) * m * m, 0.0);
  tree.shiftY.assign(static_cast<std::size_t>(nn) * m * m, 0.0);
  std::vector<double> lb(m);
  for (int v = 1; v < nn; ++v) {
    const ClusterNode& nd = tree.nodes[v];
    const ClusterNode& pd = tree.nodes[nd.parent];
    double* tx = tree.shiftX.data() + static_cast<std::size_t>(v) * m * m;
    double* ty = tree.shiftY.data() + static_cast<std::size_t>(v) * m * m;
    for (int b = 0; b < m; ++b) {
      lagrange1D(pd.cx, pd.half, m,
                 tree.chebX[static_cast<std::size_t>(v) * m + b], lb.data());
      for (int a = 0; a < m; ++a) tx[a * m + b] = lb[a];
      lagrange1D(pd.cy, pd.half, m,
                 tree.chebY[static_cast<std::size_t>(v) * m + b], lb.data());
      for (int a = 0; a < m; ++a) ty[a * m + b] = lb[a];
    }
  }

  // Basis coefficients: integral of each hat function against the tensor
  // Lagrange basis of its singleton box.
  const TriangleRule rule = simplexGauss(m + 1);
  tree.itemBasis.assign(n, Eigen::MatrixXd::Zero(m, m));
  std::vector<double> lvals(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < n; ++i) {
    const int v = dofs.vertexOfDof[i];
    const int sn = tree.singletonOfItem[i];
    Eigen::MatrixXd& B = tree.itemBasis[i];
    for (int t : stars[v]) {
      const auto& tri = mesh.triangles[t];
      const Triangle tc = mesh.triangleCoords(t);
      int local = 0;
      while (tri[local] != v) ++local;
      const double twoArea = 2.0 * triangleArea(tc);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double xi = rule.nodes[q].x, et = rule.nodes[q].y;
        const double lam[3] = {1.0 - xi - et, xi, et};
        const Vec2 x = tc[0] * lam[0] + tc[1] * lam[1] + tc[2] * lam[2];
        tree.lagrangeAt(sn, x, lvals.data());
        const double wphi = twoArea * rule.weights[q] * lam[local];
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) B(a, b) += wphi * lvals[a * m + b];
      }
    }
  }
  return tree;
}

BlockPartition partitionBlocks(const ClusterTree& tree, double eta) {
  if (!(eta > 0.0))
    throw std::invalid_argument("partitionBlocks: eta must be positive");
  BlockPartition part;
  std::vector<std::array<int, 2>> stack;
  stack.push_back({0, 0});
  while (!stack.empty()) {
    const auto [s, t] = stack.back();
    stack.pop_back();
    const ClusterNode& a = tree.nodes[s];
    const ClusterNode& b = tree.nodes[t];
    const double d = clusterDistance(a, b);
    if (d > 0.0 && eta * d >= std::max(a.diameter(), b.diameter())) {
      part.farPairs.push_back({s, t});
      continue;
    }
    if (a.atom && b.atom) {
      part.nearAtomPairs.push_back({s, t});
      continue;
    }
    if (s == t) {
      for (int i = 0; i < a.childCount; ++i) {
        for (int j = i; j < a.childCount; ++j) {
          stack.push_back({a.firstChild + i, a.firstChild + j});
        }
      }
      continue;
    }
    const bool splitFirst = b.atom || (!a.atom && a.half >= b.half);
    const ClusterNode& sp = splitFirst ? a : b;
    const int other = splitFirst ? t : s;
    for (int i = 0; i < sp.childCount; ++i) {
      const int c = sp.firstChild + i;
      stack.push_back({std::min(c, other), std::max(c, other)});
    }
  }
  std::sort(part.farPairs.begin(), part.farPairs.end());
  std::sort(part.nearAtomPairs.begin(), part.nearAtomPairs.end());
  return part;
}

int interpolationOrderFor(double h, double s, double ell, double gamma, int d) {
  if (!(h > 0.0) || !(s > 0.0) || !(s < 1.0))
    throw std::invalid_argument("interpolationOrderFor: bad h or s");
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("interpolationOrderFor: gamma must be in (0,1)");
  const double logh = std::abs(std::log(h));
  const double num = (ell - s + d + 2.0 * s) * logh;
  int m = static_cast<int>(std::ceil(num / std::abs(std::log(gamma))));
  return std::max(3, std::min(12, m));
}

namespace {

std::uint64_t packPair(int a, int b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::unique_ptr<HierarchicalOperator> assembleHierarchical(
    const TriangleMesh& mesh, const DofMap& dofs, const BilinearParams& params,
    const OrderPlan& plan, double eta, int m, int leafSize,
    const AssembleOptions& opts) {
  std::unique_ptr<HierarchicalOperator> op(new HierarchicalOperator());
  op->n_ = dofs.n;
  op->params_ = params;
  op->tree_ = buildClusterTree(mesh, dofs, leafSize, m);
  op->part_ = partitionBlocks(op->tree_, eta);
  const ClusterTree& tree = op->tree_;
  const int n = dofs.n;
  const int m2 = m * m;
  const double expo = -(1.0 + params.s);
  const int threads = std::max(1, opts.threads);

  // Far blocks: kernel evaluated at Chebyshev node pairs, with the sign and
  // normalization of the stiffness entries for disjoint supports.
  {
    const auto& fp = op->part_.farPairs;
    op->far_.resize(fp.size());
    const std::size_t chunkSize = 256;
    const std::size_t nChunks = (fp.size() + chunkSize - 1) / chunkSize;
    orderedChunkReduce<std::vector<Eigen::MatrixXd>>(
        nChunks, threads,
        [&](std::size_t chunk, std::vector<Eigen::MatrixXd>& out) {
          const std::size_t lo = chunk * chunkSize;
          const std::size_t hi = std::min(fp.size(), lo + chunkSize);
          out.clear();
          out.reserve(hi - lo);
          for (std::size_t bi = lo; bi < hi; ++bi) {
            const int sg = fp[bi][0], tg = fp[bi][1];
            Eigen::MatrixXd K(m2, m2);
            const double* sx = tree.chebX.data() + static_cast<std::size_t>(sg) * m;
            const double* sy = tree.chebY.data() + static_cast<std::size_t>(sg) * m;
            const double* tx = tree.chebX.data() + static_cast<std::size_t>(tg) * m;
            const double* ty = tree.chebY.data() + static_cast<std::size_t>(tg) * m;
            for (int r1 = 0; r1 < m; ++r1) {
              for (int r2 = 0; r2 < m; ++r2) {
                const int r = r1 * m + r2;
                for (int c1 = 0; c1 < m; ++c1) {
                  const double dx = sx[r1] - tx[c1];
                  for (int c2 = 0; c2 < m; ++c2) {
                    const double dy = sy[r2] - ty[c2];
                    K(r, c1 * m + c2) =
                        -params.Cds * std::pow(dx * dx + dy * dy, expo);
                  }
                }
              }
            }
            out.push_back(std::move(K));
          }
        },
        [&, idx = std::size_t{0}](std::vector<Eigen::MatrixXd>& out) mutable {
          for (auto& K : out) {
            op->far_[idx].s = fp[idx][0];
            op->far_[idx].t = fp[idx][1];
            op->far_[idx].k = std::move(K);
            ++idx;
          }
        });
  }

  // Compact atom indexing and per-atom item lists.
  const int nAtoms = static_cast<int>(tree.atomNodes.size());
  std::vector<int> atomIndexOfNode(tree.nodes.size(), -1);
  for (int a = 0; a < nAtoms; ++a) atomIndexOfNode[tree.atomNodes[a]] = a;
  std::vector<std::vector<int>> atomItems(nAtoms);
  for (int a = 0; a < nAtoms; ++a) {
    const ClusterNode& nd = tree.nodes[tree.atomNodes[a]];
    atomItems[a].assign(tree.perm.begin() + nd.begin, tree.perm.begin() + nd.end);
  }

  // Near-field sparsity pattern: all DoF pairs of inadmissible atom pairs.
  std::vector<std::int64_t>& rowPtr = op->nearRow_;
  std::vector<int>& colIdx = op->nearCol_;
  std::vector<double>& vals = op->nearVal_;
  {
    std::vector<std::int64_t> count(n + 1, 0);
    for (const auto& np : op->part_.nearAtomPairs) {
      const int a = atomIndexOfNode[np[0]], b = atomIndexOfNode[np[1]];
      if (a == b) {
        for (int i : atomItems[a]) count[i + 1] += atomItems[a].size();
      } else {
        for (int i : atomItems[a]) count[i + 1] += atomItems[b].size();
        for (int j : atomItems[b]) count[j + 1] += atomItems[a].size();
      }
    }
    rowPtr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) rowPtr[i + 1] = rowPtr[i] + count[i + 1];
    colIdx.resize(static_cast<std::size_t>(rowPtr[n]));
    std::vector<std::int64_t> fill(rowPtr.begin(), rowPtr.end() - 1);
    const auto emitRow = [&](const std::vector<int>& rows,
                             const std::vector<int>& cols) {
      for (int i : rows)
        for (int j : cols) colIdx[static_cast<std::size_t>(fill[i]++)] = j;
    };
    for (const auto& np : op->part_.nearAtomPairs) {
      const int a = atomIndexOfNode[np[0]], b = atomIndexOfNode[np[1]];
      emitRow(atomItems[a], atomItems[b]);
      if (a != b) emitRow(atomItems[b], atomItems[a]);
    }
    for (int i = 0; i < n; ++i) {
      std::sort(colIdx.begin() + rowPtr[i], colIdx.begin() + rowPtr[i + 1]);
    }
    vals.assign(colIdx.size(), 0.0);
  }
  const auto slotOf = [&](int i, int j) -> std::int64_t {
    const auto lo = colIdx.begin() + rowPtr[i];
    const auto hi = colIdx.begin() + rowPtr[i + 1];
    const auto it = std::lower_bound(lo, hi, j);
    if (it == hi || *it != j) return -1;
    return it - colIdx.begin();
  };

  // Elements attached to each atom (through the stars of its DoFs) and the
  // near-partner atom lists.
  const auto stars = vertexStars(mesh);
  std::vector<std::vector<int>> attachedEls(nAtoms);
  for (int a = 0; a < nAtoms; ++a) {
    auto& els = attachedEls[a];
    for (int i : atomItems[a]) {
      const int v = dofs.vertexOfDof[i];
      els.insert(els.end(), stars[v].begin(), stars[v].end());
    }
    std::sort(els.begin(), els.end());
    els.erase(std::unique(els.begin(), els.end()), els.end());
  }
  std::vector<std::vector<int>> nearPartners(nAtoms);
  for (const auto& np : op->part_.nearAtomPairs) {
    const int a = atomIndexOfNode[np[0]], b = atomIndexOfNode[np[1]];
    nearPartners[a].push_back(b);
    if (a != b) nearPartners[b].push_back(a);
  }
  for (auto& lst : nearPartners) std::sort(lst.begin(), lst.end());

  // Element pairs assembled exactly: every pair attached to some
  // inadmissible atom pair. Deduplicated through sorted batches to keep the
  // working set bounded.
  std::vector<std::uint64_t> needed;
  {
    std::vector<std::uint64_t> batch;
    const std::size_t batchCap = std::size_t{1} << 22;
    batch.reserve(batchCap);
    const auto flush = [&] {
      if (batch.empty()) return;
      std::sort(batch.begin(), batch.end());
      batch.erase(std::unique(batch.begin(), batch.end()), batch.end());
      if (needed.empty()) {
        needed.swap(batch);
      } else {
        std::vector<std::uint64_t> merged;
        merged.reserve(needed.size() + batch.size());
        std::set_union(needed.begin(), needed.end(), batch.begin(), batch.end(),
                       std::back_inserter(merged));
        needed.swap(merged);
        batch.clear();
      }
      batch.reserve(batchCap);
    };
    for (const auto& np : op->part_.nearAtomPairs) {
      const int a = atomIndexOfNode[np[0]], b = atomIndexOfNode[np[1]];
      for (int t1 : attachedEls[a]) {
        for (int t2 : attachedEls[b]) {
          batch.push_back(t1 <= t2 ? packPair(t1, t2) : packPair(t2, t1));
          if (batch.size() >= batchCap) flush();
        }
      }
    }
    flush();
  }
  op->stats_.directPairBlocks = static_cast<std::int64_t>(needed.size());

  const PairAssembler pa(params, plan, dofs.boundaryIncluded);
  struct Triple {
    int i, j;
    double v;
  };

  // Direct blocks, in the same (t1, t2) order the dense assembler uses so
  // that meshes without admissible pairs reproduce it bitwise.
  {
    const std::size_t chunkSize = 512;
    const std::size_t nChunks = (needed.size() + chunkSize - 1) / chunkSize;
    orderedChunkReduce<std::vector<Triple>>(
        nChunks, threads,
        [&](std::size_t chunk, std::vector<Triple>& out) {
          const std::size_t lo = chunk * chunkSize;
          const std::size_t hi = std::min(needed.size(), lo + chunkSize);
          out.clear();
          for (std::size_t pi = lo; pi < hi; ++pi) {
            const int t1 = static_cast<int>(needed[pi] >> 32);
            const int t2 = static_cast<int>(needed[pi] & 0xffffffffu);
            const auto& g1 = mesh.triangles[t1];
            const auto& g2 = mesh.triangles[t2];
            const PairLocal pl = pa.pairIndexed(mesh.triangleCoords(t1), g1,
                                                mesh.triangleCoords(t2), g2);
            const double f = (t1 == t2) ? 1.0 : 2.0;
            int ug[6] = {-1, -1, -1, -1, -1, -1};
            for (int k = 0; k < 3; ++k) {
              ug[pl.locK[k]] = dofs.dofOfVertex[g1[k]];
              ug[pl.locKt[k]] = dofs.dofOfVertex[g2[k]];
            }
            for (int p = 0; p < pl.unionSize; ++p) {
              if (ug[p] < 0) continue;
              for (int q = 0; q < pl.unionSize; ++q) {
                if (ug[q] < 0) continue;
                out.push_back({ug[p], ug[q], f * pl.a(p, q)});
              }
            }
          }
        },
        [&](std::vector<Triple>& out) {
          for (const Triple& tr : out) {
            const std::int64_t slot = slotOf(tr.i, tr.j);
            if (slot >= 0) vals[static_cast<std::size_t>(slot)] += tr.v;
          }
        });
  }

  // Boundary correction: supports overlap, so every contribution lands in
  // the near field.
  if (opts.includeBoundaryTerm && !mesh.boundaryEdges.empty()) {
    const std::size_t nt = mesh.triangles.size();
    const std::size_t chunkSize = 64;
    const std::size_t nChunks = (nt + chunkSize - 1) / chunkSize;
    orderedChunkReduce<std::vector<Triple>>(
        nChunks, threads,
        [&](std::size_t chunk, std::vector<Triple>& out) {
          const std::size_t lo = chunk * chunkSize;
          const std::size_t hi = std::min(nt, lo + chunkSize);
          out.clear();
          for (std::size_t t = lo; t < hi; ++t) {
            const Triangle tc = mesh.triangleCoords(static_cast<int>(t));
            const auto& tri = mesh.triangles[t];
            int dg[3];
            bool any = false;
            for (int k = 0; k < 3; ++k) {
              dg[k] = dofs.dofOfVertex[tri[k]];
              any = any || dg[k] >= 0;
            }
            if (!any) continue;
            for (const auto& be : mesh.boundaryEdges) {
              const Eigen::Matrix3d bb =
                  pa.boundary(tc, mesh.vertices[be[0]], mesh.vertices[be[1]]);
              for (int a = 0; a < 3; ++a) {
                if (dg[a] < 0) continue;
                for (int b = 0; b < 3; ++b) {
                  if (dg[b] < 0) continue;
                  const double v = bb(a, b);
                  if (v != 0.0) out.push_back({dg[a], dg[b], v});
                }
              }
            }
          }
        },
        [&](std::vector<Triple>& out) {
          for (const Triple& tr : out) {
            const std::int64_t slot = slotOf(tr.i, tr.j);
            if (slot >= 0) vals[static_cast<std::size_t>(slot)] += tr.v;
          }
        });
  }

  // Kernel tails: for entries sharing an element K, contributions of element
  // pairs (K, far K') enter through the potential of all elements outside
  // the direct set. The potential of elements owned by far atoms is read off
  // the same far blocks (one upward/downward pass over element volume
  // moments); elements inside the direct set that the pass still covers are
  // subtracted by direct integrals.
  if (!op->part_.farPairs.empty()) {
    // Owner atom of each element (atom of its first DoF vertex).
    const std::size_t nt = mesh.triangles.size();
    std::vector<int> ownerAtom(nt, -1);
    for (std::size_t t = 0; t < nt; ++t) {
      for (int k = 0; k < 3; ++k) {
        const int d = dofs.dofOfVertex[mesh.triangles[t][k]];
        if (d >= 0) {
          ownerAtom[t] = atomIndexOfNode[tree.atomOfItem[d]];
          break;
        }
      }
      if (ownerAtom[t] < 0)
        throw std::runtime_error(
            "assembleHierarchical: element without any DoF vertex");
    }

    // Volume moments of owned elements in each atom's Chebyshev basis.
    std::vector<Eigen::VectorXd> vmom(tree.nodes.size());
    {
      const TriangleRule rule = simplexGauss(m + 1);
      std::vector<double> lvals(static_cast<std::size_t>(m2));
      for (std::size_t t = 0; t < nt; ++t) {
        const int node = tree.atomNodes[ownerAtom[t]];
        if (vmom[node].size() == 0) vmom[node] = Eigen::VectorXd::Zero(m2);
        const Triangle tc = mesh.triangleCoords(static_cast<int>(t));
        const double twoArea = 2.0 * triangleArea(tc);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double xi = rule.nodes[q].x, et = rule.nodes[q].y;
          const Vec2 x = tc[0] * (1.0 - xi - et) + tc[1] * xi + tc[2] * et;
          tree.lagrangeAt(node, x, lvals.data());
          const double w = twoArea * rule.weights[q];
          for (int a = 0; a < m2; ++a) vmom[node][a] += w * lvals[a];
        }
      }
    }
    // Upward.
    for (int v = static_cast<int>(tree.nodes.size()) - 1; v >= 1; --v) {
      if (vmom[v].size() == 0) continue;
      const int p = tree.nodes[v].parent;
      if (vmom[p].size() == 0) vmom[p] = Eigen::VectorXd::Zero(m2);
      CMapRow tx(tree.shiftX.data() + static_cast<std::size_t>(v) * m2, m, m);
      CMapRow ty(tree.shiftY.data() + static_cast<std::size_t>(v) * m2, m, m);
      CMapRow mc(vmom[v].data(), m, m);
      MapRow mp(vmom[p].data(), m, m);
      mp.noalias() += tx * mc * ty.transpose();
    }
    // Far blocks, both directions.
    std::vector<Eigen::VectorXd> vdual(tree.nodes.size());
    for (const auto& fb : op->far_) {
      if (vdual[fb.s].size() == 0) vdual[fb.s] = Eigen::VectorXd::Zero(m2);
      if (vdual[fb.t].size() == 0) vdual[fb.t] = Eigen::VectorXd::Zero(m2);
      vdual[fb.s].noalias() += fb.k * vmom[fb.t];
      vdual[fb.t].noalias() += fb.k.transpose() * vmom[fb.s];
    }
    // Downward to atoms.
    for (std::size_t v = 1; v < tree.nodes.size(); ++v) {
      const ClusterNode& nd = tree.nodes[v];
      if (nd.singleton && !nd.atom) continue;
      const int p = nd.parent;
      if (vdual[p].size() == 0) continue;
      if (vdual[v].size() == 0) vdual[v] = Eigen::VectorXd::Zero(m2);
      CMapRow tx(tree.shiftX.data() + v * static_cast<std::size_t>(m2), m, m);
      CMapRow ty(tree.shiftY.data() + v * static_cast<std::size_t>(m2), m, m);
      CMapRow dp(vdual[p].data(), m, m);
      MapRow dv(vdual[v].data(), m, m);
      dv.noalias() += tx.transpose() * dp * ty;
    }

    const TriangleRule tailRule = simplexGauss(6);
    const std::size_t nq = tailRule.nodes.size();
    std::vector<TriangleRule> ruleByOrder(plan.maxOrder + 1);
    for (int k = 1; k <= plan.maxOrder; ++k) ruleByOrder[k] = simplexGauss(k);
    const std::size_t chunkSize = 64;
    const std::size_t nChunks = (nt + chunkSize - 1) / chunkSize;
    orderedChunkReduce<std::vector<Triple>>(
        nChunks, threads,
        [&](std::size_t chunk, std::vector<Triple>& out) {
          const std::size_t lo = chunk * chunkSize;
          const std::size_t hi = std::min(nt, lo + chunkSize);
          out.clear();
          std::vector<double> lvals(static_cast<std::size_t>(m2));
          std::vector<int> corr;
          std::vector<double> field(nq);
          std::vector<Vec2> xq(nq);
          for (std::size_t t = lo; t < hi; ++t) {
            const auto& tri = mesh.triangles[t];
            int dg[3];
            bool any = false;
            for (int k = 0; k < 3; ++k) {
              dg[k] = dofs.dofOfVertex[tri[k]];
              any = any || dg[k] >= 0;
            }
            if (!any) continue;
            const Triangle tc = mesh.triangleCoords(static_cast<int>(t));
            const double twoArea = 2.0 * triangleArea(tc);
            const int a0 = ownerAtom[t];
            const int a0node = tree.atomNodes[a0];
            for (std::size_t q = 0; q < nq; ++q) {
              const double xi = tailRule.nodes[q].x, et = tailRule.nodes[q].y;
              xq[q] = tc[0] * (1.0 - xi - et) + tc[1] * xi + tc[2] * et;
              if (vdual[a0node].size() > 0) {
                tree.lagrangeAt(a0node, xq[q], lvals.data());
                double acc = 0.0;
                for (int a = 0; a < m2; ++a) acc += lvals[a] * vdual[a0node][a];
                field[q] = -acc;
              } else {
                field[q] = 0.0;
              }
            }
            // Elements the potential pass covered although their pair with
            // this element is assembled directly.
            corr.clear();
            std::array<int, 3> triAtoms = {-1, -1, -1};
            int nta = 0;
            for (int k = 0; k < 3; ++k) {
              if (dg[k] < 0) continue;
              const int a = atomIndexOfNode[tree.atomOfItem[dg[k]]];
              bool seen = false;
              for (int z = 0; z < nta; ++z) seen = seen || triAtoms[z] == a;
              if (!seen) triAtoms[nta++] = a;
            }
            const auto& nearA0 = nearPartners[a0];
            for (int z = 0; z < nta; ++z) {
              for (int b : nearPartners[triAtoms[z]]) {
                for (int el : attachedEls[b]) {
                  const int ow = ownerAtom[el];
                  if (!std::binary_search(nearA0.begin(), nearA0.end(), ow)) {
                    corr.push_back(el);
                  }
                }
              }
            }
            std::sort(corr.begin(), corr.end());
            corr.erase(std::unique(corr.begin(), corr.end()), corr.end());
            for (int el : corr) {
              const Triangle sc = mesh.triangleCoords(el);
              const double d = triangleDistance(tc, sc);
              const TriangleRule& srule = ruleByOrder[plan.kNT(d)];
              const double twoAreaS = 2.0 * triangleArea(sc);
              for (std::size_t q = 0; q < nq; ++q) {
                double acc = 0.0;
                for (std::size_t r = 0; r < srule.nodes.size(); ++r) {
                  const double sxi = srule.nodes[r].x, set = srule.nodes[r].y;
                  const Vec2 y =
                      sc[0] * (1.0 - sxi - set) + sc[1] * sxi + sc[2] * set;
                  acc += srule.weights[r] *
                         std::pow(sqNorm(xq[q] - y), expo);
                }
                field[q] -= params.Cds * twoAreaS * acc;
              }
            }
            for (int a = 0; a < 3; ++a) {
              if (dg[a] < 0) continue;
              for (int b = a; b < 3; ++b) {
                if (dg[b] < 0) continue;
                double acc = 0.0;
                for (std::size_t q = 0; q < nq; ++q) {
                  const double xi = tailRule.nodes[q].x,
                               et = tailRule.nodes[q].y;
                  const double lam[3] = {1.0 - xi - et, xi, et};
                  acc += tailRule.weights[q] * lam[a] * lam[b] * field[q];
                }
                acc *= twoArea;
                out.push_back({dg[a], dg[b], acc});
                if (a != b) out.push_back({dg[b], dg[a], acc});
              }
            }
          }
        },
        [&](std::vector<Triple>& out) {
          for (const Triple& tr : out) {
            const std::int64_t slot = slotOf(tr.i, tr.j);
            if (slot >= 0) vals[static_cast<std::size_t>(slot)] += tr.v;
          }
        });
  }

  // Stored-real accounting: far blocks, near values, transfer matrices, and
  // the leaf basis coefficients. Without any admissible pair the whole
  // interpolation machinery could be dropped and the operator reduces to the
  // plain n x n entry table, so only the near entries count then.
  ClusterStats& st = op->stats_;
  st.m = m;
  st.treeLevels = tree.maxLevel + 1;
  st.nearEntries = static_cast<std::int64_t>(vals.size());
  st.farBlocks = static_cast<std::int64_t>(op->far_.size());
  st.storedReals = st.nearEntries;
  if (st.farBlocks > 0) {
    st.storedReals += st.farBlocks * m2 * m2 +
                      static_cast<std::int64_t>(tree.nodes.size()) * 2 * m2 +
                      static_cast<std::int64_t>(n) * m2;
  }
  return op;
}

void HierarchicalOperator::apply(const Eigen::VectorXd& x,
                                 Eigen::VectorXd& y) const {
  if (x.size() != n_)
    throw std::invalid_argument("HierarchicalOperator::apply: size mismatch");
  y.resize(n_);
  // Near field (full symmetric storage).
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::int64_t k = nearRow_[i]; k < nearRow_[i + 1]; ++k) {
      acc += nearVal_[static_cast<std::size_t>(k)] *
             x[nearCol_[static_cast<std::size_t>(k)]];
    }
    y[i] = acc;
  }
  if (far_.empty()) return;

  const int m = tree_.m;
  const int m2 = m * m;
  const std::size_t nn = tree_.nodes.size();
  Eigen::VectorXd mom = Eigen::VectorXd::Zero(static_cast<std::ptrdiff_t>(nn) * m2);
  Eigen::VectorXd dual = Eigen::VectorXd::Zero(static_cast<std::ptrdiff_t>(nn) * m2);

  // Upward: singleton moments from the basis coefficients, then transfers.
  for (int i = 0; i < n_; ++i) {
    const int sn = tree_.singletonOfItem[i];
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* dst = mom.data() + static_cast<std::ptrdiff_t>(sn) * m2;
    const Eigen::MatrixXd& B = tree_.itemBasis[i];
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) dst[a * m + b] += xi * B(a, b);
  }
  for (std::size_t v = nn - 1; v >= 1; --v) {
    const ClusterNode& nd = tree_.nodes[v];
    CMapRow mc(mom.data() + static_cast<std::ptrdiff_t>(v) * m2, m, m);
    if (mc.cwiseAbs().maxCoeff() == 0.0) continue;
    CMapRow tx(tree_.shiftX.data() + v * static_cast<std::size_t>(m2), m, m);
    CMapRow ty(tree_.shiftY.data() + v * static_cast<std::size_t>(m2), m, m);
    MapRow mp(mom.data() + static_cast<std::ptrdiff_t>(nd.parent) * m2, m, m);
    mp.noalias() += tx * mc * ty.transpose();
  }

  // Block products in both directions.
  for (const FarBlock& fb : far_) {
    Eigen::Map<const Eigen::VectorXd> ms(
        mom.data() + static_cast<std::ptrdiff_t>(fb.s) * m2, m2);
    Eigen::Map<const Eigen::VectorXd> mt(
        mom.data() + static_cast<std::ptrdiff_t>(fb.t) * m2, m2);
    Eigen::Map<Eigen::VectorXd> ds(
        dual.data() + static_cast<std::ptrdiff_t>(fb.s) * m2, m2);
    Eigen::Map<Eigen::VectorXd> dt(
        dual.data() + static_cast<std::ptrdiff_t>(fb.t) * m2, m2);
    ds.noalias() += fb.k * mt;
    dt.noalias() += fb.k.transpose() * ms;
  }

  // Downward and evaluation at the leaves.
  for (std::size_t v = 1; v < nn; ++v) {
    CMapRow dp(dual.data() + static_cast<std::ptrdiff_t>(tree_.nodes[v].parent) * m2,
               m, m);
    if (dp.cwiseAbs().maxCoeff() == 0.0) continue;
    CMapRow tx(tree_.shiftX.data() + v * static_cast<std::size_t>(m2), m, m);
    CMapRow ty(tree_.shiftY.data() + v * static_cast<std::size_t>(m2), m, m);
    MapRow dv(dual.data() + static_cast<std::ptrdiff_t>(v) * m2, m, m);
    dv.noalias() += tx.transpose() * dp * ty;
  }
  for (int i = 0; i < n_; ++i) {
    const int sn = tree_.singletonOfItem[i];
    const double* d = dual.data() + static_cast<std::ptrdiff_t>(sn) * m2;
    const Eigen::MatrixXd& B = tree_.itemBasis[i];
    double acc = 0.0;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) acc += d[a * m + b] * B(a, b);
    y[i] += acc;
  }
}

bool HierarchicalOperator::nearEntry(int i, int j, double& value) const {
  const auto lo = nearCol_.begin() + nearRow_[i];
  const auto hi = nearCol_.begin() + nearRow_[i + 1];
  const auto it = std::lower_bound(lo, hi, j);
  if (it == hi || *it != j) return false;
  value = nearVal_[static_cast<std::size_t>(it - nearCol_.begin())];
  return true;
}

void HierarchicalOperator::writePartitionStats(std::ostream& os) const {
  const int m2 = tree_.m * tree_.m;
  const int levels = tree_.maxLevel + 1;
  std::vector<std::int64_t> farAt(levels, 0), nearAt(levels, 0), reals(levels, 0);
  for (const auto& fp : part_.farPairs) {
    const int lvl = std::min(tree_.nodes[fp[0]].level, tree_.nodes[fp[1]].level);
    farAt[lvl] += 1;
    reals[lvl] += static_cast<std::int64_t>(m2) * m2;
  }
  for (const auto& np : part_.nearAtomPairs) {
    const int lvl = std::max(tree_.nodes[np[0]].level, tree_.nodes[np[1]].level);
    const std::int64_t ca = tree_.nodes[np[0]].count();
    const std::int64_t cb = tree_.nodes[np[1]].count();
    const std::int64_t cnt = (np[0] == np[1]) ? ca * ca : 2 * ca * cb;
    nearAt[lvl] += cnt;
    reals[lvl] += cnt;
  }
  // Transfer matrices and leaf coefficients are charged to the root row;
  // they are only needed once admissible pairs exist.
  if (!part_.farPairs.empty()) {
    reals[0] += static_cast<std::int64_t>(tree_.nodes.size()) * 2 * m2 +
                static_cast<std::int64_t>(n_) * m2;
  }
  os << "level,admissible_pairs,near_entries,stored_reals\n";
  for (int l = 0; l < levels; ++l) {
    os << l << ',' << farAt[l] << ',' << nearAt[l] << ',' << reals[l] << '\n';
  }
}

}  // namespace fractfem
