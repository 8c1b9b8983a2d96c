// Cluster-tree sparse approximation of the stiffness operator: admissible
// cluster pairs carry Chebyshev-interpolated kernel blocks, inadmissible
// leaf-cluster pairs are assembled exactly (including the slowly decaying
// kernel tails, which are folded in through a potential pass over the same
// far blocks).

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "fractfem/assembly.hpp"
#include "fractfem/mesh.hpp"
#include "fractfem/operator.hpp"
#include "fractfem/quadrature.hpp"

namespace fractfem {

struct ClusterNode {
  double cx = 0.0, cy = 0.0, half = 0.0;  // square box
  int parent = -1;
  int firstChild = -1;
  int childCount = 0;
  int begin = 0, end = 0;  // item range in perm
  int level = 0;
  bool atom = false;       // partition unit (size <= leafSize)
  bool singleton = false;  // single item

  int count() const { return end - begin; }
  double diameter() const { return 2.0 * half * 1.4142135623730951; }
};

struct ClusterTree {
  int m = 0;
  std::vector<ClusterNode> nodes;  // root at 0; children after parents
  std::vector<int> perm;           // item ids grouped by node ranges
  std::vector<int> atomOfItem;
  std::vector<int> singletonOfItem;
  std::vector<int> atomNodes;
  std::vector<double> chebX, chebY;    // per node, m entries each
  std::vector<double> shiftX, shiftY;  // per node, m*m (transfer to parent)
  // Per item: m x m integrals of the item's basis function against the
  // Chebyshev product basis of its singleton box.
  std::vector<Eigen::MatrixXd> itemBasis;
  int maxLevel = 0;

  // Chebyshev points of node v along each axis.
  void chebAxis(int v, std::vector<double>& xs, std::vector<double>& ys) const;
  // Tensor Lagrange basis values of node v at a point; out has m*m entries.
  void lagrangeAt(int v, Vec2 p, double* out) const;
};

double clusterDistance(const ClusterNode& a, const ClusterNode& b);

ClusterTree buildClusterTree(const TriangleMesh& mesh, const DofMap& dofs,
                             int leafSize, int m);

struct BlockPartition {
  std::vector<std::array<int, 2>> farPairs;      // canonical sigma <= tau
  std::vector<std::array<int, 2>> nearAtomPairs; // canonical sigma <= tau
};

BlockPartition partitionBlocks(const ClusterTree& tree, double eta);

// Interpolation order selection: m = ceil((ell - s + d + 2s)|log h| / |log gamma|),
// clamped to [3, 12].
int interpolationOrderFor(double h, double s, double ell, double gamma,
                          int d = 2);

struct ClusterStats {
  std::int64_t nearEntries = 0;
  std::int64_t farBlocks = 0;
  std::int64_t storedReals = 0;
  std::int64_t directPairBlocks = 0;
  int treeLevels = 0;
  int m = 0;
};

class HierarchicalOperator : public LinearOperator {
 public:
  int size() const override { return n_; }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override;

  const ClusterTree& tree() const { return tree_; }
  const BlockPartition& partition() const { return part_; }
  const ClusterStats& stats() const { return stats_; }
  const BilinearParams& params() const { return params_; }

  // Exact near-field entry lookup; returns false if (i,j) is far.
  bool nearEntry(int i, int j, double& value) const;

  // CSV rows "level,admissible_pairs,near_entries,stored_reals".
  void writePartitionStats(std::ostream& os) const;

 private:
  friend std::unique_ptr<HierarchicalOperator> assembleHierarchical(
      const TriangleMesh&, const DofMap&, const BilinearParams&,
      const OrderPlan&, double, int, int, const AssembleOptions&);

  int n_ = 0;
  BilinearParams params_;
  ClusterTree tree_;
  BlockPartition part_;
  ClusterStats stats_;
  struct FarBlock {
    int s, t;
    Eigen::MatrixXd k;  // m^2 x m^2, premultiplied by -C(d,s)
  };
  std::vector<FarBlock> far_;
  std::vector<std::int64_t> nearRow_;
  std::vector<int> nearCol_;
  std::vector<double> nearVal_;
};

std::unique_ptr<HierarchicalOperator> assembleHierarchical(
    const TriangleMesh& mesh, const DofMap& dofs, const BilinearParams& params,
    const OrderPlan& plan, double eta, int m, int leafSize,
    const AssembleOptions& opts = {});

}  // namespace fractfem
