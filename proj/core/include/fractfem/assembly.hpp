// Stiffness, mass, and load assembly for the fractional bilinear form
//   a(u,v) = C/2 * double integral of the difference kernel over Omega x Omega
//          + C/(2s) * boundary correction along inward normals,
// discretized with P1 elements. Touching element pairs use the lifted
// coordinate tables from duffy.hpp; separated pairs use tensor Gauss rules
// with distance-dependent orders.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "fractfem/mesh.hpp"
#include "fractfem/operator.hpp"
#include "fractfem/quadrature.hpp"

namespace fractfem {

struct BilinearParams {
  double s = 0.5;
  int d = 2;
  double Cds = 0.0;  // normalization C(d,s)
};

BilinearParams makeBilinearParams(double s, int d = 2);

// Local contribution of one element pair, indexed over the union vertices of
// the two elements (3..6 of them). locK[k] / locKt[k] give the union-local
// slot of each element-local vertex.
struct PairLocal {
  int unionSize = 0;
  int shared = 0;  // number of shared vertices (0 = separated)
  std::array<int, 3> locK = {0, 1, 2};
  std::array<int, 3> locKt = {0, 1, 2};
  Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
};

// Precomputes all quadrature rules for one (params, plan) combination and
// evaluates local pair / boundary-edge contributions. Immutable after
// construction; safe to share across threads.
class PairAssembler {
 public:
  PairAssembler(const BilinearParams& params, const OrderPlan& plan,
                bool boundaryDofsActive);
  ~PairAssembler();
  PairAssembler(const PairAssembler&) = delete;
  PairAssembler& operator=(const PairAssembler&) = delete;

  // Shared vertices are detected by exact coordinate equality.
  PairLocal pair(const Triangle& K, const Triangle& Kt) const;

  // Same, with sharing determined by global vertex ids.
  PairLocal pairIndexed(const Triangle& K, const std::array<int, 3>& gK,
                        const Triangle& Kt, const std::array<int, 3>& gKt) const;

  // Contribution of one boundary edge against one element, over the local
  // vertices of K. The edge (e0, e1) must be oriented with the domain on its
  // left. For s >= 1/2 and an edge of K itself, only the entry of the
  // off-edge vertex is computed (the others are singular and excluded from
  // the DoF set).
  Eigen::Matrix3d boundary(const Triangle& K, const Vec2& e0,
                           const Vec2& e1) const;

  const BilinearParams& params() const { return params_; }
  const OrderPlan& plan() const { return plan_; }

 private:
  struct Rules;
  BilinearParams params_;
  OrderPlan plan_;
  std::unique_ptr<Rules> rules_;
};

struct AssembleOptions {
  bool includeBoundaryTerm = true;
  int threads = 1;
  int denseCap = 20000;  // refuse larger dense problems
};

Eigen::MatrixXd assembleDense(const TriangleMesh& mesh, const DofMap& dofs,
                              const BilinearParams& params,
                              const OrderPlan& plan,
                              const AssembleOptions& opts = {});

Eigen::SparseMatrix<double> assembleMass(const TriangleMesh& mesh,
                                         const DofMap& dofs);

Eigen::VectorXd lumpedMass(const TriangleMesh& mesh, const DofMap& dofs);

Eigen::VectorXd assembleLoad(const TriangleMesh& mesh, const DofMap& dofs,
                             const std::function<double(Vec2)>& f,
                             int order = 4);

// Load vector <a(I_fine u, phi_j)>_j on the coarse space: apply the fine
// operator to the fine interpolant and restrict through the prolongation
// chain (ordered coarse-to-fine).
Eigen::VectorXd assembleLoadFromInterpolant(
    const LinearOperator& fineOp, const Eigen::VectorXd& fineInterpolant,
    const std::vector<const Prolongation*>& chain);

// Plain-text coordinate triplets "i j value" with 17 significant digits.
void writeTriplets(std::ostream& os, const Eigen::MatrixXd& A,
                   double dropTol = 0.0);
void writeTriplets(std::ostream& os, const Eigen::SparseMatrix<double>& A);

}  // namespace fractfem
