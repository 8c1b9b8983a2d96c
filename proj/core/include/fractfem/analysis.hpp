// Reference solutions on the unit disk, discrete error norms, and
// convergence-rate fitting.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fractfem/mesh.hpp"
#include "fractfem/operator.hpp"

namespace fractfem {

// 2^{-2s} / Gamma(1+s)^2, the prefactor of the disk solution with unit
// right-hand side.
double getoorPrefactor(double s);

// u(x) = prefactor * (1 - |x|^2)^s inside the unit disk, 0 outside.
std::function<double(Vec2)> getoorSolution(double s);

// Nodal interpolant on the DoF set.
Eigen::VectorXd interpolate(const TriangleMesh& mesh, const DofMap& dofs,
                            const std::function<double(Vec2)>& u);

// L2 norm of (P1 function - exact) integrated elementwise. The quadrature
// order starts at `order` and is raised until doubling changes the result by
// less than 0.5% (the exact solutions have algebraic boundary singularities).
double errorL2(const TriangleMesh& mesh, const DofMap& dofs,
               const Eigen::VectorXd& uh,
               const std::function<double(Vec2)>& exact, int order = 6);

// Apply a chain of prolongations (ordered coarse to fine).
Eigen::VectorXd prolongateChain(const std::vector<const Prolongation*>& chain,
                                const Eigen::VectorXd& coarse);

// Energy norm of (fineReference - prolonged coarse vector) in the discrete
// form of the fine operator; throws if the quadratic form turns out
// negative.
double errorEnergy(const LinearOperator& fineOp,
                   const Eigen::VectorXd& fineReference,
                   const std::vector<const Prolongation*>& chain,
                   const Eigen::VectorXd& coarse);

// Least-squares slope of log(err) against log(h); needs at least 3 points.
double fitRate(const std::vector<double>& h, const std::vector<double>& err);

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  std::int64_t n = 0;
  double errL2 = 0.0;
  double errEnergy = 0.0;
  double assemblySeconds = 0.0;
  double solveSeconds = 0.0;
  std::int64_t storedReals = 0;
};

// CSV with header "level,h,n,errL2,errEnergy,assembly_s,solve_s,stored_reals".
void writeConvergenceSeries(std::ostream& os,
                            const std::vector<ConvergenceRow>& rows);

}  // namespace fractfem
