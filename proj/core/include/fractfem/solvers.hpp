// Linear solvers used across the experiments: dense Cholesky, conjugate
// gradients on an abstract operator, a geometric multigrid V-cycle over
// nested refinements, and Lanczos-based extremal eigenvalue estimates.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "fractfem/mesh.hpp"
#include "fractfem/operator.hpp"

namespace fractfem {

struct SolveReport {
  std::string solver;
  int level = 0;
  double s = 0.0;
  double dt = 0.0;
  int iterations = 0;
  double residual = 0.0;
  double seconds = 0.0;
};

// Header "solver,level,s,dt,iterations,residual,seconds" plus one row per
// report.
void writeSolveReports(std::ostream& os, const std::vector<SolveReport>& rows);

// Cholesky solve with a residual check (relative residual must not exceed
// 1e-10, otherwise this throws).
Eigen::VectorXd solveDense(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           SolveReport* report = nullptr);

struct CGOptions {
  double tol = 1e-8;       // relative residual target
  int maxIterations = 0;   // 0: 10 * n
};

// Plain conjugate gradients; throws if the iteration cap is reached without
// meeting the tolerance.
Eigen::VectorXd solveCG(const LinearOperator& A, const Eigen::VectorXd& b,
                        const CGOptions& opts = {},
                        SolveReport* report = nullptr,
                        const Eigen::VectorXd* x0 = nullptr);

// One multigrid level: an operator, its diagonal (for damped Jacobi), and
// the prolongation from the next coarser level (null on the coarsest).
struct MultigridLevel {
  const LinearOperator* op = nullptr;
  Eigen::VectorXd diag;
  const Prolongation* fromCoarser = nullptr;
};

class Multigrid {
 public:
  // Levels ordered coarse to fine; coarseMatrix is the dense matrix of
  // levels.front() used for the direct coarse solve.
  Multigrid(std::vector<MultigridLevel> levels, Eigen::MatrixXd coarseMatrix);

  int size() const;
  int levelCount() const { return static_cast<int>(levels_.size()); }
  const LinearOperator& fineOp() const;

  // One V-cycle applied to the current iterate.
  void cycle(const Eigen::VectorXd& b, Eigen::VectorXd& x, double omega,
             int nu) const;

 private:
  void vcycle(int level, const Eigen::VectorXd& b, Eigen::VectorXd& x,
              double omega, int nu) const;

  std::vector<MultigridLevel> levels_;
  Eigen::LLT<Eigen::MatrixXd> coarseFactor_;
};

struct MultigridOptions {
  double tol = 1e-8;
  int maxCycles = 200;
  double omega = 2.0 / 3.0;  // Jacobi damping
  int nu = 2;                // pre- and post-smoothing steps
  // A geometric-mean contraction factor above this value over any window of
  // five cycles is reported as stagnation.
  double stagnationFactor = 0.95;
};

Eigen::VectorXd solveMultigrid(const Multigrid& mg, const Eigen::VectorXd& b,
                               const MultigridOptions& opts = {},
                               SolveReport* report = nullptr);

struct ConditionEstimate {
  double lambdaMin = 0.0;
  double lambdaMax = 0.0;
  double kappa = 0.0;
  int iterations = 0;
};

// Lanczos with full reorthogonalization and a deterministic seeded start
// vector; adequate for the few-percent accuracy the condition studies need.
ConditionEstimate estimateCondition(const LinearOperator& A,
                                    int maxIterations = 120,
                                    unsigned seed = 12345);

}  // namespace fractfem
