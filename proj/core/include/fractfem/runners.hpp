// Experiment drivers shared by the command line tools and the acceptance
// checks: convergence studies on the disk, scaling audits, heat stepping
// sweeps, condition sweeps, and the two-species reaction-diffusion runs.
// A StudyCache memoizes meshes, DoF maps, prolongations, and assembled
// operators so overlapping studies reuse them.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fractfem/analysis.hpp"
#include "fractfem/assembly.hpp"
#include "fractfem/clustering.hpp"
#include "fractfem/config.hpp"
#include "fractfem/mesh.hpp"
#include "fractfem/quadrature.hpp"
#include "fractfem/solvers.hpp"
#include "fractfem/timestepping.hpp"

namespace fractfem {

struct QuadSettings {
  std::array<double, 4> rho = {2.0, 2.0, 2.0, 2.0};
  double cutoffMultiple = 4.0;
  double ell = 0.0;  // 0: defaultEll(s)
  int maxOrder = 30;
};

QuadSettings quadSettingsFromConfig(const Config& cfg);
OrderPlan makePlan(const QuadSettings& q, double h, double s);

enum class OperatorKind { Dense, Hierarchical };
enum class SolverKind { Direct, CG, Multigrid };

class StudyCache {
 public:
  explicit StudyCache(QuadSettings quad = {}, int threads = 1);
  ~StudyCache();
  StudyCache(const StudyCache&) = delete;
  StudyCache& operator=(const StudyCache&) = delete;

  const QuadSettings& quad() const { return quad_; }
  int threads() const { return threads_; }

  const TriangleMesh& mesh(int level);
  const DofMap& dofs(double s, int level, bool allVertices = false);
  // Prolongation from `level` to `level + 1` on the matching DoF spaces.
  const Prolongation& prolongation(double s, int level,
                                   bool allVertices = false);
  std::vector<const Prolongation*> chain(double s, int from, int to,
                                         bool allVertices = false);

  struct DenseOp {
    Eigen::MatrixXd A;
    double seconds = 0.0;
    std::unique_ptr<DenseOperator> op;
  };
  const DenseOp& dense(double s, int level, bool includeBoundaryTerm = true,
                       bool allVertices = false);

  struct HierOp {
    std::unique_ptr<HierarchicalOperator> op;
    double seconds = 0.0;
    int m = 0;
  };
  const HierOp& hierarchical(double s, int level, double eta, int leafSize,
                             int m, double gammaInterp);

  const Eigen::SparseMatrix<double>& mass(double s, int level,
                                          bool allVertices = false);
  const Eigen::VectorXd& lumped(double s, int level, bool allVertices = false);
  // Load vector of the constant function 1.
  const Eigen::VectorXd& unitLoad(double s, int level,
                                  bool allVertices = false);

 private:
  struct Impl;
  QuadSettings quad_;
  int threads_ = 1;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Steady-state convergence study (unit load with the closed-form singular
// solution, or the smooth case driven through the interpolant load).

struct PoissonStudyOptions {
  double s = 0.25;
  bool smooth = false;
  int minLevel = 1;
  int maxLevel = 4;
  int refLevel = 0;  // reference level for the energy estimate; 0 = maxLevel + 2
  OperatorKind op = OperatorKind::Dense;
  SolverKind solver = SolverKind::Direct;
  double eta = 1.0;
  int leafSize = 8;
  int m = 0;  // 0: interpolationOrderFor per level
  // Interpolation order of the reference-level operator. The reference only
  // serves as a fixed metric for the error estimate, so a moderate fixed
  // order keeps its memory bounded on fine levels.
  int refM = 5;
  double gammaInterp = 0.25;
  int mgCoarsestLevel = 1;
  CGOptions cg;
  MultigridOptions mg;
};

struct PoissonStudyResult {
  std::vector<ConvergenceRow> rows;
  std::vector<SolveReport> reports;
  double rateL2 = 0.0;      // NaN when fewer than 3 rows
  double rateEnergy = 0.0;  // NaN when fewer than 3 rows
};

PoissonStudyResult runPoissonStudy(StudyCache& cache,
                                   const PoissonStudyOptions& opt);

// Exact energy a(u, u) of the closed-form unit-load solution.
double getoorEnergy(double s);

// ---------------------------------------------------------------------------
// Memory / assembly-time scaling audit.

struct ScalingAuditOptions {
  double s = 0.25;
  int minLevel = 3;
  int maxLevel = 6;
  int denseMaxLevel = 0;  // also time dense assembly up to this level
  double eta = 1.0;
  int leafSize = 8;
  int m = 0;
  double gammaInterp = 0.25;
  int matvecRepeat = 3;
};

struct ScalingRow {
  int level = 0;
  std::int64_t n = 0;
  double h = 0.0;
  int m = 0;
  double hierSeconds = 0.0;
  std::int64_t hierStored = 0;
  std::int64_t nearEntries = 0;
  std::int64_t farBlocks = 0;
  double matvecSeconds = 0.0;
  double denseSeconds = -1.0;  // negative: dense not assembled at this level
  std::int64_t denseStored = 0;
};

struct ScalingAuditResult {
  std::vector<ScalingRow> rows;
  // Fits of log(quantity) against log(n) over levels with admissible pairs;
  // NaN with fewer than 3 such levels.
  double hierStoredExponent = 0.0;
  double hierTimeExponent = 0.0;
  double denseStoredExponent = 0.0;
};

ScalingAuditResult runScalingAudit(StudyCache& cache,
                                   const ScalingAuditOptions& opt);
void writeScalingCsv(std::ostream& os, const std::vector<ScalingRow>& rows);

// ---------------------------------------------------------------------------
// Implicit heat stepping sweep: per level, dt from chooseTimestep, a fixed
// number of backward Euler steps, iteration counts recorded.

struct HeatStudyOptions {
  double s = 0.25;
  double alpha = 2.0;  // operator power in the dt rule
  ErrorTarget target = ErrorTarget::L2;
  int minLevel = 2;
  int maxLevel = 5;
  int steps = 5;
  double dt = 0.0;  // 0: chooseTimestep per level
  SolverKind solver = SolverKind::CG;
  CGOptions cg;
  MultigridOptions mg;
  int mgCoarsestLevel = 1;
};

struct HeatRow {
  int level = 0;
  std::int64_t n = 0;
  double h = 0.0;
  double dt = 0.0;
  int steps = 0;
  double itersMean = 0.0;
  int itersMax = 0;
  double seconds = 0.0;
};

struct HeatStudyResult {
  std::vector<HeatRow> rows;
  std::vector<SolveReport> reports;
};

HeatStudyResult runHeatStudy(StudyCache& cache, const HeatStudyOptions& opt);
void writeHeatCsv(std::ostream& os, const std::vector<HeatRow>& rows);

// ---------------------------------------------------------------------------
// Extremal eigenvalue sweep for the stiffness operator, optionally shifted
// by the mass matrix as in one implicit step.

struct ConditionStudyOptions {
  double s = 0.25;
  int minLevel = 2;
  int maxLevel = 5;
  bool massShift = false;
  double alpha = 2.0;  // dt rule power when massShift is set
  ErrorTarget target = ErrorTarget::L2;
  int lanczosIterations = 120;
  unsigned seed = 12345;
};

struct ConditionRow {
  int level = 0;
  std::int64_t n = 0;
  double h = 0.0;
  double dt = 0.0;  // 0 without mass shift
  double lambdaMin = 0.0;
  double lambdaMax = 0.0;
  double kappa = 0.0;
  int iterations = 0;
};

struct ConditionStudyResult {
  std::vector<ConditionRow> rows;
  double exponent = 0.0;  // fit of log(kappa) against log(h); NaN if < 3 rows
};

ConditionStudyResult runConditionStudy(StudyCache& cache,
                                       const ConditionStudyOptions& opt);
void writeConditionCsv(std::ostream& os, const std::vector<ConditionRow>& rows);

// ---------------------------------------------------------------------------
// Two-species reaction-diffusion runs: pattern regimes (spot, stripe) on the
// regional form with all vertex DoFs, and the manufactured-solution
// convergence run on the full form.

struct BrusselatorOptions {
  enum class Mode { Spot, Stripe, Manufactured };
  Mode mode = Mode::Spot;
  double alpha = 0.75;  // shared fractional order of both fields
  BrusselatorParams params;
  int level = 5;
  double dt = 0.0;  // 0: 0.5 for pattern runs, h^(1/2) for manufactured
  int steps = 160;  // pattern runs; manufactured derives steps from tEnd
  double tEnd = 10.0;
  int snapshotEvery = 0;  // 0: no snapshots
  unsigned seed = 7771;
  double bumpAmplitude = 0.8;
  double bumpWidth = 0.2;
  double noiseAmplitude = 0.1;
  int refLevel = 0;  // manufactured forcing reference; 0 = level + 2
  CGOptions cg;
  std::string outDir;  // empty: nothing written
};

struct BrusselatorResult {
  Eigen::VectorXd u, v;
  double time = 0.0;
  int steps = 0;
  double dt = 0.0;
  // Radial diagnostics of the final u field (pattern runs).
  double ringRadius = 0.0;
  double uMean = 0.0;
  double uStd = 0.0;
  // Maxima over the time grid (manufactured runs).
  double errUL2 = 0.0, errVL2 = 0.0;
  double errUEnergy = 0.0, errVEnergy = 0.0;
  std::vector<SolveReport> reports;
};

BrusselatorResult runBrusselator(StudyCache& cache,
                                 const BrusselatorOptions& opt);

// Radius of the strongest bin of the radially binned field; bins span [0,1].
double ringRadiusMetric(const TriangleMesh& mesh, const DofMap& dofs,
                        const Eigen::VectorXd& u, int bins = 40);

void writeFieldSnapshot(std::ostream& os, const TriangleMesh& mesh,
                        const DofMap& dofs, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& v);

}  // namespace fractfem
