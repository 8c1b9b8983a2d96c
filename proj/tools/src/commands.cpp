#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

#include "fractfem/analysis.hpp"
#include "fractfem/clustering.hpp"
#include "fractfem/mesh.hpp"
#include "fractfem/runners.hpp"
#include "fractfem/solvers.hpp"

namespace fractfem {
namespace cli {

namespace {

// Desk-scale guard rails; parameters can push n into hour-long or
// out-of-memory territory, so refuse clearly oversized problems unless the
// user overrides.
constexpr int kDenseCap = 20000;
constexpr int kHierCap = 200000;

void checkProblemSize(bool dense, int n, bool allowLarge) {
  const int cap = dense ? kDenseCap : kHierCap;
  if (n <= cap || allowLarge) return;
  throw std::invalid_argument(
      std::string(dense ? "dense" : "hierarchical") + " operator with n = " +
      std::to_string(n) + " exceeds the size cap " + std::to_string(cap) +
      "; pass --allow-large to override");
}

std::ofstream openOutput(const std::string& dir, const std::string& name) {
  const std::string path = dir + "/" + name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

void saveEffectiveConfig(const Config& cfg, const CommonArgs& args) {
  auto os = openOutput(args.outDir, "config_used.txt");
  cfg.save(os);
}

double requirePositiveDt(const Config& cfg, const std::string& key) {
  if (!cfg.has(key)) return 0.0;  // absent: the timestep rule decides
  const double dt = cfg.getDouble(key, 0.0);
  if (dt <= 0.0) {
    throw std::invalid_argument(key + " must be positive, got " +
                                std::to_string(dt));
  }
  return dt;
}

OperatorKind parseOperatorKind(const std::string& v, const std::string& key) {
  if (v == "dense") return OperatorKind::Dense;
  if (v == "hierarchical" || v == "hier") return OperatorKind::Hierarchical;
  throw std::invalid_argument(key + ": unknown operator kind '" + v +
                              "' (use dense or hierarchical)");
}

SolverKind parseSolverKind(const std::string& v, const std::string& key) {
  if (v == "direct") return SolverKind::Direct;
  if (v == "cg") return SolverKind::CG;
  if (v == "multigrid" || v == "mg") return SolverKind::Multigrid;
  throw std::invalid_argument(key + ": unknown solver '" + v +
                              "' (use direct, cg, or multigrid)");
}

ErrorTarget parseErrorTarget(const std::string& v, const std::string& key) {
  if (v == "l2") return ErrorTarget::L2;
  if (v == "energy") return ErrorTarget::Energy;
  throw std::invalid_argument(key + ": unknown error target '" + v +
                              "' (use l2 or energy)");
}

double readS(const Config& cfg) {
  const double s = cfg.getDouble("run.s", 0.25);
  if (!(s > 0.0 && s < 1.0)) {
    throw std::invalid_argument("run.s must lie in (0, 1), got " +
                                std::to_string(s));
  }
  return s;
}

void readClustering(const Config& cfg, double& eta, int& leafSize, int& m,
                    double& gamma) {
  eta = cfg.getDouble("clustering.eta", 1.0);
  leafSize = cfg.getInt("clustering.leaf_size", 8);
  m = cfg.getInt("clustering.m", 0);
  gamma = cfg.getDouble("clustering.gamma", 0.25);
  if (eta <= 0.0) throw std::invalid_argument("clustering.eta must be > 0");
  if (leafSize < 1)
    throw std::invalid_argument("clustering.leaf_size must be >= 1");
  if (m != 0 && m < 2)
    throw std::invalid_argument("clustering.m must be 0 (auto) or >= 2");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("clustering.gamma must lie in (0, 1)");
}

void readSolverOptions(const Config& cfg, CGOptions& cg, MultigridOptions& mg,
                       int& mgCoarsest) {
  cg.tol = cfg.getDouble("solver.cg_tol", cg.tol);
  cg.maxIterations = cfg.getInt("solver.cg_max_iterations", cg.maxIterations);
  mg.tol = cfg.getDouble("solver.mg_tol", mg.tol);
  mg.maxCycles = cfg.getInt("solver.mg_max_cycles", mg.maxCycles);
  mg.omega = cfg.getDouble("solver.mg_omega", mg.omega);
  mg.nu = cfg.getInt("solver.mg_nu", mg.nu);
  mgCoarsest = cfg.getInt("solver.mg_coarsest_level", 1);
}

}  // namespace

// ---------------------------------------------------------------------------

int runMeshCommand(const Config& cfg, const CommonArgs& args) {
  const int level = cfg.getInt("mesh.level", 3);
  const int refine = cfg.getInt("mesh.refine", 0);
  const std::string input = cfg.getString("mesh.input", "");
  if (level < 0 || level > 10)
    throw std::invalid_argument("mesh.level must lie in 0..10");
  if (refine < 0 || refine > 10)
    throw std::invalid_argument("mesh.refine must lie in 0..10");
  cfg.requireConsumed();

  TriangleMesh mesh;
  std::string outName;
  if (input.empty()) {
    mesh = buildDiskMesh(level);
    for (int k = 0; k < refine; ++k) mesh = refineUniform(mesh);
    char buf[64];
    std::snprintf(buf, sizeof buf, "mesh_level%d.txt", level + refine);
    outName = buf;
  } else {
    mesh = loadMeshFile(input);
    for (int k = 0; k < refine; ++k) mesh = refineUniform(mesh);
    outName = "mesh_refined.txt";
  }
  validateMesh(mesh);
  saveMeshFile(mesh, args.outDir + "/" + outName);
  saveEffectiveConfig(cfg, args);

  std::printf("%s: %zu vertices, %zu triangles, %zu boundary edges, "
              "h = %.6g\n",
              outName.c_str(), mesh.vertices.size(), mesh.triangles.size(),
              mesh.boundaryEdges.size(), maxElementDiameter(mesh));
  return 0;
}

// ---------------------------------------------------------------------------

int runAssembleCommand(const Config& cfg, const CommonArgs& args) {
  const double s = readS(cfg);
  const int level = cfg.getInt("assemble.level", 3);
  const OperatorKind kind = parseOperatorKind(
      cfg.getString("assemble.operator", "dense"), "assemble.operator");
  double eta, gamma;
  int leafSize, m;
  readClustering(cfg, eta, leafSize, m, gamma);
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  const TriangleMesh& mesh = cache.mesh(level);
  const DofMap& dm = cache.dofs(s, level);
  checkProblemSize(kind == OperatorKind::Dense, dm.n, args.allowLarge);

  auto summary = openOutput(args.outDir, "assembly.txt");
  summary << "s = " << s << "\n"
          << "level = " << level << "\n"
          << "n = " << dm.n << "\n"
          << "h = " << maxElementDiameter(mesh) << "\n";

  if (kind == OperatorKind::Dense) {
    const auto& D = cache.dense(s, level);
    summary << "operator = dense\n"
            << "stored_reals = " << static_cast<long long>(dm.n) * dm.n << "\n"
            << "assembly_seconds = " << D.seconds << "\n";
    // A full text dump only makes sense for small systems.
    if (dm.n <= 600) {
      auto mos = openOutput(args.outDir, "matrix.txt");
      char buf[32];
      for (int i = 0; i < dm.n; ++i) {
        for (int j = 0; j < dm.n; ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", D.A(i, j));
          mos << buf << (j + 1 == dm.n ? '\n' : ' ');
        }
      }
    } else {
      summary << "matrix_dump = skipped (n > 600)\n";
    }
  } else {
    const auto& H = cache.hierarchical(s, level, eta, leafSize, m, gamma);
    const ClusterStats& st = H.op->stats();
    summary << "operator = hierarchical\n"
            << "m = " << st.m << "\n"
            << "near_entries = " << st.nearEntries << "\n"
            << "far_blocks = " << st.farBlocks << "\n"
            << "stored_reals = " << st.storedReals << "\n"
            << "assembly_seconds = " << H.seconds << "\n";
    auto pos = openOutput(args.outDir, "partition_stats.csv");
    H.op->writePartitionStats(pos);
  }
  saveEffectiveConfig(cfg, args);
  std::printf("assembled level %d (n = %d), outputs in %s\n", level, dm.n,
              args.outDir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

int runPoissonCommand(const Config& cfg, const CommonArgs& args) {
  PoissonStudyOptions opt;
  opt.s = readS(cfg);
  const std::string caseName = cfg.getString("poisson.case", "getoor");
  if (caseName == "getoor" || caseName == "unit_load") {
    opt.smooth = false;
  } else if (caseName == "smooth") {
    opt.smooth = true;
  } else {
    throw std::invalid_argument("poisson.case: unknown case '" + caseName +
                                "' (use getoor or smooth)");
  }
  opt.minLevel = cfg.getInt("poisson.min_level", 1);
  opt.maxLevel = cfg.getInt("poisson.max_level", 4);
  opt.refLevel = cfg.getInt("poisson.ref_level", 0);
  opt.refM = cfg.getInt("poisson.ref_m", 5);
  opt.op = parseOperatorKind(cfg.getString("poisson.operator", "dense"),
                             "poisson.operator");
  opt.solver = parseSolverKind(cfg.getString("solver.kind", "direct"),
                               "solver.kind");
  readClustering(cfg, opt.eta, opt.leafSize, opt.m, opt.gammaInterp);
  readSolverOptions(cfg, opt.cg, opt.mg, opt.mgCoarsestLevel);
  if (opt.minLevel < 0 || opt.maxLevel < opt.minLevel)
    throw std::invalid_argument("poisson: bad level range");
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  {
    const DofMap& fine = cache.dofs(opt.s, opt.maxLevel);
    checkProblemSize(opt.op == OperatorKind::Dense, fine.n, args.allowLarge);
  }

  const PoissonStudyResult res = runPoissonStudy(cache, opt);

  const char* csvName = opt.op == OperatorKind::Dense
                            ? "convergence_dense.csv"
                            : "convergence_hierarchical.csv";
  {
    auto os = openOutput(args.outDir, csvName);
    writeConvergenceSeries(os, res.rows);
  }
  {
    auto os = openOutput(args.outDir, "solves.csv");
    writeSolveReports(os, res.reports);
  }
  {
    auto os = openOutput(args.outDir, "rates.txt");
    os << "case = " << caseName << "\n"
       << "s = " << opt.s << "\n"
       << "levels = " << opt.minLevel << ".." << opt.maxLevel << "\n"
       << "energy_rate = " << res.rateEnergy << "\n"
       << "l2_rate = " << res.rateL2 << "\n";
  }
  saveEffectiveConfig(cfg, args);

  for (const auto& r : res.rows) {
    std::printf("level %d  n %-7lld h %.4f  errEnergy %.6g  errL2 %.6g\n",
                r.level, static_cast<long long>(r.n), r.h, r.errEnergy,
                r.errL2);
  }
  std::printf("fitted rates: energy %.4f, L2 %.4f\n", res.rateEnergy,
              res.rateL2);
  return 0;
}

// ---------------------------------------------------------------------------

int runScalingCommand(const Config& cfg, const CommonArgs& args) {
  ScalingAuditOptions opt;
  opt.s = readS(cfg);
  opt.minLevel = cfg.getInt("scaling.min_level", 3);
  opt.maxLevel = cfg.getInt("scaling.max_level", 6);
  opt.denseMaxLevel = cfg.getInt("scaling.dense_max_level", 0);
  opt.matvecRepeat = cfg.getInt("scaling.matvec_repeat", 3);
  readClustering(cfg, opt.eta, opt.leafSize, opt.m, opt.gammaInterp);
  if (opt.minLevel < 0 || opt.maxLevel < opt.minLevel)
    throw std::invalid_argument("scaling: bad level range");
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  {
    const DofMap& fine = cache.dofs(opt.s, opt.maxLevel);
    checkProblemSize(false, fine.n, args.allowLarge);
    if (opt.denseMaxLevel > 0) {
      const DofMap& dfine = cache.dofs(opt.s, opt.denseMaxLevel);
      checkProblemSize(true, dfine.n, args.allowLarge);
    }
  }

  const ScalingAuditResult res = runScalingAudit(cache, opt);

  {
    auto os = openOutput(args.outDir, "scaling.csv");
    writeScalingCsv(os, res.rows);
  }
  for (const ScalingRow& r : res.rows) {
    char name[64];
    std::snprintf(name, sizeof name, "partition_stats_level%d.csv", r.level);
    auto os = openOutput(args.outDir, name);
    const auto& H =
        cache.hierarchical(opt.s, r.level, opt.eta, opt.leafSize, opt.m,
                           opt.gammaInterp);
    H.op->writePartitionStats(os);
  }
  {
    auto os = openOutput(args.outDir, "exponents.txt");
    os << "hier_stored_exponent = " << res.hierStoredExponent << "\n"
       << "hier_time_exponent = " << res.hierTimeExponent << "\n"
       << "dense_stored_exponent = " << res.denseStoredExponent << "\n";
  }
  saveEffectiveConfig(cfg, args);

  for (const auto& r : res.rows) {
    std::printf("level %d  n %-7lld stored %-12lld near %-10lld far %lld\n",
                r.level, static_cast<long long>(r.n),
                static_cast<long long>(r.hierStored),
                static_cast<long long>(r.nearEntries),
                static_cast<long long>(r.farBlocks));
  }
  std::printf("exponents: stored %.4f, time %.4f, dense %.4f\n",
              res.hierStoredExponent, res.hierTimeExponent,
              res.denseStoredExponent);
  return 0;
}

// ---------------------------------------------------------------------------

int runHeatCommand(const Config& cfg, const CommonArgs& args) {
  HeatStudyOptions opt;
  opt.s = readS(cfg);
  opt.alpha = cfg.getDouble("heat.alpha", 2.0);
  opt.target =
      parseErrorTarget(cfg.getString("heat.target", "l2"), "heat.target");
  opt.minLevel = cfg.getInt("heat.min_level", 2);
  opt.maxLevel = cfg.getInt("heat.max_level", 5);
  opt.steps = cfg.getInt("heat.steps", 5);
  opt.dt = requirePositiveDt(cfg, "heat.dt");
  opt.solver =
      parseSolverKind(cfg.getString("solver.kind", "cg"), "solver.kind");
  readSolverOptions(cfg, opt.cg, opt.mg, opt.mgCoarsestLevel);
  if (opt.minLevel < 0 || opt.maxLevel < opt.minLevel || opt.steps < 1)
    throw std::invalid_argument("heat: bad level range or step count");
  if (opt.alpha <= 0.0) throw std::invalid_argument("heat.alpha must be > 0");
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  {
    const DofMap& fine = cache.dofs(opt.s, opt.maxLevel);
    checkProblemSize(true, fine.n, args.allowLarge);
  }

  const HeatStudyResult res = runHeatStudy(cache, opt);

  {
    auto os = openOutput(args.outDir, "heat.csv");
    writeHeatCsv(os, res.rows);
  }
  {
    auto os = openOutput(args.outDir, "solves.csv");
    writeSolveReports(os, res.reports);
  }
  saveEffectiveConfig(cfg, args);

  for (const auto& r : res.rows) {
    std::printf("level %d  n %-7lld dt %.5g  iters mean %.2f max %d\n",
                r.level, static_cast<long long>(r.n), r.dt, r.itersMean,
                r.itersMax);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int runBrusselatorCommand(const Config& cfg, const CommonArgs& args) {
  BrusselatorOptions opt;
  const std::string mode = cfg.getString("brusselator.mode", "spot");
  if (mode == "spot") {
    opt.mode = BrusselatorOptions::Mode::Spot;
  } else if (mode == "stripe") {
    opt.mode = BrusselatorOptions::Mode::Stripe;
    opt.params.b = 6.26;
    opt.params.q = 2.5;
  } else if (mode == "manufactured") {
    opt.mode = BrusselatorOptions::Mode::Manufactured;
  } else {
    throw std::invalid_argument("brusselator.mode: unknown mode '" + mode +
                                "' (use spot, stripe, or manufactured)");
  }
  opt.alpha = cfg.getDouble("brusselator.alpha", 0.75);
  opt.params.eta = cfg.getDouble("brusselator.eta", opt.params.eta);
  opt.params.b = cfg.getDouble("brusselator.b", opt.params.b);
  opt.params.q = cfg.getDouble("brusselator.q", opt.params.q);
  opt.level = cfg.getInt("brusselator.level", 5);
  opt.dt = requirePositiveDt(cfg, "brusselator.dt");
  opt.steps = cfg.getInt("brusselator.steps", 160);
  opt.tEnd = cfg.getDouble("brusselator.t_end", 10.0);
  opt.snapshotEvery = cfg.getInt("brusselator.snapshot_every", 0);
  opt.bumpAmplitude =
      cfg.getDouble("brusselator.bump_amplitude", opt.bumpAmplitude);
  opt.bumpWidth = cfg.getDouble("brusselator.bump_width", opt.bumpWidth);
  opt.noiseAmplitude =
      cfg.getDouble("brusselator.noise_amplitude", opt.noiseAmplitude);
  opt.refLevel = cfg.getInt("brusselator.ref_level", 0);
  opt.cg.tol = cfg.getDouble("solver.cg_tol", opt.cg.tol);
  opt.cg.maxIterations =
      cfg.getInt("solver.cg_max_iterations", opt.cg.maxIterations);
  opt.seed = args.seed;
  opt.outDir = args.outDir;
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0))
    throw std::invalid_argument("brusselator.alpha must lie in (0, 1)");
  if (opt.level < 1 || opt.level > 8)
    throw std::invalid_argument("brusselator.level must lie in 1..8");
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  {
    const DofMap& dm = cache.dofs(opt.alpha, opt.level, true);
    checkProblemSize(true, dm.n, args.allowLarge);
  }

  const BrusselatorResult res = runBrusselator(cache, opt);

  {
    auto os = openOutput(args.outDir, "solves.csv");
    writeSolveReports(os, res.reports);
  }
  saveEffectiveConfig(cfg, args);

  if (opt.mode == BrusselatorOptions::Mode::Manufactured) {
    auto os = openOutput(args.outDir, "errors.txt");
    os << "err_u_l2 = " << res.errUL2 << "\n"
       << "err_v_l2 = " << res.errVL2 << "\n"
       << "err_u_energy = " << res.errUEnergy << "\n"
       << "err_v_energy = " << res.errVEnergy << "\n"
       << "dt = " << res.dt << "\n"
       << "steps = " << res.steps << "\n";
    std::printf("manufactured errors: uL2 %.6g vL2 %.6g uE %.6g vE %.6g\n",
                res.errUL2, res.errVL2, res.errUEnergy, res.errVEnergy);
  } else {
    std::printf("%s run: %d steps, dt %.4g, ring radius %.4f, "
                "u mean %.4g, u std %.4g\n",
                mode.c_str(), res.steps, res.dt, res.ringRadius, res.uMean,
                res.uStd);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int runConditionCommand(const Config& cfg, const CommonArgs& args) {
  ConditionStudyOptions opt;
  opt.s = readS(cfg);
  opt.minLevel = cfg.getInt("condition.min_level", 2);
  opt.maxLevel = cfg.getInt("condition.max_level", 5);
  opt.massShift = cfg.getBool("condition.mass_shift", false);
  opt.alpha = cfg.getDouble("condition.alpha", 2.0);
  opt.target = parseErrorTarget(cfg.getString("condition.target", "l2"),
                                "condition.target");
  opt.lanczosIterations = cfg.getInt("condition.lanczos_iterations", 120);
  opt.seed = args.seed;
  if (opt.minLevel < 0 || opt.maxLevel < opt.minLevel)
    throw std::invalid_argument("condition: bad level range");
  const QuadSettings quad = quadSettingsFromConfig(cfg);
  cfg.requireConsumed();

  StudyCache cache(quad, args.threads);
  {
    const DofMap& fine = cache.dofs(opt.s, opt.maxLevel);
    checkProblemSize(true, fine.n, args.allowLarge);
  }

  const ConditionStudyResult res = runConditionStudy(cache, opt);

  {
    auto os = openOutput(args.outDir, "condition.csv");
    writeConditionCsv(os, res.rows);
  }
  {
    auto os = openOutput(args.outDir, "rates.txt");
    os << "s = " << opt.s << "\n"
       << "mass_shift = " << (opt.massShift ? "true" : "false") << "\n"
       << "kappa_h_exponent = " << res.exponent << "\n";
  }
  saveEffectiveConfig(cfg, args);

  for (const auto& r : res.rows) {
    std::printf("level %d  n %-7lld kappa %.6g  (lambda %.4g .. %.4g)\n",
                r.level, static_cast<long long>(r.n), r.kappa, r.lambdaMin,
                r.lambdaMax);
  }
  std::printf("kappa exponent vs h: %.4f\n", res.exponent);
  return 0;
}

}  // namespace cli
}  // namespace fractfem
