#include "fractfem/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace fractfem {

namespace {

double secondsSince(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void fillReport(SolveReport* report, const std::string& solver, int iterations,
                double residual, double seconds) {
  if (!report) return;
  report->solver = solver;
  report->iterations = iterations;
  report->residual = residual;
  report->seconds = seconds;
}

}  // namespace

void writeSolveReports(std::ostream& os, const std::vector<SolveReport>& rows) {
  os << "solver,level,s,dt,iterations,residual,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%d,%.17g,%.6f\n",
                  r.solver.c_str(), r.level, r.s, r.dt, r.iterations,
                  r.residual, r.seconds);
    os << buf;
  }
}

Eigen::VectorXd solveDense(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           SolveReport* report) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::invalid_argument("solveDense: dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solveDense: matrix is not positive definite");
  const Eigen::VectorXd x = llt.solve(b);
  const double bn = b.norm();
  const double rel = bn > 0.0 ? (A * x - b).norm() / bn : (A * x - b).norm();
  if (!(rel <= 1e-10))
    throw std::runtime_error("solveDense: residual check failed, relative "
                             "residual " + std::to_string(rel));
  fillReport(report, "dense", 0, rel, secondsSince(t0));
  return x;
}

Eigen::VectorXd solveCG(const LinearOperator& A, const Eigen::VectorXd& b,
                        const CGOptions& opts, SolveReport* report,
                        const Eigen::VectorXd* x0) {
  const int n = A.size();
  if (b.size() != n) throw std::invalid_argument("solveCG: dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const int maxIter = opts.maxIterations > 0 ? opts.maxIterations : 10 * n;
  const double bn = b.norm();
  Eigen::VectorXd x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r(n), p(n), Ap(n);
  if (x0) {
    A.apply(x, Ap);
    r = b - Ap;
  } else {
    r = b;
  }
  if (bn == 0.0) {
    fillReport(report, "cg", 0, 0.0, secondsSince(t0));
    return Eigen::VectorXd::Zero(n);
  }
  double rel = r.norm() / bn;
  if (rel <= opts.tol) {
    fillReport(report, "cg", 0, rel, secondsSince(t0));
    return x;
  }
  p = r;
  double rr = r.squaredNorm();
  int it = 0;
  while (it < maxIter) {
    A.apply(p, Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw std::runtime_error("solveCG: operator is not positive definite");
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    ++it;
    const double rrNew = r.squaredNorm();
    rel = std::sqrt(rrNew) / bn;
    if (rel <= opts.tol) break;
    p = r + (rrNew / rr) * p;
    rr = rrNew;
  }
  if (rel > opts.tol)
    throw std::runtime_error("solveCG: no convergence within " +
                             std::to_string(maxIter) + " iterations");
  fillReport(report, "cg", it, rel, secondsSince(t0));
  return x;
}

Multigrid::Multigrid(std::vector<MultigridLevel> levels,
                     Eigen::MatrixXd coarseMatrix)
    : levels_(std::move(levels)) {
  if (levels_.empty())
    throw std::invalid_argument("Multigrid: no levels");
  if (levels_.front().fromCoarser != nullptr)
    throw std::invalid_argument("Multigrid: coarsest level has a prolongation");
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const MultigridLevel& lv = levels_[l];
    if (!lv.op) throw std::invalid_argument("Multigrid: missing operator");
    if (lv.diag.size() != lv.op->size())
      throw std::invalid_argument("Multigrid: diagonal size mismatch");
    if (l > 0) {
      const Prolongation* p = lv.fromCoarser;
      if (!p) throw std::invalid_argument("Multigrid: missing prolongation");
      if (p->nFine != lv.op->size() || p->nCoarse != levels_[l - 1].op->size())
        throw std::invalid_argument(
            "Multigrid: levels are not nested (prolongation size mismatch)");
    }
  }
  if (coarseMatrix.rows() != levels_.front().op->size())
    throw std::invalid_argument("Multigrid: coarse matrix size mismatch");
  coarseFactor_.compute(coarseMatrix);
  if (coarseFactor_.info() != Eigen::Success)
    throw std::runtime_error("Multigrid: coarse matrix is not positive definite");
}

int Multigrid::size() const { return levels_.back().op->size(); }

const LinearOperator& Multigrid::fineOp() const { return *levels_.back().op; }

void Multigrid::cycle(const Eigen::VectorXd& b, Eigen::VectorXd& x,
                      double omega, int nu) const {
  vcycle(static_cast<int>(levels_.size()) - 1, b, x, omega, nu);
}

void Multigrid::vcycle(int level, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                       double omega, int nu) const {
  const MultigridLevel& lv = levels_[level];
  if (level == 0) {
    x = coarseFactor_.solve(b);
    return;
  }
  const int n = lv.op->size();
  Eigen::VectorXd r(n);
  for (int k = 0; k < nu; ++k) {
    lv.op->apply(x, r);
    r = b - r;
    x += omega * r.cwiseQuotient(lv.diag);
  }
  lv.op->apply(x, r);
  r = b - r;
  Eigen::VectorXd rc(levels_[level - 1].op->size());
  lv.fromCoarser->applyTranspose(r.data(), rc.data());
  Eigen::VectorXd ec = Eigen::VectorXd::Zero(rc.size());
  vcycle(level - 1, rc, ec, omega, nu);
  Eigen::VectorXd ef(n);
  lv.fromCoarser->apply(ec.data(), ef.data());
  x += ef;
  for (int k = 0; k < nu; ++k) {
    lv.op->apply(x, r);
    r = b - r;
    x += omega * r.cwiseQuotient(lv.diag);
  }
}

Eigen::VectorXd solveMultigrid(const Multigrid& mg, const Eigen::VectorXd& b,
                               const MultigridOptions& opts,
                               SolveReport* report) {
  const int n = mg.size();
  if (b.size() != n)
    throw std::invalid_argument("solveMultigrid: dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const double bn = b.norm();
  if (bn == 0.0) {
    fillReport(report, "mg", 0, 0.0, secondsSince(t0));
    return Eigen::VectorXd::Zero(n);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r(n);
  std::vector<double> hist{1.0};
  int it = 0;
  double rel = 1.0;
  while (it < opts.maxCycles) {
    mg.cycle(b, x, opts.omega, opts.nu);
    ++it;
    mg.fineOp().apply(x, r);
    r = b - r;
    rel = r.norm() / bn;
    if (rel <= opts.tol) {
      fillReport(report, "mg", it, rel, secondsSince(t0));
      return x;
    }
    hist.push_back(rel);
    if (hist.size() >= 6) {
      const double rho = std::pow(
          hist[hist.size() - 1] / hist[hist.size() - 6], 1.0 / 5.0);
      if (rho > opts.stagnationFactor)
        throw std::runtime_error(
            "solveMultigrid: stagnation, contraction factor " +
            std::to_string(rho) + " over the last five cycles");
    }
  }
  throw std::runtime_error("solveMultigrid: no convergence within " +
                           std::to_string(opts.maxCycles) + " cycles");
}

ConditionEstimate estimateCondition(const LinearOperator& A, int maxIterations,
                                    unsigned seed) {
  const int n = A.size();
  if (n == 0) throw std::invalid_argument("estimateCondition: empty operator");
  const int k = std::min(maxIterations, n);
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd V(n, k + 1);
  for (int i = 0; i < n; ++i) V(i, 0) = gauss(rng);
  V.col(0).normalize();
  Eigen::VectorXd alpha(k), beta(k);
  Eigen::VectorXd w(n);
  int steps = 0;
  for (int j = 0; j < k; ++j) {
    A.apply(V.col(j), w);
    alpha[j] = V.col(j).dot(w);
    w -= alpha[j] * V.col(j);
    if (j > 0) w -= beta[j - 1] * V.col(j - 1);
    // full reorthogonalization for numerical robustness
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) w -= V.col(i).dot(w) * V.col(i);
    }
    const double nb = w.norm();
    steps = j + 1;
    if (nb < 1e-13) {
      beta[j] = 0.0;
      break;
    }
    beta[j] = nb;
    if (j + 1 <= k) V.col(j + 1) = w / nb;
  }
  Eigen::VectorXd diag = alpha.head(steps);
  Eigen::VectorXd sub =
      steps > 1 ? Eigen::VectorXd(beta.head(steps - 1)) : Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("estimateCondition: tridiagonal solve failed");
  ConditionEstimate out;
  out.lambdaMin = es.eigenvalues().minCoeff();
  out.lambdaMax = es.eigenvalues().maxCoeff();
  out.iterations = steps;
  if (!(out.lambdaMin > 0.0))
    throw std::runtime_error(
        "estimateCondition: nonpositive Ritz value; operator not SPD?");
  out.kappa = out.lambdaMax / out.lambdaMin;
  return out;
}

}  // namespace fractfem
