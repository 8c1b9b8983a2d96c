#include "fractfem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "fractfem/gammafn.hpp"
#include "fractfem/quadrature.hpp"

namespace fractfem {

double getoorPrefactor(double s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw std::invalid_argument("getoorPrefactor: s must be in (0,1)");
  }
  const double g = gammaFn(1.0 + s);
  return std::pow(2.0, -2.0 * s) / (g * g);
}

std::function<double(Vec2)> getoorSolution(double s) {
  const double c = getoorPrefactor(s);
  return [c, s](Vec2 p) {
    const double r2 = 1.0 - sqNorm(p);
    return r2 > 0.0 ? c * std::pow(r2, s) : 0.0;
  };
}

Eigen::VectorXd interpolate(const TriangleMesh& mesh, const DofMap& dofs,
                            const std::function<double(Vec2)>& u) {
  Eigen::VectorXd v(dofs.n);
  for (int d = 0; d < dofs.n; ++d) {
    v[d] = u(mesh.vertices[static_cast<std::size_t>(dofs.vertexOfDof[
        static_cast<std::size_t>(d)])]);
  }
  return v;
}

namespace {

double errorL2Once(const TriangleMesh& mesh, const DofMap& dofs,
                   const Eigen::VectorXd& uh,
                   const std::function<double(Vec2)>& exact, int order) {
  const TriangleRule rule = simplexGauss(order);
  const std::size_t nq = rule.nodes.size();
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Triangle K = mesh.triangleCoords(static_cast<int>(t));
    double nodal[3];
    for (int a = 0; a < 3; ++a) {
      const int d = dofs.dofOfVertex[static_cast<std::size_t>(tri[a])];
      nodal[a] = d >= 0 ? uh[d] : 0.0;
    }
    const double area2 = 2.0 * triangleArea(K);
    double acc = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      const double xi = rule.nodes[q].x;
      const double et = rule.nodes[q].y;
      const Vec2 p = K[0] + xi * (K[1] - K[0]) + et * (K[2] - K[0]);
      const double vh = (1.0 - xi - et) * nodal[0] + xi * nodal[1] +
                        et * nodal[2];
      const double diff = vh - exact(p);
      acc += rule.weights[q] * diff * diff;
    }
    total += area2 * acc;
  }
  return std::sqrt(total);
}

}  // namespace

double errorL2(const TriangleMesh& mesh, const DofMap& dofs,
               const Eigen::VectorXd& uh,
               const std::function<double(Vec2)>& exact, int order) {
  if (uh.size() != dofs.n) {
    throw std::invalid_argument("errorL2: vector length does not match DoFs");
  }
  double prev = errorL2Once(mesh, dofs, uh, exact, order);
  for (int k = 0; k < 3; ++k) {
    const int doubled = std::min(2 * order, 30);
    if (doubled == order) break;
    order = doubled;
    const double next = errorL2Once(mesh, dofs, uh, exact, order);
    const double scale = std::max(next, 1e-300);
    if (std::abs(next - prev) <= 5e-3 * scale) return next;
    prev = next;
  }
  return prev;
}

Eigen::VectorXd prolongateChain(const std::vector<const Prolongation*>& chain,
                                const Eigen::VectorXd& coarse) {
  Eigen::VectorXd cur = coarse;
  for (const Prolongation* p : chain) {
    if (cur.size() != p->nCoarse) {
      throw std::invalid_argument("prolongateChain: size mismatch in chain");
    }
    Eigen::VectorXd next(p->nFine);
    p->apply(cur.data(), next.data());
    cur = std::move(next);
  }
  return cur;
}

double errorEnergy(const LinearOperator& fineOp,
                   const Eigen::VectorXd& fineReference,
                   const std::vector<const Prolongation*>& chain,
                   const Eigen::VectorXd& coarse) {
  const Eigen::VectorXd up = prolongateChain(chain, coarse);
  if (up.size() != fineReference.size() ||
      up.size() != static_cast<Eigen::Index>(fineOp.size())) {
    throw std::invalid_argument("errorEnergy: dimension mismatch");
  }
  const Eigen::VectorXd e = fineReference - up;
  const double q = quadraticForm(fineOp, e);
  if (q < -1e-10 * std::max(1.0, e.squaredNorm())) {
    throw std::runtime_error("errorEnergy: quadratic form is negative");
  }
  return std::sqrt(std::max(q, 0.0));
}

double fitRate(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 3) {
    throw std::invalid_argument("fitRate: need at least 3 matching samples");
  }
  const int n = static_cast<int>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    if (!(h[static_cast<std::size_t>(i)] > 0.0) ||
        !(err[static_cast<std::size_t>(i)] > 0.0)) {
      throw std::invalid_argument("fitRate: samples must be positive");
    }
    const double x = std::log(h[static_cast<std::size_t>(i)]);
    const double y = std::log(err[static_cast<std::size_t>(i)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14) {
    throw std::invalid_argument("fitRate: degenerate abscissae");
  }
  return (n * sxy - sx * sy) / denom;
}

void writeConvergenceSeries(std::ostream& os,
                            const std::vector<ConvergenceRow>& rows) {
  os << "level,h,n,errL2,errEnergy,assembly_s,solve_s,stored_reals\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%lld,%.17g,%.17g,%.6f,%.6f,%lld\n",
                  r.level, r.h, static_cast<long long>(r.n), r.errL2,
                  r.errEnergy, r.assemblySeconds, r.solveSeconds,
                  static_cast<long long>(r.storedReals));
    os << buf;
  }
}

}  // namespace fractfem
