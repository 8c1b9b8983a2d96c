#include "fractfem/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fractfem/gammafn.hpp"

namespace fractfem {

namespace {

// Golub-Welsch on the symmetric tridiagonal Jacobi matrix for the weight
// (1-x)^alpha (1+x)^beta on [-1,1], then map to [0,1]. The [0,1] weight is
// x^beta (1-x)^alpha.
Rule1D jacobiRuleMapped(int n, double alpha, double beta) {
  if (n < 1) throw std::invalid_argument("jacobi rule needs n >= 1");
  if (alpha <= -1.0 || beta <= -1.0)
    throw std::invalid_argument("jacobi weight exponents must exceed -1");

  Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 1);
  const double ab = alpha + beta;
  diag[0] = (beta - alpha) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    const double t = 2.0 * k + ab;
    diag[k] = (beta * beta - alpha * alpha) / (t * (t + 2.0));
  }
  if (n > 1) {
    sub[0] = std::sqrt(4.0 * (1.0 + alpha) * (1.0 + beta) /
                       ((ab + 2.0) * (ab + 2.0) * (ab + 3.0)));
    for (int k = 2; k < n; ++k) {
      const double t = 2.0 * k + ab;
      sub[k - 1] = std::sqrt(4.0 * k * (k + alpha) * (k + beta) * (k + ab) /
                             (t * t * (t + 1.0) * (t - 1.0)));
    }
  }

  // Total mass of the [-1,1] weight.
  const double mu0 = std::pow(2.0, ab + 1.0) * gammaFn(alpha + 1.0) *
                     gammaFn(beta + 1.0) / gammaFn(ab + 2.0);

  Rule1D rule;
  rule.x.resize(n);
  rule.w.resize(n);
  if (n == 1) {
    rule.x[0] = 0.5 * (diag[0] + 1.0);
    rule.w[0] = mu0 * std::pow(2.0, -(ab + 1.0));
    return rule;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub.head(n - 1),
                            Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("jacobi rule eigen decomposition failed");
  const double scale = mu0 * std::pow(2.0, -(ab + 1.0));
  for (int i = 0; i < n; ++i) {
    rule.x[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
    const double q0 = es.eigenvectors()(0, i);
    rule.w[i] = scale * q0 * q0;
  }
  return rule;
}

int pointsForOrder(int order) { return (order + 2) / 2; }

int ceilPositive(double v) { return static_cast<int>(std::ceil(v)); }

int clampOrder(double raw, int lo, int hi, bool* overflowed) {
  int k = ceilPositive(raw);
  if (k > hi) {
    if (overflowed) *overflowed = true;
    k = hi;
  }
  if (k < lo) k = lo;
  return k;
}

}  // namespace

Rule1D gaussLegendre01(int n) { return jacobiRuleMapped(n, 0.0, 0.0); }

Rule1D gaussJacobi01(int n, double alpha, double beta) {
  return jacobiRuleMapped(n, alpha, beta);
}

TriangleRule simplexGauss(int order) {
  if (order < 1 || order > 30)
    throw std::invalid_argument("simplexGauss order must be in 1..30");
  const int n = pointsForOrder(order);
  // x = u, y = v(1-u) maps [0,1]^2 with weight (1-u) onto the triangle.
  const Rule1D ru = gaussJacobi01(n, 1.0, 0.0);
  const Rule1D rv = gaussLegendre01(n);
  TriangleRule rule;
  rule.order = order;
  rule.nodes.reserve(static_cast<size_t>(n) * n);
  rule.weights.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = ru.x[i];
      const double v = rv.x[j];
      rule.nodes.push_back({u, v * (1.0 - u)});
      rule.weights.push_back(ru.w[i] * rv.w[j]);
    }
  }
  return rule;
}

CubeRule hypercubeGauss(int order, int dim) {
  if (dim < 1 || dim > 4)
    throw std::invalid_argument("hypercubeGauss dim must be in 1..4");
  if (order < 1 || order > 30)
    throw std::invalid_argument("hypercubeGauss order must be in 1..30");
  const int n = pointsForOrder(order);
  const Rule1D r = gaussLegendre01(n);
  CubeRule rule;
  rule.dim = dim;
  rule.order = order;
  int total = 1;
  for (int d = 0; d < dim; ++d) total *= n;
  rule.nodes.reserve(total);
  rule.weights.reserve(total);
  std::array<int, 4> idx = {0, 0, 0, 0};
  for (int flat = 0; flat < total; ++flat) {
    std::array<double, 4> node = {0.0, 0.0, 0.0, 0.0};
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      node[d] = r.x[idx[d]];
      w *= r.w[idx[d]];
    }
    rule.nodes.push_back(node);
    rule.weights.push_back(w);
    for (int d = 0; d < dim; ++d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return rule;
}

int OrderPlan::kNT(double d) const {
  if (d >= cutoffD) return farOrder;
  const double logH = std::abs(std::log(h));
  const double r = std::max(d / h, 1.0);
  const double num = (0.5 * (ell - s) + 1.0 + s) * logH - s * std::log(r);
  const double den = std::log(r) + std::log(rho[1]);
  int k = ceilPositive(num / den);
  if (k < farOrder) k = farOrder;
  if (k > maxOrder) k = maxOrder;
  return k;
}

int OrderPlan::kNTboundary(double d) const {
  if (d >= cutoffD) return farOrderBoundary;
  const double logH = std::abs(std::log(h));
  const double r = std::max(d / h, 1.0);
  const double num = (0.5 * (ell - s) + 0.5 + s) * logH - s * std::log(r);
  const double den = std::log(r) + std::log(rho[3]);
  int k = ceilPositive(num / den);
  if (k < farOrderBoundary) k = farOrderBoundary;
  if (k > maxOrder) k = maxOrder;
  return k;
}

OrderPlan planOrders(double h, double s, double ell,
                     const std::array<double, 4>& rho, double cutoffMultiple,
                     int maxOrder) {
  if (!(h > 0.0)) throw std::invalid_argument("planOrders needs h > 0");
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("planOrders needs s in (0,1)");
  for (double r : rho)
    if (!(r > 1.0))
      throw std::invalid_argument("planOrders needs rho factors > 1");

  OrderPlan plan;
  plan.h = h;
  plan.s = s;
  plan.ell = ell;
  plan.rho = rho;
  plan.cutoffD = cutoffMultiple * h;
  plan.maxOrder = maxOrder;

  const double logH = std::abs(std::log(h));
  bool overflowed = false;
  plan.kT = clampOrder((ell + s + 2.0) / (2.0 * std::log(rho[0])) * logH, 2,
                       maxOrder, &overflowed);
  plan.kTboundary = clampOrder(
      (ell + s + 1.0) / (2.0 * std::log(rho[2])) * logH, 2, maxOrder,
      &overflowed);
  plan.farOrder = std::max(1, ceilPositive(0.5 * (ell - s) + 1.0));
  plan.farOrderBoundary = std::max(1, ceilPositive(0.5 * (ell - s) + 0.5));
  if (overflowed)
    std::fprintf(stderr,
                 "planOrders: requested order above cap %d for h=%g, s=%g; "
                 "clamping\n",
                 maxOrder, h, s);
  return plan;
}

double defaultEll(double s) { return std::min(2.0, 0.5 + 2.0 * s); }

}  // namespace fractfem
