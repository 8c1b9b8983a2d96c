// Gauss rules on [0,1], the reference triangle (conical product), and
// [0,1]^dim tensor cubes, plus the h-dependent quadrature order plan for
// touching / separated element pairs.

#pragma once

#include <array>
#include <vector>

#include "fractfem/geometry.hpp"

namespace fractfem {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

// n-point Gauss-Legendre rule on [0,1]; exact for degree <= 2n-1.
Rule1D gaussLegendre01(int n);

// n-point Gauss-Jacobi rule on [0,1] for the weight x^beta (1-x)^alpha,
// alpha, beta > -1: sum_i w_i f(x_i) ~ int_0^1 x^beta (1-x)^alpha f(x) dx.
// Exact for f of degree <= 2n-1.
Rule1D gaussJacobi01(int n, double alpha, double beta);

struct TriangleRule {
  std::vector<Vec2> nodes;  // on the reference triangle (0,0),(1,0),(0,1)
  std::vector<double> weights;
  int order = 0;
};

// Conical product rule exact for total degree <= order; ceil((order+1)/2)^2
// nodes. Weights sum to 1/2.
TriangleRule simplexGauss(int order);

struct CubeRule {
  int dim = 0;
  int order = 0;
  std::vector<std::array<double, 4>> nodes;
  std::vector<double> weights;
};

// Tensor Gauss-Legendre on [0,1]^dim exact for per-coordinate degree <= order.
CubeRule hypercubeGauss(int order, int dim);

// Quadrature order selection. Touching pairs get |log h|-proportional orders;
// separated pairs get distance-dependent orders that fall to a fixed small
// order beyond cutoffD.
struct OrderPlan {
  double h = 0.0;
  double s = 0.5;
  double ell = 1.5;
  std::array<double, 4> rho = {2.0, 2.0, 2.0, 2.0};
  double cutoffD = 0.0;
  int maxOrder = 30;
  int kT = 2;           // touching element-element
  int kTboundary = 2;   // touching element-edge
  int farOrder = 2;
  int farOrderBoundary = 2;

  int kNT(double d) const;
  int kNTboundary(double d) const;
};

OrderPlan planOrders(double h, double s, double ell,
                     const std::array<double, 4>& rho,
                     double cutoffMultiple = 4.0, int maxOrder = 30);

// Default regularity target for order selection: min(2, 1/2 + 2s).
double defaultEll(double s);

}  // namespace fractfem
