// Singularity-lifting coordinate tables for touching element pairs and
// element/boundary-edge pairs. Each touching configuration (c shared
// vertices) is covered by a small number of tensor-product terms on the unit
// hyper-cube; the Jacobian factor absorbs the kernel singularity so that the
// remaining integrand is smooth.

#pragma once

#include <array>

namespace fractfem {

enum class PairKind { ElementElement, ElementEdge };

// Local vertex numbering conventions (union vertices x_0..x_{unionSize-1}):
//   element-element c=3: K = Ktilde = (0,1,2)
//   element-element c=2: shared edge (0,1); K = (0,1,2), Ktilde = (0,1,3)
//   element-element c=1: shared vertex 0; K = (0,1,2), Ktilde = (0,3,4)
//   element-edge    c=2: e = (0,1) is an edge of K = (0,1,2)
//   element-edge    c=1: shared vertex 0; K = (0,1,2), e = (0,3)
struct DuffyTables {
  PairKind kind = PairKind::ElementElement;
  int c = 3;
  bool interiorOnly = false;  // element-edge c=2 variant usable for s >= 1/2
  double s = 0.5;

  int termCount() const;
  int unionSize() const;

  // Jacobian factor J(l, eta) of term l (0-based), including the kernel
  // power of the radial coordinate.
  double jacobian(int l, const std::array<double, 4>& eta) const;

  // Difference-form coefficients; out[0..unionSize-1]. Sums to zero.
  void psiBar(int l, const std::array<double, 4>& eta, double* out) const;

  // Shape function values on K (element-edge only); out[0..2]. Sums to one
  // in the full tables. The interior-only variant carries only the k=2
  // component (others are set to zero and must not be used).
  void phi(int l, const std::array<double, 4>& eta, double* out) const;
};

// Throws std::domain_error for the element-edge c=2 full table with
// s >= 1/2 (boundary basis functions fall out of the energy space);
// std::invalid_argument for out-of-range c or s.
DuffyTables duffyTables(PairKind kind, int c, double s, bool interiorOnly = false);

}  // namespace fractfem
