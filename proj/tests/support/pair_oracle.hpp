// Brute-force reference values for the local singular integrals, used to
// validate the transformed quadrature tables. The inner integral over the
// second element is reduced to closed-form radial primitives along rays, the
// angular and outer integrals use geometrically graded Gauss rules. This is
// slow but relies on nothing from the production assembly path.

#pragma once

#include <Eigen/Dense>

#include <array>

#include "fractfem/geometry.hpp"

namespace fractfem {
namespace oracle {

// Accuracy knobs. The defaults give roughly 1e-11 .. 1e-13 relative accuracy
// on well-shaped pairs; the reduced preset trades that down to ~1e-8 for a
// severalfold speedup, still far below the tolerances it is used to check.
struct OracleSettings {
  int depth = 36;       // geometric grading depth of the outer integrals
  int outerOrder = 12;  // Gauss points per graded cell, outer direction
  int innerOrder = 8;   // Gauss points per graded cell, second direction
  int thetaDepth = 11;  // grading depth of the angular inner integral
};

inline OracleSettings reducedSettings() { return {24, 10, 6, 9}; }

// I[a][b] = int_K int_Kt (phi_a(x)-phi_a(y)) (phi_b(x)-phi_b(y))
//                        |x-y|^(-2-2s) dy dx
// over the P1 hat functions of the union vertex set. The union slot of each
// triangle vertex is given by locK / locKt (matching PairLocal), so results
// compare entry by entry against PairAssembler::pair(K, Kt).a up to the
// C(d,s)/2 prefactor.
Eigen::Matrix<double, 6, 6> pairIntegral(const Triangle& K, const Triangle& Kt,
                                         const std::array<int, 3>& locK,
                                         const std::array<int, 3>& locKt,
                                         int unionSize, double s,
                                         const OracleSettings& acc = {});

// B[a][b] = int_K phi_a(x) phi_b(x) int_e n.(x-y) |x-y|^(-2-2s) ds_y dx
// with n the left unit normal of the directed edge e0 -> e1 and phi the hat
// functions of K. Compares against PairAssembler::boundary(K, e0, e1) up to
// the C(d,s)/(2s) prefactor. For s >= 1/2 only entries between functions
// vanishing on the edge are finite; the caller must restrict the comparison.
Eigen::Matrix3d elementEdgeIntegral(const Triangle& K, Vec2 e0, Vec2 e1,
                                    double s, const OracleSettings& acc = {});

}  // namespace oracle
}  // namespace fractfem
