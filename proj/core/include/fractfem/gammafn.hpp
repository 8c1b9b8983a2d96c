// Gamma function and the normalization constant of the integral fractional
// Laplacian.

#pragma once

namespace fractfem {

// Gamma(x) for x in (0, 3.5], via a Lanczos approximation (g = 7, 9 terms).
// Relative error below 1e-13 on that interval.
double gammaFn(double x);

// Normalization constant of the integral fractional Laplacian,
//   C(d, s) = 2^{2s} s Gamma(s + d/2) / (pi^{d/2} Gamma(1 - s)).
double fracLaplaceNormalization(int d, double s);

}  // namespace fractfem
