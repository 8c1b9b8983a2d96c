#include "fractfem/duffy.hpp"

#include <cmath>
#include <stdexcept>

namespace fractfem {

int DuffyTables::termCount() const {
  if (kind == PairKind::ElementElement) {
    switch (c) {
      case 3: return 3;
      case 2: return 5;
      case 1: return 2;
    }
  } else {
    switch (c) {
      case 2: return 3;
      case 1: return 2;
    }
  }
  return 0;
}

int DuffyTables::unionSize() const {
  if (kind == PairKind::ElementElement) return 6 - c;
  return 5 - c;
}

double DuffyTables::jacobian(int l, const std::array<double, 4>& eta) const {
  const double e0 = eta[0], e1 = eta[1], e2 = eta[2];
  if (kind == PairKind::ElementElement) {
    switch (c) {
      case 3:
        // The three identical-element subregions cover only half of the
        // product domain; the other half is recovered through the x <-> y
        // symmetry of the integrand, hence the factor 2. Without it the
        // diagonal blocks come out half-sized (check: at s = 0 the three
        // Jacobians integrate to 3/24, while the product domain has
        // measure 1/4).
        return 2.0 * std::pow(e0, 3.0 - 2.0 * s) *
               std::pow(e1, 2.0 - 2.0 * s) * std::pow(e2, 1.0 - 2.0 * s);
      case 2: {
        const double base =
            std::pow(e0, 3.0 - 2.0 * s) * std::pow(e1, 2.0 - 2.0 * s);
        return l == 0 ? base : base * e2;
      }
      case 1:
        return std::pow(e0, 3.0 - 2.0 * s) * e2;
    }
  } else {
    if (c == 2) {
      const double p = interiorOnly ? 2.0 - 2.0 * s : -2.0 * s;
      return std::pow(e0, p) * (1.0 - e0);
    }
    const double base = std::pow(e0, 1.0 - 2.0 * s);
    return l == 0 ? base : base * e1;
  }
  return 0.0;
}

void DuffyTables::psiBar(int l, const std::array<double, 4>& eta,
                         double* out) const {
  const double e1 = eta[1], e2 = eta[2], e3 = eta[3];
  if (kind == PairKind::ElementElement) {
    switch (c) {
      case 3:
        switch (l) {
          case 0: out[0] = -e3;    out[1] = e3 - 1.0;  out[2] = 1.0;       return;
          case 1: out[0] = -1.0;   out[1] = 1.0 - e3;  out[2] = e3;        return;
          case 2: out[0] = e3;     out[1] = -1.0;      out[2] = 1.0 - e3;  return;
        }
        break;
      case 2:
        switch (l) {
          case 0:
            out[0] = -e2;       out[1] = 1.0 - e3;       out[2] = e3;
            out[3] = e2 - 1.0;  return;
          case 1:
            out[0] = -e2 * e3;  out[1] = e2 - 1.0;       out[2] = 1.0;
            out[3] = e2 * e3 - e2;  return;
          case 2:
            out[0] = e2;        out[1] = e2 * e3 - 1.0;  out[2] = 1.0 - e2;
            out[3] = -e2 * e3;  return;
          case 3:
            out[0] = e2 * e3;   out[1] = 1.0 - e2;       out[2] = e2 - e2 * e3;
            out[3] = -1.0;      return;
          case 4:
            out[0] = e2 * e3;   out[1] = e2 - 1.0;       out[2] = 1.0 - e2 * e3;
            out[3] = -e2;       return;
        }
        break;
      case 1:
        if (l == 0) {
          out[0] = e2 - 1.0;  out[1] = 1.0 - e1;       out[2] = e1;
          out[3] = e2 * e3 - e2;  out[4] = -e2 * e3;
        } else {
          out[0] = 1.0 - e2;  out[1] = e2 - e2 * e3;   out[2] = e2 * e3;
          out[3] = e1 - 1.0;  out[4] = -e1;
        }
        return;
    }
  } else {
    if (c == 2) {
      switch (l) {
        case 0: out[0] = -1.0;      out[1] = 1.0 - e1;  out[2] = e1;  return;
        case 1: out[0] = -e1;       out[1] = e1 - 1.0;  out[2] = 1.0; return;
        case 2: out[0] = 1.0 - e1;  out[1] = -1.0;      out[2] = e1;  return;
      }
    } else {
      if (l == 0) {
        out[0] = e2 - 1.0;  out[1] = 1.0 - e1;       out[2] = e1;  out[3] = -e2;
      } else {
        out[0] = 1.0 - e1;  out[1] = e1 - e1 * e2;   out[2] = e1 * e2;
        out[3] = -1.0;
      }
      return;
    }
  }
}

void DuffyTables::phi(int l, const std::array<double, 4>& eta,
                      double* out) const {
  if (kind != PairKind::ElementEdge)
    throw std::logic_error("phi tables exist only for element-edge pairs");
  const double e0 = eta[0], e1 = eta[1], e2 = eta[2];
  if (c == 2) {
    if (interiorOnly) {
      // Only the vertex opposite the boundary edge; a factor eta0 per phi
      // has been absorbed into the jacobian exponent.
      out[0] = 0.0;
      out[1] = 0.0;
      out[2] = (l == 1) ? 1.0 : e1;
      return;
    }
    switch (l) {
      case 0:
        out[0] = 1.0 - e0 - e2 + e0 * e2;
        out[1] = e0 + e2 - e0 * e1 - e0 * e2;
        out[2] = e0 * e1;
        return;
      case 1:
        out[0] = 1.0 - e0 - e2 + e0 * e2;
        out[1] = e2 - e0 * e2;
        out[2] = e0;
        return;
      case 2:
        out[0] = 1.0 - e2 + e0 * e2 - e0 * e1;
        out[1] = e2 - e0 * e2;
        out[2] = e0 * e1;
        return;
    }
  } else {
    if (l == 0) {
      out[0] = 1.0 - e0;
      out[1] = e0 - e0 * e1;
      out[2] = e0 * e1;
    } else {
      out[0] = 1.0 - e0 * e1;
      out[1] = e0 * e1 - e0 * e1 * e2;
      out[2] = e0 * e1 * e2;
    }
  }
}

DuffyTables duffyTables(PairKind kind, int c, double s, bool interiorOnly) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("duffyTables: s must lie in (0,1)");
  if (kind == PairKind::ElementElement) {
    if (c < 1 || c > 3)
      throw std::invalid_argument("duffyTables: element pairs need c in 1..3");
    if (interiorOnly)
      throw std::invalid_argument(
          "duffyTables: interior-only variant applies to element-edge c=2");
  } else {
    if (c < 1 || c > 2)
      throw std::invalid_argument(
          "duffyTables: element-edge pairs need c in 1..2");
    if (interiorOnly && c != 2)
      throw std::invalid_argument(
          "duffyTables: interior-only variant applies to element-edge c=2");
    if (c == 2 && !interiorOnly && s >= 0.5)
      throw std::domain_error(
          "duffyTables: element-edge c=2 entries involving boundary vertices "
          "are singular for s >= 1/2; use the interior-only variant");
  }
  DuffyTables t;
  t.kind = kind;
  t.c = c;
  t.s = s;
  t.interiorOnly = interiorOnly;
  return t;
}

}  // namespace fractfem
