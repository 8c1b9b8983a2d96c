// Implicit-explicit Runge-Kutta stepping for semi-discrete systems
//   M du/dt = -d * A u + (lumped mass) .* reaction(t, u, v)
// with the stiff diffusion treated implicitly and the reaction explicitly,
// plus a plain backward Euler step and timestep selection rules.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <vector>

#include "fractfem/operator.hpp"
#include "fractfem/solvers.hpp"

namespace fractfem {

// Paired implicit (lower triangular) and explicit (strictly lower triangular)
// tableaus over shared abscissae.
struct ButcherPair {
  int stages = 0;
  Eigen::MatrixXd aIm;
  Eigen::MatrixXd aEx;
  Eigen::VectorXd c;
  Eigen::VectorXd bIm;
  Eigen::VectorXd bEx;
};

// Throws unless the triangular structure is right, every row of both parts
// sums to its abscissa, and the pair is stiffly accurate (weights equal the
// last stage rows).
void validateTableau(const ButcherPair& tab);

// Second order, four stage, stiffly accurate pair with implicit stage
// coefficient 1 on stages 2..4.
ButcherPair kotoPair();

enum class ErrorTarget { L2, Energy };

// dt = h^p with p = min(2, 1+2s)/(2*alpha) for the L2 target and
// p = 1/(2*alpha) for the energy target, balancing the order-2 time error
// against the spatial error of the fractional problem of order s stepped
// with operator power alpha.
double chooseTimestep(double h, double s, double alpha, ErrorTarget target);

// One backward Euler step: (M + dt A) u1 = M u0 + dt f, solved by CG warm
// started from u0.
Eigen::VectorXd stepBackwardEuler(const Eigen::SparseMatrix<double>& M,
                                  const LinearOperator& A, double dt,
                                  const Eigen::VectorXd& u0,
                                  const Eigen::VectorXd& f,
                                  const CGOptions& cg = {},
                                  SolveReport* report = nullptr);

struct BrusselatorParams {
  double eta = 0.2;
  double b = 1.22;
  double q = 0.1;
};

// Reaction terms of the rescaled two-species model in perturbation variables:
//   ru =  (b-1) u + q^2 v + (b/q) u^2 + 2 q u v + u^2 v
//   rv = -(b u + q^2 v + (b/q) u^2 + 2 q u v + u^2 v) / eta^2
// so that ru + eta^2 rv = -u.
void brusselatorReaction(const BrusselatorParams& p, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& v, Eigen::VectorXd& ru,
                         Eigen::VectorXd& rv);

// Coupled two-field system data. The reaction callback receives the stage
// time and nodal stage values and fills nodal rates; the reaction enters the
// scheme through the lumped mass. The optional forcing callback fills
// already-integrated load vectors (added to the explicit part as is).
struct IMEXSystem {
  const Eigen::SparseMatrix<double>* mass = nullptr;
  const Eigen::VectorXd* lumped = nullptr;
  const LinearOperator* stiffness = nullptr;
  std::array<double, 2> diffusion = {1.0, 1.0};
  std::function<void(double t, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& v, Eigen::VectorXd& ru,
                     Eigen::VectorXd& rv)>
      reaction;
  std::function<void(double t, Eigen::VectorXd& fu, Eigen::VectorXd& fv)>
      forcing;
};

class IMEXStepper {
 public:
  IMEXStepper(ButcherPair tableau, const IMEXSystem& sys, double dt,
              CGOptions cg = {});

  // Advance both fields from time t by one step; appends one SolveReport per
  // implicit stage solve when reports is given.
  void step(double t, Eigen::VectorXd& u, Eigen::VectorXd& v,
            std::vector<SolveReport>* reports = nullptr);

  double dt() const { return dt_; }

 private:
  ButcherPair tab_;
  IMEXSystem sys_;
  double dt_;
  CGOptions cg_;
};

}  // namespace fractfem
