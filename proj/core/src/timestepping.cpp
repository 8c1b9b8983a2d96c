#include "fractfem/timestepping.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fractfem {

void validateTableau(const ButcherPair& tab) {
  const int s = tab.stages;
  if (s < 1 || tab.aIm.rows() != s || tab.aIm.cols() != s ||
      tab.aEx.rows() != s || tab.aEx.cols() != s || tab.c.size() != s ||
      tab.bIm.size() != s || tab.bEx.size() != s) {
    throw std::invalid_argument("tableau: inconsistent dimensions");
  }
  const double tol = 1e-12;
  for (int i = 0; i < s; ++i) {
    for (int j = i + 1; j < s; ++j) {
      if (std::abs(tab.aIm(i, j)) > tol) {
        throw std::invalid_argument("tableau: implicit part not triangular");
      }
    }
    for (int j = i; j < s; ++j) {
      if (std::abs(tab.aEx(i, j)) > tol) {
        throw std::invalid_argument(
            "tableau: explicit part not strictly triangular");
      }
    }
    if (std::abs(tab.aIm.row(i).sum() - tab.c[i]) > tol ||
        std::abs(tab.aEx.row(i).sum() - tab.c[i]) > tol) {
      throw std::invalid_argument("tableau: row sum differs from abscissa " +
                                  std::to_string(i));
    }
  }
  if ((tab.bIm.transpose() - tab.aIm.row(s - 1)).cwiseAbs().maxCoeff() > tol ||
      (tab.bEx.transpose() - tab.aEx.row(s - 1)).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("tableau: pair is not stiffly accurate");
  }
}

ButcherPair kotoPair() {
  ButcherPair t;
  t.stages = 4;
  t.aIm = Eigen::MatrixXd::Zero(4, 4);
  t.aEx = Eigen::MatrixXd::Zero(4, 4);
  t.aIm.row(1) << 0.0, 1.0, 0.0, 0.0;
  t.aIm.row(2) << 0.0, -0.5, 1.0, 0.0;
  t.aIm.row(3) << 0.0, -1.0, 1.0, 1.0;
  t.aEx.row(1) << 1.0, 0.0, 0.0, 0.0;
  t.aEx.row(2) << 0.5, 0.0, 0.0, 0.0;
  t.aEx.row(3) << 0.0, 0.0, 1.0, 0.0;
  t.c = Eigen::Vector4d(0.0, 1.0, 0.5, 1.0);
  t.bIm = Eigen::Vector4d(0.0, -1.0, 1.0, 1.0);
  t.bEx = Eigen::Vector4d(0.0, 0.0, 1.0, 0.0);
  validateTableau(t);
  return t;
}

double chooseTimestep(double h, double s, double alpha, ErrorTarget target) {
  if (!(h > 0.0) || !(s > 0.0 && s < 1.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("chooseTimestep: invalid arguments");
  }
  const double p = target == ErrorTarget::L2
                       ? std::min(2.0, 1.0 + 2.0 * s) / (2.0 * alpha)
                       : 1.0 / (2.0 * alpha);
  return std::pow(h, p);
}

Eigen::VectorXd stepBackwardEuler(const Eigen::SparseMatrix<double>& M,
                                  const LinearOperator& A, double dt,
                                  const Eigen::VectorXd& u0,
                                  const Eigen::VectorXd& f,
                                  const CGOptions& cg, SolveReport* report) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("stepBackwardEuler: dt must be positive");
  }
  const int n = A.size();
  if (M.rows() != n || u0.size() != n || f.size() != n) {
    throw std::invalid_argument("stepBackwardEuler: dimension mismatch");
  }
  CallbackOperator sys(n,
                       [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
                         A.apply(x, y);
                         y *= dt;
                         y.noalias() += M * x;
                       });
  const Eigen::VectorXd rhs = M * u0 + dt * f;
  Eigen::VectorXd x = solveCG(sys, rhs, cg, report, &u0);
  if (report) report->dt = dt;
  return x;
}

void brusselatorReaction(const BrusselatorParams& p, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& v, Eigen::VectorXd& ru,
                         Eigen::VectorXd& rv) {
  const auto n = u.size();
  ru.resize(n);
  rv.resize(n);
  const double invEta2 = 1.0 / (p.eta * p.eta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ui = u[i];
    const double vi = v[i];
    const double shared = p.b * ui + p.q * p.q * vi + (p.b / p.q) * ui * ui +
                          2.0 * p.q * ui * vi + ui * ui * vi;
    ru[i] = shared - ui;
    rv[i] = -shared * invEta2;
  }
}

IMEXStepper::IMEXStepper(ButcherPair tableau, const IMEXSystem& sys, double dt,
                         CGOptions cg)
    : tab_(std::move(tableau)), sys_(sys), dt_(dt), cg_(cg) {
  validateTableau(tab_);
  if (!(dt_ > 0.0)) {
    throw std::invalid_argument("IMEXStepper: dt must be positive");
  }
  if (sys_.mass == nullptr || sys_.lumped == nullptr ||
      sys_.stiffness == nullptr || !sys_.reaction) {
    throw std::invalid_argument("IMEXStepper: incomplete system");
  }
  const int n = sys_.stiffness->size();
  if (sys_.mass->rows() != n || sys_.lumped->size() != n) {
    throw std::invalid_argument("IMEXStepper: dimension mismatch");
  }
  if (std::abs(tab_.aIm(0, 0)) > 1e-12) {
    throw std::invalid_argument(
        "IMEXStepper: first stage must be explicit (aIm(0,0) == 0)");
  }
}

void IMEXStepper::step(double t, Eigen::VectorXd& u, Eigen::VectorXd& v,
                       std::vector<SolveReport>* reports) {
  const int S = tab_.stages;
  const int n = sys_.stiffness->size();
  const Eigen::SparseMatrix<double>& M = *sys_.mass;
  const Eigen::VectorXd& Ml = *sys_.lumped;
  const LinearOperator& A = *sys_.stiffness;

  // Per-stage values, stiffness applications, and lumped reactions.
  std::vector<std::array<Eigen::VectorXd, 2>> stageVal(S), stageAw(S),
      stageReact(S);
  const Eigen::VectorXd mu = M * u;
  const Eigen::VectorXd mv = M * v;

  Eigen::VectorXd ru(n), rv(n), rhs(n), tmp(n);
  for (int i = 0; i < S; ++i) {
    if (i == 0) {
      stageVal[0] = {u, v};
    } else {
      for (int field = 0; field < 2; ++field) {
        const double d = sys_.diffusion[static_cast<std::size_t>(field)];
        rhs = field == 0 ? mu : mv;
        for (int j = 0; j < i; ++j) {
          const double ce = tab_.aEx(i, j);
          const double ci = tab_.aIm(i, j);
          if (ce != 0.0) {
            rhs.noalias() +=
                (dt_ * ce) * stageReact[j][static_cast<std::size_t>(field)];
          }
          if (ci != 0.0) {
            rhs.noalias() -=
                (dt_ * ci * d) * stageAw[j][static_cast<std::size_t>(field)];
          }
        }
        const double gamma = dt_ * tab_.aIm(i, i) * d;
        CallbackOperator sys(n, [&](const Eigen::VectorXd& x,
                                    Eigen::VectorXd& y) {
          A.apply(x, y);
          y *= gamma;
          y.noalias() += M * x;
        });
        SolveReport rep;
        const Eigen::VectorXd& warm =
            stageVal[i - 1][static_cast<std::size_t>(field)];
        try {
          stageVal[i][static_cast<std::size_t>(field)] =
              solveCG(sys, rhs, cg_, &rep, &warm);
        } catch (const std::exception& e) {
          throw std::runtime_error("IMEX stage " + std::to_string(i) +
                                   " field " + std::to_string(field) + ": " +
                                   e.what());
        }
        if (reports) {
          rep.dt = dt_;
          reports->push_back(rep);
        }
      }
    }
    // Data needed by later stages.
    bool needAw = false, needReact = false;
    for (int k = i + 1; k < S; ++k) {
      if (tab_.aIm(k, i) != 0.0) needAw = true;
      if (tab_.aEx(k, i) != 0.0) needReact = true;
    }
    if (needAw) {
      for (int field = 0; field < 2; ++field) {
        A.apply(stageVal[i][static_cast<std::size_t>(field)], tmp);
        stageAw[i][static_cast<std::size_t>(field)] = tmp;
      }
    }
    if (needReact) {
      const double ti = t + tab_.c[i] * dt_;
      sys_.reaction(ti, stageVal[i][0], stageVal[i][1], ru, rv);
      stageReact[i][0] = Ml.cwiseProduct(ru);
      stageReact[i][1] = Ml.cwiseProduct(rv);
      if (sys_.forcing) {
        sys_.forcing(ti, ru, rv);
        stageReact[i][0] += ru;
        stageReact[i][1] += rv;
      }
    }
  }
  // Stiffly accurate: the last stage is the new state.
  u = std::move(stageVal[S - 1][0]);
  v = std::move(stageVal[S - 1][1]);
}

}  // namespace fractfem
