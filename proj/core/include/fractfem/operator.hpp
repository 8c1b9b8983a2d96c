// Minimal operator abstraction shared by solvers, error measurement, and the
// clustered matvec.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>

namespace fractfem {

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual int size() const = 0;
  virtual void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(size());
    apply(x, y);
    return y;
  }
};

class DenseOperator : public LinearOperator {
 public:
  Eigen::MatrixXd A;

  DenseOperator() = default;
  explicit DenseOperator(Eigen::MatrixXd m) : A(std::move(m)) {}

  int size() const override { return static_cast<int>(A.rows()); }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
    y.noalias() = A * x;
  }
};

class CallbackOperator : public LinearOperator {
 public:
  using Fn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

  CallbackOperator(int n, Fn fn) : n_(n), fn_(std::move(fn)) {}

  int size() const override { return n_; }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
    fn_(x, y);
  }

 private:
  int n_;
  Fn fn_;
};

inline double quadraticForm(const LinearOperator& op, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(op.size());
  op.apply(x, y);
  return x.dot(y);
}

}  // namespace fractfem
