#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "qlp/types.hpp"

namespace qlp {

/// A deterministic discrete-time plant x' = f(x, u), seen only through its
/// step map. The learning algorithms never inspect anything else.
struct Plant {
  int state_dim = 0;
  int input_dim = 0;
  std::function<VectorXd(const VectorXd&, const VectorXd&)> step;

  VectorXd operator()(const VectorXd& x, const VectorXd& u) const;
};

/// Nonnegative stage cost l(x, u), also opaque to the algorithms.
struct StageCost {
  std::function<double(const VectorXd&, const VectorXd&)> eval;

  double operator()(const VectorXd& x, const VectorXd& u) const;
};

/// x' = A x + B u.
template <typename DerivedA, typename DerivedB, typename DerivedX,
          typename DerivedU>
Vector<typename DerivedX::Scalar> lti_step(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedU>& u) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || x.size() != A.rows() ||
      u.size() != B.cols()) {
    throw std::invalid_argument(
        "lti_step: dimension mismatch (A " + std::to_string(A.rows()) + "x" +
        std::to_string(A.cols()) + ", B " + std::to_string(B.rows()) + "x" +
        std::to_string(B.cols()) + ", x " + std::to_string(x.size()) +
        ", u " + std::to_string(u.size()) + ")");
  }
  return A * x + B * u;
}

/// The two-state benchmark
///   x1' = (x1 + x2^2 + u) cos(x2)
///   x2' = 0.5 (x1^2 + x2 + u) sin(x2)
template <typename DerivedX, typename DerivedU>
Vector<typename DerivedX::Scalar> nonlinear2d_step(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedU>& u) {
  using std::cos;
  using std::sin;
  if (x.size() != 2 || u.size() != 1) {
    throw std::invalid_argument("nonlinear2d_step: expected x in R^2, u in R");
  }
  if (!x.allFinite() || !u.allFinite()) {
    throw std::invalid_argument("nonlinear2d_step: non-finite input");
  }
  const auto x1 = x(0);
  const auto x2 = x(1);
  const auto v = u(0);
  Vector<typename DerivedX::Scalar> next(2);
  next(0) = (x1 + x2 * x2 + v) * cos(x2);
  next(1) = 0.5 * (x1 * x1 + x2 + v) * sin(x2);
  return next;
}

/// x'Ex + u'Fu. Throws if the weights make the value negative.
double quadratic_cost(const VectorXd& x, const VectorXd& u, const MatrixXd& E,
                      const MatrixXd& F);

/// ln(x'Ex + exp(x'Ex) u'Fu + 1).
double nonquadratic_cost(const VectorXd& x, const VectorXd& u,
                         const MatrixXd& E, const MatrixXd& F);

Plant make_lti_plant(MatrixXd A, MatrixXd B);
Plant make_nonlinear2d_plant();
StageCost make_quadratic_cost(MatrixXd E, MatrixXd F);
StageCost make_nonquadratic_cost(MatrixXd E, MatrixXd F);

/// The open-loop unstable four-state LTI benchmark.
MatrixXd lti4d_A();
MatrixXd lti4d_B();

}  // namespace qlp
