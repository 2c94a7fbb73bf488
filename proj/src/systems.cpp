#include "qlp/systems.hpp"

#include <utility>

namespace qlp {

VectorXd Plant::operator()(const VectorXd& x, const VectorXd& u) const {
  if (x.size() != state_dim || u.size() != input_dim) {
    throw std::invalid_argument("Plant: expected x in R^" +
                                std::to_string(state_dim) + ", u in R^" +
                                std::to_string(input_dim));
  }
  return step(x, u);
}

double StageCost::operator()(const VectorXd& x, const VectorXd& u) const {
  return eval(x, u);
}

namespace {

void check_weights(const VectorXd& x, const VectorXd& u, const MatrixXd& E,
                   const MatrixXd& F, const char* who) {
  if (E.rows() != x.size() || E.cols() != x.size() || F.rows() != u.size() ||
      F.cols() != u.size()) {
    throw std::invalid_argument(std::string(who) +
                                ": weight dimensions do not match (x, u)");
  }
}

}  // namespace

double quadratic_cost(const VectorXd& x, const VectorXd& u, const MatrixXd& E,
                      const MatrixXd& F) {
  check_weights(x, u, E, F, "quadratic_cost");
  const double value = x.dot(E * x) + u.dot(F * u);
  if (value < 0.0) {
    throw std::domain_error(
        "quadratic_cost: negative value, weights are not positive "
        "semidefinite");
  }
  return value;
}

double nonquadratic_cost(const VectorXd& x, const VectorXd& u,
                         const MatrixXd& E, const MatrixXd& F) {
  check_weights(x, u, E, F, "nonquadratic_cost");
  const double xEx = x.dot(E * x);
  const double uFu = u.dot(F * u);
  const double arg = xEx + std::exp(xEx) * uFu + 1.0;
  if (!(arg >= 1.0)) {
    throw std::domain_error(
        "nonquadratic_cost: weights are not positive semidefinite");
  }
  return std::log(arg);
}

Plant make_lti_plant(MatrixXd A, MatrixXd B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("make_lti_plant: A must be n x n and B n x m");
  }
  Plant plant;
  plant.state_dim = static_cast<int>(A.rows());
  plant.input_dim = static_cast<int>(B.cols());
  plant.step = [A = std::move(A), B = std::move(B)](const VectorXd& x,
                                                    const VectorXd& u) {
    return VectorXd(lti_step(A, B, x, u));
  };
  return plant;
}

Plant make_nonlinear2d_plant() {
  Plant plant;
  plant.state_dim = 2;
  plant.input_dim = 1;
  plant.step = [](const VectorXd& x, const VectorXd& u) {
    return VectorXd(nonlinear2d_step(x, u));
  };
  return plant;
}

StageCost make_quadratic_cost(MatrixXd E, MatrixXd F) {
  return StageCost{[E = std::move(E), F = std::move(F)](const VectorXd& x,
                                                        const VectorXd& u) {
    return quadratic_cost(x, u, E, F);
  }};
}

StageCost make_nonquadratic_cost(MatrixXd E, MatrixXd F) {
  return StageCost{[E = std::move(E), F = std::move(F)](const VectorXd& x,
                                                        const VectorXd& u) {
    return nonquadratic_cost(x, u, E, F);
  }};
}

MatrixXd lti4d_A() {
  MatrixXd A(4, 4);
  A << 1.8, -0.77, 0, 1,  //
      1, 0, 0, 1,         //
      1, 1, 0, 1,         //
      0, 0, 1, 0;
  return A;
}

MatrixXd lti4d_B() {
  MatrixXd B(4, 1);
  B << 1, 0, 0, 0;
  return B;
}

}  // namespace qlp
