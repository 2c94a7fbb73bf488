#pragma once

#include <Eigen/Dense>

namespace qlp {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

}  // namespace qlp
