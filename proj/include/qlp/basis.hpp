#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlp/types.hpp"

namespace qlp {

enum class BasisKind { extended_quadratic, pure_quadratic, quartic };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

/// A single feature: coefficient * prod_k v_k^exponents[k] over the raw
/// variables v = (x_1..x_n, u_1..u_m).
struct Monomial {
  std::vector<int> exponents;
  double coefficient = 1.0;
  int degree = 0;
  std::string name;
};

/// Linear-in-parameters Q-function family.
///
/// Every family is built around a lifted vector z: z = [x; u] for the two
/// quadratic families and z = [x; x.^2; u] for the quartic one. Feature order
/// is fixed:
///
///   1. upper-triangle products of z, row-major: z_i^2 on the diagonal and
///      2 z_i z_j off it, so alpha maps one-to-one onto a symmetric P;
///   2. (extended_quadratic only) the linear terms z_1..z_{n+m};
///   3. (extended_quadratic only) the constant 1.
///
/// With that layout Q(x, u) = z'Pz + p'z + s.
class BasisFamily {
 public:
  BasisFamily(BasisKind kind, int state_dim, int input_dim);

  BasisKind kind() const { return kind_; }
  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  /// Length of z.
  int lifted_dim() const { return n_ * (kind_ == BasisKind::quartic ? 2 : 1) + m_; }
  /// Length of the state part of z (x, or [x; x.^2]).
  int state_feature_dim() const { return lifted_dim() - m_; }
  int quadratic_count() const { return lifted_dim() * (lifted_dim() + 1) / 2; }
  bool has_affine_terms() const { return kind_ == BasisKind::extended_quadratic; }
  int feature_count() const { return static_cast<int>(descriptors_.size()); }
  const std::vector<Monomial>& descriptors() const { return descriptors_; }

  /// Index of the feature multiplying P(i, j), for any i, j.
  int quadratic_index(int i, int j) const;
  int linear_index(int i) const;
  int constant_index() const;
  /// Degree of z_i as a monomial in (x, u): 1 for x and u, 2 for x.^2.
  int lifted_degree(int i) const { return (i >= n_ && i < state_feature_dim()) ? 2 : 1; }

  friend bool operator==(const BasisFamily& a, const BasisFamily& b) {
    return a.kind_ == b.kind_ && a.n_ == b.n_ && a.m_ == b.m_;
  }

 private:
  BasisKind kind_;
  int n_;
  int m_;
  std::vector<Monomial> descriptors_;
};

/// phi_x(x): x, or [x; x.^2] for the quartic family.
template <typename DerivedX>
Vector<typename DerivedX::Scalar> lift_state(const BasisFamily& family,
                                             const Eigen::MatrixBase<DerivedX>& x) {
  if (x.size() != family.state_dim()) {
    throw std::invalid_argument("lift_state: expected x in R^" +
                                std::to_string(family.state_dim()));
  }
  Vector<typename DerivedX::Scalar> phi(family.state_feature_dim());
  phi.head(x.size()) = x;
  if (family.kind() == BasisKind::quartic) {
    phi.tail(x.size()) = x.array().square();
  }
  return phi;
}

/// z = [phi_x(x); u].
template <typename DerivedX, typename DerivedU>
Vector<typename DerivedX::Scalar> lift(const BasisFamily& family,
                                       const Eigen::MatrixBase<DerivedX>& x,
                                       const Eigen::MatrixBase<DerivedU>& u) {
  if (u.size() != family.input_dim()) {
    throw std::invalid_argument("lift: expected u in R^" +
                                std::to_string(family.input_dim()));
  }
  Vector<typename DerivedX::Scalar> z(family.lifted_dim());
  z.head(family.state_feature_dim()) = lift_state(family, x);
  z.tail(u.size()) = u;
  return z;
}

/// Feature vector Qhat(x, u), ordered as documented on BasisFamily.
template <typename DerivedX, typename DerivedU>
Vector<typename DerivedX::Scalar> features(const BasisFamily& family,
                                           const Eigen::MatrixBase<DerivedX>& x,
                                           const Eigen::MatrixBase<DerivedU>& u) {
  using Scalar = typename DerivedX::Scalar;
  const Vector<Scalar> z = lift(family, x, u);
  const int d = family.lifted_dim();
  Vector<Scalar> phi(family.feature_count());
  int k = 0;
  for (int i = 0; i < d; ++i) {
    phi(k++) = z(i) * z(i);
    for (int j = i + 1; j < d; ++j) phi(k++) = Scalar(2) * z(i) * z(j);
  }
  if (family.has_affine_terms()) {
    for (int i = 0; i < d; ++i) phi(k++) = z(i);
    phi(k++) = Scalar(1);
  }
  return phi;
}

/// Coefficients alpha of a Q-function in a given family.
struct QParams {
  BasisFamily family;
  VectorXd alpha;

  QParams(BasisFamily family_, VectorXd alpha_);
  static QParams zero(const BasisFamily& family);
};

template <typename DerivedX, typename DerivedU>
double eval_q(const QParams& params, const Eigen::MatrixBase<DerivedX>& x,
              const Eigen::MatrixBase<DerivedU>& u) {
  return params.alpha.dot(features(params.family, x, u));
}

/// Matrix view of a parameter vector: Q = z'Pz + p'z + s.
struct QBlocks {
  MatrixXd P;  // symmetric, lifted_dim x lifted_dim
  VectorXd p;  // lifted_dim; zero for families without affine terms
  double s = 0.0;
  int input_dim = 0;

  int split() const { return static_cast<int>(P.rows()) - input_dim; }
  auto Pxx() const { return P.topLeftCorner(split(), split()); }
  auto Pxu() const { return P.topRightCorner(split(), input_dim); }
  auto Pux() const { return P.bottomLeftCorner(input_dim, split()); }
  auto Puu() const { return P.bottomRightCorner(input_dim, input_dim); }
  auto px() const { return p.head(split()); }
  auto pu() const { return p.tail(input_dim); }
};

QBlocks extract_blocks(const QParams& params);

/// Inverse of extract_blocks. P is symmetrized; p and s must be zero for
/// families without affine terms.
QParams pack_blocks(const BasisFamily& family, const MatrixXd& P,
                    const VectorXd& p = VectorXd(), double s = 0.0);

/// Raised when the minimizer over u does not exist (P_uu not positive
/// definite).
class PolicyUndefined : public std::runtime_error {
 public:
  PolicyUndefined(double min_eigenvalue, std::optional<std::size_t> tuple_index = {});

  double min_eigenvalue() const { return min_eigenvalue_; }
  const std::optional<std::size_t>& tuple_index() const { return tuple_index_; }
  PolicyUndefined at_tuple(std::size_t index) const {
    return PolicyUndefined(min_eigenvalue_, index);
  }

 private:
  double min_eigenvalue_;
  std::optional<std::size_t> tuple_index_;
};

/// u = gain * phi_x(x) + offset. Both the explicit initial policies and the
/// greedy minimizers of every supported family have this form.
template <typename Scalar>
struct BasicFeedbackPolicy {
  Matrix<Scalar> gain;    // m x state_feature_dim
  Vector<Scalar> offset;  // m
  bool squared_state = false;

  static BasicFeedbackPolicy linear(const BasisFamily& family, Matrix<Scalar> gain) {
    if (gain.rows() != family.input_dim() || gain.cols() != family.state_feature_dim()) {
      throw std::invalid_argument("FeedbackPolicy: gain must be " +
                                  std::to_string(family.input_dim()) + "x" +
                                  std::to_string(family.state_feature_dim()));
    }
    BasicFeedbackPolicy policy;
    policy.gain = std::move(gain);
    policy.offset = Vector<Scalar>::Zero(family.input_dim());
    policy.squared_state = family.kind() == BasisKind::quartic;
    return policy;
  }

  static BasicFeedbackPolicy zero(const BasisFamily& family) {
    return linear(family, Matrix<Scalar>::Zero(family.input_dim(), family.state_feature_dim()));
  }

  int input_dim() const { return static_cast<int>(gain.rows()); }

  template <typename T>
  BasicFeedbackPolicy<T> cast() const {
    return {gain.template cast<T>(), offset.template cast<T>(), squared_state};
  }

  template <typename DerivedX>
  Vector<Scalar> operator()(const Eigen::MatrixBase<DerivedX>& x) const {
    const Eigen::Index n = squared_state ? gain.cols() / 2 : gain.cols();
    if (x.size() != n) {
      throw std::invalid_argument("FeedbackPolicy: expected x in R^" + std::to_string(n));
    }
    const Vector<Scalar> xs = x.template cast<Scalar>();
    if (squared_state) {
      Vector<Scalar> phi(2 * n);
      phi << xs, xs.array().square().matrix();
      return gain * phi + offset;
    }
    return gain * xs + offset;
  }
};

using FeedbackPolicy = BasicFeedbackPolicy<double>;

inline constexpr double kDefiniteTolerance = 1e-10;

/// Smallest eigenvalue of the P_uu block.
double min_input_eigenvalue(const QParams& params);

/// Closed-form argmin_u Q(x, u) = -Puu^{-1} (Pux phi_x(x) + p_u / 2) for the
/// parameter vector `alpha`, computed in its own scalar type. Throws
/// PolicyUndefined if the smallest eigenvalue of P_uu is not above
/// `tolerance`.
template <typename Scalar>
BasicFeedbackPolicy<Scalar> greedy_gain(const BasisFamily& family, const Vector<Scalar>& alpha,
                                        double tolerance = kDefiniteTolerance) {
  if (alpha.size() != family.feature_count()) {
    throw std::invalid_argument("greedy_gain: alpha does not match the family");
  }
  const int m = family.input_dim();
  const int sf = family.state_feature_dim();
  Matrix<Scalar> Puu(m, m);
  Matrix<Scalar> Pux(m, sf);
  Vector<Scalar> pu = Vector<Scalar>::Zero(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) Puu(i, j) = alpha(family.quadratic_index(sf + i, sf + j));
    for (int j = 0; j < sf; ++j) Pux(i, j) = alpha(family.quadratic_index(sf + i, j));
    if (family.has_affine_terms()) pu(i) = alpha(family.linear_index(sf + i));
  }
  const Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(Puu, Eigen::EigenvaluesOnly);
  const double lambda_min = static_cast<double>(eig.eigenvalues().minCoeff());
  if (!(lambda_min > tolerance)) throw PolicyUndefined(lambda_min);
  const Eigen::LLT<Matrix<Scalar>> llt(Puu);
  BasicFeedbackPolicy<Scalar> policy;
  policy.gain = -llt.solve(Pux);
  policy.offset = -llt.solve(pu) / Scalar(2);
  policy.squared_state = family.kind() == BasisKind::quartic;
  return policy;
}

template <typename Scalar = double>
BasicFeedbackPolicy<Scalar> greedy_gain(const QParams& params,
                                        double tolerance = kDefiniteTolerance) {
  return greedy_gain(params.family, Vector<Scalar>(params.alpha.template cast<Scalar>()),
                     tolerance);
}

VectorXd greedy_policy(const QParams& params, const VectorXd& x,
                       double tolerance = kDefiniteTolerance);

/// Moments of the state-action relevance measure.
///
/// `first` and `second` are the mean and covariance of the raw variables
/// (x, u). `third` and `fourth` list E[z_i z_j] for every entry (i, j) of P
/// (both triangles, row-major) whose monomial has total degree 3 or 4; for
/// the quartic family with n = 2, m = 1 these have 12 and 4 entries.
struct MomentSpec {
  VectorXd first;   // empty means zero mean
  MatrixXd second;
  VectorXd third;
  VectorXd fourth;
};

/// m with m_k = E_c[Qhat_k], so m'alpha is the integral of Q against c.
VectorXd objective_vector(const BasisFamily& family, const MomentSpec& moments);

/// Number of entries of P whose monomial has the given total degree.
int moment_entry_count(const BasisFamily& family, int degree);

}  // namespace qlp
