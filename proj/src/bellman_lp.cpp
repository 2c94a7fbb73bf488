#include "qlp/bellman_lp.hpp"

#include <stdexcept>
#include <string>

namespace qlp {

namespace {

void check_inputs(const ReplayBuffer& buffer, const BasisFamily& family, double gamma,
                  const VectorXd& objective) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("discount factor must lie in (0, 1), got " +
                                std::to_string(gamma));
  }
  if (buffer.state_dim() != family.state_dim() || buffer.input_dim() != family.input_dim()) {
    throw std::invalid_argument("buffer dimensions do not match the basis family");
  }
  if (objective.size() != family.feature_count()) {
    throw std::invalid_argument("objective vector has " + std::to_string(objective.size()) +
                                " entries, family needs " +
                                std::to_string(family.feature_count()));
  }
}

FeedbackPolicy greedy_or_tagged(const QParams& params) {
  try {
    return greedy_gain(params);
  } catch (const PolicyUndefined& e) {
    throw e.at_tuple(0);
  }
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> tuple_features(const ReplayBuffer& buffer, const BasisFamily& family) {
  Matrix<Scalar> Phi(static_cast<Eigen::Index>(buffer.size()), family.feature_count());
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    Phi.row(static_cast<Eigen::Index>(b)) =
        features(family, Vector<Scalar>(buffer[b].x.template cast<Scalar>()),
                 Vector<Scalar>(buffer[b].a.template cast<Scalar>()))
            .transpose();
  }
  return Phi;
}

template <typename Scalar>
BasicLpProblem<Scalar> assemble_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                                      const BasicFeedbackPolicy<Scalar>& policy, double gamma,
                                      const VectorXd& objective) {
  check_inputs(buffer, family, gamma, objective);
  const auto N = static_cast<Eigen::Index>(buffer.size());
  const auto g = static_cast<Scalar>(gamma);
  BasicLpProblem<Scalar> lp;
  lp.algorithm = "pi";
  lp.m = objective.template cast<Scalar>();
  lp.G.resize(N, family.feature_count());
  lp.h.resize(N);
  lp.tuple_rows = N;
  for (Eigen::Index b = 0; b < N; ++b) {
    const Transition& t = buffer[static_cast<std::size_t>(b)];
    const Vector<Scalar> x = t.x.template cast<Scalar>();
    const Vector<Scalar> a = t.a.template cast<Scalar>();
    const Vector<Scalar> y = t.y.template cast<Scalar>();
    const Vector<Scalar> next_u = policy(y);
    lp.G.row(b) = (features(family, x, a) - g * features(family, y, next_u)).transpose();
    lp.h(b) = static_cast<Scalar>(t.l);
  }
  return lp;
}

LpProblem assemble_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& policy_params, double gamma,
                         const VectorXd& objective) {
  return assemble_pi_lp(buffer, family, greedy_or_tagged(policy_params), gamma, objective);
}

template <typename Scalar>
BasicLpProblem<Scalar> assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                                      const Vector<Scalar>& prev_alpha,
                                      const BasicFeedbackPolicy<Scalar>& policy, double gamma,
                                      const VectorXd& objective) {
  check_inputs(buffer, family, gamma, objective);
  if (prev_alpha.size() != family.feature_count()) {
    throw std::invalid_argument("assemble_vi_lp: previous Q does not match the family");
  }
  const auto N = static_cast<Eigen::Index>(buffer.size());
  const auto g = static_cast<Scalar>(gamma);
  BasicLpProblem<Scalar> lp;
  lp.algorithm = "vi";
  lp.m = objective.template cast<Scalar>();
  lp.G.resize(N, family.feature_count());
  lp.h.resize(N);
  lp.tuple_rows = N;
  for (Eigen::Index b = 0; b < N; ++b) {
    const Transition& t = buffer[static_cast<std::size_t>(b)];
    const Vector<Scalar> y = t.y.template cast<Scalar>();
    lp.G.row(b) = features(family, Vector<Scalar>(t.x.template cast<Scalar>()),
                           Vector<Scalar>(t.a.template cast<Scalar>()))
                      .transpose();
    lp.h(b) = static_cast<Scalar>(t.l) + g * prev_alpha.dot(features(family, y, policy(y)));
  }
  return lp;
}

LpProblem assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& prev_q, const FeedbackPolicy& policy, double gamma,
                         const VectorXd& objective) {
  if (!(prev_q.family == family)) {
    throw std::invalid_argument("assemble_vi_lp: previous Q uses a different family");
  }
  return assemble_vi_lp(buffer, family, prev_q.alpha, policy, gamma, objective);
}

LpProblem assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& prev_q, const QParams& policy_params,
                         double gamma, const VectorXd& objective) {
  return assemble_vi_lp(buffer, family, prev_q, greedy_or_tagged(policy_params), gamma,
                        objective);
}

template <typename Scalar>
void add_input_dominance_rows(BasicLpProblem<Scalar>& problem, const BasisFamily& family,
                              double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be nonnegative");
  const int m = family.input_dim();
  const int first = family.state_feature_dim();
  const int patterns = 1 << (m - 1);
  const Eigen::Index old_rows = problem.rows();
  const Eigen::Index extra = static_cast<Eigen::Index>(m) * patterns;
  problem.G.conservativeResize(old_rows + extra, Eigen::NoChange);
  problem.h.conservativeResize(old_rows + extra);
  Eigen::Index row = old_rows;
  for (int i = 0; i < m; ++i) {
    for (int mask = 0; mask < patterns; ++mask) {
      problem.G.row(row).setZero();
      problem.G(row, family.quadratic_index(first + i, first + i)) = Scalar(-1);
      int bit = 0;
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        const Scalar sign = (mask >> bit++) & 1 ? Scalar(-1) : Scalar(1);
        problem.G(row, family.quadratic_index(first + i, first + j)) = sign;
      }
      problem.h(row) = static_cast<Scalar>(-tau);
      ++row;
    }
  }
}

#define QLP_INSTANTIATE(Scalar)                                                          \
  template BasicLpProblem<Scalar> assemble_pi_lp(const ReplayBuffer&, const BasisFamily&,  \
                                                 const BasicFeedbackPolicy<Scalar>&, double, \
                                                 const VectorXd&);                          \
  template BasicLpProblem<Scalar> assemble_vi_lp(                                           \
      const ReplayBuffer&, const BasisFamily&, const Vector<Scalar>&,                       \
      const BasicFeedbackPolicy<Scalar>&, double, const VectorXd&);                         \
  template Matrix<Scalar> tuple_features(const ReplayBuffer&, const BasisFamily&);        \
  template void add_input_dominance_rows(BasicLpProblem<Scalar>&, const BasisFamily&, double);

QLP_INSTANTIATE(double)
QLP_INSTANTIATE(long double)
#undef QLP_INSTANTIATE

}  // namespace qlp
