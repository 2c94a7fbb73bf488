#pragma once

#include "qlp/basis.hpp"
#include "qlp/lp.hpp"
#include "qlp/replay.hpp"

namespace qlp {

// The assemblers are templated on the scalar used to build the LP data;
// double and long double are instantiated.

/// Policy-evaluation LP: one row per tuple,
///   (Qhat(x_b, a_b) - gamma Qhat(y_b, mu(y_b)))' alpha <= l_b.
/// The unknown Q appears on both sides.
template <typename Scalar>
BasicLpProblem<Scalar> assemble_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                                      const BasicFeedbackPolicy<Scalar>& policy, double gamma,
                                      const VectorXd& objective);

/// Same, with mu the greedy policy of `policy_params`. A missing minimizer is
/// reported as PolicyUndefined tagged with the first tuple index.
LpProblem assemble_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& policy_params, double gamma,
                         const VectorXd& objective);

/// Value-iteration LP: one row per tuple,
///   Qhat(x_b, a_b)' alpha <= l_b + gamma Q_prev(y_b, mu(y_b)),
/// where the right-hand side is a known number.
template <typename Scalar>
BasicLpProblem<Scalar> assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                                      const Vector<Scalar>& prev_alpha,
                                      const BasicFeedbackPolicy<Scalar>& policy, double gamma,
                                      const VectorXd& objective);

LpProblem assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& prev_q, const FeedbackPolicy& policy, double gamma,
                         const VectorXd& objective);

LpProblem assemble_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                         const QParams& prev_q, const QParams& policy_params,
                         double gamma, const VectorXd& objective);

/// Appends rows forcing P_uu to be diagonally dominant with margin tau:
///   P_ii - sum_{j != i} |P_ij| >= tau   (2^(m-1) rows per input).
template <typename Scalar>
void add_input_dominance_rows(BasicLpProblem<Scalar>& problem, const BasisFamily& family,
                              double tau);

/// Row b of the tuple feature matrix is Qhat(x_b, a_b)'.
template <typename Scalar = double>
Matrix<Scalar> tuple_features(const ReplayBuffer& buffer, const BasisFamily& family);

}  // namespace qlp
