#include <gtest/gtest.h>

#include "qlp/bellman_lp.hpp"
#include "qlp/oracle.hpp"

namespace qlp {
namespace {

MomentSpec unit_second(int vars) {
  MomentSpec mo;
  mo.second = MatrixXd::Identity(vars, vars);
  return mo;
}

ReplayBuffer lti_buffer(std::size_t n, std::uint64_t seed) {
  return build_buffer(make_lti_plant(lti4d_A(), lti4d_B()),
                      make_quadratic_cost(MatrixXd::Identity(4, 4), MatrixXd::Identity(1, 1)),
                      SamplerSpec::uniform(-5, 5, 4), SamplerSpec::gaussian(0, 9, 1), n, seed, true);
}

DareSolution lti_oracle() {
  return solve_discounted_dare(lti4d_A(), lti4d_B(), MatrixXd::Identity(4, 4),
                               MatrixXd::Identity(1, 1), 0.9);
}

TEST(AssemblePiLp, OriginTupleOnlyConstrainsTheConstant) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const ReplayBuffer origin({Transition{VectorXd::Zero(4), VectorXd::Zero(1), VectorXd::Zero(4), 0.0}},
                            0, SamplerSpec::uniform(0, 0, 4), SamplerSpec::uniform(0, 0, 1));
  const auto mu = FeedbackPolicy::linear(f, (MatrixXd(1, 4) << -0.9, -0.7, -0.5, -0.1).finished());
  const LpProblem lp = assemble_pi_lp(origin, f, mu, 0.9, objective_vector(f, unit_second(5)));
  ASSERT_EQ(lp.rows(), 1);
  VectorXd expected = VectorXd::Zero(21);
  expected(f.constant_index()) = 1.0 - 0.9;
  EXPECT_LT((lp.G.row(0).transpose() - expected).cwiseAbs().maxCoeff(), 1e-16);
  EXPECT_EQ(lp.h(0), 0.0);
}

TEST(AssemblePiLp, ShapeOnTheFourStateBenchmark) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const ReplayBuffer buffer = lti_buffer(7000, 1);
  const auto mu = FeedbackPolicy::linear(f, (MatrixXd(1, 4) << -0.9, -0.7, -0.5, -0.1).finished());
  const LpProblem lp = assemble_pi_lp(buffer, f, mu, 0.9, objective_vector(f, unit_second(5)));
  EXPECT_EQ(lp.rows(), 7000);
  EXPECT_EQ(lp.cols(), 21);
  EXPECT_EQ(lp.tuple_rows, 7000);
  EXPECT_EQ(lp.algorithm, "pi");
}

TEST(AssemblePiLp, RowsAreFeatureDifferences) {
  const BasisFamily f(BasisKind::quartic, 2, 1);
  const ReplayBuffer buffer =
      build_buffer(make_nonlinear2d_plant(),
                   make_quadratic_cost(MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)),
                   SamplerSpec::uniform(-5, 5, 2), SamplerSpec::gaussian(0, 1, 1), 50, 3);
  const auto mu = FeedbackPolicy::linear(f, (MatrixXd(1, 4) << -1.5, 0.5, 0, 0).finished());
  const LpProblem lp = assemble_pi_lp(buffer, f, mu, 0.95, VectorXd::Ones(15));
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    const Transition& t = buffer[b];
    const VectorXd row = features(f, t.x, t.a) - 0.95 * features(f, t.y, mu(t.y));
    EXPECT_LT((lp.G.row(b).transpose() - row).cwiseAbs().maxCoeff(),
              1e-12 * (1 + row.cwiseAbs().maxCoeff()));
    EXPECT_EQ(lp.h(b), t.l);
  }
}

TEST(AssemblePiLp, TinyDiscountLeavesOnlyTheCurrentFeatures) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const ReplayBuffer buffer = lti_buffer(200, 2);
  const auto mu = FeedbackPolicy::linear(f, (MatrixXd(1, 4) << -0.9, -0.7, -0.5, -0.1).finished());
  const LpProblem lp = assemble_pi_lp(buffer, f, mu, 1e-12, objective_vector(f, unit_second(5)));
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    const VectorXd phi = features(f, buffer[b].x, buffer[b].a);
    EXPECT_LT((lp.G.row(b).transpose() - phi).cwiseAbs().maxCoeff(), 1e-9);
  }
  // Every row is then Q(x_b, a_b) <= l_b, so the optimum under-approximates
  // the stage cost on the data.
  const LpSolution s = solve_lp(lp);
  ASSERT_EQ(s.status, LpStatus::optimal);
  const QParams q(f, s.alpha);
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    EXPECT_LE(eval_q(q, buffer[b].x, buffer[b].a), buffer[b].l + 1e-6);
  }
}

TEST(AssemblePiLp, UndefinedGreedyPolicyIsTaggedWithATuple) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  MatrixXd P = MatrixXd::Identity(5, 5);
  P(4, 4) = -1.0;
  try {
    assemble_pi_lp(lti_buffer(10, 1), f, pack_blocks(f, P), 0.9, objective_vector(f, unit_second(5)));
    FAIL() << "expected PolicyUndefined";
  } catch (const PolicyUndefined& e) {
    ASSERT_TRUE(e.tuple_index().has_value());
    EXPECT_EQ(*e.tuple_index(), 0u);
    EXPECT_DOUBLE_EQ(e.min_eigenvalue(), -1.0);
  }
}

TEST(AssemblePiLp, RejectsBadArguments) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const auto mu = FeedbackPolicy::zero(f);
  const ReplayBuffer buffer = lti_buffer(10, 1);
  EXPECT_THROW(assemble_pi_lp(buffer, f, mu, 1.0, VectorXd::Ones(21)), std::invalid_argument);
  EXPECT_THROW(assemble_pi_lp(buffer, f, mu, 0.9, VectorXd::Ones(20)), std::invalid_argument);
  const BasisFamily wrong(BasisKind::extended_quadratic, 2, 1);
  EXPECT_THROW(assemble_pi_lp(buffer, wrong, FeedbackPolicy::zero(wrong), 0.9, VectorXd::Ones(10)),
               std::invalid_argument);
}

TEST(AssemblePiLp, OptimalQIsBindingAtEveryTuple) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const DareSolution dare = lti_oracle();
  const QParams star = pack_blocks(f, dare.Pq);
  const ReplayBuffer buffer = lti_buffer(2000, 4);
  const LpProblem lp = assemble_pi_lp(buffer, f, star, 0.9, objective_vector(f, unit_second(5)));
  const VectorXd slack = lp.h - lp.G * star.alpha;
  EXPECT_LT(slack.cwiseAbs().maxCoeff(), 1e-9);

  const LpSolution s = solve_lp(lp.cast<long double>());
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_LT((s.alpha - star.alpha).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AssembleViLp, ColdStartRowsAreTheStageCost) {
  const BasisFamily f(BasisKind::quartic, 2, 1);
  const ReplayBuffer buffer =
      build_buffer(make_nonlinear2d_plant(),
                   make_quadratic_cost(MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)),
                   SamplerSpec::uniform(-5, 5, 2), SamplerSpec::gaussian(0, 1, 1), 100, 6);
  for (const MatrixXd& gain : {MatrixXd(MatrixXd::Zero(1, 4)), MatrixXd((MatrixXd(1, 4) << -1.5, 0.5, 0, 0).finished())}) {
    const LpProblem lp = assemble_vi_lp(buffer, f, QParams::zero(f), FeedbackPolicy::linear(f, gain),
                                        0.95, VectorXd::Ones(15));
    for (std::size_t b = 0; b < buffer.size(); ++b) {
      EXPECT_EQ(lp.G.row(b).transpose(), features(f, buffer[b].x, buffer[b].a));
      EXPECT_EQ(lp.h(b), buffer[b].l);
    }
  }
}

TEST(AssembleViLp, RightHandSideCarriesThePreviousIterate) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const ReplayBuffer buffer = lti_buffer(100, 7);
  const QParams prev = pack_blocks(f, 2.0 * MatrixXd::Identity(5, 5), VectorXd::Ones(5), 0.5);
  const auto mu = FeedbackPolicy::linear(f, (MatrixXd(1, 4) << -0.9, -0.7, -0.5, -0.1).finished());
  const LpProblem lp = assemble_vi_lp(buffer, f, prev, mu, 0.9, objective_vector(f, unit_second(5)));
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    const Transition& t = buffer[b];
    const double expected = t.l + 0.9 * eval_q(prev, t.y, mu(t.y));
    EXPECT_NEAR(lp.h(b), expected, 1e-12 * (1 + std::abs(expected)));
  }
}

TEST(AssembleViLp, OptimalQIsAFixedPoint) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const QParams star = pack_blocks(f, lti_oracle().Pq);
  const ReplayBuffer buffer = lti_buffer(2000, 8);
  const LpProblem lp = assemble_vi_lp(buffer, f, star, star, 0.9, objective_vector(f, unit_second(5)));
  const LpSolution s = solve_lp(lp);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_LT((s.alpha - star.alpha).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(InputDominanceRows, AppendedAfterTheTupleRows) {
  const BasisFamily f(BasisKind::extended_quadratic, 2, 2);
  const ReplayBuffer buffer =
      build_buffer(make_lti_plant(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)),
                   make_quadratic_cost(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)),
                   SamplerSpec::uniform(-1, 1, 2), SamplerSpec::gaussian(0, 1, 2), 30, 1);
  LpProblem lp = assemble_vi_lp(buffer, f, QParams::zero(f), FeedbackPolicy::zero(f), 0.9,
                                VectorXd::Ones(f.feature_count()));
  add_input_dominance_rows(lp, f, 0.1);
  EXPECT_EQ(lp.tuple_rows, 30);
  EXPECT_GT(lp.rows(), 30);
  // A Q whose input block is diagonally dominant with margin 0.1 satisfies
  // every added row.
  MatrixXd P = MatrixXd::Zero(4, 4);
  P.bottomRightCorner(2, 2) << 1.0, 0.3, 0.3, 1.0;
  const VectorXd alpha = pack_blocks(f, P).alpha;
  EXPECT_LE((lp.G.bottomRows(lp.rows() - 30) * alpha - lp.h.tail(lp.rows() - 30)).maxCoeff(), 1e-12);
  P.bottomRightCorner(2, 2) << 0.35, 0.3, 0.3, 1.0;
  const VectorXd weak = pack_blocks(f, P).alpha;
  EXPECT_GT((lp.G.bottomRows(lp.rows() - 30) * weak - lp.h.tail(lp.rows() - 30)).maxCoeff(), 0.0);
}

TEST(TupleFeatures, OneRowPerTuple) {
  const BasisFamily f(BasisKind::extended_quadratic, 4, 1);
  const ReplayBuffer buffer = lti_buffer(40, 2);
  const MatrixXd Phi = tuple_features(buffer, f);
  ASSERT_EQ(Phi.rows(), 40);
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    EXPECT_EQ(Phi.row(b).transpose(), features(f, buffer[b].x, buffer[b].a));
  }
}

}  // namespace
}  // namespace qlp
