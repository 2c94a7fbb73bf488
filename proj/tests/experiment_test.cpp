#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qlp/experiment.hpp"

namespace qlp {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qlp_experiment_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Presets, NamesAndSettings) {
  const std::vector<std::string> names = preset_names();
  ASSERT_EQ(names.size(), 9u);
  for (const std::string& name : names) {
    const ExperimentConfig c = preset(name);
    EXPECT_EQ(c.name, name);
    EXPECT_NO_THROW(c.validate()) << name;
    EXPECT_EQ(c.buffer.seed, kDefaultSeed);
    EXPECT_EQ(c.run.max_iters, 500);
  }

  const ExperimentConfig lti = preset("lti4d-pi");
  EXPECT_EQ(lti.plant.A, lti4d_A());
  EXPECT_EQ(lti.plant.B, lti4d_B());
  EXPECT_EQ(lti.buffer.n, 7000u);
  EXPECT_EQ(lti.buffer.state.describe(), "uniform(-5,5)");
  EXPECT_EQ(lti.buffer.action.describe(), "gaussian(0,9)");
  EXPECT_EQ(lti.basis, BasisKind::extended_quadratic);
  EXPECT_EQ(lti.run.gamma, 0.9);
  EXPECT_EQ(lti.run.epsilon, 1e-13);
  EXPECT_EQ(lti.run.initial_policy->gain,
            (MatrixXd(1, 4) << -0.9, -0.7, -0.5, -0.1).finished());
  EXPECT_EQ(lti.run.moments.second, MatrixXd::Identity(5, 5));

  const ExperimentConfig vi_a = preset("lti4d-vi-a");
  EXPECT_EQ(vi_a.run.algorithm, Algorithm::vi);
  EXPECT_FALSE(vi_a.run.initial_policy.has_value());
  EXPECT_EQ(extract_blocks(*vi_a.run.initial_q).P, MatrixXd::Identity(5, 5));
  EXPECT_TRUE(preset("lti4d-vi-b").run.initial_policy.has_value());

  const ExperimentConfig nl = preset("nl2d-nonquad-pi");
  EXPECT_EQ(nl.plant.kind, PlantSpec::Kind::nonlinear2d);
  EXPECT_EQ(nl.cost.kind, CostSpec::Kind::nonquadratic);
  EXPECT_EQ(nl.basis, BasisKind::quartic);
  EXPECT_EQ(nl.buffer.n, 3000u);
  EXPECT_EQ(nl.buffer.action.describe(), "gaussian(0,1)");
  EXPECT_EQ(nl.run.gamma, 0.95);
  EXPECT_EQ(nl.run.moments.second, MatrixXd::Identity(3, 3));
  EXPECT_EQ(nl.run.moments.third, VectorXd::Ones(12));
  EXPECT_EQ(nl.run.moments.fourth, VectorXd::Ones(4));
  EXPECT_EQ(preset("nl2d-quad-vi-a").run.initial_q->alpha, VectorXd::Zero(15));

  EXPECT_THROW(preset("lti5d-pi"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  for (const std::string& name : preset_names()) {
    const nlohmann::json j = to_json(preset(name));
    EXPECT_EQ(to_json(config_from_json(j)), j) << name;
  }
}

TEST(Config, LoadFromFile) {
  const fs::path dir = scratch_dir("load");
  fs::create_directories(dir);
  ExperimentConfig c = preset("lti4d-pi");
  c.buffer.n = 500;
  c.buffer.seed = 7;
  {
    std::ofstream out(dir / "c.json");
    out << to_json(c).dump(2);
  }
  const ExperimentConfig back = load_config(dir / "c.json");
  EXPECT_EQ(back.buffer.n, 500u);
  EXPECT_EQ(back.buffer.seed, 7u);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, RejectsInconsistentSettings) {
  ExperimentConfig c = preset("lti4d-pi");
  c.basis = BasisKind::quartic;
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("lti4d-pi");
  c.run.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("lti4d-pi");
  c.run.initial_policy.reset();
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("lti4d-vi-a");
  c.run.initial_q.reset();
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("lti4d-pi");
  c.cost.E(0, 0) = -1;
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("lti4d-pi");
  c.cost.F(0, 0) = 0;
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("nl2d-quad-pi");
  c.rollout_x0 = {VectorXd::Zero(4)};
  EXPECT_THROW(c.validate(), ConfigError);

  c = preset("nl2d-quad-vi-a");
  c.run.moments.third = VectorXd::Ones(3);
  EXPECT_THROW(c.validate(), ConfigError);

  nlohmann::json j = to_json(preset("lti4d-pi"));
  j["plant"]["kind"] = "pendulum";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(preset("lti4d-pi"));
  j.erase("run");
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, OutputDirectory) {
  ExperimentConfig c = preset("lti4d-vi-b");
  c.buffer.seed = 4;
  EXPECT_EQ(default_output_dir(c).filename(), "lti4d-vi-b-seed4");
  c.output_dir = "/somewhere/else";
  EXPECT_EQ(default_output_dir(c), fs::path("/somewhere/else"));
}

class LtiExperiment : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { result_ = new ExperimentResult(run_experiment(preset("lti4d-pi"))); }
  static void TearDownTestSuite() { delete result_; }
  static ExperimentResult* result_;
};
ExperimentResult* LtiExperiment::result_ = nullptr;

TEST_F(LtiExperiment, ConvergesToTheOracle) {
  const ExperimentResult& r = *result_;
  ASSERT_TRUE(r.trace.converged()) << r.trace.message;
  ASSERT_TRUE(r.oracle_error.has_value());
  EXPECT_LE(r.oracle_error->P, 1e-6);
  EXPECT_LE(r.oracle_error->p, 1e-6);
  EXPECT_LE(r.oracle_error->s, 1e-6);
  ASSERT_TRUE(r.bellman_residual.has_value());
  EXPECT_LE(*r.bellman_residual, 1e-6);
  EXPECT_EQ(r.buffer.size(), 7000u);
  EXPECT_TRUE(r.buffer.anchored());
}

TEST_F(LtiExperiment, SummaryIsReproducible) {
  const ExperimentResult again = run_experiment(preset("lti4d-pi"));
  EXPECT_EQ(summarize(again), summarize(*result_));
  const nlohmann::json s = summarize(*result_);
  EXPECT_EQ(s["status"], "converged");
  EXPECT_EQ(s["iterations"], result_->trace.iterations());
  EXPECT_FALSE(s.contains("wall_seconds"));
}

TEST_F(LtiExperiment, StoredBufferReplaysIdentically) {
  const fs::path dir = scratch_dir("replay");
  write_artifacts(*result_, dir);
  std::ifstream in(dir / "buffer.csv");
  const ReplayBuffer stored = read_buffer_csv(in);
  const ExperimentResult replay = run_experiment(result_->config, stored);
  EXPECT_EQ(summarize(replay), summarize(*result_));
  fs::remove_all(dir);
}

TEST_F(LtiExperiment, ArtifactsAreWritten) {
  const fs::path dir = scratch_dir("artifacts");
  write_artifacts(*result_, dir);
  for (const char* f : {"config.json", "buffer.csv", "trace.csv", "summary.json", "timing.json",
                        "plot.py"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream s(dir / "summary.json");
  EXPECT_EQ(nlohmann::json::parse(s), summarize(*result_));
  std::ifstream c(dir / "config.json");
  EXPECT_EQ(nlohmann::json::parse(c), to_json(result_->config));
  fs::remove_all(dir);
}

TEST(Experiment, RolloutOfTheLearnedPolicy) {
  ExperimentConfig c = preset("lti4d-pi");
  c.rollout_x0 = {(VectorXd(4) << 1, 1, 1, 1).finished()};
  c.rollout_horizon = 80;
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.rollouts.size(), 1u);
  const RolloutRecord& rec = r.rollouts[0];
  EXPECT_TRUE(rec.error.empty()) << rec.error;
  ASSERT_TRUE(rec.settled_step.has_value());
  EXPECT_LE(rec.rollout.states.back().cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_EQ(rec.rollout.states.size(), 81u);
}

TEST(Experiment, UnconvergedRunHasNoResidual) {
  ExperimentConfig c = preset("lti4d-vi-a");
  c.run.max_iters = 2;
  const ExperimentResult r = run_experiment(c);
  EXPECT_EQ(r.trace.status, RunStatus::max_iterations);
  EXPECT_FALSE(r.bellman_residual.has_value());
  EXPECT_EQ(summarize(r)["status"], "max_iterations");
}

TEST(Experiment, MismatchedBufferIsABufferStageError) {
  const ExperimentConfig nl = preset("nl2d-quad-pi");
  const ReplayBuffer b = build_buffer(make_plant(nl.plant), make_cost(nl.cost), nl.buffer.state,
                                      nl.buffer.action, 20, 1);
  try {
    run_experiment(preset("lti4d-pi"), b);
    FAIL() << "expected ExperimentError";
  } catch (const ExperimentError& e) {
    EXPECT_EQ(e.stage(), "buffer");
  }
}

}  // namespace
}  // namespace qlp
