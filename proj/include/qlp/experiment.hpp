#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlp/algorithms.hpp"
#include "qlp/oracle.hpp"
#include "qlp/replay.hpp"
#include "qlp/systems.hpp"

namespace qlp {

struct PlantSpec {
  enum class Kind { lti, nonlinear2d };
  Kind kind = Kind::lti;
  MatrixXd A;  // lti only
  MatrixXd B;

  int state_dim() const;
  int input_dim() const;
};

struct CostSpec {
  enum class Kind { quadratic, nonquadratic };
  Kind kind = Kind::quadratic;
  MatrixXd E;
  MatrixXd F;
};

struct BufferSpec {
  std::size_t n = 0;
  SamplerSpec state;
  SamplerSpec action;
  std::uint64_t seed = 1;
  bool anchor_origin = true;
};

struct ExperimentConfig {
  std::string name;
  PlantSpec plant;
  CostSpec cost;
  BasisKind basis = BasisKind::extended_quadratic;
  BufferSpec buffer;
  RunConfig run;
  /// Closed-loop rollouts of the learned policy, one per initial state.
  std::vector<VectorXd> rollout_x0;
  int rollout_horizon = 60;
  /// Empty means $QLP_OUTPUT_ROOT/<name>-seed<seed>.
  std::string output_dir;

  BasisFamily family() const;
  /// Throws ConfigError on any cross-field inconsistency.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A failure inside run_experiment, tagged with the stage that raised it.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr std::uint64_t kDefaultSeed = 1;

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

Plant make_plant(const PlantSpec& spec);
StageCost make_cost(const CostSpec& spec);

/// $QLP_OUTPUT_ROOT, or ./runs.
std::filesystem::path output_root();
std::filesystem::path default_output_dir(const ExperimentConfig& config);

struct RolloutRecord {
  VectorXd x0;
  Rollout rollout;
  /// First step with ||x_k||_inf <= 1e-3, if any.
  std::optional<int> settled_step;
  std::string error;  // non-empty if the trajectory diverged
};

struct ExperimentResult {
  ExperimentConfig config;
  ReplayBuffer buffer;
  IterationTrace trace;
  std::optional<DareSolution> dare;
  std::optional<QFunctionError> oracle_error;
  std::optional<double> bellman_residual;
  std::vector<RolloutRecord> rollouts;
  double wall_seconds = 0.0;
};

/// Builds (or takes) the buffer, runs the configured algorithm, evaluates the
/// oracle where one exists, and rolls out the learned policy. Nothing is
/// written to disk.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<ReplayBuffer>& buffer = std::nullopt);

RolloutRecord simulate_policy(const ExperimentConfig& config, const QParams& params,
                              const VectorXd& x0, int horizon);

/// Everything except wall-clock times, so reruns compare equal.
nlohmann::json summarize(const ExperimentResult& result);

/// config.json, buffer.csv, trace.csv, summary.json, timing.json,
/// rollout_<k>.csv and plot.py.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

void write_rollout_csv(const std::filesystem::path& path, const Rollout& rollout);

/// Matplotlib script that reads trace.csv and rollout_*.csv next to it.
std::string plot_script();

nlohmann::json dare_to_json(const DareSolution& dare);

}  // namespace qlp
