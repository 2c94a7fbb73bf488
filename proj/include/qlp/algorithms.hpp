#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qlp/basis.hpp"
#include "qlp/lp.hpp"
#include "qlp/replay.hpp"

namespace qlp {

enum class Algorithm { pi, vi };
enum class StoppingRule { buffer_q, parameters };
enum class RunStatus { converged, max_iterations, lp_failure, policy_undefined };

std::string to_string(Algorithm algorithm);
std::string to_string(StoppingRule rule);
std::string to_string(RunStatus status);
Algorithm algorithm_from_string(const std::string& name);
StoppingRule stopping_rule_from_string(const std::string& name);

struct RunConfig {
  Algorithm algorithm = Algorithm::pi;
  double gamma = 0.9;
  double epsilon = 1e-12;
  int max_iters = 500;
  StoppingRule stopping = StoppingRule::buffer_q;
  /// Required for PI. For VI, overrides the greedy policy of initial_q.
  std::optional<FeedbackPolicy> initial_policy;
  /// Required for VI.
  std::optional<QParams> initial_q;
  MomentSpec moments;
  /// Adds P_uu diagonal-dominance rows with this margin when set.
  std::optional<double> tau;
  LpSettings lp;
  /// Start each LP from the previous iteration's active set.
  bool warm_start = false;
  /// Carry the iterates, greedy gains and LP data in long double. The trace
  /// still reports alpha rounded to double; without this the iterates
  /// wander by a few ulps and tight epsilons are never met.
  bool extended_precision = true;
  /// When non-empty, every assembled LP is written here as lp_<iter>.txt.
  std::string lp_dump_dir;
};

struct IterationRecord {
  int iteration = 0;
  VectorXd alpha;
  VectorXd q_buffer;  // Q(x_b, a_b) for every tuple
  double q_diff = std::numeric_limits<double>::quiet_NaN();  // sup_b |Q^i - Q^{i-1}|
  double P_diff = std::numeric_limits<double>::quiet_NaN();
  double p_diff = std::numeric_limits<double>::quiet_NaN();
  double s_diff = std::numeric_limits<double>::quiet_NaN();
  double min_input_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  LpStatus lp_status = LpStatus::numerical_failure;
  int lp_iterations = 0;
  KktResiduals kkt;
  double wall_seconds = 0.0;
};

struct IterationTrace {
  Algorithm algorithm = Algorithm::pi;
  BasisFamily family;
  RunStatus status = RunStatus::max_iterations;
  std::string message;
  std::vector<IterationRecord> records;
  /// VI only: Q^0 and its buffer values.
  std::optional<QParams> initial_q;
  VectorXd initial_q_buffer;

  explicit IterationTrace(BasisFamily family_) : family(std::move(family_)) {}

  bool converged() const { return status == RunStatus::converged; }
  /// Number of LPs solved.
  int iterations() const { return static_cast<int>(records.size()); }
  /// Parameters of the last successfully solved LP.
  std::optional<QParams> final_params() const;
};

/// sup_b |q_now - q_prev| <= epsilon.
bool stopping_check(const VectorXd& q_now, const VectorXd& q_prev, double epsilon);

/// Policy iteration: evaluate the current policy with the PI LP, improve it
/// greedily, and stop once the buffer Q-values repeat within epsilon.
IterationTrace run_q_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                           const RunConfig& config);

/// Value iteration: one Bellman backup per LP against the previous iterate.
IterationTrace run_q_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                           const RunConfig& config);

/// max_b |Q(x_b, a_b) - l_b - gamma Q(y_b, mu(y_b))|, evaluated in long double.
double bellman_residual(const ReplayBuffer& buffer, const QParams& params, double gamma,
                        const FeedbackPolicy& policy);
/// Same, with mu the greedy policy of `params` (the optimality residual).
double bellman_residual(const ReplayBuffer& buffer, const QParams& params, double gamma);

IterationTrace run_algorithm(const ReplayBuffer& buffer, const BasisFamily& family,
                             const RunConfig& config);

/// One CSV row per iteration; alpha is a quoted flat JSON array in feature
/// order.
void write_trace_csv(std::ostream& out, const IterationTrace& trace);

}  // namespace qlp
