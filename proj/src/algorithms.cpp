#include "qlp/algorithms.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "qlp/bellman_lp.hpp"

namespace qlp {

std::string to_string(Algorithm algorithm) { return algorithm == Algorithm::pi ? "pi" : "vi"; }

std::string to_string(StoppingRule rule) {
  return rule == StoppingRule::buffer_q ? "buffer" : "parameters";
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged:
      return "converged";
    case RunStatus::max_iterations:
      return "max_iterations";
    case RunStatus::lp_failure:
      return "lp_failure";
    case RunStatus::policy_undefined:
      return "policy_undefined";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "pi") return Algorithm::pi;
  if (name == "vi") return Algorithm::vi;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected pi or vi)");
}

StoppingRule stopping_rule_from_string(const std::string& name) {
  if (name == "buffer") return StoppingRule::buffer_q;
  if (name == "parameters") return StoppingRule::parameters;
  throw std::invalid_argument("unknown stopping rule '" + name +
                              "' (expected buffer or parameters)");
}

std::optional<QParams> IterationTrace::final_params() const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->lp_status == LpStatus::optimal) return QParams(family, it->alpha);
  }
  return std::nullopt;
}

bool stopping_check(const VectorXd& q_now, const VectorXd& q_prev, double epsilon) {
  if (q_now.size() != q_prev.size()) {
    throw std::invalid_argument("stopping_check: vectors differ in length");
  }
  return (q_now - q_prev).lpNorm<Eigen::Infinity>() <= epsilon;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Scalar>
void fill_block_diffs(IterationRecord& rec, const BasisFamily& family, const Vector<Scalar>& now,
                      const Vector<Scalar>& before) {
  const int d = family.lifted_dim();
  const Vector<Scalar> diff = now - before;
  double P = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      P = std::max(P, static_cast<double>(std::abs(diff(family.quadratic_index(i, j)))));
    }
  }
  rec.P_diff = P;
  rec.p_diff = 0.0;
  rec.s_diff = 0.0;
  if (family.has_affine_terms()) {
    for (int i = 0; i < d; ++i) {
      rec.p_diff = std::max(rec.p_diff, static_cast<double>(std::abs(diff(family.linear_index(i)))));
    }
    rec.s_diff = static_cast<double>(std::abs(diff(family.constant_index())));
  }
}

bool should_stop(const IterationRecord& rec, const RunConfig& config) {
  if (config.stopping == StoppingRule::buffer_q) return rec.q_diff <= config.epsilon;
  return std::max({rec.P_diff, rec.p_diff, rec.s_diff}) <= config.epsilon;
}

void validate(const ReplayBuffer& buffer, const BasisFamily& family, const RunConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) {
    throw std::invalid_argument("RunConfig: gamma must lie in (0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("RunConfig: epsilon must be positive");
  if (config.max_iters < 1) throw std::invalid_argument("RunConfig: max_iters must be positive");
  if (buffer.state_dim() != family.state_dim() || buffer.input_dim() != family.input_dim()) {
    throw std::invalid_argument("RunConfig: buffer does not match the basis family");
  }
  if (config.initial_q && !(config.initial_q->family == family)) {
    throw std::invalid_argument("RunConfig: initial Q uses a different basis family");
  }
}

// Shared loop. `assemble` builds the LP for iteration i from the current
// policy and previous iterate. Iterates, greedy gains and buffer Q-values are
// carried in Scalar; the trace stores them rounded to double.
template <typename Scalar, typename Assemble>
void iterate(IterationTrace& trace, const BasisFamily& family, const RunConfig& config,
             const Matrix<Scalar>& Phi, BasicFeedbackPolicy<Scalar> policy,
             std::optional<Vector<Scalar>> prev_alpha, std::optional<Vector<Scalar>> prev_q,
             int first_check, Assemble assemble) {
  std::vector<int> basis;
  for (int i = 0; i < config.max_iters; ++i) {
    const auto start = Clock::now();
    BasicLpProblem<Scalar> lp = assemble(policy, prev_alpha);
    lp.iteration = i;
    if (config.tau) add_input_dominance_rows(lp, family, *config.tau);
    if (!config.lp_dump_dir.empty()) {
      std::filesystem::create_directories(config.lp_dump_dir);
      std::ofstream dump(config.lp_dump_dir + "/lp_" + std::to_string(i) + ".txt");
      write_lp_text(dump, lp);
    }
    LpSettings settings = config.lp;
    if (config.warm_start) settings.warm_basis = basis;
    const LpSolution sol = solve_lp(lp, settings);

    IterationRecord rec;
    rec.iteration = i;
    rec.lp_status = sol.status;
    rec.lp_iterations = sol.iterations;
    rec.kkt = sol.kkt;
    if (sol.status != LpStatus::optimal) {
      rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      trace.records.push_back(std::move(rec));
      trace.status = RunStatus::lp_failure;
      trace.message = "iteration " + std::to_string(i) + ": LP " + to_string(sol.status);
      if (sol.status == LpStatus::unbounded) {
        trace.message += trace.algorithm == Algorithm::pi
                             ? " (initial policy likely not stabilizing or buffer lacks excitation)"
                             : " (no buffer row bounds the objective; check the excitation and that the "
                               "moments come from a measure)";
      } else if (!sol.message.empty()) {
        trace.message += " (" + sol.message + ")";
      }
      return;
    }
    basis = sol.basis;
    const Vector<Scalar> alpha = sol.alpha_wide.size() == sol.alpha.size()
                                     ? Vector<Scalar>(sol.alpha_wide.template cast<Scalar>())
                                     : Vector<Scalar>(sol.alpha.template cast<Scalar>());
    const Vector<Scalar> q = Phi * alpha;
    rec.alpha = sol.alpha;
    rec.q_buffer = q.template cast<double>();
    if (prev_q) rec.q_diff = static_cast<double>((q - *prev_q).cwiseAbs().maxCoeff());
    if (prev_alpha) fill_block_diffs(rec, family, alpha, *prev_alpha);

    try {
      rec.min_input_eigenvalue = min_input_eigenvalue(QParams(family, sol.alpha));
      policy = greedy_gain(family, alpha);
    } catch (const PolicyUndefined& e) {
      rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      trace.records.push_back(std::move(rec));
      trace.status = RunStatus::policy_undefined;
      trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return;
    }
    rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool stop = i >= first_check && prev_q && should_stop(rec, config);
    prev_alpha = alpha;
    prev_q = q;
    trace.records.push_back(std::move(rec));
    if (stop) {
      trace.status = RunStatus::converged;
      trace.message = "converged after " + std::to_string(i + 1) + " LPs";
      return;
    }
  }
  trace.status = RunStatus::max_iterations;
  trace.message = "stopped at max_iters = " + std::to_string(config.max_iters);
}

template <typename Scalar>
void run_pi(IterationTrace& trace, const ReplayBuffer& buffer, const BasisFamily& family,
            const RunConfig& config, const VectorXd& m) {
  iterate<Scalar>(trace, family, config, tuple_features<Scalar>(buffer, family),
                  config.initial_policy->template cast<Scalar>(), std::nullopt, std::nullopt,
                  /*first_check=*/1,
                  [&](const BasicFeedbackPolicy<Scalar>& policy,
                      const std::optional<Vector<Scalar>>&) {
                    return assemble_pi_lp(buffer, family, policy, config.gamma, m);
                  });
}

template <typename Scalar>
void run_vi(IterationTrace& trace, const ReplayBuffer& buffer, const BasisFamily& family,
            const RunConfig& config, const VectorXd& m) {
  BasicFeedbackPolicy<Scalar> policy;
  if (config.initial_policy) {
    policy = config.initial_policy->template cast<Scalar>();
  } else {
    try {
      policy = greedy_gain<Scalar>(*config.initial_q);
    } catch (const PolicyUndefined& e) {
      trace.status = RunStatus::policy_undefined;
      trace.message = std::string("initial Q has no greedy policy: ") + e.what();
      return;
    }
  }
  const Matrix<Scalar> Phi = tuple_features<Scalar>(buffer, family);
  const Vector<Scalar> alpha0 = config.initial_q->alpha.template cast<Scalar>();
  iterate<Scalar>(trace, family, config, Phi, policy, alpha0, Vector<Scalar>(Phi * alpha0),
                  /*first_check=*/0,
                  [&](const BasicFeedbackPolicy<Scalar>& current,
                      const std::optional<Vector<Scalar>>& prev_alpha) {
                    return assemble_vi_lp(buffer, family, *prev_alpha, current, config.gamma, m);
                  });
}

}  // namespace

IterationTrace run_q_pi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                           const RunConfig& config) {
  validate(buffer, family, config);
  if (!config.initial_policy) {
    throw std::invalid_argument("run_q_pi_lp: an initial policy is required");
  }
  IterationTrace trace(family);
  trace.algorithm = Algorithm::pi;
  const VectorXd m = objective_vector(family, config.moments);
  if (config.extended_precision) {
    run_pi<long double>(trace, buffer, family, config, m);
  } else {
    run_pi<double>(trace, buffer, family, config, m);
  }
  return trace;
}

IterationTrace run_q_vi_lp(const ReplayBuffer& buffer, const BasisFamily& family,
                           const RunConfig& config) {
  validate(buffer, family, config);
  if (!config.initial_q) throw std::invalid_argument("run_q_vi_lp: an initial Q is required");
  IterationTrace trace(family);
  trace.algorithm = Algorithm::vi;
  trace.initial_q = *config.initial_q;
  trace.initial_q_buffer = tuple_features(buffer, family) * config.initial_q->alpha;
  const VectorXd m = objective_vector(family, config.moments);
  if (config.extended_precision) {
    run_vi<long double>(trace, buffer, family, config, m);
  } else {
    run_vi<double>(trace, buffer, family, config, m);
  }
  return trace;
}

IterationTrace run_algorithm(const ReplayBuffer& buffer, const BasisFamily& family,
                             const RunConfig& config) {
  return config.algorithm == Algorithm::pi ? run_q_pi_lp(buffer, family, config)
                                           : run_q_vi_lp(buffer, family, config);
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double bellman_residual(const ReplayBuffer& buffer, const QParams& params, double gamma,
                        const FeedbackPolicy& policy) {
  using Wide = long double;
  const Vector<Wide> alpha = params.alpha.cast<Wide>();
  const BasicFeedbackPolicy<Wide> mu = policy.cast<Wide>();
  Wide worst = 0;
  for (const Transition& t : buffer.tuples()) {
    const Vector<Wide> x = t.x.cast<Wide>();
    const Vector<Wide> a = t.a.cast<Wide>();
    const Vector<Wide> y = t.y.cast<Wide>();
    const Wide lhs = alpha.dot(features(params.family, x, a));
    const Wide rhs = Wide(t.l) + Wide(gamma) * alpha.dot(features(params.family, y, mu(y)));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return static_cast<double>(worst);
}

double bellman_residual(const ReplayBuffer& buffer, const QParams& params, double gamma) {
  return bellman_residual(buffer, params, gamma, greedy_gain(params));
}

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  out << "iteration,lp_status,q_diff,P_diff,p_diff,s_diff,min_puu_eig,lp_iterations,"
         "kkt_primal,kkt_dual,kkt_gap,wall_ms,alpha\n";
  for (const IterationRecord& r : trace.records) {
    nlohmann::json alpha = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.alpha.size(); ++k) alpha.push_back(r.alpha(k));
    out << r.iteration << ',' << to_string(r.lp_status) << ',' << csv_number(r.q_diff) << ','
        << csv_number(r.P_diff) << ',' << csv_number(r.p_diff) << ',' << csv_number(r.s_diff)
        << ',' << csv_number(r.min_input_eigenvalue) << ',' << r.lp_iterations << ','
        << csv_number(r.kkt.primal) << ',' << csv_number(r.kkt.dual) << ','
        << csv_number(r.kkt.gap) << ',' << csv_number(r.wall_seconds * 1e3) << ",\""
        << alpha.dump() << "\"\n";
  }
}

}  // namespace qlp
