// qlp: command-line driver for the data-driven LP policy/value iteration
// experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qlp/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitNotConverged = 2;

struct Source {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_anchor = false;

  void add(CLI::App* app) {
    auto* p = app->add_option("--preset", preset, "Named benchmark configuration (see `qlp presets`)");
    auto* c = app->add_option("--config", config, "JSON experiment configuration file")
                  ->check(CLI::ExistingFile);
    p->excludes(c);
    app->add_option("--seed", seed, "Buffer seed (default " + std::to_string(qlp::kDefaultSeed) + ")");
    app->add_flag("--no-anchor", no_anchor,
                  "Draw all N tuples at random instead of fixing tuple 0 at the origin");
  }

  qlp::ExperimentConfig load() const {
    if (preset.empty() == config.empty()) {
      throw qlp::ConfigError("give exactly one of --preset or --config");
    }
    qlp::ExperimentConfig c = preset.empty() ? qlp::load_config(config) : qlp::preset(preset);
    if (seed) c.buffer.seed = *seed;
    if (no_anchor) c.buffer.anchor_origin = false;
    return c;
  }
};

json summary_line(const qlp::ExperimentResult& r) {
  json s = qlp::summarize(r);
  json out = {{"name", s["name"]},
              {"status", s["status"]},
              {"iterations", s["iterations"]},
              {"seconds", r.wall_seconds}};
  if (s.contains("oracle")) {
    out["oracle"] = {{"P_error", s["oracle"]["P_error"]},
                     {"p_error", s["oracle"]["p_error"]},
                     {"s_error", s["oracle"]["s_error"]}};
  }
  if (s.contains("final") && !s["final"]["gain"].is_null()) out["gain"] = s["final"]["gain"];
  out["bellman_residual"] = s["bellman_residual"];
  json settled = json::array();
  for (const auto& ro : s["rollouts"]) settled.push_back(ro["settled_step"]);
  if (!settled.empty()) out["rollout_settled_step"] = settled;
  if (!r.trace.message.empty()) out["message"] = r.trace.message;
  return out;
}

fs::path resolve_run_dir(const std::string& run) {
  if (fs::is_directory(run)) return run;
  const qlp::ExperimentConfig c = qlp::preset(run);
  return qlp::default_output_dir(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy and value iteration for unknown deterministic systems via linear programs"};
  app.require_subcommand(1);
  app.footer(
      "Output root: $QLP_OUTPUT_ROOT (default ./runs).\n"
      "Exit status: 0 success, 1 error (stage named on stderr), 2 run finished without converging.");

  // presets
  auto* presets_cmd = app.add_subcommand("presets", "List the benchmark presets or print one as JSON");
  std::string show;
  presets_cmd->add_option("--show", show, "Print the full configuration of this preset");

  // buffer
  auto* buffer_cmd = app.add_subcommand("buffer", "Sample a replay buffer and write it as CSV");
  Source buffer_src;
  buffer_src.add(buffer_cmd);
  std::optional<std::size_t> buffer_n;
  std::string buffer_out;
  buffer_cmd->add_option("-n,--size", buffer_n, "Number of tuples (overrides the configuration)");
  buffer_cmd->add_option("-o,--out", buffer_out, "Output CSV (default <run dir>/buffer.csv)");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its artifacts");
  Source run_src;
  run_src.add(run_cmd);
  std::string run_out;
  std::string run_buffer;
  std::optional<double> run_eps;
  std::optional<int> run_iters;
  std::optional<double> run_tau;
  bool run_double = false;
  bool run_dump_lp = false;
  bool run_warm = false;
  run_cmd->add_option("-o,--out", run_out, "Output directory (default $QLP_OUTPUT_ROOT/<name>-seed<seed>)");
  run_cmd->add_option("--buffer", run_buffer, "Reuse a stored buffer CSV instead of sampling")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--epsilon", run_eps, "Stopping threshold on max_b |Q^i - Q^{i-1}|");
  run_cmd->add_option("--max-iters", run_iters, "Iteration cap");
  run_cmd->add_option("--tau", run_tau, "Add P_uu diagonal-dominance rows with this margin");
  run_cmd->add_flag("--double", run_double,
                    "Carry iterates in double instead of long double (tight epsilons may not be reached)");
  run_cmd->add_flag("--dump-lp", run_dump_lp, "Write every assembled LP to <out>/lp/");
  run_cmd->add_flag("--warm-start", run_warm, "Start each LP from the previous active set");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Print the discounted Riccati solution as JSON");
  std::string oracle_plant = "lti4d";
  std::string oracle_config;
  double oracle_gamma = 0.9;
  double oracle_tol = 1e-14;
  auto* op = oracle_cmd->add_option("--plant", oracle_plant, "Built-in LTI plant")
                 ->check(CLI::IsMember({"lti4d"}));
  oracle_cmd->add_option("--config", oracle_config, "Take A, B, E, F and gamma from an LTI configuration")
      ->check(CLI::ExistingFile)
      ->excludes(op);
  auto* og = oracle_cmd->add_option("--gamma", oracle_gamma, "Discount factor");
  oracle_cmd->add_option("--tol", oracle_tol, "Riccati recursion tolerance");

  // rollout
  auto* rollout_cmd = app.add_subcommand("rollout", "Simulate the learned greedy policy of a finished run");
  std::string rollout_run;
  std::vector<double> rollout_x0;
  int rollout_horizon = 60;
  std::string rollout_out;
  rollout_cmd->add_option("--run", rollout_run, "Run directory, or a preset name to use its default directory")
      ->required();
  rollout_cmd->add_option("--x0", rollout_x0, "Initial state, comma separated (use --x0=-1,2 for a leading minus)")
      ->delimiter(',')
      ->required();
  rollout_cmd->add_option("--horizon", rollout_horizon, "Number of steps")->check(CLI::PositiveNumber);
  rollout_cmd->add_option("-o,--out", rollout_out, "Trajectory CSV (default <run dir>/rollout_x0.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*presets_cmd) {
      if (!show.empty()) {
        std::cout << qlp::to_json(qlp::preset(show)).dump(2) << '\n';
        return 0;
      }
      for (const std::string& name : qlp::preset_names()) {
        const qlp::ExperimentConfig c = qlp::preset(name);
        std::printf("%-20s %s, %s basis, N=%zu, gamma=%g, epsilon=%g\n", name.c_str(),
                    qlp::to_string(c.run.algorithm).c_str(), qlp::to_string(c.basis).c_str(),
                    c.buffer.n, c.run.gamma, c.run.epsilon);
      }
      return 0;
    }

    if (*buffer_cmd) {
      qlp::ExperimentConfig c = buffer_src.load();
      if (buffer_n) c.buffer.n = *buffer_n;
      c.validate();
      const qlp::ReplayBuffer buffer =
          qlp::build_buffer(qlp::make_plant(c.plant), qlp::make_cost(c.cost), c.buffer.state,
                            c.buffer.action, c.buffer.n, c.buffer.seed, c.buffer.anchor_origin);
      const fs::path out = buffer_out.empty() ? qlp::default_output_dir(c) / "buffer.csv" : fs::path(buffer_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      qlp::write_buffer_csv(out.string(), buffer);
      std::cout << out.string() << '\n';
      return 0;
    }

    if (*run_cmd) {
      qlp::ExperimentConfig c = run_src.load();
      if (run_eps) c.run.epsilon = *run_eps;
      if (run_iters) c.run.max_iters = *run_iters;
      if (run_tau) c.run.tau = *run_tau;
      if (run_double) c.run.extended_precision = false;
      if (run_warm) c.run.warm_start = true;
      if (!run_out.empty()) c.output_dir = run_out;
      const fs::path dir = qlp::default_output_dir(c);
      c.output_dir = dir.string();
      if (run_dump_lp) c.run.lp_dump_dir = (dir / "lp").string();
      std::optional<qlp::ReplayBuffer> stored;
      if (!run_buffer.empty()) {
        try {
          stored = qlp::read_buffer_csv(run_buffer);
        } catch (const std::exception& e) {
          throw qlp::ExperimentError("buffer", e.what());
        }
      }
      const qlp::ExperimentResult result = qlp::run_experiment(c, stored);
      qlp::write_artifacts(result, dir);
      json line = summary_line(result);
      line["output_dir"] = dir.string();
      std::cout << line.dump() << '\n';
      return result.trace.converged() ? 0 : kExitNotConverged;
    }

    if (*oracle_cmd) {
      qlp::ExperimentConfig c = oracle_config.empty() ? qlp::preset("lti4d-pi") : qlp::load_config(oracle_config);
      if (c.plant.kind != qlp::PlantSpec::Kind::lti || c.cost.kind != qlp::CostSpec::Kind::quadratic) {
        throw qlp::ConfigError("oracle: needs an LTI plant with quadratic cost");
      }
      const double gamma = oracle_config.empty() || og->count() ? oracle_gamma : c.run.gamma;
      const qlp::DareSolution dare =
          qlp::solve_discounted_dare(c.plant.A, c.plant.B, c.cost.E, c.cost.F, gamma, oracle_tol);
      json out = qlp::dare_to_json(dare);
      out["gamma"] = gamma;
      std::cout << out.dump(2) << '\n';
      return 0;
    }

    if (*rollout_cmd) {
      const fs::path dir = resolve_run_dir(rollout_run);
      const qlp::ExperimentConfig c = qlp::load_config(dir / "config.json");
      std::ifstream in(dir / "summary.json");
      if (!in) throw std::runtime_error("no summary.json in " + dir.string());
      const json summary = json::parse(in);
      if (!summary.contains("final")) throw std::runtime_error("run in " + dir.string() + " has no solved LP");
      std::vector<double> alpha = summary["final"]["alpha"].get<std::vector<double>>();
      const qlp::QParams params(c.family(), Eigen::Map<const qlp::VectorXd>(alpha.data(), alpha.size()));
      const qlp::VectorXd x0 = Eigen::Map<const qlp::VectorXd>(rollout_x0.data(), rollout_x0.size());
      if (x0.size() != c.family().state_dim()) {
        throw qlp::ConfigError("--x0 must have " + std::to_string(c.family().state_dim()) + " entries");
      }
      const qlp::RolloutRecord rec = qlp::simulate_policy(c, params, x0, rollout_horizon);
      json out = {{"x0", rollout_x0}, {"horizon", rollout_horizon}};
      if (!rec.error.empty()) {
        out["error"] = rec.error;
        std::cout << out.dump() << '\n';
        return 1;
      }
      fs::path csv = rollout_out;
      if (csv.empty()) {
        std::string tag;
        for (double v : rollout_x0) tag += (tag.empty() ? "" : "_") + json(v).dump();
        csv = dir / ("rollout_" + tag + ".csv");
      }
      qlp::write_rollout_csv(csv, rec.rollout);
      const qlp::VectorXd& xf = rec.rollout.states.back();
      out["cost"] = rec.rollout.cost;
      out["final_state"] = std::vector<double>(xf.data(), xf.data() + xf.size());
      out["settled_step"] = rec.settled_step ? json(*rec.settled_step) : json(nullptr);
      out["csv"] = csv.string();
      std::cout << out.dump() << '\n';
      return 0;
    }
  } catch (const qlp::ExperimentError& e) {
    std::cerr << "qlp: failed at stage '" << e.stage() << "': " << e.what() << '\n';
    return 1;
  } catch (const qlp::ConfigError& e) {
    std::cerr << "qlp: invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "qlp: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
