#include "qlp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>

#include "qlp/bellman_lp.hpp"

namespace qlp {

using nlohmann::json;

namespace {

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(vector_json(M.row(i).transpose()));
  return out;
}

VectorXd vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

MatrixXd matrix_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const VectorXd row = vector_from(j[i], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(what + ": ragged rows");
    M.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return M;
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

const json& required(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) {
    throw ConfigError(std::string("missing field '") + key + "'");
  }
  return j[key];
}

std::string to_string(PlantSpec::Kind kind) {
  return kind == PlantSpec::Kind::lti ? "lti" : "nonlinear2d";
}

std::string to_string(CostSpec::Kind kind) {
  return kind == CostSpec::Kind::quadratic ? "quadratic" : "nonquadratic";
}

json moments_json(const MomentSpec& m) {
  return {{"first", vector_json(m.first)},
          {"second", matrix_json(m.second)},
          {"third", vector_json(m.third)},
          {"fourth", vector_json(m.fourth)}};
}

MomentSpec moments_from(const json& j) {
  MomentSpec m;
  if (j.contains("first")) m.first = vector_from(j["first"], "moments.first");
  m.second = matrix_from(required(j, "second"), "moments.second");
  if (j.contains("third")) m.third = vector_from(j["third"], "moments.third");
  if (j.contains("fourth")) m.fourth = vector_from(j["fourth"], "moments.fourth");
  return m;
}

json run_json(const RunConfig& r) {
  json j;
  j["algorithm"] = to_string(r.algorithm);
  j["gamma"] = r.gamma;
  j["epsilon"] = r.epsilon;
  j["max_iters"] = r.max_iters;
  j["stopping"] = to_string(r.stopping);
  if (r.initial_policy) {
    j["initial_policy"] = {{"gain", matrix_json(r.initial_policy->gain)},
                           {"offset", vector_json(r.initial_policy->offset)}};
  } else {
    j["initial_policy"] = "greedy-from-initial-Q";
  }
  if (r.initial_q) {
    const QBlocks b = extract_blocks(*r.initial_q);
    j["initial_q"] = {{"P", matrix_json(b.P)}, {"p", vector_json(b.p)}, {"s", b.s}};
  } else {
    j["initial_q"] = nullptr;
  }
  j["moments"] = moments_json(r.moments);
  j["tau"] = r.tau ? json(*r.tau) : json(nullptr);
  j["warm_start"] = r.warm_start;
  j["extended_precision"] = r.extended_precision;
  j["lp"] = {{"feasibility_tol", r.lp.feasibility_tol},
             {"optimality_tol", r.lp.optimality_tol},
             {"pivot_tol", r.lp.pivot_tol},
             {"max_iterations", r.lp.max_iterations},
             {"scale", r.lp.scale}};
  return j;
}

RunConfig run_from(const json& j, const BasisFamily& family) {
  RunConfig r;
  try {
    r.algorithm = algorithm_from_string(field<std::string>(j, "algorithm", "pi"));
    r.stopping = stopping_rule_from_string(field<std::string>(j, "stopping", "buffer_q"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.gamma = field(j, "gamma", r.gamma);
  r.epsilon = field(j, "epsilon", r.epsilon);
  r.max_iters = field(j, "max_iters", r.max_iters);
  if (j.contains("initial_policy") && j["initial_policy"].is_object()) {
    const json& p = j["initial_policy"];
    auto policy = FeedbackPolicy::linear(family, matrix_from(required(p, "gain"), "initial_policy.gain"));
    if (p.contains("offset")) {
      policy.offset = vector_from(p["offset"], "initial_policy.offset");
      if (policy.offset.size() != family.input_dim()) {
        throw ConfigError("initial_policy.offset has the wrong length");
      }
    }
    r.initial_policy = policy;
  } else if (j.contains("initial_policy") && j["initial_policy"].is_string() &&
             j["initial_policy"].get<std::string>() != "greedy-from-initial-Q") {
    throw ConfigError("initial_policy: expected an object or \"greedy-from-initial-Q\"");
  }
  if (j.contains("initial_q") && !j["initial_q"].is_null()) {
    const json& q = j["initial_q"];
    const VectorXd p = q.contains("p") ? vector_from(q["p"], "initial_q.p") : VectorXd();
    r.initial_q = pack_blocks(family, matrix_from(required(q, "P"), "initial_q.P"),
                              !family.has_affine_terms() && p.isZero(0.0) ? VectorXd() : p,
                              field(q, "s", 0.0));
  }
  r.moments = moments_from(required(j, "moments"));
  if (j.contains("tau") && !j["tau"].is_null()) r.tau = j["tau"].get<double>();
  r.warm_start = field(j, "warm_start", r.warm_start);
  r.extended_precision = field(j, "extended_precision", r.extended_precision);
  if (j.contains("lp")) {
    const json& lp = j["lp"];
    r.lp.feasibility_tol = field(lp, "feasibility_tol", r.lp.feasibility_tol);
    r.lp.optimality_tol = field(lp, "optimality_tol", r.lp.optimality_tol);
    r.lp.pivot_tol = field(lp, "pivot_tol", r.lp.pivot_tol);
    r.lp.max_iterations = field(lp, "max_iterations", r.lp.max_iterations);
    r.lp.scale = field(lp, "scale", r.lp.scale);
  }
  return r;
}

MatrixXd row(std::initializer_list<double> values) {
  MatrixXd M(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double v : values) M(0, k++) = v;
  return M;
}

ExperimentConfig lti4d_base(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.plant = {PlantSpec::Kind::lti, lti4d_A(), lti4d_B()};
  c.cost = {CostSpec::Kind::quadratic, MatrixXd::Identity(4, 4), MatrixXd::Identity(1, 1)};
  c.basis = BasisKind::extended_quadratic;
  c.buffer = {7000, SamplerSpec::uniform(-5, 5, 4), SamplerSpec::gaussian(0, 9, 1), kDefaultSeed, true};
  c.run.gamma = 0.9;
  c.run.epsilon = 1e-13;
  c.run.max_iters = 500;
  c.run.moments.second = MatrixXd::Identity(5, 5);
  return c;
}

ExperimentConfig nl2d_base(const std::string& name, CostSpec::Kind cost) {
  ExperimentConfig c;
  c.name = name;
  c.plant = {PlantSpec::Kind::nonlinear2d, {}, {}};
  c.cost = {cost, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)};
  c.basis = BasisKind::quartic;
  c.buffer = {3000, SamplerSpec::uniform(-5, 5, 2), SamplerSpec::gaussian(0, 1, 1), kDefaultSeed, true};
  c.run.gamma = 0.95;
  c.run.epsilon = 1e-17;
  c.run.max_iters = 500;
  c.run.moments.second = MatrixXd::Identity(3, 3);
  c.run.moments.third = VectorXd::Ones(12);
  c.run.moments.fourth = VectorXd::Ones(4);
  if (cost == CostSpec::Kind::quadratic) {
    c.rollout_x0 = {(VectorXd(2) << 1.8, 1.0).finished()};
  } else {
    c.rollout_x0 = {(VectorXd(2) << 0.7, -0.25).finished()};
  }
  return c;
}

}  // namespace

int PlantSpec::state_dim() const { return kind == Kind::lti ? static_cast<int>(A.rows()) : 2; }
int PlantSpec::input_dim() const { return kind == Kind::lti ? static_cast<int>(B.cols()) : 1; }

BasisFamily ExperimentConfig::family() const {
  return BasisFamily(basis, plant.state_dim(), plant.input_dim());
}

void ExperimentConfig::validate() const {
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  if (plant.kind == PlantSpec::Kind::lti) {
    if (n < 1 || plant.A.cols() != n || plant.B.rows() != n || m < 1) {
      throw ConfigError("plant: A must be n x n and B n x m");
    }
    if (!plant.A.allFinite() || !plant.B.allFinite()) throw ConfigError("plant: non-finite entries");
  }
  if (cost.E.rows() != n || cost.E.cols() != n || cost.F.rows() != m || cost.F.cols() != m) {
    throw ConfigError("cost: E must be " + std::to_string(n) + "x" + std::to_string(n) +
                      " and F " + std::to_string(m) + "x" + std::to_string(m));
  }
  const auto min_eig = [](const MatrixXd& M) {
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  };
  if (!cost.E.allFinite() || !cost.F.allFinite() || !cost.E.isApprox(cost.E.transpose()) ||
      !cost.F.isApprox(cost.F.transpose())) {
    throw ConfigError("cost: E and F must be finite and symmetric");
  }
  if (min_eig(cost.E) < 0.0) throw ConfigError("cost: E must be positive semidefinite");
  if (!(min_eig(cost.F) > 0.0)) throw ConfigError("cost: F must be positive definite");
  if (buffer.n < 1) throw ConfigError("buffer: N must be positive");
  if (buffer.state.dimension != n || buffer.action.dimension != m) {
    throw ConfigError("buffer: sampler dimensions do not match the plant");
  }
  try {
    buffer.state.validate();
    buffer.action.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("buffer: ") + e.what());
  }
  const BasisFamily f = family();
  if (!(run.gamma > 0.0 && run.gamma < 1.0)) throw ConfigError("run: gamma must lie in (0, 1)");
  if (!(run.epsilon > 0.0)) throw ConfigError("run: epsilon must be positive");
  if (run.max_iters < 1) throw ConfigError("run: max_iters must be positive");
  if (run.tau && !(*run.tau >= 0.0)) throw ConfigError("run: tau must be nonnegative");
  if (run.initial_policy) {
    const FeedbackPolicy& p = *run.initial_policy;
    if (p.gain.rows() != m || p.gain.cols() != f.state_feature_dim() || p.offset.size() != m) {
      throw ConfigError("run: initial policy gain must be " + std::to_string(m) + "x" +
                        std::to_string(f.state_feature_dim()) + " for the " +
                        to_string(basis) + " family");
    }
  }
  if (run.algorithm == Algorithm::pi && !run.initial_policy) {
    throw ConfigError("run: policy iteration needs an explicit initial policy");
  }
  if (run.algorithm == Algorithm::vi) {
    if (!run.initial_q) throw ConfigError("run: value iteration needs initial_q");
    if (!(run.initial_q->family == f)) throw ConfigError("run: initial_q is for a different family");
  }
  try {
    objective_vector(f, run.moments);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("run: ") + e.what());
  }
  for (const VectorXd& x0 : rollout_x0) {
    if (x0.size() != n) throw ConfigError("rollout: x0 must have " + std::to_string(n) + " entries");
  }
  if (rollout_horizon < 1) throw ConfigError("rollout: horizon must be positive");
}

ExperimentError::ExperimentError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

std::vector<std::string> preset_names() {
  return {"lti4d-pi",         "lti4d-vi-a",        "lti4d-vi-b",
          "nl2d-quad-pi",     "nl2d-quad-vi-a",    "nl2d-quad-vi-b",
          "nl2d-nonquad-pi",  "nl2d-nonquad-vi-a", "nl2d-nonquad-vi-b"};
}

ExperimentConfig preset(const std::string& name) {
  if (name.rfind("lti4d-", 0) == 0) {
    ExperimentConfig c = lti4d_base(name);
    const BasisFamily f = c.family();
    const auto target = FeedbackPolicy::linear(f, row({-0.9, -0.7, -0.5, -0.1}));
    const std::string variant = name.substr(6);
    if (variant == "pi") {
      c.run.initial_policy = target;
      return c;
    }
    if (variant == "vi-a" || variant == "vi-b") {
      c.run.algorithm = Algorithm::vi;
      c.run.initial_q = pack_blocks(f, MatrixXd::Identity(5, 5));
      if (variant == "vi-b") c.run.initial_policy = target;
      return c;
    }
  }
  for (const auto& [prefix, cost] : {std::pair{std::string("nl2d-quad-"), CostSpec::Kind::quadratic},
                                     std::pair{std::string("nl2d-nonquad-"), CostSpec::Kind::nonquadratic}}) {
    if (name.rfind(prefix, 0) != 0) continue;
    ExperimentConfig c = nl2d_base(name, cost);
    const BasisFamily f = c.family();
    const auto target = FeedbackPolicy::linear(f, row({-1.5, 0.5, 0.0, 0.0}));
    const std::string variant = name.substr(prefix.size());
    if (variant == "pi") {
      c.run.initial_policy = target;
      return c;
    }
    if (variant == "vi-a" || variant == "vi-b") {
      c.run.algorithm = Algorithm::vi;
      c.run.initial_q = QParams::zero(f);
      c.run.initial_policy = variant == "vi-a" ? FeedbackPolicy::zero(f) : target;
      return c;
    }
  }
  std::string known;
  for (const std::string& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["plant"] = {{"kind", to_string(c.plant.kind)}};
  if (c.plant.kind == PlantSpec::Kind::lti) {
    j["plant"]["A"] = matrix_json(c.plant.A);
    j["plant"]["B"] = matrix_json(c.plant.B);
  }
  j["cost"] = {{"kind", to_string(c.cost.kind)}, {"E", matrix_json(c.cost.E)}, {"F", matrix_json(c.cost.F)}};
  j["basis"] = to_string(c.basis);
  j["buffer"] = {{"n", c.buffer.n},
                 {"state", c.buffer.state.describe()},
                 {"action", c.buffer.action.describe()},
                 {"seed", c.buffer.seed},
                 {"anchor_origin", c.buffer.anchor_origin}};
  j["run"] = run_json(c.run);
  json x0s = json::array();
  for (const VectorXd& x0 : c.rollout_x0) x0s.push_back(vector_json(x0));
  j["rollout"] = {{"x0", x0s}, {"horizon", c.rollout_horizon}};
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.name = field<std::string>(j, "name", "custom");
  const json& plant = required(j, "plant");
  const std::string plant_kind = field<std::string>(plant, "kind", "");
  if (plant_kind == "lti") {
    c.plant = {PlantSpec::Kind::lti, matrix_from(required(plant, "A"), "plant.A"),
               matrix_from(required(plant, "B"), "plant.B")};
  } else if (plant_kind == "lti4d") {
    c.plant = {PlantSpec::Kind::lti, lti4d_A(), lti4d_B()};
  } else if (plant_kind == "nonlinear2d") {
    c.plant = {PlantSpec::Kind::nonlinear2d, {}, {}};
  } else {
    throw ConfigError("plant.kind must be lti, lti4d or nonlinear2d");
  }
  const json& cost = required(j, "cost");
  const std::string cost_kind = field<std::string>(cost, "kind", "");
  if (cost_kind != "quadratic" && cost_kind != "nonquadratic") {
    throw ConfigError("cost.kind must be quadratic or nonquadratic");
  }
  c.cost = {cost_kind == "quadratic" ? CostSpec::Kind::quadratic : CostSpec::Kind::nonquadratic,
            matrix_from(required(cost, "E"), "cost.E"), matrix_from(required(cost, "F"), "cost.F")};
  try {
    c.basis = basis_kind_from_string(field<std::string>(j, "basis", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const json& buffer = required(j, "buffer");
  try {
    c.buffer.n = required(buffer, "n").get<std::size_t>();
    c.buffer.state = SamplerSpec::parse(required(buffer, "state").get<std::string>(), c.plant.state_dim());
    c.buffer.action = SamplerSpec::parse(required(buffer, "action").get<std::string>(), c.plant.input_dim());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("buffer: ") + e.what());
  }
  c.buffer.seed = field<std::uint64_t>(buffer, "seed", kDefaultSeed);
  c.buffer.anchor_origin = field(buffer, "anchor_origin", true);
  try {
    c.run = run_from(required(j, "run"), c.family());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("run: ") + e.what());
  }
  if (j.contains("rollout")) {
    const json& r = j["rollout"];
    if (r.contains("x0")) {
      for (const json& x0 : r["x0"]) c.rollout_x0.push_back(vector_from(x0, "rollout.x0"));
    }
    c.rollout_horizon = field(r, "horizon", c.rollout_horizon);
  }
  c.output_dir = field<std::string>(j, "output_dir", "");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

Plant make_plant(const PlantSpec& spec) {
  return spec.kind == PlantSpec::Kind::lti ? make_lti_plant(spec.A, spec.B) : make_nonlinear2d_plant();
}

StageCost make_cost(const CostSpec& spec) {
  return spec.kind == CostSpec::Kind::quadratic ? make_quadratic_cost(spec.E, spec.F)
                                                : make_nonquadratic_cost(spec.E, spec.F);
}

std::filesystem::path output_root() {
  const char* env = std::getenv("QLP_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

std::filesystem::path default_output_dir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  return output_root() / (config.name + "-seed" + std::to_string(config.buffer.seed));
}

RolloutRecord simulate_policy(const ExperimentConfig& config, const QParams& params,
                              const VectorXd& x0, int horizon) {
  const FeedbackPolicy mu = greedy_gain(params);
  RolloutRecord rec;
  rec.x0 = x0;
  try {
    rec.rollout = rollout_cost(make_plant(config.plant), make_cost(config.cost),
                               [&mu](const VectorXd& x) { return mu(x); }, x0,
                               config.run.gamma, horizon);
  } catch (const DivergedTrajectory& e) {
    rec.error = e.what();
    return rec;
  }
  for (std::size_t k = 0; k < rec.rollout.states.size(); ++k) {
    if (rec.rollout.states[k].lpNorm<Eigen::Infinity>() <= 1e-3) {
      rec.settled_step = static_cast<int>(k);
      break;
    }
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<ReplayBuffer>& given) {
  const auto start = std::chrono::steady_clock::now();
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw ExperimentError("config", e.what());
  }
  const BasisFamily family = config.family();
  std::optional<ReplayBuffer> buffer = given;
  try {
    if (!buffer) {
      buffer = build_buffer(make_plant(config.plant), make_cost(config.cost), config.buffer.state,
                            config.buffer.action, config.buffer.n, config.buffer.seed,
                            config.buffer.anchor_origin);
    } else if (buffer->state_dim() != family.state_dim() ||
               buffer->input_dim() != family.input_dim()) {
      throw std::invalid_argument("stored buffer does not match the plant dimensions");
    }
  } catch (const std::exception& e) {
    throw ExperimentError("buffer", e.what());
  }

  std::optional<IterationTrace> trace;
  try {
    trace = run_algorithm(*buffer, family, config.run);
  } catch (const std::exception& e) {
    throw ExperimentError("algorithm", e.what());
  }
  ExperimentResult result{config, std::move(*buffer), std::move(*trace), {}, {}, {}, {}, 0.0};

  const std::optional<QParams> params = result.trace.final_params();
  try {
    if (config.plant.kind == PlantSpec::Kind::lti && config.cost.kind == CostSpec::Kind::quadratic &&
        config.basis == BasisKind::extended_quadratic) {
      result.dare = solve_discounted_dare(config.plant.A, config.plant.B, config.cost.E,
                                          config.cost.F, config.run.gamma);
      if (params) result.oracle_error = qfun_error(*params, *result.dare);
    }
  } catch (const std::exception& e) {
    throw ExperimentError("oracle", e.what());
  }

  if (params && result.trace.status != RunStatus::policy_undefined &&
      min_input_eigenvalue(*params) > kDefiniteTolerance) {
    if (result.trace.converged()) {
      result.bellman_residual = bellman_residual(result.buffer, *params, config.run.gamma);
    }
    try {
      for (const VectorXd& x0 : config.rollout_x0) {
        result.rollouts.push_back(simulate_policy(config, *params, x0, config.rollout_horizon));
      }
    } catch (const std::exception& e) {
      throw ExperimentError("rollout", e.what());
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

json dare_to_json(const DareSolution& dare) {
  return {{"P", matrix_json(dare.P)},
          {"Pq", matrix_json(dare.Pq)},
          {"K", matrix_json(dare.K)},
          {"residual", dare.residual},
          {"iterations", dare.iterations}};
}

json summarize(const ExperimentResult& r) {
  const IterationTrace& t = r.trace;
  json s;
  s["name"] = r.config.name;
  s["algorithm"] = to_string(t.algorithm);
  s["basis"] = to_string(r.config.basis);
  s["status"] = to_string(t.status);
  s["message"] = t.message;
  s["iterations"] = t.iterations();
  s["buffer"] = {{"n", r.buffer.size()},
                 {"seed", r.buffer.seed()},
                 {"resamples", r.buffer.resamples()},
                 {"anchored", r.buffer.anchored()}};
  double min_eig = std::numeric_limits<double>::infinity();
  for (const IterationRecord& rec : t.records) {
    if (rec.lp_status == LpStatus::optimal) min_eig = std::min(min_eig, rec.min_input_eigenvalue);
  }
  s["min_input_eigenvalue_over_run"] = std::isfinite(min_eig) ? json(min_eig) : json(nullptr);
  if (!t.records.empty()) {
    const IterationRecord& last = t.records.back();
    s["last_iteration"] = {{"lp_status", to_string(last.lp_status)},
                           {"q_diff", last.q_diff},
                           {"P_diff", last.P_diff},
                           {"p_diff", last.p_diff},
                           {"s_diff", last.s_diff}};
  }
  if (const auto params = t.final_params()) {
    const QBlocks b = extract_blocks(*params);
    json fin = {{"alpha", vector_json(params->alpha)},
                {"P", matrix_json(b.P)},
                {"p", vector_json(b.p)},
                {"s", b.s},
                {"min_input_eigenvalue", min_input_eigenvalue(*params)}};
    try {
      const FeedbackPolicy mu = greedy_gain(*params);
      fin["gain"] = matrix_json(mu.gain);
      fin["offset"] = vector_json(mu.offset);
    } catch (const PolicyUndefined&) {
      fin["gain"] = nullptr;
    }
    s["final"] = fin;
  }
  if (r.oracle_error) {
    s["oracle"] = {{"P_error", r.oracle_error->P},
                   {"p_error", r.oracle_error->p},
                   {"s_error", r.oracle_error->s},
                   {"dare", dare_to_json(*r.dare)}};
  }
  s["bellman_residual"] = r.bellman_residual ? json(*r.bellman_residual) : json(nullptr);
  json rollouts = json::array();
  for (const RolloutRecord& rec : r.rollouts) {
    json states = json::array();
    json inputs = json::array();
    for (const VectorXd& x : rec.rollout.states) states.push_back(vector_json(x));
    for (const VectorXd& u : rec.rollout.inputs) inputs.push_back(vector_json(u));
    rollouts.push_back({{"x0", vector_json(rec.x0)},
                        {"cost", rec.error.empty() ? json(rec.rollout.cost) : json(nullptr)},
                        {"settled_step", rec.settled_step ? json(*rec.settled_step) : json(nullptr)},
                        {"error", rec.error},
                        {"states", states},
                        {"inputs", inputs}});
  }
  s["rollouts"] = rollouts;
  return s;
}

void write_rollout_csv(const std::filesystem::path& path, const Rollout& rollout) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const Eigen::Index n = rollout.states.empty() ? 0 : rollout.states.front().size();
  const Eigen::Index m = rollout.inputs.empty() ? 0 : rollout.inputs.front().size();
  out << "step";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i + 1;
  out << '\n';
  out.precision(17);
  for (std::size_t k = 0; k < rollout.states.size(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << rollout.states[k](i);
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ',';
      if (k < rollout.inputs.size()) out << rollout.inputs[k](i);
    }
    out << '\n';
  }
}

void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  open("config.json") << to_json(r.config).dump(2) << '\n';
  write_buffer_csv((dir / "buffer.csv").string(), r.buffer);
  {
    auto out = open("trace.csv");
    write_trace_csv(out, r.trace);
  }
  open("summary.json") << summarize(r).dump(2) << '\n';
  json timing = {{"total_seconds", r.wall_seconds}};
  json per_lp = json::array();
  for (const IterationRecord& rec : r.trace.records) per_lp.push_back(rec.wall_seconds);
  timing["lp_seconds"] = per_lp;
  open("timing.json") << timing.dump(2) << '\n';
  for (std::size_t k = 0; k < r.rollouts.size(); ++k) {
    if (!r.rollouts[k].error.empty()) continue;
    write_rollout_csv(dir / ("rollout_" + std::to_string(k) + ".csv"), r.rollouts[k].rollout);
  }
  open("plot.py") << plot_script();
}

std::string plot_script() {
  return R"PY(#!/usr/bin/env python3
"""Convergence and trajectory plots for one run directory.

usage: python3 plot.py [run_dir]   (defaults to the directory of this script)
"""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

run = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def num(s):
    try:
        return float(s)
    except ValueError:
        return float("nan")


trace = read(os.path.join(run, "trace.csv"))
rollouts = sorted(glob.glob(os.path.join(run, "rollout_*.csv")))

fig, axes = plt.subplots(1, 2 if rollouts else 1, figsize=(11 if rollouts else 6, 4), squeeze=False)
ax = axes[0][0]
it = [int(r["iteration"]) for r in trace]
for key, label in [("P_diff", r"$||P^i-P^{i-1}||_\infty$"),
                   ("p_diff", r"$||p^i-p^{i-1}||_\infty$"),
                   ("s_diff", r"$|s^i-s^{i-1}|$"),
                   ("q_diff", r"$\max_b |Q^i-Q^{i-1}|$")]:
    ys = [num(r[key]) for r in trace]
    pts = [(i, y) for i, y in zip(it, ys) if y == y and y > 0]
    if pts:
        ax.semilogy(*zip(*pts), marker=".", label=label)
ax.set_xlabel("iteration")
ax.set_title("successive differences")
ax.legend()

if rollouts:
    ax = axes[0][1]
    for path in rollouts:
        rows = read(path)
        steps = [int(r["step"]) for r in rows]
        for key in rows[0]:
            if key == "step":
                continue
            ys = [num(r[key]) for r in rows]
            ax.plot(steps, ys, marker=".", label=f"{key} ({os.path.basename(path)[:-4]})")
    ax.set_xlabel("k")
    ax.set_title("closed loop")
    ax.legend(fontsize="small")

fig.tight_layout()
out = os.path.join(run, "plot.png")
fig.savefig(out, dpi=150)
print(out)
)PY";
}

}  // namespace qlp
