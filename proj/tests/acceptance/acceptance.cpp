// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every criterion has been evaluated, whatever the
// verdicts; --strict makes any FAIL a nonzero exit. A criterion that throws
// was not evaluated and always gives exit status 2.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qlp/experiment.hpp"
#include "support/oracles.hpp"

namespace {

using namespace qlp;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every preset run is cached by (name, seed); several criteria share them.
struct Run {
  std::optional<ExperimentResult> result;
  std::string error;
};

class Runs {
 public:
  const Run& get(const std::string& name, std::uint64_t seed) {
    auto key = std::make_pair(name, seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Run run;
    ExperimentConfig c = preset(name);
    c.buffer.seed = seed;
    try {
      run.result = run_experiment(c);
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    return cache_.emplace(key, std::move(run)).first->second;
  }

 private:
  std::map<std::pair<std::string, std::uint64_t>, Run> cache_;
};

std::string status_of(const Run& r) {
  if (!r.result) return "error: " + r.error;
  return to_string(r.result->trace.status) + " after " + std::to_string(r.result->trace.iterations()) +
         " LPs";
}

bool converged(const Run& r) { return r.result && r.result->trace.converged(); }

// 1. LTI oracle recovery.
Verdict lti_oracle(Runs& runs) {
  const auto start = std::chrono::steady_clock::now();
  const Run& r = runs.get("lti4d-pi", 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!converged(r) || !r.result->oracle_error) return {false, "lti4d-pi " + status_of(r)};
  const int lps = r.result->trace.iterations();
  const QFunctionError& e = *r.result->oracle_error;
  const bool ok = lps >= 7 && lps <= 9 && e.P <= 1e-6 && e.p <= 1e-6 && e.s <= 1e-6 && secs < 60.0;
  return {ok, std::to_string(lps) + " LPs (7..9), |dP|=" + fmt(e.P) + " |dp|=" + fmt(e.p) +
                  " |ds|=" + fmt(e.s) + " (<=1e-6), " + fmt(secs) + " s (<60)"};
}

// 2. VI warm-start ordering and counts.
Verdict vi_ordering(Runs& runs) {
  const double target_a = 71, target_b = 35;
  bool ok = true;
  std::ostringstream d;
  d << "A/B LPs per seed:";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Run& a = runs.get("lti4d-vi-a", seed);
    const Run& b = runs.get("lti4d-vi-b", seed);
    if (!converged(a) || !converged(b)) {
      ok = false;
      d << " seed " << seed << " A " << status_of(a) << ", B " << status_of(b) << ";";
      continue;
    }
    const int na = a.result->trace.iterations(), nb = b.result->trace.iterations();
    ok = ok && nb < na;
    ok = ok && std::abs(na - target_a) <= 0.25 * target_a && std::abs(nb - target_b) <= 0.25 * target_b;
    d << " " << na << "/" << nb;
  }
  d << " (need B<A, A in 71+-25%, B in 35+-25%)";
  return {ok, d.str()};
}

MatrixXd printed_quadratic_P() {
  return (MatrixXd(5, 5) << 1.1154, -0.0101, 0.0288, 0.0097, 0.6390,
          -0.0101, 1.1195, 0.0667, 0.0209, 0.0617,
          0.0288, 0.0667, 0.0023, 0.0045, -0.0305,
          0.0097, 0.0209, 0.0045, -4e-4, -0.2880,
          0.6390, 0.0617, -0.0305, -0.2880, 1.0157).finished();
}

MatrixXd printed_nonquadratic_P() {
  return (MatrixXd(5, 5) << 0.6435, 0.0682, 0.0259, -0.0131, 0.0329,
          0.0682, 0.6310, 0.1173, 0.0190, 0.1450,
          0.0259, 0.1173, 0.0146, 0.0044, 0.0451,
          -0.0131, 0.0190, 0.0044, 0.0034, 0.0051,
          0.0329, 0.1450, 0.0451, 0.0051, 0.2107).finished();
}

const char* kCosts[] = {"quad", "nonquad"};

// 3. Nonlinear fixed point.
Verdict nonlinear_match(Runs& runs) {
  const MatrixXd refP[] = {printed_quadratic_P(), printed_nonquadratic_P()};
  const VectorXd refK[] = {(VectorXd(4) << -0.6292, -0.0608, 0.0301, 0.2836).finished(),
                           (VectorXd(4) << -0.1561, -0.6881, -0.2140, -0.0242).finished()};
  bool ok = true;
  std::ostringstream d;
  for (int c = 0; c < 2; ++c) {
    std::vector<VectorXd> alphas;
    d << kCosts[c] << ":";
    for (const char* sub : {"pi", "vi-a", "vi-b"}) {
      const std::string name = std::string("nl2d-") + kCosts[c] + "-" + sub;
      const Run& r = runs.get(name, 1);
      if (!converged(r)) {
        ok = false;
        d << " " << sub << " " << status_of(r) << ";";
        continue;
      }
      const QParams q = *r.result->trace.final_params();
      const double dP = (extract_blocks(q).P - refP[c]).cwiseAbs().maxCoeff();
      double dK = INFINITY;
      try {
        dK = (greedy_gain(q).gain.row(0).transpose() - refK[c]).cwiseAbs().maxCoeff();
      } catch (const PolicyUndefined&) {
      }
      ok = ok && dP <= 5e-2 && dK <= 5e-3;
      d << " " << sub << " |dP|=" << fmt(dP) << " |dK|=" << fmt(dK) << ";";
      alphas.push_back(q.alpha);
    }
    if (alphas.size() == 3) {
      double spread = 0;
      for (const VectorXd& a : alphas) spread = std::max(spread, (a - alphas[0]).cwiseAbs().maxCoeff());
      ok = ok && spread <= 1e-6;
      d << " PI/VI spread " << fmt(spread) << ";";
    }
    d << " ";
  }
  d << "(need |dP|<=5e-2, |dK|<=5e-3, spread<=1e-6)";
  return {ok, d.str()};
}

// 4. Regulation under converged policies.
Verdict regulation(Runs& runs) {
  bool ok = true;
  std::ostringstream d;
  for (const char* cost : kCosts) {
    for (const char* sub : {"pi", "vi-a", "vi-b"}) {
      const std::string name = std::string("nl2d-") + cost + "-" + sub;
      const Run& r = runs.get(name, 1);
      d << name << ": ";
      if (!converged(r)) {
        ok = false;
        d << status_of(r);
        if (r.result && !r.result->rollouts.empty() && r.result->rollouts[0].settled_step) {
          d << " (last policy settles at step " << *r.result->rollouts[0].settled_step << ")";
        }
        d << "; ";
        continue;
      }
      if (r.result->rollouts.empty()) {
        ok = false;
        d << "no rollout; ";
        continue;
      }
      const RolloutRecord& rec = r.result->rollouts[0];
      const bool settled = rec.error.empty() && rec.settled_step && *rec.settled_step <= 60;
      ok = ok && settled;
      d << (settled ? "settles at step " + std::to_string(*rec.settled_step) : "does not settle") << "; ";
    }
  }
  d << "(need ||x_k||inf<=1e-3 within 60 steps)";
  return {ok, d.str()};
}

// 5. VI monotonicity from Q0 = 0.
Verdict vi_monotone(Runs& runs) {
  bool ok = true;
  std::ostringstream d;
  for (const char* cost : kCosts) {
    for (const char* sub : {"vi-a", "vi-b"}) {
      const std::string name = std::string("nl2d-") + cost + "-" + sub;
      const Run& r = runs.get(name, 1);
      d << name << ": ";
      if (!r.result) {
        ok = false;
        d << status_of(r) << "; ";
        continue;
      }
      const IterationTrace& t = r.result->trace;
      VectorXd prev = t.initial_q_buffer;
      double worst = INFINITY;
      int checked = 0;
      for (const IterationRecord& rec : t.records) {
        if (rec.lp_status != LpStatus::optimal) break;
        worst = std::min(worst, (rec.q_buffer - prev).minCoeff());
        prev = rec.q_buffer;
        ++checked;
      }
      if (checked == 0) {
        ok = false;
        d << "no iterates (" << status_of(r) << "); ";
        continue;
      }
      ok = ok && worst >= -1e-8;
      d << checked << " iterates, min step " << fmt(worst) << "; ";
    }
  }
  d << "(need min step >= -1e-8)";
  return {ok, d.str()};
}

// 6. Bellman residual at PI convergence.
Verdict bellman_certificate(Runs& runs) {
  bool ok = true;
  std::ostringstream d;
  for (const char* name : {"lti4d-pi", "nl2d-quad-pi", "nl2d-nonquad-pi"}) {
    const Run& r = runs.get(name, 1);
    d << name << ": ";
    if (!converged(r) || !r.result->bellman_residual) {
      ok = false;
      d << status_of(r) << "; ";
      continue;
    }
    const double res = *r.result->bellman_residual;
    ok = ok && res <= 1e-6;
    d << "residual " << fmt(res) << "; ";
  }
  d << "(need <= 1e-6)";
  return {ok, d.str()};
}

// 7. LP solver against planted instances.
Verdict lp_conformance() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kdist(1, 30);
  int wrong_status = 0, wrong_value = 0;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = static_cast<qlp::testing::LpKind>(trial % 3);
    const int K = kdist(rng);
    const int N = std::uniform_int_distribution<int>(K + 1, 1000)(rng);
    const qlp::testing::KnownLp k = qlp::testing::make_known_lp(rng, kind, K, N);
    LpProblem p;
    p.m = k.m;
    p.G = k.G;
    p.h = k.h;
    p.tuple_rows = N;
    const LpSolution s = solve_lp(p);
    const LpStatus expect = kind == qlp::testing::LpKind::bounded     ? LpStatus::optimal
                            : kind == qlp::testing::LpKind::unbounded ? LpStatus::unbounded
                                                                      : LpStatus::infeasible;
    if (s.status != expect) {
      ++wrong_status;
      continue;
    }
    if (expect != LpStatus::optimal) continue;
    const double rel = std::abs(s.objective - k.objective) / std::max(1.0, std::abs(k.objective));
    worst = std::max(worst, rel);
    if (rel > 1e-7) ++wrong_value;
  }
  return {wrong_status == 0 && wrong_value == 0,
          "100 instances, " + std::to_string(wrong_status) + " wrong status, " +
              std::to_string(wrong_value) + " off optimum, worst rel " + fmt(worst) + " (<=1e-7)"};
}

// 8. Closed-form greedy policy against numeric minimisation.
Verdict greedy_equivalence() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  const BasisFamily families[] = {BasisFamily(BasisKind::extended_quadratic, 4, 1),
                                  BasisFamily(BasisKind::quartic, 2, 1),
                                  BasisFamily(BasisKind::extended_quadratic, 2, 2),
                                  BasisFamily(BasisKind::pure_quadratic, 3, 1)};
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const BasisFamily& f = families[trial % 4];
    const int d = f.lifted_dim(), m = f.input_dim();
    MatrixXd P(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) P(i, j) = P(j, i) = normal(rng);
    const MatrixXd R = MatrixXd::NullaryExpr(m, m, [&] { return normal(rng); });
    P.bottomRightCorner(m, m) = R * R.transpose() + 0.2 * MatrixXd::Identity(m, m);
    const QParams q = f.has_affine_terms()
                          ? pack_blocks(f, P, VectorXd::NullaryExpr(d, [&] { return normal(rng); }),
                                        normal(rng))
                          : pack_blocks(f, P);
    const VectorXd x = VectorXd::NullaryExpr(f.state_dim(), [&] { return normal(rng); });
    const VectorXd closed = greedy_policy(q, x);
    const VectorXd numeric =
        qlp::testing::numeric_argmin([&](const VectorXd& u) { return eval_q(q, x, u); }, m);
    worst = std::max(worst, (closed - numeric).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "200 pairs, worst |u - u_num| " + fmt(worst) + " (<=1e-6)"};
}

// 9. P_uu positive definite at every iteration, no tau.
Verdict puu_definite(Runs& runs) {
  bool ok = true;
  int runs_ok = 0, total = 0;
  double lowest = INFINITY;
  std::ostringstream bad;
  for (const std::string& name : preset_names()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ++total;
      const Run& r = runs.get(name, seed);
      bool this_ok = r.result.has_value() && !r.result->config.run.tau;
      int iterates = 0;
      if (this_ok) {
        for (const IterationRecord& rec : r.result->trace.records) {
          if (rec.lp_status != LpStatus::optimal) continue;
          ++iterates;
          lowest = std::min(lowest, rec.min_input_eigenvalue);
          if (!(rec.min_input_eigenvalue > 0.0)) this_ok = false;
        }
        if (iterates == 0 || r.result->trace.status == RunStatus::policy_undefined) this_ok = false;
      }
      if (this_ok) {
        ++runs_ok;
      } else {
        ok = false;
        if (bad.tellp() < 400) bad << " " << name << "/" << seed << " (" << status_of(r) << ")";
      }
    }
  }
  std::string detail = std::to_string(runs_ok) + "/" + std::to_string(total) +
                       " runs with PD P_uu at every iterate, lowest eigenvalue " + fmt(lowest);
  if (!ok) detail += "; failing:" + bad.str();
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite for the Q-function LP solvers"};
  bool strict = false;
  std::string report;
  app.add_flag("--strict", strict, "exit nonzero if any criterion fails");
  app.add_option("--report", report, "also write the verdict lines to this file");
  CLI11_PARSE(app, argc, argv);

  Runs runs;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"C1 LTI oracle recovery", [&] { return lti_oracle(runs); }},
      {"C2 VI warm-start ordering", [&] { return vi_ordering(runs); }},
      {"C3 nonlinear fixed point", [&] { return nonlinear_match(runs); }},
      {"C4 regulation", [&] { return regulation(runs); }},
      {"C5 VI monotonicity", [&] { return vi_monotone(runs); }},
      {"C6 Bellman residual", [&] { return bellman_certificate(runs); }},
      {"C7 LP conformance", [] { return lp_conformance(); }},
      {"C8 greedy policy", [] { return greedy_equivalence(); }},
      {"C9 P_uu definiteness", [&] { return puu_definite(runs); }},
  };

  std::ostringstream lines;
  int passed = 0;
  bool evaluated = true;
  for (const auto& [label, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("not evaluated: ") + e.what()};
      evaluated = false;
    }
    passed += v.pass;
    lines << (v.pass ? "PASS " : "FAIL ") << label << ": " << v.detail << "\n";
    std::cout << (v.pass ? "PASS " : "FAIL ") << label << ": " << v.detail << std::endl;
  }
  lines << passed << "/" << criteria.size() << " criteria passed\n";
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  if (!report.empty()) std::ofstream(report) << lines.str();
  if (!evaluated) return 2;
  return strict && passed != static_cast<int>(criteria.size()) ? 1 : 0;
}
