#include "qlp/oracle.hpp"

#include <cmath>
#include <string>

namespace qlp {

namespace {

double max_abs(const MatrixXd& M) { return M.cwiseAbs().maxCoeff(); }

// Undiscounted Riccati map on already-scaled (A, B).
MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& E,
                     const MatrixXd& F, const MatrixXd& P) {
  const MatrixXd PA = P * A;
  const MatrixXd BtPA = B.transpose() * PA;
  const MatrixXd S = F + B.transpose() * P * B;
  MatrixXd next = E + A.transpose() * PA - BtPA.transpose() * S.ldlt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

}  // namespace

MatrixXd discounted_riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& E,
                                const MatrixXd& F, double gamma, const MatrixXd& P) {
  const MatrixXd BtPA = B.transpose() * P * A;
  const MatrixXd S = F + gamma * B.transpose() * P * B;
  MatrixXd next = E + gamma * A.transpose() * P * A -
                  gamma * gamma * BtPA.transpose() * S.ldlt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

DareSolution solve_discounted_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& E,
                                   const MatrixXd& F, double gamma, double tol, int max_iter) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || E.rows() != n || E.cols() != n || F.rows() != m ||
      F.cols() != m) {
    throw std::invalid_argument("solve_discounted_dare: dimension mismatch");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("solve_discounted_dare: gamma must lie in (0, 1)");
  }
  if (Eigen::LLT<MatrixXd>(F).info() != Eigen::Success) {
    throw std::invalid_argument("solve_discounted_dare: F must be positive definite");
  }

  const double root = std::sqrt(gamma);
  const MatrixXd As = root * A;
  const MatrixXd Bs = root * B;
  DareSolution out;
  MatrixXd P = E;
  bool converged = false;
  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    MatrixXd next = riccati_map(As, Bs, E, F, P);
    if (!next.allFinite()) break;
    const double step = max_abs(next - P);
    P = std::move(next);
    if (step <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw std::runtime_error(
        "solve_discounted_dare: no convergence within " + std::to_string(max_iter) +
        " iterations; (sqrt(gamma) A, sqrt(gamma) B) is likely not stabilizable");
  }

  const MatrixXd scaled = riccati_map(As, Bs, E, F, P);
  const MatrixXd direct = discounted_riccati_map(A, B, E, F, gamma, P);
  if (max_abs(scaled - direct) > 1e-12 * std::max(1.0, max_abs(P))) {
    throw std::logic_error("solve_discounted_dare: scaled and discounted forms disagree");
  }
  out.residual = max_abs(direct - P);
  out.P = P;

  out.Pq.resize(n + m, n + m);
  out.Pq.topLeftCorner(n, n) = E + gamma * A.transpose() * P * A;
  out.Pq.topRightCorner(n, m) = gamma * A.transpose() * P * B;
  out.Pq.bottomLeftCorner(m, n) = gamma * B.transpose() * P * A;
  out.Pq.bottomRightCorner(m, m) = F + gamma * B.transpose() * P * B;
  out.Pq = 0.5 * (out.Pq + out.Pq.transpose()).eval();
  out.K = out.Pq.bottomRightCorner(m, m).ldlt().solve(MatrixXd(out.Pq.bottomLeftCorner(m, n)));
  return out;
}

DivergedTrajectory::DivergedTrajectory(int step, double norm)
    : std::runtime_error("trajectory diverged at step " + std::to_string(step) +
                         " (|x|_inf = " + std::to_string(norm) + ")"),
      step_(step) {}

Rollout rollout_cost(const Plant& plant, const StageCost& cost, const StatePolicy& policy,
                     const VectorXd& x0, double gamma, int horizon, double blowup) {
  if (horizon < 1) throw std::invalid_argument("rollout_cost: horizon must be >= 1");
  Rollout out;
  out.states.reserve(horizon + 1);
  out.inputs.reserve(horizon);
  VectorXd x = x0;
  double discount = 1.0;
  out.states.push_back(x);
  for (int k = 0; k < horizon; ++k) {
    const VectorXd u = policy(x);
    out.cost += discount * cost(x, u);
    discount *= gamma;
    x = plant(x, u);
    out.inputs.push_back(u);
    out.states.push_back(x);
    const double norm = x.allFinite() ? x.lpNorm<Eigen::Infinity>() : INFINITY;
    if (!(norm <= blowup)) throw DivergedTrajectory(k + 1, norm);
  }
  return out;
}

QFunctionError qfun_error(const QParams& params, const DareSolution& dare) {
  const BasisFamily& f = params.family;
  if (f.kind() != BasisKind::extended_quadratic) {
    throw std::invalid_argument("qfun_error: requires the extended_quadratic family");
  }
  if (f.lifted_dim() != dare.Pq.rows()) {
    throw std::invalid_argument("qfun_error: dimension mismatch with the oracle");
  }
  const QBlocks blocks = extract_blocks(params);
  QFunctionError err;
  err.P = max_abs(blocks.P - dare.Pq);
  err.p = blocks.p.lpNorm<Eigen::Infinity>();
  err.s = std::abs(blocks.s);
  return err;
}

}  // namespace qlp
