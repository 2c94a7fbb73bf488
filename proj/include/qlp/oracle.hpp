#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "qlp/basis.hpp"
#include "qlp/systems.hpp"
#include "qlp/types.hpp"

namespace qlp {

/// Fixed point of the discounted Riccati recursion.
struct DareSolution {
  MatrixXd P;   // value matrix, V(x) = x'Px
  MatrixXd Pq;  // optimal Q-matrix over z = [x; u]
  MatrixXd K;   // optimal input u = -K x
  double residual = 0.0;
  int iterations = 0;
};

/// Iterates P <- E + g A'PA - g^2 A'PB (F + g B'PB)^{-1} B'PA from P = E
/// until successive iterates differ by at most `tol` (max-abs). The update is
/// carried out on (sqrt(g) A, sqrt(g) B) and cross-checked against the
/// discounted form.
DareSolution solve_discounted_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& E,
                                   const MatrixXd& F, double gamma, double tol = 1e-14,
                                   int max_iter = 1000000);

/// One application of the discounted Riccati map.
MatrixXd discounted_riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& E,
                                const MatrixXd& F, double gamma, const MatrixXd& P);

class DivergedTrajectory : public std::runtime_error {
 public:
  DivergedTrajectory(int step, double norm);
  int step() const { return step_; }

 private:
  int step_;
};

struct Rollout {
  double cost = 0.0;
  std::vector<VectorXd> states;  // horizon + 1 entries, starting at x0
  std::vector<VectorXd> inputs;  // horizon entries
};

using StatePolicy = std::function<VectorXd(const VectorXd&)>;

/// sum_{k < horizon} gamma^k l(x_k, mu(x_k)) along x_{k+1} = f(x_k, mu(x_k)).
/// Throws DivergedTrajectory once ||x_k||_inf exceeds `blowup`.
Rollout rollout_cost(const Plant& plant, const StageCost& cost, const StatePolicy& policy,
                     const VectorXd& x0, double gamma, int horizon, double blowup = 1e9);

struct QFunctionError {
  double P = 0.0;  // ||P_hat - P*||_max
  double p = 0.0;  // ||p_hat||_max
  double s = 0.0;  // |s_hat|
};

/// Elementwise errors of an extended-quadratic Q against the Riccati oracle,
/// which has p* = 0 and s* = 0.
QFunctionError qfun_error(const QParams& params, const DareSolution& dare);

}  // namespace qlp
