#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlp/types.hpp"

namespace qlp {

/// maximize m'alpha subject to G alpha <= h, alpha free.
///
/// The scalar type only affects how accurately the data is stored: pivoting
/// always runs in double, and the optimal vertex is then recomputed from the
/// original rows in extended precision.
template <typename Scalar>
struct BasicLpProblem {
  Vector<Scalar> m;
  Matrix<Scalar> G;
  Vector<Scalar> h;
  /// The first `tuple_rows` rows come from buffer tuples (row b <-> tuple b);
  /// anything after is an auxiliary constraint.
  Eigen::Index tuple_rows = 0;
  int iteration = 0;
  std::string algorithm;

  Eigen::Index rows() const { return G.rows(); }
  Eigen::Index cols() const { return G.cols(); }

  void validate() const {
    if (G.cols() < 1) throw std::invalid_argument("LpProblem: no variables");
    if (m.size() != G.cols()) throw std::invalid_argument("LpProblem: m does not match G");
    if (h.size() != G.rows()) throw std::invalid_argument("LpProblem: h does not match G");
    if (!m.allFinite() || !G.allFinite() || !h.allFinite()) {
      throw std::invalid_argument("LpProblem: non-finite data");
    }
  }

  template <typename T>
  BasicLpProblem<T> cast() const {
    BasicLpProblem<T> out;
    out.m = m.template cast<T>();
    out.G = G.template cast<T>();
    out.h = h.template cast<T>();
    out.tuple_rows = tuple_rows;
    out.iteration = iteration;
    out.algorithm = algorithm;
    return out;
  }
};

using LpProblem = BasicLpProblem<double>;
using LpProblemExt = BasicLpProblem<long double>;

enum class LpStatus { optimal, unbounded, infeasible, numerical_failure };

std::string to_string(LpStatus status);

/// Residuals measured on the internally scaled problem (rows and columns
/// equilibrated to roughly unit infinity norm by powers of two). primal: max constraint violation;
/// dual: ||G'lambda - m|| relative to 1 + ||m||, plus any negative lambda;
/// gap: |h'lambda - m'alpha| relative to 1 + |m'alpha|.
struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

struct LpSettings {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  /// 0 selects 20 * (rows + cols), at least 1000.
  int max_iterations = 0;
  bool scale = true;
  /// Optional starting basis: `cols()` row indices believed to be active at
  /// the optimum. Ignored unless it is nonsingular and dual feasible.
  std::vector<int> warm_basis;
};

struct LpSolution {
  LpStatus status = LpStatus::numerical_failure;
  VectorXd alpha;
  /// The same vertex before rounding to double; empty if it could not be
  /// recomputed from the original rows.
  Vector<long double> alpha_wide;
  VectorXd dual;  // lambda >= 0 with G'lambda = m at the optimum
  double objective = 0.0;
  KktResiduals kkt;
  int iterations = 0;
  std::vector<int> basis;  // active rows at the optimum
  std::string message;
};

/// Dense simplex on the dual  min h'lambda s.t. G'lambda = m, lambda >= 0.
/// Each basis is a set of `cols()` constraint rows; its multipliers are the
/// primal alpha. Designed for rows >> cols.
template <typename Scalar>
LpSolution solve_lp(const BasicLpProblem<Scalar>& problem, const LpSettings& settings = {});

/// Plain-text dump:
///
///   # qlp-lp algorithm=<tag> iteration=<i> tuple_rows=<r>
///   <rows> <cols>
///   m_1 .. m_K
///   G_b1 .. G_bK h_b        (one line per row)
///
/// Values are written with 17 significant digits, so extended-precision data
/// is rounded to double.
template <typename Scalar>
void write_lp_text(std::ostream& out, const BasicLpProblem<Scalar>& problem);
LpProblem read_lp_text(std::istream& in);

}  // namespace qlp
