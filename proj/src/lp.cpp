#include "qlp/lp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace qlp {

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal:
      return "optimal";
    case LpStatus::unbounded:
      return "unbounded";
    case LpStatus::infeasible:
      return "infeasible";
    case LpStatus::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scaling by powers of two is exact, so the scaled LP has the same vertices.
double power_of_two_inverse(double norm) {
  int exponent = 0;
  std::frexp(norm, &exponent);
  return std::ldexp(1.0, -exponent);
}

// Columns 0..N-1 of the working dual are lambda_j (column G_j'); columns
// N..N+K-1 are phase-one artificials s_i (column sign(m_i) e_i).
class DualSimplex {
 public:
  // `exact_vertex` maps a full basis of constraint rows to the unscaled
  // alpha solving them with equality, or an empty vector if it cannot.
  DualSimplex(const MatrixXd& G, const VectorXd& h, const VectorXd& m,
              const LpSettings& settings,
              std::function<Vector<long double>(const std::vector<int>&)> exact_vertex)
      : settings_(settings), N_(G.rows()), K_(G.cols()), exact_vertex_(std::move(exact_vertex)) {
    G_ = G;
    h_ = h;
    m_ = m;
    row_scale_ = VectorXd::Ones(N_);
    col_scale_ = VectorXd::Ones(K_);
    if (settings.scale) {
      for (Eigen::Index j = 0; j < N_; ++j) {
        const double norm = G_.row(j).cwiseAbs().maxCoeff();
        if (norm > 0.0) row_scale_(j) = power_of_two_inverse(norm);
      }
      G_ = row_scale_.asDiagonal() * G_;
      for (Eigen::Index k = 0; k < K_; ++k) {
        const double norm = G_.col(k).cwiseAbs().maxCoeff();
        if (norm > 0.0) col_scale_(k) = power_of_two_inverse(norm);
      }
      G_ = G_ * col_scale_.asDiagonal();
      h_ = row_scale_.cwiseProduct(h_);
      m_ = col_scale_.cwiseProduct(m_);
    }
    art_sign_ = VectorXd::Ones(K_);
    for (Eigen::Index i = 0; i < K_; ++i) {
      if (m_(i) < 0.0) art_sign_(i) = -1.0;
    }
    max_iterations_ = settings.max_iterations > 0
                          ? settings.max_iterations
                          : static_cast<int>(std::max<Eigen::Index>(1000, 20 * (N_ + K_)));
  }

  LpSolution solve() {
    LpSolution out;
    if (!try_warm_start()) {
      set_artificial_basis();
      const Outcome p1 = run_phase(1, m_);
      if (p1 != Outcome::optimal) return failure(out, "phase one did not finish");
      const double infeasibility = phase_one_objective();
      if (infeasibility > settings_.feasibility_tol * std::max(1.0, m_.lpNorm<1>())) {
        // No lambda >= 0 with G'lambda = m: unbounded if any alpha is feasible.
        return classify_dual_infeasible(out);
      }
      if (!drive_out_artificials()) return failure(out, "singular basis after phase one");
    }
    const Outcome p2 = run_phase(2, m_);
    if (p2 == Outcome::unbounded) {
      out.status = LpStatus::infeasible;
      out.message = "constraints are infeasible (dual ray found)";
      out.iterations = iterations_;
      return out;
    }
    if (p2 != Outcome::optimal) return failure(out, "phase two did not finish");
    return finish(out);
  }

 private:
  enum class Outcome { optimal, unbounded, failed };

  bool is_artificial(int j) const { return j >= N_; }

  VectorXd column(int j) const {
    if (!is_artificial(j)) return G_.row(j).transpose();
    VectorXd e = VectorXd::Zero(K_);
    e(j - N_) = art_sign_(j - N_);
    return e;
  }

  bool factor() {
    MatrixXd B(K_, K_);
    for (Eigen::Index i = 0; i < K_; ++i) B.col(i) = column(basis_[i]);
    lu_.compute(B);
    lut_.compute(B.transpose());
    return lu_.isInvertible();
  }

  void set_artificial_basis() {
    basis_.resize(K_);
    for (Eigen::Index i = 0; i < K_; ++i) basis_[i] = static_cast<int>(N_ + i);
  }

  bool try_warm_start() {
    const auto& warm = settings_.warm_basis;
    if (warm.size() != static_cast<std::size_t>(K_)) return false;
    for (int j : warm) {
      if (j < 0 || j >= N_) return false;
    }
    basis_ = warm;
    std::vector<int> sorted = warm;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
    if (!factor()) return false;
    const VectorXd xB = lu_.solve(m_);
    return xB.minCoeff() >= -settings_.feasibility_tol;
  }

  double phase_one_objective() {
    factor();
    const VectorXd xB = lu_.solve(m_);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < K_; ++i) {
      if (is_artificial(basis_[i])) sum += std::abs(xB(i));
    }
    return sum;
  }

  double cost(int phase, int j) const {
    if (phase == 1) return is_artificial(j) ? 1.0 : 0.0;
    return is_artificial(j) ? 0.0 : h_(j);
  }

  // Primal simplex on the dual with right-hand side rhs.
  Outcome run_phase(int phase, const VectorXd& rhs) {
    std::vector<char> in_basis(N_ + K_, 0);
    bool bland = false;
    double best_objective = kInf;
    int stalled = 0;
    while (true) {
      if (iterations_ >= max_iterations_) return Outcome::failed;
      if (!factor()) return Outcome::failed;
      std::fill(in_basis.begin(), in_basis.end(), 0);
      for (int j : basis_) in_basis[j] = 1;

      const VectorXd xB = lu_.solve(rhs);
      VectorXd cB(K_);
      for (Eigen::Index i = 0; i < K_; ++i) cB(i) = cost(phase, basis_[i]);
      y_ = lut_.solve(cB);

      const double objective = cB.dot(xB);
      if (objective < best_objective - 1e-12 * (1.0 + std::abs(best_objective))) {
        best_objective = objective;
        stalled = 0;
      } else if (++stalled > 2 * K_ + 50) {
        bland = true;
      }

      // Pricing: reduced costs of the lambda columns (slacks in phase two).
      VectorXd reduced = G_ * y_;
      int entering = -1;
      double most_negative = -settings_.optimality_tol;
      for (Eigen::Index j = 0; j < N_; ++j) {
        if (in_basis[j]) continue;
        const double d = cost(phase, static_cast<int>(j)) - reduced(j);
        if (d < most_negative) {
          entering = static_cast<int>(j);
          most_negative = d;
          if (bland) break;
        }
      }
      if (entering < 0) return Outcome::optimal;

      const VectorXd w = lu_.solve(column(entering));
      const int leaving = ratio_test(phase, xB, w, bland);
      if (leaving < 0) return Outcome::unbounded;
      basis_[leaving] = entering;
      ++iterations_;
    }
  }

  int ratio_test(int phase, const VectorXd& xB, const VectorXd& w, bool bland) const {
    const double piv = settings_.pivot_tol;
    // Artificials left in the basis after phase one must stay at zero.
    if (phase == 2) {
      int forced = -1;
      double best = piv;
      for (Eigen::Index i = 0; i < K_; ++i) {
        if (is_artificial(basis_[i]) && std::abs(w(i)) > best) {
          best = std::abs(w(i));
          forced = static_cast<int>(i);
        }
      }
      if (forced >= 0) return forced;
    }
    if (bland) {
      int leaving = -1;
      double theta = kInf;
      for (Eigen::Index i = 0; i < K_; ++i) {
        if (w(i) <= piv) continue;
        const double ratio = std::max(xB(i), 0.0) / w(i);
        if (ratio < theta || (ratio == theta && basis_[i] < basis_[leaving])) {
          theta = ratio;
          leaving = static_cast<int>(i);
        }
      }
      return leaving;
    }
    // Harris two-pass: relax bounds by the feasibility tolerance, then take
    // the largest pivot among the candidates.
    double theta_max = kInf;
    for (Eigen::Index i = 0; i < K_; ++i) {
      if (w(i) > piv) {
        theta_max = std::min(theta_max, (std::max(xB(i), 0.0) + settings_.feasibility_tol) / w(i));
      }
    }
    if (theta_max == kInf) return -1;
    int leaving = -1;
    double largest = 0.0;
    for (Eigen::Index i = 0; i < K_; ++i) {
      if (w(i) > piv && std::max(xB(i), 0.0) / w(i) <= theta_max && w(i) > largest) {
        largest = w(i);
        leaving = static_cast<int>(i);
      }
    }
    return leaving;
  }

  bool drive_out_artificials() {
    for (Eigen::Index r = 0; r < K_; ++r) {
      if (!is_artificial(basis_[r])) continue;
      if (!factor()) return false;
      std::vector<char> in_basis(N_, 0);
      for (int j : basis_) {
        if (!is_artificial(j)) in_basis[j] = 1;
      }
      // Row r of B^{-1} G' equals G (B^{-T} e_r).
      const VectorXd v = lut_.solve(VectorXd::Unit(K_, r));
      const VectorXd row = G_ * v;
      int best = -1;
      double best_abs = settings_.pivot_tol;
      for (Eigen::Index j = 0; j < N_; ++j) {
        if (!in_basis[j] && std::abs(row(j)) > best_abs) {
          best_abs = std::abs(row(j));
          best = static_cast<int>(j);
        }
      }
      if (best >= 0) basis_[r] = best;  // otherwise G has a null direction
    }
    return factor();
  }

  LpSolution classify_dual_infeasible(LpSolution& out) {
    const int used = iterations_;
    set_artificial_basis();
    const Outcome feasibility = run_phase(2, VectorXd::Zero(K_));
    out.iterations = iterations_;
    if (feasibility == Outcome::optimal) {
      out.status = LpStatus::unbounded;
      out.message = "objective unbounded above on the feasible set";
      factor();
      out.alpha = col_scale_.cwiseProduct(y_);
    } else if (feasibility == Outcome::unbounded) {
      out.status = LpStatus::infeasible;
      out.message = "constraints are infeasible";
    } else {
      out.status = LpStatus::numerical_failure;
      out.message = "feasibility check did not finish after " + std::to_string(used) +
                    " phase-one iterations";
    }
    return out;
  }

  LpSolution failure(LpSolution& out, const std::string& why) {
    out.status = LpStatus::numerical_failure;
    out.iterations = iterations_;
    out.message = why + " (" + std::to_string(iterations_) + " iterations)";
    return out;
  }

  LpSolution finish(LpSolution& out) {
    factor();
    VectorXd cB(K_);
    for (Eigen::Index i = 0; i < K_; ++i) cB(i) = cost(2, basis_[i]);
    VectorXd alpha_scaled = lut_.solve(cB);
    const VectorXd xB = lu_.solve(m_);

    VectorXd lambda_scaled = VectorXd::Zero(N_);
    out.basis.clear();
    for (Eigen::Index i = 0; i < K_; ++i) {
      if (!is_artificial(basis_[i])) {
        lambda_scaled(basis_[i]) = xB(i);
        out.basis.push_back(basis_[i]);
      }
    }
    if (out.basis.size() == static_cast<std::size_t>(K_) && exact_vertex_) {
      Vector<long double> exact = exact_vertex_(out.basis);
      if (exact.size() == K_ && exact.allFinite()) {
        alpha_scaled = exact.template cast<double>().cwiseQuotient(col_scale_);
        out.alpha_wide = std::move(exact);
      }
    }

    const VectorXd slack = h_ - G_ * alpha_scaled;
    out.kkt.primal = std::max(0.0, -slack.minCoeff());
    out.kkt.dual = (G_.transpose() * lambda_scaled - m_).lpNorm<Eigen::Infinity>() /
                       (1.0 + m_.lpNorm<Eigen::Infinity>()) +
                   std::max(0.0, -lambda_scaled.minCoeff());
    const double primal_obj = m_.dot(alpha_scaled);
    out.kkt.gap = std::abs(h_.dot(lambda_scaled) - primal_obj) / (1.0 + std::abs(primal_obj));

    out.alpha = col_scale_.cwiseProduct(alpha_scaled);
    out.dual = row_scale_.cwiseProduct(lambda_scaled);
    out.objective = primal_obj;
    out.iterations = iterations_;

    const double tol = std::max(settings_.feasibility_tol, settings_.optimality_tol);
    if (out.kkt.primal > tol || out.kkt.dual > tol || out.kkt.gap > tol) {
      out.status = LpStatus::numerical_failure;
      char buf[160];
      std::snprintf(buf, sizeof buf, "KKT residuals above tolerance (primal %.3g, dual %.3g, gap %.3g)",
                    out.kkt.primal, out.kkt.dual, out.kkt.gap);
      out.message = buf;
    } else {
      out.status = LpStatus::optimal;
    }
    return out;
  }

  const LpSettings& settings_;
  Eigen::Index N_;
  Eigen::Index K_;
  std::function<Vector<long double>(const std::vector<int>&)> exact_vertex_;
  MatrixXd G_;
  VectorXd h_;
  VectorXd m_;
  VectorXd row_scale_;
  VectorXd col_scale_;
  VectorXd art_sign_;
  std::vector<int> basis_;
  Eigen::FullPivLU<MatrixXd> lu_;
  Eigen::FullPivLU<MatrixXd> lut_;
  VectorXd y_;
  int iterations_ = 0;
  int max_iterations_ = 0;
};

}  // namespace

template <typename Scalar>
LpSolution solve_lp(const BasicLpProblem<Scalar>& problem, const LpSettings& settings) {
  problem.validate();
  using Wide = long double;
  // Solve G_B alpha = h_B from the stored data, then refine once; the result
  // is then a function of the active set alone.
  auto exact_vertex = [&problem](const std::vector<int>& rows) -> Vector<Wide> {
    const auto K = problem.cols();
    Matrix<Wide> B(K, K);
    Vector<Wide> rhs(K);
    for (Eigen::Index i = 0; i < K; ++i) {
      B.row(i) = problem.G.row(rows[static_cast<std::size_t>(i)]).template cast<Wide>();
      rhs(i) = static_cast<Wide>(problem.h(rows[static_cast<std::size_t>(i)]));
    }
    // Exact power-of-two equilibration before factoring.
    Vector<Wide> rs(K);
    Vector<Wide> cs(K);
    for (Eigen::Index i = 0; i < K; ++i) {
      rs(i) = static_cast<Wide>(power_of_two_inverse(static_cast<double>(B.row(i).cwiseAbs().maxCoeff())));
    }
    B = rs.asDiagonal() * B;
    rhs = rs.cwiseProduct(rhs);
    for (Eigen::Index k = 0; k < K; ++k) {
      cs(k) = static_cast<Wide>(power_of_two_inverse(static_cast<double>(B.col(k).cwiseAbs().maxCoeff())));
    }
    B = B * cs.asDiagonal();
    const Eigen::FullPivLU<Matrix<Wide>> lu(B);
    if (!lu.isInvertible()) return Vector<Wide>();
    Vector<Wide> alpha = lu.solve(rhs);
    for (int pass = 0; pass < 2; ++pass) alpha += lu.solve(Vector<Wide>(rhs - B * alpha));
    return cs.cwiseProduct(alpha);
  };
  DualSimplex simplex(problem.G.template cast<double>(), problem.h.template cast<double>(),
                      problem.m.template cast<double>(), settings, exact_vertex);
  return simplex.solve();
}

template LpSolution solve_lp(const BasicLpProblem<double>&, const LpSettings&);
template LpSolution solve_lp(const BasicLpProblem<long double>&, const LpSettings&);

namespace {

void write_row(std::ostream& out, const Eigen::Ref<const VectorXd>& v) {
  char buf[32];
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", v(k));
    if (k > 0) out << ' ';
    out << buf;
  }
}

}  // namespace

template <typename Scalar>
void write_lp_text(std::ostream& out, const BasicLpProblem<Scalar>& problem) {
  out << "# qlp-lp algorithm=" << (problem.algorithm.empty() ? "none" : problem.algorithm)
      << " iteration=" << problem.iteration << " tuple_rows=" << problem.tuple_rows << "\n";
  out << problem.rows() << " " << problem.cols() << "\n";
  write_row(out, problem.m.template cast<double>());
  out << "\n";
  VectorXd row(problem.cols() + 1);
  for (Eigen::Index j = 0; j < problem.rows(); ++j) {
    row << problem.G.row(j).transpose().template cast<double>(), static_cast<double>(problem.h(j));
    write_row(out, row);
    out << "\n";
  }
}

template void write_lp_text(std::ostream&, const BasicLpProblem<double>&);
template void write_lp_text(std::ostream&, const BasicLpProblem<long double>&);

LpProblem read_lp_text(std::istream& in) {
  LpProblem problem;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_lp_text: empty input");
  static const std::regex header(R"(# qlp-lp algorithm=(\S+) iteration=(-?\d+) tuple_rows=(\d+))");
  std::smatch match;
  if (!std::regex_match(line, match, header)) {
    throw std::runtime_error("read_lp_text: malformed header line");
  }
  problem.algorithm = match[1] == "none" ? "" : std::string(match[1]);
  problem.iteration = std::stoi(match[2]);
  problem.tuple_rows = std::stol(match[3]);
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 1) {
    throw std::runtime_error("read_lp_text: bad dimensions");
  }
  problem.m.resize(cols);
  problem.G.resize(rows, cols);
  problem.h.resize(rows);
  for (Eigen::Index k = 0; k < cols; ++k) {
    if (!(in >> problem.m(k))) throw std::runtime_error("read_lp_text: truncated objective");
  }
  for (Eigen::Index j = 0; j < rows; ++j) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!(in >> problem.G(j, k))) {
        throw std::runtime_error("read_lp_text: truncated row " + std::to_string(j));
      }
    }
    if (!(in >> problem.h(j))) throw std::runtime_error("read_lp_text: truncated row " + std::to_string(j));
  }
  return problem;
}

}  // namespace qlp
