#include "qlp/basis.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace qlp {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::extended_quadratic:
      return "extended_quadratic";
    case BasisKind::pure_quadratic:
      return "pure_quadratic";
    case BasisKind::quartic:
      return "quartic";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "extended_quadratic") return BasisKind::extended_quadratic;
  if (name == "pure_quadratic") return BasisKind::pure_quadratic;
  if (name == "quartic") return BasisKind::quartic;
  throw std::invalid_argument("unknown basis family '" + name +
                              "' (expected extended_quadratic, "
                              "pure_quadratic or quartic)");
}

namespace {

std::string variable_name(int index, int n) {
  return index < n ? "x" + std::to_string(index + 1)
                   : "u" + std::to_string(index - n + 1);
}

// Exponents over (x, u) of the lifted coordinate z_i.
std::vector<int> lifted_exponents(const BasisFamily& f, int i) {
  std::vector<int> e(f.state_dim() + f.input_dim(), 0);
  const int n = f.state_dim();
  if (i < n) {
    e[i] = 1;
  } else if (i < f.state_feature_dim()) {
    e[i - n] = 2;
  } else {
    e[n + (i - f.state_feature_dim())] = 1;
  }
  return e;
}

std::string monomial_name(const std::vector<int>& e, double coefficient, int n) {
  std::ostringstream out;
  if (coefficient != 1.0) out << coefficient << "*";
  bool first = true;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k] == 0) continue;
    if (!first) out << "*";
    out << variable_name(static_cast<int>(k), n);
    if (e[k] > 1) out << "^" << e[k];
    first = false;
  }
  if (first) out << "1";
  return out.str();
}

}  // namespace

BasisFamily::BasisFamily(BasisKind kind, int state_dim, int input_dim)
    : kind_(kind), n_(state_dim), m_(input_dim) {
  if (state_dim < 1 || input_dim < 1) {
    throw std::invalid_argument("BasisFamily: dimensions must be positive");
  }
  const int d = lifted_dim();
  const int vars = n_ + m_;
  auto push = [&](std::vector<int> e, double coefficient) {
    Monomial mono;
    mono.degree = 0;
    for (int v : e) mono.degree += v;
    mono.coefficient = coefficient;
    mono.name = monomial_name(e, coefficient, n_);
    mono.exponents = std::move(e);
    descriptors_.push_back(std::move(mono));
  };
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      auto e = lifted_exponents(*this, i);
      const auto ej = lifted_exponents(*this, j);
      for (int k = 0; k < vars; ++k) e[k] += ej[k];
      push(std::move(e), i == j ? 1.0 : 2.0);
    }
  }
  if (has_affine_terms()) {
    for (int i = 0; i < d; ++i) push(lifted_exponents(*this, i), 1.0);
    push(std::vector<int>(vars, 0), 1.0);
  }
}

int BasisFamily::quadratic_index(int i, int j) const {
  const int d = lifted_dim();
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw std::out_of_range("quadratic_index out of range");
  }
  if (i > j) std::swap(i, j);
  // Rows 0..i-1 of the upper triangle hold d + (d-1) + ... + (d-i+1) entries.
  return i * d - i * (i - 1) / 2 + (j - i);
}

int BasisFamily::linear_index(int i) const {
  if (!has_affine_terms()) throw std::logic_error("family has no linear terms");
  return quadratic_count() + i;
}

int BasisFamily::constant_index() const {
  if (!has_affine_terms()) throw std::logic_error("family has no constant term");
  return quadratic_count() + lifted_dim();
}

QParams::QParams(BasisFamily family_, VectorXd alpha_)
    : family(std::move(family_)), alpha(std::move(alpha_)) {
  if (alpha.size() != family.feature_count()) {
    throw std::invalid_argument("QParams: alpha has " + std::to_string(alpha.size()) +
                                " entries, family needs " +
                                std::to_string(family.feature_count()));
  }
}

QParams QParams::zero(const BasisFamily& family) {
  return QParams(family, VectorXd::Zero(family.feature_count()));
}

QBlocks extract_blocks(const QParams& params) {
  const BasisFamily& f = params.family;
  const int d = f.lifted_dim();
  QBlocks blocks;
  blocks.input_dim = f.input_dim();
  blocks.P.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double v = params.alpha(f.quadratic_index(i, j));
      blocks.P(i, j) = v;
      blocks.P(j, i) = v;
    }
  }
  blocks.p = VectorXd::Zero(d);
  if (f.has_affine_terms()) {
    for (int i = 0; i < d; ++i) blocks.p(i) = params.alpha(f.linear_index(i));
    blocks.s = params.alpha(f.constant_index());
  }
  return blocks;
}

QParams pack_blocks(const BasisFamily& family, const MatrixXd& P,
                    const VectorXd& p, double s) {
  const int d = family.lifted_dim();
  if (P.rows() != d || P.cols() != d) {
    throw std::invalid_argument("pack_blocks: P must be " + std::to_string(d) +
                                "x" + std::to_string(d));
  }
  if (p.size() != 0 && p.size() != d) {
    throw std::invalid_argument("pack_blocks: p must have " + std::to_string(d) +
                                " entries");
  }
  VectorXd alpha = VectorXd::Zero(family.feature_count());
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      alpha(family.quadratic_index(i, j)) = 0.5 * (P(i, j) + P(j, i));
    }
  }
  if (family.has_affine_terms()) {
    for (int i = 0; i < p.size(); ++i) alpha(family.linear_index(i)) = p(i);
    alpha(family.constant_index()) = s;
  } else if ((p.size() != 0 && !p.isZero(0.0)) || s != 0.0) {
    throw std::invalid_argument("pack_blocks: family " + to_string(family.kind()) +
                                " has no linear or constant terms");
  }
  return QParams(family, std::move(alpha));
}

PolicyUndefined::PolicyUndefined(double min_eigenvalue,
                                 std::optional<std::size_t> tuple_index)
    : std::runtime_error(
          "greedy policy undefined: smallest eigenvalue of P_uu is " +
          std::to_string(min_eigenvalue) +
          (tuple_index ? " (at buffer tuple " + std::to_string(*tuple_index) + ")"
                       : std::string())),
      min_eigenvalue_(min_eigenvalue),
      tuple_index_(tuple_index) {}

double min_input_eigenvalue(const QParams& params) {
  const QBlocks blocks = extract_blocks(params);
  const MatrixXd Puu = blocks.Puu();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Puu, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

VectorXd greedy_policy(const QParams& params, const VectorXd& x, double tolerance) {
  return greedy_gain(params, tolerance)(x);
}

int moment_entry_count(const BasisFamily& family, int degree) {
  const int d = family.lifted_dim();
  int count = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (family.lifted_degree(i) + family.lifted_degree(j) == degree) ++count;
    }
  }
  return count;
}

VectorXd objective_vector(const BasisFamily& family, const MomentSpec& moments) {
  const int d = family.lifted_dim();
  const int vars = family.state_dim() + family.input_dim();
  const int sf = family.state_feature_dim();
  // Position of a degree-1 lifted coordinate among the raw variables.
  auto raw_index = [&](int i) { return i < family.state_dim() ? i : i - sf + family.state_dim(); };

  VectorXd mean = moments.first.size() == 0 ? VectorXd::Zero(vars) : moments.first;
  if (mean.size() != vars) {
    throw std::invalid_argument("objective_vector: first moment must have " +
                                std::to_string(vars) + " entries");
  }
  if (moments.second.rows() != vars || moments.second.cols() != vars) {
    throw std::invalid_argument("objective_vector: second moment must be " +
                                std::to_string(vars) + "x" + std::to_string(vars));
  }
  // Enumerate every entry of P with degree 3 or 4 in row-major order.
  auto entry_offset = [&](int degree, int row, int col) {
    int index = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (family.lifted_degree(i) + family.lifted_degree(j) != degree) continue;
        if (i == row && j == col) return index;
        ++index;
      }
    }
    throw std::logic_error("entry_offset: no such entry");
  };
  auto require = [&](const VectorXd& v, int degree, const char* label) {
    const int need = moment_entry_count(family, degree);
    if (need > 0 && v.size() != need) {
      throw std::invalid_argument(std::string("objective_vector: missing or mis-sized ") +
                                  label + " moment (need " + std::to_string(need) +
                                  " entries, got " + std::to_string(v.size()) + ")");
    }
  };
  require(moments.third, 3, "third");
  require(moments.fourth, 4, "fourth");

  VectorXd m = VectorXd::Zero(family.feature_count());
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const int degree = family.lifted_degree(i) + family.lifted_degree(j);
      double entry_ij = 0.0;
      double entry_ji = 0.0;
      if (degree == 2) {
        const int a = raw_index(i);
        const int b = raw_index(j);
        entry_ij = moments.second(a, b) + mean(a) * mean(b);
        entry_ji = moments.second(b, a) + mean(b) * mean(a);
      } else {
        const VectorXd& v = degree == 3 ? moments.third : moments.fourth;
        entry_ij = v(entry_offset(degree, i, j));
        entry_ji = v(entry_offset(degree, j, i));
      }
      m(family.quadratic_index(i, j)) = i == j ? entry_ij : entry_ij + entry_ji;
    }
  }
  if (family.has_affine_terms()) {
    for (int i = 0; i < d; ++i) m(family.linear_index(i)) = mean(raw_index(i));
    m(family.constant_index()) = 1.0;
  }
  return m;
}

}  // namespace qlp
