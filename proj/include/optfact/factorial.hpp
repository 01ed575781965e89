#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace optfact {

/// Allocation proportions p over the 2^k design points (sum to 1).
using Design = std::vector<double>;

/// Per-point GLM weights w_i, the diagonal of W without the p_i factors.
using WeightVector = std::vector<double>;

/// Regression coefficients (b0, b1, ...) on the linear-predictor scale.
using Beta = std::vector<double>;

/// The four per-point quantities of the 2^2 main-effects problem.
using Vec4 = std::array<double, 4>;

/// Symmetric nonnegative-definite information matrix X'WX.
using InfoMatrix = Eigen::MatrixXd;

inline constexpr double kSimplexSumTol = 1e-9;
inline constexpr double kSimplexDustTol = 1e-12;

/// Raised when the D-criterion is identically zero (two or more zero
/// weights), so no design can be ranked.
class DegenerateCriterionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Effect structure of a two-level factorial model. Each effect is a set
/// of factor indices (1-based); the empty set is the intercept. Design
/// points are enumerated by the binary expansion of the point index with
/// factor 1 as the most significant bit, bit 0 mapping to level +1 and
/// bit 1 to level -1.
struct ModelSpec {
  int k = 2;
  std::vector<std::vector<int>> effects;

  static ModelSpec main_effects(int n_factors) {
    ModelSpec m;
    m.k = n_factors;
    m.effects.push_back({});
    for (int f = 1; f <= n_factors; ++f) m.effects.push_back({f});
    m.validate();
    return m;
  }

  static ModelSpec full_factorial(int n_factors) {
    ModelSpec m;
    m.k = n_factors;
    const int n = 1 << n_factors;
    for (int mask = 0; mask < n; ++mask) {
      std::vector<int> eff;
      for (int f = 1; f <= n_factors; ++f)
        if (mask & (1 << (f - 1))) eff.push_back(f);
      m.effects.push_back(std::move(eff));
    }
    m.validate();
    return m;
  }

  int n_points() const { return 1 << k; }
  int n_terms() const { return static_cast<int>(effects.size()); }

  void validate() const {
    if (k < 1 || k > 20) throw std::invalid_argument("ModelSpec: k must be in [1, 20]");
    if (effects.empty()) throw std::invalid_argument("ModelSpec: no effects");
    if (n_terms() > n_points())
      throw std::invalid_argument("ModelSpec: more effects than design points");
    std::vector<std::uint32_t> seen;
    for (const auto& eff : effects) {
      std::uint32_t mask = 0;
      for (int f : eff) {
        if (f < 1 || f > k) throw std::invalid_argument("ModelSpec: factor index out of range");
        if (mask & (1u << (f - 1))) throw std::invalid_argument("ModelSpec: repeated factor in effect");
        mask |= 1u << (f - 1);
      }
      for (std::uint32_t s : seen)
        if (s == mask) throw std::invalid_argument("ModelSpec: duplicate effect");
      seen.push_back(mask);
    }
  }
};

/// Level of factor `f` (1-based) at design point `i` (0-based).
inline double factor_level(int k, int i, int f) {
  return ((i >> (k - f)) & 1) ? -1.0 : 1.0;
}

/// The 2^k x q matrix of +-1 model terms. For the full model F the
/// columns are orthogonal: F'F = 2^k I.
inline Eigen::MatrixXd design_matrix(const ModelSpec& model) {
  model.validate();
  const int n = model.n_points();
  const int q = model.n_terms();
  Eigen::MatrixXd x(n, q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) {
      double val = 1.0;
      for (int f : model.effects[j]) val *= factor_level(model.k, i, f);
      x(i, j) = val;
    }
  }
  return x;
}

/// Validates a design against the simplex (sum within 1e-9 of one, no
/// coordinate below -1e-12) and clamps negative dust to zero.
inline Design canonical_design(Design p) {
  double sum = 0.0;
  for (double& pi : p) {
    if (!std::isfinite(pi)) throw std::invalid_argument("design: non-finite proportion");
    if (pi < -kSimplexDustTol) throw std::invalid_argument("design: negative proportion");
    if (pi < 0.0) pi = 0.0;
    sum += pi;
  }
  if (std::abs(sum - 1.0) > kSimplexSumTol)
    throw std::invalid_argument("design: proportions must sum to 1");
  return p;
}

/// X' diag(w_1 p_1, ..., w_n p_n) X.
inline InfoMatrix info_matrix(const ModelSpec& model, const WeightVector& w, const Design& p) {
  const std::size_t n = static_cast<std::size_t>(model.n_points());
  if (w.size() != n || p.size() != n)
    throw std::invalid_argument("info_matrix: w and p must have 2^k entries");
  for (double wi : w)
    if (!(wi >= 0.0) || !std::isfinite(wi))
      throw std::invalid_argument("info_matrix: weights must be finite and nonnegative");
  const Design pc = canonical_design(p);
  const Eigen::MatrixXd x = design_matrix(model);
  Eigen::VectorXd d(n);
  for (std::size_t i = 0; i < n; ++i) d(static_cast<int>(i)) = w[i] * pc[i];
  return x.transpose() * d.asDiagonal() * x;
}

/// D-criterion |X'WX| (LU with partial pivoting).
inline double det_criterion(const ModelSpec& model, const WeightVector& w, const Design& p) {
  return info_matrix(model, w, p).determinant();
}

/// Variance-weighted triple-product objective for the 2^2 main-effects
/// problem: L(p) = v4 p1 p2 p3 + v3 p1 p2 p4 + v2 p1 p3 p4 + v1 p2 p3 p4,
/// with v_i = 1/w_i. Maximizing L over the simplex is equivalent to
/// maximizing the determinant. No argument validation; callers own it.
inline double objective_L(const Vec4& v, const Vec4& p) {
  return v[0] * p[1] * p[2] * p[3] + v[1] * p[0] * p[2] * p[3] +
         v[2] * p[0] * p[1] * p[3] + v[3] * p[0] * p[1] * p[2];
}

inline double objective_L(const std::vector<double>& v, const std::vector<double>& p) {
  if (v.size() != 4 || p.size() != 4)
    throw std::invalid_argument("objective_L: expects 4 variances and 4 proportions");
  return objective_L(Vec4{v[0], v[1], v[2], v[3]}, Vec4{p[0], p[1], p[2], p[3]});
}

inline Vec4 to_vec4(const std::vector<double>& x, const char* what) {
  if (x.size() != 4) throw std::invalid_argument(std::string(what) + ": expected 4 values");
  return {x[0], x[1], x[2], x[3]};
}

inline std::vector<double> to_vector(const Vec4& x) { return {x[0], x[1], x[2], x[3]}; }

}  // namespace optfact
