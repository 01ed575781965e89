#pragma once

#include <cmath>
#include <stdexcept>

#include "optfact/solver22.hpp"

namespace optfact {

enum class LossRegime { saturated, unsaturated };

inline std::string_view to_string(LossRegime r) {
  return r == LossRegime::saturated ? "saturated" : "unsaturated";
}

inline LossRegime parse_regime(std::string_view name) {
  if (name == "saturated") return LossRegime::saturated;
  if (name == "unsaturated") return LossRegime::unsaturated;
  throw std::invalid_argument("unknown regime: " + std::string(name));
}

/// Efficiency of the uniform design against the local optimum.
struct EfficiencyReport {
  /// Relative loss 1 - (d_uniform / d_optimal)^{1/3}.
  double r_u = 0.0;
  double d_uniform = 0.0;
  double d_optimal = 0.0;
  double w_min = 0.0;
  double w_max = 0.0;
  /// Variance-range components (a = 1/w_max, b = 1/w_min).
  double a = 0.0;
  double b = 0.0;
  /// Model-independent bound 1 - w_min/w_max on the loss.
  double efficiency_bound = 0.0;
  SolveMethod method = SolveMethod::numeric;
};

/// Loss of the uniform design for the 2^2 main-effects model at the
/// given weights. At most one weight may be zero.
inline EfficiencyReport uniform_loss_22(const Vec4& w, const SolveOptions& opts = {}) {
  const SolveResult opt = solve(w, opts);
  const ModelSpec model = ModelSpec::main_effects(2);
  const WeightVector wv{w[0], w[1], w[2], w[3]};
  const Design uniform{0.25, 0.25, 0.25, 0.25};

  EfficiencyReport rep;
  rep.d_uniform = det_criterion(model, wv, uniform);
  rep.d_optimal = opt.det_value;
  rep.method = opt.method;
  rep.r_u = 1.0 - std::cbrt(rep.d_uniform / rep.d_optimal);
  rep.w_min = *std::min_element(w.begin(), w.end());
  rep.w_max = *std::max_element(w.begin(), w.end());
  rep.a = 1.0 / rep.w_max;
  rep.b = rep.w_min > 0.0 ? 1.0 / rep.w_min : std::numeric_limits<double>::infinity();
  rep.efficiency_bound = 1.0 - rep.w_min / rep.w_max;

  if (rep.w_min > 0.0) {
    // Cross-check the determinant-ratio form against the variance form.
    const double sum_v = 1.0 / w[0] + 1.0 / w[1] + 1.0 / w[2] + 1.0 / w[3];
    const double r_l = 1.0 - 0.25 * std::cbrt(sum_v / opt.L_value);
    if (std::abs(r_l - rep.r_u) > 1e-10)
      throw std::logic_error("uniform_loss_22: determinant and variance forms disagree");
  }
  return rep;
}

/// Worst-case loss of the uniform design over all variance vectors with
/// a <= v_i <= b. Saturated branch: 1 - (3/4)(1 + 3a/b)^{1/3}, attained
/// at v = (b, a, a, a) and requiring b >= 3a. Unsaturated branch:
/// 1 - (3/4) 2^{1/3}, a supremum independent of (a, b).
inline double max_uniform_loss(double a, double b, LossRegime regime) {
  if (!(a > 0.0) || !(b >= a) || !std::isfinite(b))
    throw std::invalid_argument("max_uniform_loss: requires 0 < a <= b");
  if (regime == LossRegime::saturated) {
    if (b < 3.0 * a)
      throw std::invalid_argument("max_uniform_loss: saturated regime is empty unless b >= 3a");
    return 1.0 - 0.75 * std::cbrt(1.0 + 3.0 * a / b);
  }
  return 1.0 - 0.75 * std::cbrt(2.0);
}

/// Lower bound on the D-criterion of any 2^k model with q terms:
/// |X'WX| >= 2^{k 2^k} prod(w_i) prod(p_i) / w_max^{2^k - q}.
/// Maximized over p by the uniform design.
inline double maximin_lower_bound(const ModelSpec& model, const WeightVector& w, const Design& p) {
  const std::size_t n = static_cast<std::size_t>(model.n_points());
  if (w.size() != n || p.size() != n)
    throw std::invalid_argument("maximin_lower_bound: w and p must have 2^k entries");
  model.validate();
  const Design pc = canonical_design(p);
  double w_max = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
      throw std::invalid_argument("maximin_lower_bound: weights must be finite and nonnegative");
    w_max = std::max(w_max, w[i]);
    prod *= w[i] * pc[i];
  }
  if (!(w_max > 0.0)) throw std::invalid_argument("maximin_lower_bound: max weight must be positive");
  const double scale = std::pow(2.0, static_cast<double>(model.k) * static_cast<double>(n));
  return scale * prod / std::pow(w_max, static_cast<double>(model.n_points() - model.n_terms()));
}

/// Model-independent bound on the uniform design's loss: 1 - w_min/w_max.
inline double uniform_efficiency_bound(const WeightVector& w) {
  if (w.empty()) throw std::invalid_argument("uniform_efficiency_bound: empty weights");
  double w_min = w[0], w_max = w[0];
  for (double wi : w) {
    if (!(wi > 0.0) || !std::isfinite(wi))
      throw std::invalid_argument("uniform_efficiency_bound: weights must be positive");
    w_min = std::min(w_min, wi);
    w_max = std::max(w_max, wi);
  }
  return 1.0 - w_min / w_max;
}

}  // namespace optfact
