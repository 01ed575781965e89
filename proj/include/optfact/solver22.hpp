#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "optfact/links.hpp"

namespace optfact {

/// How a SolveResult was obtained.
enum class SolveMethod {
  kiefer_uniform,
  zero_weight_reduction,
  saturated,
  theorem2_closed_form,
  corollary1,
  corollary2,
  approx_theorem4,
  numeric,
};

inline std::string_view to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::kiefer_uniform: return "kiefer_uniform";
    case SolveMethod::zero_weight_reduction: return "zero_weight_reduction";
    case SolveMethod::saturated: return "saturated";
    case SolveMethod::theorem2_closed_form: return "theorem2_closed_form";
    case SolveMethod::corollary1: return "corollary1";
    case SolveMethod::corollary2: return "corollary2";
    case SolveMethod::approx_theorem4: return "approx_theorem4";
    case SolveMethod::numeric: return "numeric";
  }
  return "?";
}

/// Numeric-path certification record.
struct Certificate {
  /// Scaled KKT residual at the returned design: max over coordinates of
  /// |g_i - lambda| on the support and max(0, g_i - lambda) off it,
  /// divided by max(1, |lambda|), lambda = p.g.
  double stationarity_residual = std::numeric_limits<double>::quiet_NaN();
  /// L at the returned design minus the best raw grid-scan value (>= 0;
  /// bounded by the scan resolution).
  double grid_gap = std::numeric_limits<double>::quiet_NaN();
  double grid_step = 0.0;
  bool certified = false;
  std::string note;
};

struct SolveResult {
  Vec4 design{};
  double L_value = 0.0;
  double det_value = 0.0;
  SolveMethod method = SolveMethod::numeric;
  /// Guaranteed upper bound on (true optimum - L_value); approx path only.
  std::optional<double> error_bound;
  std::optional<Certificate> certificate;
};

struct SaturationReport {
  bool holds = false;
  /// 2 max_i v_i - sum_i v_i; the condition holds iff margin >= 0.
  double margin = 0.0;
  /// {|b1| threshold, |b2| threshold} when evaluated in beta space.
  std::optional<std::array<double, 2>> beta_thresholds;
};

struct SolveOptions {
  /// Certification gap target for the numeric path.
  double tol = 1e-9;
  /// Relative tolerance for treating two variances as tied.
  double tie_rel_tol = 1e-9;
  /// Pitch of the certification scan in the numeric path.
  double grid_step = 0.002;
  bool certify = true;
  int threads = 1;
};

/// Raised when a numeric result cannot be certified and the caller asked
/// for a hard failure (the solver itself reports through the certificate).
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool nearly_equal_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

inline void check_positive_v(const Vec4& v, const char* what) {
  for (double vi : v)
    if (!(vi > 0.0) || !std::isfinite(vi))
      throw std::invalid_argument(std::string(what) + ": variances must be positive and finite");
}

/// Indices of v sorted descending; ties keep original order.
inline std::array<int, 4> sort_desc_indices(const Vec4& v) {
  std::array<int, 4> idx{0, 1, 2, 3};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
  return idx;
}

inline Vec4 grad_L(const Vec4& v, const Vec4& p) {
  Vec4 g{};
  for (int m = 0; m < 4; ++m) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (i == m) continue;
      double prod = v[i];
      for (int j = 0; j < 4; ++j)
        if (j != i && j != m) prod *= p[j];
      s += prod;
    }
    g[m] = s;
  }
  return g;
}

/// Scaled KKT residual for max L on the simplex (see Certificate).
inline double stationarity_residual(const Vec4& v, const Vec4& p) {
  const Vec4 g = grad_L(v, p);
  const double lambda = g[0] * p[0] + g[1] * p[1] + g[2] * p[2] + g[3] * p[3];
  double r = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (p[i] > 1e-12)
      r = std::max(r, std::abs(g[i] - lambda));
    else
      r = std::max(r, std::max(0.0, g[i] - lambda));
  }
  return r / std::max(1.0, std::abs(lambda));
}

/// Euclidean projection onto the probability simplex.
inline Vec4 project_to_simplex(Vec4 y) {
  Vec4 u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, tau = 0.0;
  for (int j = 0; j < 4; ++j) {
    css += u[j];
    const double t = (css - 1.0) / (j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  Vec4 p;
  for (int i = 0; i < 4; ++i) p[i] = std::max(y[i] - tau, 0.0);
  return p;
}

/// Monotone projected gradient ascent with a backtracking step.
inline Vec4 projected_ascent(const Vec4& v, Vec4 p, int max_iter = 400) {
  double fp = objective_L(v, p);
  const double vmax = std::max(std::max(v[0], v[1]), std::max(v[2], v[3]));
  double alpha = 1.0 / (1.0 + 2.0 * vmax);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Vec4 g = grad_L(v, p);
    Vec4 q{};
    double fq = -1.0;
    bool accepted = false;
    double step = alpha;
    for (int bt = 0; bt < 60; ++bt) {
      Vec4 y;
      for (int i = 0; i < 4; ++i) y[i] = p[i] + step * g[i];
      q = project_to_simplex(y);
      fq = objective_L(v, q);
      if (fq > fp) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (!accepted) break;
    double move = 0.0;
    for (int i = 0; i < 4; ++i) move = std::max(move, std::abs(q[i] - p[i]));
    p = q;
    fp = fq;
    alpha = std::min(step * 2.0, 1.0);
    if (move < 1e-15) break;
  }
  return p;
}

/// Newton refinement in the reduced coordinates (p4 eliminated); only
/// attempted from interior points. L is multilinear, so the Hessian has
/// zero diagonal and H_ij = v_a p_b + v_b p_a for {a,b} = complement.
inline Vec4 newton_polish(const Vec4& v, Vec4 p, int max_iter = 50) {
  double fp = objective_L(v, p);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (*std::min_element(p.begin(), p.end()) < 1e-9) return p;
    const Vec4 g = grad_L(v, p);
    Eigen::Vector3d gr;
    for (int i = 0; i < 3; ++i) gr(i) = g[i] - g[3];
    if (gr.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + std::abs(fp))) break;
    auto hess = [&](int i, int j) -> double {
      if (i == j) return 0.0;
      int a = -1, b = -1;
      for (int t = 0; t < 4; ++t)
        if (t != i && t != j) (a < 0 ? a : b) = t;
      return v[a] * p[b] + v[b] * p[a];
    };
    Eigen::Matrix3d h;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) h(i, j) = hess(i, j) - hess(i, 3) - hess(3, j) + hess(3, 3);
    Eigen::Vector3d d = h.fullPivLu().solve(-gr);
    if (!d.allFinite()) break;
    bool improved = false;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      Vec4 q;
      double s = 0.0;
      bool ok = true;
      for (int i = 0; i < 3; ++i) {
        q[i] = p[i] + t * d(i);
        if (q[i] < 0.0) ok = false;
        s += q[i];
      }
      q[3] = 1.0 - s;
      if (q[3] < 0.0) ok = false;
      if (!ok) continue;
      const double fq = objective_L(v, q);
      // Near the optimum the quadratic deficit drops below one ulp of L,
      // so allow rounding-level regressions as long as the gradient shrinks.
      if (fq >= fp - 1e-14 * (1.0 + std::abs(fp))) {
        const Vec4 gq = grad_L(v, q);
        double norm_q = 0.0, norm_p = 0.0;
        for (int i = 0; i < 3; ++i) {
          norm_q = std::max(norm_q, std::abs(gq[i] - gq[3]));
          norm_p = std::max(norm_p, std::abs(g[i] - g[3]));
        }
        if (fq > fp || norm_q < norm_p) {
          p = q;
          fp = std::max(fp, fq);
          improved = true;
          break;
        }
      }
    }
    if (!improved) break;
  }
  return p;
}

struct GridBest {
  double L = -1.0;
  Vec4 p{};
};

/// Scan (p1, p2) on a lattice of the given pitch and solve the remaining
/// (p3, p4) split exactly (L is a concave quadratic in that split). The
/// chunked reduction is deterministic for any thread count.
inline GridBest grid_scan(const Vec4& v, double step, int threads) {
  const int n = std::max(1, static_cast<int>(std::lround(1.0 / step)));
  const double h = 1.0 / n;
  const int nthreads = std::max(1, threads);

  struct ChunkBest {
    double L = -1.0;
    int i = 0, j = 0;
    double t = 0.0;
  };
  auto scan_rows = [&](int i_begin, int i_end) {
    ChunkBest best;
    for (int i = i_begin; i < i_end; ++i) {
      const double p1 = i * h;
      for (int j = 0; j <= n - i; ++j) {
        const double p2 = j * h;
        const double r = (n - i - j) * h;
        const double a = v[0] * p2 + v[1] * p1;  // coefficient of t(r - t)
        const double b = (v[3] - v[2]) * p1 * p2;
        const double c = v[2] * p1 * p2 * r;
        double t;
        if (a > 0.0)
          t = std::clamp(0.5 * r + 0.5 * b / a, 0.0, r);
        else
          t = b > 0.0 ? r : 0.0;
        const double L = a * t * (r - t) + b * t + c;
        if (L > best.L) best = {L, i, j, t};
      }
    }
    return best;
  };

  std::vector<ChunkBest> chunk(static_cast<std::size_t>(nthreads));
  if (nthreads == 1) {
    chunk[0] = scan_rows(0, n + 1);
  } else {
    std::vector<std::thread> pool;
    const int rows = n + 1;
    for (int c = 0; c < nthreads; ++c) {
      const int lo = rows * c / nthreads;
      const int hi = rows * (c + 1) / nthreads;
      pool.emplace_back([&, c, lo, hi] { chunk[static_cast<std::size_t>(c)] = scan_rows(lo, hi); });
    }
    for (auto& th : pool) th.join();
  }
  ChunkBest best;
  for (const auto& cb : chunk) {
    if (cb.L > best.L || (cb.L == best.L && (cb.i < best.i || (cb.i == best.i && cb.j < best.j))))
      best = cb;
  }
  GridBest out;
  out.p = {best.i * h, best.j * h, best.t, (n - best.i - best.j) * h - best.t};
  out.p[3] = std::max(out.p[3], 0.0);
  out.L = objective_L(v, out.p);
  return out;
}

/// 16 L / (v1 v2 v3 v4) = |X'WX| for the 2^2 main-effects model.
inline double det_from_L(const Vec4& v, double L) {
  return 16.0 * L / (v[0] * v[1] * v[2] * v[3]);
}

inline SolveResult make_result(const Vec4& v, const Vec4& p, SolveMethod method) {
  SolveResult r;
  r.design = p;
  r.L_value = objective_L(v, p);
  r.det_value = det_from_L(v, r.L_value);
  r.method = method;
  return r;
}

}  // namespace detail

/// Saturation condition in variance space: 2 max_i v_i >= sum_i v_i.
inline SaturationReport saturation_condition_v(const Vec4& v) {
  detail::check_positive_v(v, "saturation_condition_v");
  const double vmax = *std::max_element(v.begin(), v.end());
  SaturationReport rep;
  rep.margin = 2.0 * vmax - (v[0] + v[1] + v[2] + v[3]);
  rep.holds = rep.margin >= 0.0;
  return rep;
}

/// Saturation condition in weight space:
/// 2 / min_i w_i >= 1/w_1 + 1/w_2 + 1/w_3 + 1/w_4.
inline SaturationReport saturation_condition_w(const Vec4& w) {
  for (double wi : w)
    if (!(wi > 0.0) || !std::isfinite(wi))
      throw std::invalid_argument("saturation_condition_w: weights must be positive");
  return saturation_condition_v({1.0 / w[0], 1.0 / w[1], 1.0 / w[2], 1.0 / w[3]});
}

/// |b1| threshold of the logit-link saturation condition for a given b0.
/// Stable form of (1/2) log((e^{2|b0|}+1)/(e^{2|b0|}-1)); +inf at b0 = 0.
inline double beta1_threshold(double beta0) {
  const double a = std::abs(beta0);
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  const double e = std::exp(-2.0 * a);
  return 0.5 * (std::log1p(e) - std::log1p(-e));
}

/// |b2| threshold of the logit-link saturation condition; +inf when |b1|
/// does not exceed beta1_threshold(b0). Evaluated with the common
/// exponential factor cancelled so large coefficients do not overflow.
inline double beta2_threshold(double beta0, double beta1) {
  const double a = std::abs(beta0);
  const double b = std::abs(beta1);
  if (a == 0.0 || !(b > beta1_threshold(beta0)))
    return std::numeric_limits<double>::infinity();
  const double num = 2.0 * std::exp(-(a + b)) +
                     std::sqrt(-std::expm1(-4.0 * a) * -std::expm1(-4.0 * b));
  const double den = (-std::expm1(-2.0 * a)) * (-std::expm1(-2.0 * b)) -
                     2.0 * std::exp(-2.0 * (a + b));
  // just above the |b1| threshold the denominator can round to <= 0
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return std::log(num) - std::log(den);
}

/// Logit-link saturation condition in coefficient space:
/// b0 != 0, |b1| > beta1_threshold(b0), |b2| >= beta2_threshold(b0, b1).
inline SaturationReport saturation_condition_beta(const Beta& beta) {
  if (beta.size() != 3)
    throw std::invalid_argument("saturation_condition_beta: expects (b0, b1, b2)");
  for (double b : beta)
    if (!std::isfinite(b)) throw std::invalid_argument("saturation_condition_beta: non-finite coefficient");
  const double t1 = beta1_threshold(beta[0]);
  const double t2 = beta2_threshold(beta[0], beta[1]);
  SaturationReport rep;
  rep.beta_thresholds = std::array<double, 2>{t1, t2};
  rep.holds = beta[0] != 0.0 && std::abs(beta[1]) > t1 && std::abs(beta[2]) >= t2;
  // Margin reported in variance space for consistency with the w form.
  const WeightVector w = weights_for_design(LinkKind::logit, beta, ModelSpec::main_effects(2));
  bool positive = true;
  for (double wi : w) positive = positive && wi > 0.0;
  if (positive) rep.margin = saturation_condition_w(to_vec4(w, "w")).margin;
  else rep.margin = std::numeric_limits<double>::infinity();
  return rep;
}

inline SaturationReport saturation_condition_beta(LinkKind link, const Beta& beta) {
  if (link != LinkKind::logit)
    throw std::invalid_argument(
        "saturation_condition_beta: closed-form thresholds exist for the logit link only; "
        "evaluate other links through weights_for_design + saturation_condition_w");
  return saturation_condition_beta(beta);
}

struct BoundaryPoint {
  double beta1_abs = 0.0;
  double beta2_threshold = std::numeric_limits<double>::infinity();
  bool feasible = false;
};

/// Lower |b2| boundary of the saturation region over a grid of |b1|
/// values for a fixed b0 > 0. Grid points at or below the |b1| threshold
/// are flagged infeasible rather than given a fabricated value.
inline std::vector<BoundaryPoint> figure1_boundary(double beta0, const std::vector<double>& beta1_grid) {
  if (!(beta0 > 0.0) || !std::isfinite(beta0))
    throw std::invalid_argument("figure1_boundary: beta0 must be positive");
  const double t1 = beta1_threshold(beta0);
  std::vector<BoundaryPoint> out;
  out.reserve(beta1_grid.size());
  for (double b1 : beta1_grid) {
    BoundaryPoint pt;
    pt.beta1_abs = std::abs(b1);
    if (pt.beta1_abs > t1) {
      pt.beta2_threshold = beta2_threshold(beta0, pt.beta1_abs);
      pt.feasible = std::isfinite(pt.beta2_threshold);
    }
    out.push_back(pt);
  }
  return out;
}

/// Three-point optimum (0 at the largest variance, 1/3 elsewhere);
/// requires the saturation condition. L = max_i v_i / 27.
inline SolveResult solve_saturated(const Vec4& v) {
  detail::check_positive_v(v, "solve_saturated");
  if (!saturation_condition_v(v).holds)
    throw std::invalid_argument("solve_saturated: saturation condition does not hold");
  const int imax = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  Vec4 p{};
  for (int i = 0; i < 4; ++i) p[i] = i == imax ? 0.0 : 1.0 / 3.0;
  return detail::make_result(v, p, SolveMethod::saturated);
}

/// Closed form for v = (v1, v2, v, v) with v1 >= v2 and v1 < v2 + 2v:
///   p1 = 1/2 - (v1 - v2 + 4v) / (2(-2d + D)),
///   p2 = 1/2 + (v1 - v2 - 4v) / (2(-2d + D)),
///   p3 = p4 = 2v / (-2d + D),
/// d = v1 + v2 - 4v, D = sqrt(d^2 + 12 v1 v2).
inline SolveResult solve_theorem2(double v1, double v2, double v) {
  if (!(v2 > 0.0) || !(v > 0.0) || !std::isfinite(v1) || !std::isfinite(v2) || !std::isfinite(v))
    throw std::invalid_argument("solve_theorem2: variances must be positive and finite");
  if (!(v1 >= v2)) throw std::invalid_argument("solve_theorem2: requires v1 >= v2");
  if (!(v1 < v2 + 2.0 * v))
    throw std::invalid_argument("solve_theorem2: requires v1 < v2 + 2v (otherwise saturated)");
  const double d = v1 + v2 - 4.0 * v;
  const double big = std::sqrt(d * d + 12.0 * v1 * v2);
  const double s = -2.0 * d + big;
  Vec4 p;
  p[0] = 0.5 - (v1 - v2 + 4.0 * v) / (2.0 * s);
  p[1] = 0.5 + (v1 - v2 - 4.0 * v) / (2.0 * s);
  p[2] = p[3] = 2.0 * v / s;
  for (double& pi : p) pi = std::max(pi, 0.0);
  return detail::make_result({v1, v2, v, v}, p, SolveMethod::theorem2_closed_form);
}

/// Closed form for v = (v1, v, v, v) with v1 < 3v:
/// p1 = (3v - v1)/(9v - v1), p2 = p3 = p4 = 2v/(9v - v1), L = 4v^3/(9v - v1)^2.
inline SolveResult solve_corollary1(double v1, double v) {
  if (!(v1 > 0.0) || !(v > 0.0) || !std::isfinite(v1) || !std::isfinite(v))
    throw std::invalid_argument("solve_corollary1: variances must be positive and finite");
  if (!(v1 < 3.0 * v))
    throw std::invalid_argument("solve_corollary1: requires v1 < 3v (otherwise saturated)");
  const double denom = 9.0 * v - v1;
  Vec4 p;
  p[0] = (3.0 * v - v1) / denom;
  p[1] = p[2] = p[3] = 2.0 * v / denom;
  SolveResult r = detail::make_result({v1, v, v, v}, p, SolveMethod::corollary1);
  return r;
}

/// Closed form for v = (u, u, v, v). Stated for u > v; u < v is handled
/// by swapping the pair roles (L is symmetric), u = v is the uniform design.
inline SolveResult solve_corollary2(double u, double v) {
  if (!(u > 0.0) || !(v > 0.0) || !std::isfinite(u) || !std::isfinite(v))
    throw std::invalid_argument("solve_corollary2: variances must be positive and finite");
  if (u == v) {
    SolveResult r = detail::make_result({u, u, v, v}, {0.25, 0.25, 0.25, 0.25},
                                        SolveMethod::corollary2);
    return r;
  }
  if (u < v) {
    SolveResult r = solve_corollary2(v, u);
    std::swap(r.design[0], r.design[2]);
    std::swap(r.design[1], r.design[3]);
    r.L_value = objective_L({u, u, v, v}, r.design);
    r.det_value = detail::det_from_L({u, u, v, v}, r.L_value);
    return r;
  }
  const double d = std::sqrt(u * u - u * v + v * v);
  Vec4 p;
  p[0] = p[1] = (2.0 * u - v - d) / (6.0 * (u - v));
  p[2] = p[3] = (u - 2.0 * v + d) / (6.0 * (u - v));
  return detail::make_result({u, u, v, v}, p, SolveMethod::corollary2);
}

namespace detail {

/// Optimum of the modified problem where v_i and v_j are replaced by
/// their average. Because the optimal design then puts equal mass on the
/// averaged pair, its L under the true v equals the modified optimum.
inline SolveResult solve_pair_average(const Vec4& v, int i, int j) {
  if (i == j || i < 0 || j < 0 || i > 3 || j > 3)
    throw std::invalid_argument("solve_pair_average: bad index pair");
  check_positive_v(v, "solve_pair_average");
  const double m = 0.5 * (v[i] + v[j]);
  int o1 = -1, o2 = -1;
  for (int t = 0; t < 4; ++t)
    if (t != i && t != j) (o1 < 0 ? o1 : o2) = t;
  if (v[o1] < v[o2]) std::swap(o1, o2);
  SolveResult inner = solve_theorem2(v[o1], v[o2], m);
  Vec4 p{};
  p[o1] = inner.design[0];
  p[o2] = inner.design[1];
  p[i] = inner.design[2];
  p[j] = inner.design[3];
  SolveResult r = make_result(v, p, SolveMethod::approx_theorem4);
  return r;
}

}  // namespace detail

/// Analytic approximate solution for strictly increasing v with
/// v4 < v1 + v2 + v3: the best of the three adjacent-pair-averaged
/// closed forms, with a guaranteed optimality gap of
/// min{(v2-v1)/216, (v3-v2)/(96 sqrt 3), (v4-v3)/54}.
inline SolveResult solve_approx_theorem4(const Vec4& v) {
  detail::check_positive_v(v, "solve_approx_theorem4");
  Vec4 s = v;
  std::array<int, 4> idx{0, 1, 2, 3};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  for (int t = 0; t < 4; ++t) s[t] = v[idx[t]];
  if (!(s[0] < s[1] && s[1] < s[2] && s[2] < s[3]))
    throw std::invalid_argument("solve_approx_theorem4: requires strictly distinct variances (ties have exact solutions)");
  if (!(s[3] < s[0] + s[1] + s[2]))
    throw std::invalid_argument("solve_approx_theorem4: saturated case; use solve_saturated");

  SolveResult best;
  best.L_value = -1.0;
  for (const auto [i, j] : std::array<std::array<int, 2>, 3>{{{0, 1}, {1, 2}, {2, 3}}}) {
    SolveResult cand = detail::solve_pair_average(s, i, j);
    if (cand.L_value > best.L_value) best = cand;
  }
  // Undo the sort.
  SolveResult out;
  Vec4 p{};
  for (int t = 0; t < 4; ++t) p[idx[t]] = best.design[t];
  out = detail::make_result(v, p, SolveMethod::approx_theorem4);
  out.error_bound =
      std::min({(s[1] - s[0]) / 216.0, (s[2] - s[1]) / (96.0 * std::sqrt(3.0)), (s[3] - s[2]) / 54.0});
  return out;
}

/// Multi-start ascent + Newton refinement, certified against a dense
/// grid scan. Warm starts: the analytic approximation (when defined),
/// the uniform design, and the four three-point designs.
inline SolveResult solve_numeric(const Vec4& v, double tol = 1e-9, const SolveOptions& opts = {}) {
  detail::check_positive_v(v, "solve_numeric");

  std::vector<Vec4> starts;
  starts.push_back({0.25, 0.25, 0.25, 0.25});
  for (int i = 0; i < 4; ++i) {
    Vec4 p{};
    for (int j = 0; j < 4; ++j) p[j] = j == i ? 0.0 : 1.0 / 3.0;
    starts.push_back(p);
  }
  try {
    starts.push_back(solve_approx_theorem4(v).design);
  } catch (const std::invalid_argument&) {
    // tied or saturated inputs: the remaining starts cover those optima
  }

  struct Candidate {
    Vec4 p;
    double L;
    double resid;
  };
  std::vector<Candidate> candidates;
  auto add_candidate = [&](Vec4 p) {
    p = detail::newton_polish(v, p);
    candidates.push_back({p, objective_L(v, p), detail::stationarity_residual(v, p)});
  };
  for (const Vec4& s : starts) add_candidate(detail::projected_ascent(v, s));

  Certificate cert;
  cert.grid_step = opts.grid_step;
  double grid_L = -1.0;
  if (opts.certify) {
    const detail::GridBest grid = detail::grid_scan(v, opts.grid_step, opts.threads);
    grid_L = grid.L;
    add_candidate(detail::projected_ascent(v, grid.p));
  }

  // Candidates within rounding of the best L are interchangeable; prefer
  // the one with the cleanest stationarity certificate.
  double top_L = candidates.front().L;
  for (const Candidate& c : candidates) top_L = std::max(top_L, c.L);
  const Candidate* best = nullptr;
  for (const Candidate& c : candidates) {
    if (c.L < top_L - 1e-13 * (1.0 + std::abs(top_L))) continue;
    if (best == nullptr || c.resid < best->resid) best = &c;
  }
  const Vec4 best_p = best->p;
  const double best_L = best->L;

  cert.stationarity_residual = best->resid;
  if (opts.certify) {
    cert.grid_gap = best_L - grid_L;
    cert.certified = cert.stationarity_residual <= 1e-10 && cert.grid_gap >= -tol &&
                     best_L + tol >= top_L;
    if (!cert.certified) cert.note = "stationarity or grid-gap target missed";
  } else {
    cert.certified = cert.stationarity_residual <= 1e-10;
    cert.note = "grid scan skipped";
  }

  SolveResult r = detail::make_result(v, best_p, SolveMethod::numeric);
  r.certificate = cert;
  return r;
}

/// Dispatcher on variances. Closed forms whenever the saturation
/// condition or a tie pattern applies; otherwise the certified numeric
/// path warm-started by the analytic approximation. The design is
/// reported in the original index order.
inline SolveResult solve_v(const Vec4& v, const SolveOptions& opts = {}) {
  detail::check_positive_v(v, "solve_v");
  const double vmax = *std::max_element(v.begin(), v.end());
  const double vmin = *std::min_element(v.begin(), v.end());

  if (vmax - vmin <= opts.tie_rel_tol * vmax) {
    SolveResult r = detail::make_result(v, {0.25, 0.25, 0.25, 0.25}, SolveMethod::kiefer_uniform);
    return r;
  }
  if (saturation_condition_v(v).holds) {
    return solve_saturated(v);
  }

  const auto idx = detail::sort_desc_indices(v);
  const Vec4 s{v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]};
  auto tied = [&](int a, int b) { return detail::nearly_equal_rel(s[a], s[b], opts.tie_rel_tol); };

  SolveResult inner;
  std::array<int, 4> order{0, 1, 2, 3};  // theorem coordinate -> sorted slot
  bool closed_form = true;
  if (tied(1, 2) && tied(2, 3)) {
    inner = solve_corollary1(s[0], (s[1] + s[2] + s[3]) / 3.0);
  } else if (tied(0, 1) && tied(2, 3)) {
    const double u = 0.5 * (s[0] + s[1]);
    const double w = 0.5 * (s[2] + s[3]);
    if (detail::nearly_equal_rel(u, w, opts.tie_rel_tol))
      return detail::make_result(v, {0.25, 0.25, 0.25, 0.25}, SolveMethod::kiefer_uniform);
    inner = solve_corollary2(u, w);
  } else if (tied(2, 3)) {
    inner = solve_theorem2(s[0], s[1], 0.5 * (s[2] + s[3]));
  } else if (tied(1, 2)) {
    inner = solve_theorem2(s[0], s[3], 0.5 * (s[1] + s[2]));
    order = {0, 3, 1, 2};
  } else if (tied(0, 1)) {
    inner = solve_theorem2(s[2], s[3], 0.5 * (s[0] + s[1]));
    order = {2, 3, 0, 1};
  } else {
    closed_form = false;
  }

  if (closed_form) {
    Vec4 p{};
    for (int t = 0; t < 4; ++t) p[idx[order[t]]] = inner.design[t];
    SolveResult r = detail::make_result(v, p, inner.method);
    return r;
  }

  SolveResult r = solve_numeric(v, opts.tol, opts);
  return r;
}

/// Top-level dispatcher on weights. Zero weights are handled by the
/// degenerate rules: with two or more zeros the criterion vanishes
/// identically; with exactly one zero the optimum is uniform on the
/// remaining three points (L_value is +inf in the variance scale).
inline SolveResult solve(const Vec4& w, const SolveOptions& opts = {}) {
  int zero_count = 0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi))
      throw std::invalid_argument("solve: weights must be finite and nonnegative");
    if (wi == 0.0) ++zero_count;
  }
  if (zero_count >= 2)
    throw DegenerateCriterionError("solve: two or more zero weights; |X'WX| = 0 for every design");
  if (zero_count == 1) {
    SolveResult r;
    double det16 = 16.0 / 27.0;
    for (int i = 0; i < 4; ++i) {
      if (w[i] == 0.0) {
        r.design[i] = 0.0;
      } else {
        r.design[i] = 1.0 / 3.0;
        det16 *= w[i];
      }
    }
    r.L_value = std::numeric_limits<double>::infinity();
    r.det_value = det16;
    r.method = SolveMethod::zero_weight_reduction;
    return r;
  }
  const Vec4 v{1.0 / w[0], 1.0 / w[1], 1.0 / w[2], 1.0 / w[3]};
  return solve_v(v, opts);
}

/// L at the perturbed three-point design (eps, (1-eps)/3, ...) minus L at
/// (0, 1/3, 1/3, 1/3). By convention v[0] holds the largest variance.
/// Positive iff 3 d1 > eps (3 + 6 d1 - 2 eps - 3 d1 eps) with
/// d1 = (v2 + v3 + v4 - v1)/v1.
inline double perturbation_gain(const Vec4& v, double epsilon) {
  detail::check_positive_v(v, "perturbation_gain");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw std::invalid_argument("perturbation_gain: epsilon must be in (0, 1)");
  const double third = (1.0 - epsilon) / 3.0;
  const Vec4 p_eps{epsilon, third, third, third};
  const Vec4 p0{0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return objective_L(v, p_eps) - objective_L(v, p0);
}

}  // namespace optfact
