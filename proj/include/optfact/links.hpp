#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "optfact/factorial.hpp"

namespace optfact {

/// Binary-response link functions. Conventions for the log-log family:
///   loglog:  mu = exp(-exp(-eta))
///   cloglog: mu = 1 - exp(-exp(eta))
/// The two share the same weight function up to the sign of eta.
enum class LinkKind { logit, probit, loglog, cloglog };

inline std::string_view to_string(LinkKind link) {
  switch (link) {
    case LinkKind::logit: return "logit";
    case LinkKind::probit: return "probit";
    case LinkKind::loglog: return "loglog";
    case LinkKind::cloglog: return "cloglog";
  }
  return "?";
}

inline LinkKind parse_link(std::string_view name) {
  if (name == "logit") return LinkKind::logit;
  if (name == "probit") return LinkKind::probit;
  if (name == "loglog" || name == "log-log") return LinkKind::loglog;
  if (name == "cloglog" || name == "complementary-log-log") return LinkKind::cloglog;
  throw std::invalid_argument("unknown link: " + std::string(name));
}

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kInvSqrt2 = 0.7071067811865475244;

/// Below this, mu(1-mu) is treated as degenerate and the weight is 0.
inline constexpr double kDegenerateVar = 1e-300;

/// Shared weight of the log-log family as a function of t = exp(+-eta):
/// w = t^2 e^{-t} / (1 - e^{-t}), evaluated in a factored order so that
/// neither t^2 nor the ratio under/overflows for extreme t.
inline double loglog_family_weight(double t) {
  if (!(t > 0.0) || t > 700.0) return 0.0;
  const double one_minus = -std::expm1(-t);  // 1 - e^{-t}, accurate near 0
  const double et = std::exp(-t);
  if (et * one_minus < kDegenerateVar) return 0.0;
  return t * (t / one_minus) * et;
}

}  // namespace detail

/// Inverse link mu = g^{-1}(eta); saturates gracefully for extreme eta.
inline double mean(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::logit: return 1.0 / (1.0 + std::exp(-eta));
    case LinkKind::probit: return 0.5 * std::erfc(-eta * detail::kInvSqrt2);
    case LinkKind::loglog: return std::exp(-std::exp(-eta));
    case LinkKind::cloglog: return -std::expm1(-std::exp(eta));
  }
  throw std::invalid_argument("mean: bad link");
}

/// d mu / d eta.
inline double mean_derivative(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::logit: {
      const double a = std::exp(-std::abs(eta));
      return a / ((1.0 + a) * (1.0 + a));
    }
    case LinkKind::probit:
      return detail::kInvSqrt2Pi * std::exp(-0.5 * eta * eta);
    case LinkKind::loglog: {
      const double s = std::exp(-eta);
      if (!(s > 0.0) || s > 700.0) return 0.0;
      return s * std::exp(-s);
    }
    case LinkKind::cloglog: {
      const double t = std::exp(eta);
      if (!(t > 0.0) || t > 700.0) return 0.0;
      return t * std::exp(-t);
    }
  }
  throw std::invalid_argument("mean_derivative: bad link");
}

/// GLM weight w = (d mu/d eta)^2 / (mu (1 - mu)). Returns 0 when
/// mu(1-mu) degenerates in floating point, matching the limit.
inline double weight_at(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::logit: {
      // For logit the ratio collapses to mu(1-mu) = a/(1+a)^2, a = e^{-|eta|}.
      const double a = std::exp(-std::abs(eta));
      return a / ((1.0 + a) * (1.0 + a));
    }
    case LinkKind::probit: {
      // Both tails via erfc to keep the vanishing numerator/denominator paired.
      const double x = eta * detail::kInvSqrt2;
      const double denom = 0.25 * std::erfc(-x) * std::erfc(x);
      if (denom < detail::kDegenerateVar) return 0.0;
      const double num = detail::kInvSqrt2Pi * detail::kInvSqrt2Pi * std::exp(-eta * eta);
      return num / denom;
    }
    case LinkKind::loglog: return detail::loglog_family_weight(std::exp(-eta));
    case LinkKind::cloglog: return detail::loglog_family_weight(std::exp(eta));
  }
  throw std::invalid_argument("weight_at: bad link");
}

/// Weights at every design point: eta_i = (X beta)_i, then weight_at.
inline WeightVector weights_for_design(LinkKind link, const Beta& beta, const ModelSpec& model) {
  if (static_cast<int>(beta.size()) != model.n_terms())
    throw std::invalid_argument("weights_for_design: beta length must equal the number of model terms");
  for (double b : beta)
    if (!std::isfinite(b)) throw std::invalid_argument("weights_for_design: non-finite coefficient");
  const Eigen::MatrixXd x = design_matrix(model);
  WeightVector w(static_cast<std::size_t>(model.n_points()));
  for (int i = 0; i < model.n_points(); ++i) {
    double eta = 0.0;
    for (int j = 0; j < model.n_terms(); ++j) eta += x(i, j) * beta[static_cast<std::size_t>(j)];
    w[static_cast<std::size_t>(i)] = weight_at(link, eta);
  }
  return w;
}

/// Linear predictors eta_i = (X beta)_i, in design-point order.
inline std::vector<double> linear_predictors(const Beta& beta, const ModelSpec& model) {
  if (static_cast<int>(beta.size()) != model.n_terms())
    throw std::invalid_argument("linear_predictors: beta length must equal the number of model terms");
  const Eigen::MatrixXd x = design_matrix(model);
  std::vector<double> eta(static_cast<std::size_t>(model.n_points()), 0.0);
  for (int i = 0; i < model.n_points(); ++i)
    for (int j = 0; j < model.n_terms(); ++j)
      eta[static_cast<std::size_t>(i)] += x(i, j) * beta[static_cast<std::size_t>(j)];
  return eta;
}

}  // namespace optfact
