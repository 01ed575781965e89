#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "optfact/rng.hpp"
#include "optfact/robustness.hpp"

namespace optfact {

enum class Experiment { saturation_rate, approx_loss };

inline std::string_view to_string(Experiment e) {
  return e == Experiment::saturation_rate ? "saturation_rate" : "approx_loss";
}

inline Experiment parse_experiment(std::string_view name) {
  if (name == "saturation_rate" || name == "saturation-rate") return Experiment::saturation_rate;
  if (name == "approx_loss" || name == "approx-loss") return Experiment::approx_loss;
  throw std::invalid_argument("unknown experiment: " + std::string(name));
}

struct SimConfig {
  Experiment experiment = Experiment::saturation_rate;
  int n_draws = 1000;
  std::uint64_t seed = 0;
  double w_low = 0.0;
  double w_high = 0.25;
  /// When set, draw coefficients uniformly on [-beta_range, beta_range]^3
  /// and map them to weights through the link instead of drawing w directly.
  std::optional<LinkKind> link;
  double beta_range = 3.0;
  /// Retain per-draw records for export (losses are always retained for
  /// the summary statistics).
  bool keep_records = true;
  int threads = 1;
  SolveOptions solver{};

  void validate() const {
    if (n_draws < 1) throw std::invalid_argument("SimConfig: n_draws must be >= 1");
    if (!link && (!(w_low >= 0.0) || !(w_low < w_high)))
      throw std::invalid_argument("SimConfig: requires 0 <= w_low < w_high");
    if (link && !(beta_range > 0.0))
      throw std::invalid_argument("SimConfig: beta_range must be positive");
    if (threads < 1) throw std::invalid_argument("SimConfig: threads must be >= 1");
  }
};

struct SaturationRecord {
  int draw = 0;
  Vec4 w{};
  bool saturated = false;
};

struct LossRecord {
  int draw = 0;
  Vec4 w{};
  double do_cuberoot = 0.0;
  double dstar_cuberoot = 0.0;
  double rel_loss = 0.0;
  SolveMethod method = SolveMethod::numeric;
};

struct SimSummary {
  Experiment experiment = Experiment::saturation_rate;
  int n_draws = 0;
  std::uint64_t seed = 0;
  std::string rng_algorithm{kRngAlgorithm};
  double w_low = 0.0;
  double w_high = 0.0;
  std::optional<LinkKind> link;

  // saturation_rate statistics
  int n_saturated = 0;
  double saturation_rate = 0.0;

  // approx_loss statistics (losses are relative on the det^{1/3} scale)
  double max_rel_loss = 0.0;
  double frac_below_3e4 = 0.0;  // fraction of losses below 0.03%
  double loss_q50 = 0.0;
  double loss_q90 = 0.0;
  double loss_q99 = 0.0;
  /// The exact reference optimum is replaced by a certified numeric one.
  std::string optimizer_note;

  bool records_kept = false;
  std::vector<SaturationRecord> sat_records;
  std::vector<LossRecord> loss_records;
};

namespace detail {

inline Vec4 draw_weights(const SimConfig& cfg, int draw_index) {
  SplitMix64 gen = SplitMix64::substream(cfg.seed, static_cast<std::uint64_t>(draw_index));
  if (cfg.link) {
    Beta beta(3);
    for (double& b : beta) b = -cfg.beta_range + gen.next_double() * 2.0 * cfg.beta_range;
    const WeightVector w = weights_for_design(*cfg.link, beta, ModelSpec::main_effects(2));
    return {w[0], w[1], w[2], w[3]};
  }
  Vec4 w;
  for (double& wi : w) wi = gen.next_open(cfg.w_low, cfg.w_high);
  return w;
}

template <typename Fn>
inline void for_each_draw(int n_draws, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (int i = 0; i < n_draws; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int c = 0; c < threads; ++c) {
    const int lo = n_draws * c / threads;
    const int hi = n_draws * (c + 1) / threads;
    pool.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline double nearest_rank_quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto n = sorted.size();
  auto idx = static_cast<std::size_t>(q * static_cast<double>(n - 1) + 0.5);
  idx = std::min(idx, n - 1);
  return sorted[idx];
}

}  // namespace detail

/// Fraction of weight draws whose variances satisfy the saturation
/// condition. Weights are iid uniform on (w_low, w_high]; with a link
/// set, coefficients are drawn instead and mapped to weights.
inline SimSummary run_saturation_rate(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.experiment != Experiment::saturation_rate)
    throw std::invalid_argument("run_saturation_rate: config targets a different experiment");

  std::vector<char> saturated(static_cast<std::size_t>(cfg.n_draws), 0);
  std::vector<SaturationRecord> records(static_cast<std::size_t>(cfg.n_draws));
  detail::for_each_draw(cfg.n_draws, cfg.threads, [&](int i) {
    const Vec4 w = detail::draw_weights(cfg, i);
    int zeros = 0;
    for (double wi : w)
      if (wi == 0.0) ++zeros;
    bool sat;
    if (zeros >= 2) {
      sat = false;  // degenerate draw; probability zero for valid configs
    } else if (zeros == 1) {
      sat = true;  // infinite variance dominates
    } else {
      sat = saturation_condition_w(w).holds;
    }
    saturated[static_cast<std::size_t>(i)] = sat ? 1 : 0;
    records[static_cast<std::size_t>(i)] = {i, w, sat};
  });

  SimSummary s;
  s.experiment = Experiment::saturation_rate;
  s.n_draws = cfg.n_draws;
  s.seed = cfg.seed;
  s.w_low = cfg.w_low;
  s.w_high = cfg.w_high;
  s.link = cfg.link;
  s.n_saturated = static_cast<int>(std::count(saturated.begin(), saturated.end(), 1));
  s.saturation_rate = static_cast<double>(s.n_saturated) / cfg.n_draws;
  s.records_kept = cfg.keep_records;
  if (cfg.keep_records) s.sat_records = std::move(records);
  return s;
}

/// Relative loss of the analytic solution against a certified numeric
/// optimum on the det^{1/3} scale, over random weight draws. When the
/// saturation condition or a tie pattern applies the analytic solution
/// is exact and the loss is zero by construction; otherwise the
/// adjacent-pair-averaging approximation is used and its guaranteed gap
/// is checked against the realized one.
inline SimSummary run_approx_loss(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.experiment != Experiment::approx_loss)
    throw std::invalid_argument("run_approx_loss: config targets a different experiment");

  const int n = cfg.n_draws;
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<LossRecord> records(static_cast<std::size_t>(n));
  std::vector<std::string> failures(static_cast<std::size_t>(n));

  detail::for_each_draw(n, cfg.threads, [&](int i) {
    const Vec4 w = detail::draw_weights(cfg, i);
    const Vec4 v{1.0 / w[0], 1.0 / w[1], 1.0 / w[2], 1.0 / w[3]};
    LossRecord rec;
    rec.draw = i;
    rec.w = w;

    bool exact = saturation_condition_v(v).holds;
    if (!exact) {
      const auto idx = detail::sort_desc_indices(v);
      for (int t = 0; t + 1 < 4 && !exact; ++t)
        exact = detail::nearly_equal_rel(v[idx[t]], v[idx[t + 1]], cfg.solver.tie_rel_tol);
    }

    if (exact) {
      const SolveResult res = solve_v(v, cfg.solver);
      rec.method = res.method;
      rec.do_cuberoot = rec.dstar_cuberoot = std::cbrt(res.det_value);
      rec.rel_loss = 0.0;
    } else {
      const SolveResult approx = solve_approx_theorem4(v);
      const SolveResult num = solve_numeric(v, cfg.solver.tol, cfg.solver);
      if (num.certificate && !num.certificate->certified) {
        failures[static_cast<std::size_t>(i)] =
            "draw " + std::to_string(i) + " (seed " + std::to_string(cfg.seed) +
            "): numeric optimum not certified";
        return;
      }
      if (approx.error_bound &&
          num.L_value - approx.L_value > *approx.error_bound + 1e-12) {
        failures[static_cast<std::size_t>(i)] =
            "draw " + std::to_string(i) + " (seed " + std::to_string(cfg.seed) +
            "): realized gap exceeds the guaranteed bound";
        return;
      }
      rec.method = SolveMethod::approx_theorem4;
      rec.do_cuberoot = std::cbrt(num.det_value);
      rec.dstar_cuberoot = std::cbrt(approx.det_value);
      rec.rel_loss = (rec.do_cuberoot - rec.dstar_cuberoot) / rec.do_cuberoot;
    }
    losses[static_cast<std::size_t>(i)] = rec.rel_loss;
    records[static_cast<std::size_t>(i)] = rec;
  });

  for (const std::string& f : failures)
    if (!f.empty()) throw CertificationError("run_approx_loss: " + f);

  SimSummary s;
  s.experiment = Experiment::approx_loss;
  s.n_draws = n;
  s.seed = cfg.seed;
  s.w_low = cfg.w_low;
  s.w_high = cfg.w_high;
  s.link = cfg.link;
  s.optimizer_note = "reference optimum: multistart ascent certified by dense grid scan";
  s.max_rel_loss = *std::max_element(losses.begin(), losses.end());
  s.frac_below_3e4 =
      static_cast<double>(std::count_if(losses.begin(), losses.end(), [](double x) { return x < 3e-4; })) / n;
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  s.loss_q50 = detail::nearest_rank_quantile(sorted, 0.50);
  s.loss_q90 = detail::nearest_rank_quantile(sorted, 0.90);
  s.loss_q99 = detail::nearest_rank_quantile(sorted, 0.99);
  s.records_kept = cfg.keep_records;
  if (cfg.keep_records) s.loss_records = std::move(records);
  return s;
}

inline SimSummary run(const SimConfig& cfg) {
  return cfg.experiment == Experiment::saturation_rate ? run_saturation_rate(cfg)
                                                       : run_approx_loss(cfg);
}

enum class ExportFormat { csv, jsonl };

namespace detail {

inline std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace detail

/// Per-draw records as CSV (header + one line per draw) or JSON lines,
/// sorted by draw index. Reals carry 12 significant digits.
inline std::string export_records(const SimSummary& summary, ExportFormat format) {
  if (!summary.records_kept)
    throw std::invalid_argument("export_records: per-draw records were not retained");
  std::string out;
  if (summary.experiment == Experiment::saturation_rate) {
    if (format == ExportFormat::csv) out += "draw,w1,w2,w3,w4,saturated\n";
    for (const auto& r : summary.sat_records) {
      if (format == ExportFormat::csv) {
        out += std::to_string(r.draw);
        for (double wi : r.w) out += "," + detail::format_real(wi);
        out += r.saturated ? ",1\n" : ",0\n";
      } else {
        out += "{\"draw\":" + std::to_string(r.draw) + ",\"w\":[" + detail::format_real(r.w[0]) +
               "," + detail::format_real(r.w[1]) + "," + detail::format_real(r.w[2]) + "," +
               detail::format_real(r.w[3]) + "],\"saturated\":" + (r.saturated ? "true" : "false") +
               "}\n";
      }
    }
  } else {
    if (format == ExportFormat::csv)
      out += "draw,w1,w2,w3,w4,do_cuberoot,dstar_cuberoot,rel_loss,method\n";
    for (const auto& r : summary.loss_records) {
      if (format == ExportFormat::csv) {
        out += std::to_string(r.draw);
        for (double wi : r.w) out += "," + detail::format_real(wi);
        out += "," + detail::format_real(r.do_cuberoot) + "," + detail::format_real(r.dstar_cuberoot) +
               "," + detail::format_real(r.rel_loss) + "," + std::string(to_string(r.method)) + "\n";
      } else {
        out += "{\"draw\":" + std::to_string(r.draw) + ",\"w\":[" + detail::format_real(r.w[0]) +
               "," + detail::format_real(r.w[1]) + "," + detail::format_real(r.w[2]) + "," +
               detail::format_real(r.w[3]) + "],\"do_cuberoot\":" + detail::format_real(r.do_cuberoot) +
               ",\"dstar_cuberoot\":" + detail::format_real(r.dstar_cuberoot) +
               ",\"rel_loss\":" + detail::format_real(r.rel_loss) + ",\"method\":\"" +
               std::string(to_string(r.method)) + "\"}\n";
      }
    }
  }
  return out;
}

}  // namespace optfact
