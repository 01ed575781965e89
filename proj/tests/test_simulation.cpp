#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "optfact/simulation.hpp"

using namespace optfact;
using Catch::Approx;

namespace {

SimConfig rate_config(int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.experiment = Experiment::saturation_rate;
  cfg.n_draws = n;
  cfg.seed = seed;
  cfg.w_low = 0.0;
  cfg.w_high = 0.25;
  return cfg;
}

SimConfig loss_config(int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.experiment = Experiment::approx_loss;
  cfg.n_draws = n;
  cfg.seed = seed;
  cfg.w_low = 0.05;
  cfg.w_high = 0.25;
  cfg.solver.grid_step = 0.005;
  return cfg;
}

}  // namespace

TEST_CASE("splitmix64 substreams are stable and decorrelated", "[simulation]") {
  SplitMix64 a = SplitMix64::substream(42, 0);
  SplitMix64 b = SplitMix64::substream(42, 0);
  REQUIRE(a.next() == b.next());
  SplitMix64 c = SplitMix64::substream(42, 1);
  REQUIRE(a.next() != c.next());
  for (int i = 0; i < 1000; ++i) {
    const double x = c.next_double();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  // open lower endpoint
  SplitMix64 d = SplitMix64::substream(7, 3);
  for (int i = 0; i < 1000; ++i) REQUIRE(d.next_open(0.0, 0.25) > 0.0);
}

TEST_CASE("saturation-rate experiment", "[simulation]") {
  SECTION("rate near one half for weights uniform on (0, 0.25)") {
    const SimSummary s = run_saturation_rate(rate_config(20000, 7));
    REQUIRE(s.saturation_rate == Approx(0.48).margin(0.03));
    REQUIRE(s.n_saturated == static_cast<int>(s.saturation_rate * s.n_draws + 0.5));
  }
  SECTION("nearly equal weights never saturate") {
    SimConfig cfg = rate_config(2000, 3);
    cfg.w_low = 0.2499999;
    cfg.w_high = 0.25;
    const SimSummary s = run_saturation_rate(cfg);
    REQUIRE(s.saturation_rate == 0.0);
  }
  SECTION("the condition is scale-free: same flags for (0,1) and (0,0.25)") {
    SimConfig small = rate_config(5000, 11);
    SimConfig big = rate_config(5000, 11);
    big.w_high = 1.0;
    const SimSummary s1 = run_saturation_rate(small);
    const SimSummary s2 = run_saturation_rate(big);
    REQUIRE(s1.saturation_rate == s2.saturation_rate);
    for (int i = 0; i < 5000; ++i)
      REQUIRE(s1.sat_records[static_cast<std::size_t>(i)].saturated ==
              s2.sat_records[static_cast<std::size_t>(i)].saturated);
  }
  SECTION("estimates at different sizes agree within Monte Carlo error") {
    const SimSummary small = run_saturation_rate(rate_config(1000, 5));
    SimConfig big_cfg = rate_config(100000, 6);
    big_cfg.keep_records = false;
    const SimSummary big = run_saturation_rate(big_cfg);
    const double se = std::sqrt(0.48 * 0.52 / 1000.0);
    REQUIRE(std::abs(small.saturation_rate - big.saturation_rate) < 4.0 * se);
  }
  SECTION("link-based draws work without a weight range") {
    SimConfig cfg = rate_config(2000, 13);
    cfg.link = LinkKind::logit;
    const SimSummary s = run_saturation_rate(cfg);
    REQUIRE(s.saturation_rate > 0.0);
    REQUIRE(s.saturation_rate < 1.0);
  }
  SECTION("config validation") {
    SimConfig bad = rate_config(0, 1);
    REQUIRE_THROWS_AS(run_saturation_rate(bad), std::invalid_argument);
    bad = rate_config(10, 1);
    bad.w_low = 0.3;
    bad.w_high = 0.2;
    REQUIRE_THROWS_AS(run_saturation_rate(bad), std::invalid_argument);
    REQUIRE_THROWS_AS(run_saturation_rate(loss_config(10, 1)), std::invalid_argument);
  }
}

TEST_CASE("approximation-loss experiment", "[simulation]") {
  const SimSummary s = run_approx_loss(loss_config(150, 17));
  SECTION("losses are nonnegative and the analytic branch is exact") {
    for (const LossRecord& r : s.loss_records) {
      REQUIRE(r.rel_loss >= -1e-12);
      if (r.method != SolveMethod::approx_theorem4) REQUIRE(r.rel_loss == 0.0);
      REQUIRE(r.do_cuberoot >= r.dstar_cuberoot - 1e-15);
    }
  }
  SECTION("summary statistics are consistent with the records") {
    double mx = 0.0;
    int below = 0;
    for (const LossRecord& r : s.loss_records) {
      mx = std::max(mx, r.rel_loss);
      if (r.rel_loss < 3e-4) ++below;
    }
    REQUIRE(s.max_rel_loss == mx);
    REQUIRE(s.frac_below_3e4 == Approx(static_cast<double>(below) / 150.0).margin(1e-12));
    REQUIRE(s.loss_q50 <= s.loss_q90);
    REQUIRE(s.loss_q90 <= s.loss_q99);
    REQUIRE(s.loss_q99 <= s.max_rel_loss);
  }
  SECTION("a tie-dominated range forces the exact branch everywhere") {
    SimConfig cfg = loss_config(100, 23);
    cfg.w_low = 0.05;
    cfg.w_high = 0.05 * (1.0 + 1e-10);
    const SimSummary tied = run_approx_loss(cfg);
    REQUIRE(tied.max_rel_loss == 0.0);
    for (const LossRecord& r : tied.loss_records) REQUIRE(r.rel_loss == 0.0);
  }
}

TEST_CASE("simulations are deterministic", "[simulation]") {
  SECTION("same config, same bits") {
    const SimSummary a = run_saturation_rate(rate_config(4000, 99));
    const SimSummary b = run_saturation_rate(rate_config(4000, 99));
    REQUIRE(a.saturation_rate == b.saturation_rate);
    REQUIRE(export_records(a, ExportFormat::csv) == export_records(b, ExportFormat::csv));
  }
  SECTION("worker count does not change results") {
    SimConfig c1 = rate_config(4000, 123);
    SimConfig c4 = rate_config(4000, 123);
    c4.threads = 4;
    REQUIRE(export_records(run_saturation_rate(c1), ExportFormat::csv) ==
            export_records(run_saturation_rate(c4), ExportFormat::csv));

    SimConfig l1 = loss_config(60, 31);
    SimConfig l3 = loss_config(60, 31);
    l3.threads = 3;
    REQUIRE(export_records(run_approx_loss(l1), ExportFormat::csv) ==
            export_records(run_approx_loss(l3), ExportFormat::csv));
  }
  SECTION("different seeds differ") {
    const SimSummary a = run_saturation_rate(rate_config(4000, 1));
    const SimSummary b = run_saturation_rate(rate_config(4000, 2));
    REQUIRE(export_records(a, ExportFormat::csv) != export_records(b, ExportFormat::csv));
  }
}

TEST_CASE("record export formats", "[simulation]") {
  SimConfig cfg = rate_config(3, 77);
  const SimSummary s = run_saturation_rate(cfg);
  SECTION("csv header and shape") {
    const std::string csv = export_records(s, ExportFormat::csv);
    REQUIRE(csv.rfind("draw,w1,w2,w3,w4,saturated\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
    REQUIRE(csv.find("0,") == csv.find("draw,w1,w2,w3,w4,saturated\n") + 27);
  }
  SECTION("json lines parse and match") {
    const std::string jsonl = export_records(s, ExportFormat::jsonl);
    REQUIRE(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
    REQUIRE(jsonl.find("\"draw\":0") != std::string::npos);
    REQUIRE(jsonl.find("\"saturated\":") != std::string::npos);
  }
  SECTION("loss records carry both criteria scales") {
    const SimSummary ls = run_approx_loss(loss_config(5, 41));
    const std::string csv = export_records(ls, ExportFormat::csv);
    REQUIRE(csv.rfind("draw,w1,w2,w3,w4,do_cuberoot,dstar_cuberoot,rel_loss,method\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 6);
  }
  SECTION("export requires retained records") {
    SimConfig cfg2 = rate_config(3, 77);
    cfg2.keep_records = false;
    const SimSummary s2 = run_saturation_rate(cfg2);
    REQUIRE_THROWS_AS(export_records(s2, ExportFormat::csv), std::invalid_argument);
  }
}
