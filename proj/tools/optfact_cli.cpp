// Command-line front end: solvers, condition checks, robustness reports,
// boundary curves, and Monte Carlo experiments with machine-readable output.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "optfact/optfact.hpp"

namespace {

using nlohmann::json;
using namespace optfact;

constexpr const char* kPointOrderHelp =
    "Design points are enumerated by the binary expansion of the point index: "
    "factor 1 is the most significant bit, bit value 0 maps to level +1 and 1 to "
    "level -1. For k=2 the order is (+,+), (+,-), (-,+), (-,-).";

constexpr const char* kLinkHelp =
    "Links: logit mu=1/(1+e^-eta); probit mu=Phi(eta); "
    "loglog mu=exp(-exp(-eta)); cloglog mu=1-exp(-exp(eta)).";

struct GlobalOpts {
  std::string format = "json";
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

void print_error(const std::string& type, const std::string& message) {
  json j{{"error", message}, {"type", type}};
  std::cerr << j.dump() << "\n";
}

Vec4 require_vec4(const std::vector<double>& x, const char* what) { return to_vec4(x, what); }

json solve_result_json(const SolveResult& r, const std::optional<Vec4>& w) {
  json j;
  j["design"] = r.design;
  j["L"] = r.L_value;
  j["det"] = r.det_value;
  j["method"] = std::string(to_string(r.method));
  if (r.error_bound) j["error_bound"] = *r.error_bound;
  if (r.certificate) {
    const Certificate& c = *r.certificate;
    json jc{{"stationarity_residual", c.stationarity_residual},
            {"grid_gap", c.grid_gap},
            {"grid_step", c.grid_step},
            {"certified", c.certified}};
    if (!c.note.empty()) jc["note"] = c.note;
    j["certificate"] = jc;
  }
  if (w) {
    j["w"] = *w;
    bool positive = true;
    for (double wi : *w) positive = positive && wi > 0.0;
    if (positive) j["v"] = Vec4{1.0 / (*w)[0], 1.0 / (*w)[1], 1.0 / (*w)[2], 1.0 / (*w)[3]};
  }
  return j;
}

struct InputMode {
  std::vector<double> w;
  std::vector<double> v;
  std::string link;
  std::vector<double> beta;

  /// Resolves --w / --v / --link+--beta into a weight vector; exactly one
  /// input mode must be present.
  Vec4 resolve_w() const {
    const int modes = (!w.empty() ? 1 : 0) + (!v.empty() ? 1 : 0) + (!beta.empty() ? 1 : 0);
    if (modes != 1)
      throw std::invalid_argument("provide exactly one of --w, --v, or --link with --beta");
    if (!w.empty()) return require_vec4(w, "--w");
    if (!v.empty()) {
      const Vec4 vv = require_vec4(v, "--v");
      for (double vi : vv)
        if (!(vi > 0.0)) throw std::invalid_argument("--v entries must be positive");
      return {1.0 / vv[0], 1.0 / vv[1], 1.0 / vv[2], 1.0 / vv[3]};
    }
    if (link.empty()) throw std::invalid_argument("--beta requires --link");
    const WeightVector wv = weights_for_design(parse_link(link), beta, ModelSpec::main_effects(2));
    return require_vec4(wv, "weights");
  }
};

int cmd_weights(const GlobalOpts& g, const std::string& link, const std::vector<double>& beta,
                int k_flag) {
  if (g.format != "json") throw std::invalid_argument("weights: only --format json is supported");
  const int k = k_flag > 0 ? k_flag : static_cast<int>(beta.size()) - 1;
  const ModelSpec model = ModelSpec::main_effects(k);
  const LinkKind lk = parse_link(link);
  const WeightVector w = weights_for_design(lk, beta, model);
  json j;
  j["link"] = std::string(to_string(lk));
  j["beta"] = beta;
  j["k"] = k;
  j["eta"] = linear_predictors(beta, model);
  j["w"] = w;
  print_json(j);
  return 0;
}

int cmd_solve(const GlobalOpts& g, const InputMode& in, const SolveOptions& opts,
              const std::string& revalidate_path) {
  if (g.format != "json") throw std::invalid_argument("solve: only --format json is supported");
  if (!revalidate_path.empty()) {
    std::ifstream f(revalidate_path);
    if (!f) throw std::invalid_argument("solve: cannot open " + revalidate_path);
    json j = json::parse(f);
    if (!j.contains("v") || j["L"].is_null())
      throw std::invalid_argument("solve: file lacks a finite L and v to revalidate");
    const Vec4 v = require_vec4(j["v"].get<std::vector<double>>(), "v");
    const Vec4 p = require_vec4(j["design"].get<std::vector<double>>(), "design");
    const double reported = j["L"].get<double>();
    const double recomputed = objective_L(v, p);
    const double rel = std::abs(recomputed - reported) / std::max(1e-300, std::abs(reported));
    json out{{"l_reported", reported},
             {"l_recomputed", recomputed},
             {"rel_diff", rel},
             {"ok", rel <= 1e-12}};
    print_json(out);
    return rel <= 1e-12 ? 0 : 2;
  }
  const Vec4 w = in.resolve_w();
  const SolveResult r = solve(w, opts);
  print_json(solve_result_json(r, w));
  if (r.certificate && !r.certificate->certified) {
    print_error("certification", "numeric solve could not be certified");
    return 3;
  }
  return 0;
}

int cmd_saturation(const GlobalOpts& g, const InputMode& in) {
  if (g.format != "json") throw std::invalid_argument("saturation: only --format json is supported");
  json j;
  SaturationReport rep;
  if (!in.beta.empty()) {
    if (in.link.empty()) throw std::invalid_argument("--beta requires --link");
    const LinkKind lk = parse_link(in.link);
    if (lk == LinkKind::logit) {
      rep = saturation_condition_beta(in.beta);
      j["beta"] = in.beta;
      if (rep.beta_thresholds) {
        j["beta_thresholds"] = {{"beta1", (*rep.beta_thresholds)[0]},
                                {"beta2", (*rep.beta_thresholds)[1]}};
      }
    } else {
      // No closed-form thresholds outside the logit link; evaluate the
      // weight-space condition at the implied weights.
      const WeightVector wv = weights_for_design(lk, in.beta, ModelSpec::main_effects(2));
      rep = saturation_condition_w(require_vec4(wv, "weights"));
      j["beta"] = in.beta;
      j["w"] = wv;
    }
    j["link"] = in.link;
  } else {
    InputMode copy = in;
    const Vec4 w = copy.resolve_w();
    rep = saturation_condition_w(w);
    j["w"] = w;
  }
  j["holds"] = rep.holds;
  j["margin"] = rep.margin;
  print_json(j);
  return 0;
}

int cmd_boundary(const GlobalOpts& g, double beta0, std::vector<double> beta1_grid,
                 double b1_min, double b1_max, int b1_count) {
  if (beta1_grid.empty()) {
    if (!(b1_count >= 2) || !(b1_max > b1_min))
      throw std::invalid_argument("boundary: provide --beta1 or a valid --beta1-min/max/count range");
    for (int i = 0; i < b1_count; ++i)
      beta1_grid.push_back(b1_min + (b1_max - b1_min) * i / (b1_count - 1));
  }
  const auto pts = figure1_boundary(beta0, beta1_grid);
  if (g.format == "csv") {
    std::cout << "beta1_abs,beta2_threshold,feasible\n";
    for (const auto& pt : pts) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%d\n", pt.beta1_abs, pt.beta2_threshold,
                    pt.feasible ? 1 : 0);
      std::cout << buf;
    }
    return 0;
  }
  json arr = json::array();
  for (const auto& pt : pts)
    arr.push_back(json{{"beta1_abs", pt.beta1_abs},
                       {"beta2_threshold", pt.beta2_threshold},
                       {"feasible", pt.feasible}});
  print_json(json{{"beta0", beta0}, {"points", arr}});
  return 0;
}

int cmd_robustness(const GlobalOpts& g, const std::vector<double>& w, const std::string& regime,
                   double a, double b) {
  if (g.format != "json") throw std::invalid_argument("robustness: only --format json is supported");
  if (!w.empty()) {
    if (w.size() == 4) {
      const EfficiencyReport rep = uniform_loss_22(require_vec4(w, "--w"));
      json j{{"r_u", rep.r_u},
             {"d_uniform", rep.d_uniform},
             {"d_optimal", rep.d_optimal},
             {"w_min", rep.w_min},
             {"w_max", rep.w_max},
             {"a", rep.a},
             {"b", rep.b},
             {"efficiency_bound", rep.efficiency_bound},
             {"method", std::string(to_string(rep.method))}};
      print_json(j);
    } else {
      // No exact optimum beyond k = 2; report the model-independent bound.
      json j{{"efficiency_bound", uniform_efficiency_bound(w)},
             {"note", "exact loss available for 2^2 only; value is the 1 - w_min/w_max bound"}};
      print_json(j);
    }
    return 0;
  }
  if (regime.empty()) throw std::invalid_argument("robustness: provide --w or --regime with --a/--b");
  const double r = max_uniform_loss(a, b, parse_regime(regime));
  print_json(json{{"r_max", r}, {"regime", regime}, {"a", a}, {"b", b}});
  return 0;
}

ModelSpec parse_model(int k, const std::string& model_name, const std::vector<std::string>& effects) {
  if (!effects.empty()) {
    ModelSpec m;
    m.k = k;
    for (const std::string& tok : effects) {
      std::vector<int> eff;
      if (tok != "I" && tok != "i") {
        for (char c : tok) {
          if (c < '1' || c > '9') throw std::invalid_argument("bad effect token: " + tok);
          eff.push_back(c - '0');
        }
      }
      m.effects.push_back(eff);
    }
    m.validate();
    return m;
  }
  if (model_name == "full") return ModelSpec::full_factorial(k);
  if (model_name == "main") return ModelSpec::main_effects(k);
  throw std::invalid_argument("unknown model: " + model_name);
}

int cmd_maximin(const GlobalOpts& g, int k, const std::string& model_name,
                const std::vector<std::string>& effects, const std::vector<double>& w,
                std::vector<double> p) {
  if (g.format != "json") throw std::invalid_argument("maximin: only --format json is supported");
  const ModelSpec model = parse_model(k, model_name, effects);
  if (p.empty()) p.assign(static_cast<std::size_t>(model.n_points()), 1.0 / model.n_points());
  const double bound = maximin_lower_bound(model, w, p);
  const double det = det_criterion(model, w, p);
  json jm = json::array();
  for (const auto& eff : model.effects) jm.push_back(eff);
  print_json(json{{"bound", bound},
                  {"det", det},
                  {"k", model.k},
                  {"q", model.n_terms()},
                  {"effects", jm},
                  {"p", p}});
  return 0;
}

json summary_json(const SimSummary& s) {
  json j;
  j["experiment"] = std::string(to_string(s.experiment));
  j["n_draws"] = s.n_draws;
  j["seed"] = s.seed;
  j["rng"] = s.rng_algorithm;
  if (s.link)
    j["link"] = std::string(to_string(*s.link));
  else {
    j["w_low"] = s.w_low;
    j["w_high"] = s.w_high;
  }
  if (s.experiment == Experiment::saturation_rate) {
    j["n_saturated"] = s.n_saturated;
    j["rate"] = s.saturation_rate;
  } else {
    j["max_rel_loss"] = s.max_rel_loss;
    j["frac_below_0.0003"] = s.frac_below_3e4;
    j["loss_q50"] = s.loss_q50;
    j["loss_q90"] = s.loss_q90;
    j["loss_q99"] = s.loss_q99;
    j["optimizer"] = s.optimizer_note;
  }
  return j;
}

int cmd_simulate(const GlobalOpts& g, const SimConfig& cfg, bool records) {
  const SimSummary s = run(cfg);
  if (records) {
    const ExportFormat fmt = g.format == "csv" ? ExportFormat::csv : ExportFormat::jsonl;
    std::cout << export_records(s, fmt);
    return 0;
  }
  if (g.format != "json")
    throw std::invalid_argument("simulate: --format csv requires --records");
  print_json(summary_json(s));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      std::string("optfact: locally D-optimal allocations for two-level factorial "
                  "experiments with binary response.\n") +
      kPointOrderHelp + "\n" + kLinkHelp};
  app.fallthrough();
  app.set_config("--config", "", "key=value lines mirroring long flags; flags take precedence");

  GlobalOpts g;
  app.add_option("--format", g.format, "output format: json (default) or csv where tabular")
      ->envname("OPTFACT_FORMAT")
      ->check(CLI::IsMember({"json", "csv"}));

  // weights
  auto* c_weights = app.add_subcommand(
      "weights", std::string("GLM weights w_i = (dmu/deta)^2 / (mu(1-mu)) at every design point "
                             "of a main-effects model. ") + kLinkHelp);
  std::string w_link;
  std::vector<double> w_beta;
  int w_k = 0;
  c_weights->add_option("--link", w_link, "link function")->required();
  c_weights->add_option("--beta", w_beta, "coefficients b0,b1,...,bk")->required()->delimiter(',');
  c_weights->add_option("--k", w_k, "number of factors (default: beta length - 1)");

  // solve
  auto* c_solve = app.add_subcommand(
      "solve", "D-optimal allocation for the 2^2 main-effects model: closed forms for the "
               "saturated and tied-variance cases, certified numeric search otherwise.");
  InputMode s_in;
  SolveOptions s_opts;
  std::string s_revalidate;
  c_solve->add_option("--w", s_in.w, "four weights w1,w2,w3,w4")->delimiter(',');
  c_solve->add_option("--v", s_in.v, "four variances v1,v2,v3,v4 (v_i = 1/w_i)")->delimiter(',');
  c_solve->add_option("--link", s_in.link, "link function (with --beta)");
  c_solve->add_option("--beta", s_in.beta, "coefficients b0,b1,b2 (with --link)")->delimiter(',');
  c_solve->add_option("--tol", s_opts.tol, "certification gap target")->capture_default_str();
  c_solve->add_option("--grid-step", s_opts.grid_step, "certification scan pitch")
      ->capture_default_str();
  c_solve->add_option("--threads", s_opts.threads, "scan worker count")->capture_default_str();
  c_solve->add_flag("--no-certify{false}", s_opts.certify, "skip the certification scan");
  c_solve->add_option("--revalidate", s_revalidate,
                      "recompute L for a previously emitted JSON result and compare");

  // saturation
  auto* c_sat = app.add_subcommand(
      "saturation", "Saturation condition 2 max v_i >= sum v_i deciding whether the optimum is "
                    "the three-point design; closed-form |b1|,|b2| thresholds for the logit link.");
  InputMode sat_in;
  c_sat->add_option("--w", sat_in.w, "four weights")->delimiter(',');
  c_sat->add_option("--v", sat_in.v, "four variances")->delimiter(',');
  c_sat->add_option("--link", sat_in.link, "link function (with --beta)");
  c_sat->add_option("--beta", sat_in.beta, "coefficients b0,b1,b2")->delimiter(',');

  // boundary
  auto* c_bound = app.add_subcommand(
      "boundary", "Lower |b2| boundary of the logit saturation region over a grid of |b1| "
                  "values for fixed b0; grid points at or below the |b1| threshold are "
                  "flagged infeasible.");
  double b_beta0 = 1.0;
  std::vector<double> b_grid;
  double b_min = 0.0, b_max = 0.0;
  int b_count = 0;
  c_bound->add_option("--beta0", b_beta0, "fixed b0 > 0")->required();
  c_bound->add_option("--beta1", b_grid, "explicit |b1| grid values")->delimiter(',');
  c_bound->add_option("--beta1-min", b_min, "grid start");
  c_bound->add_option("--beta1-max", b_max, "grid end");
  c_bound->add_option("--beta1-count", b_count, "grid size");

  // robustness
  auto* c_rob = app.add_subcommand(
      "robustness", "Efficiency of the uniform design: exact relative loss at given 2^2 weights, "
                    "or the worst-case loss over a <= v_i <= b (saturated regime "
                    "1 - (3/4)(1+3a/b)^{1/3}, unsaturated 1 - (3/4)2^{1/3}).");
  std::vector<double> r_w;
  std::string r_regime;
  double r_a = 0.0, r_b = 0.0;
  c_rob->add_option("--w", r_w, "weights (4 for the exact 2^2 report)")->delimiter(',');
  c_rob->add_option("--regime", r_regime, "saturated | unsaturated");
  c_rob->add_option("--a", r_a, "lower variance bound");
  c_rob->add_option("--b", r_b, "upper variance bound");

  // maximin
  auto* c_max = app.add_subcommand(
      "maximin", "Lower bound 2^{k 2^k} prod(w_i p_i) / w_max^{2^k-q} on the D-criterion of a "
                 "2^k model; the uniform design maximizes it.");
  int m_k = 2;
  std::string m_model = "main";
  std::vector<std::string> m_effects;
  std::vector<double> m_w, m_p;
  c_max->add_option("--k", m_k, "number of factors")->required();
  c_max->add_option("--model", m_model, "main | full")->capture_default_str();
  c_max->add_option("--effects", m_effects,
                    "explicit effect tokens, e.g. I,1,2,12 (I = intercept)")
      ->delimiter(',');
  c_max->add_option("--w", m_w, "2^k weights")->required()->delimiter(',');
  c_max->add_option("--p", m_p, "2^k proportions (default: uniform)")->delimiter(',');

  // simulate
  auto* c_sim = app.add_subcommand(
      "simulate", "Monte Carlo experiments over random weight draws: saturation-rate frequency "
                  "and the relative loss of the analytic solution against a certified numeric "
                  "optimum. Reproducible from (seed, draw index) via splitmix64 substreams.");
  SimConfig sim_cfg;
  std::string sim_exp = "saturation-rate";
  std::string sim_link;
  bool sim_records = false;
  bool sim_wlow_set = false, sim_whigh_set = false;
  c_sim->add_option("--experiment", sim_exp, "saturation-rate | approx-loss")->required();
  c_sim->add_option("--n", sim_cfg.n_draws, "number of draws")->capture_default_str();
  c_sim->add_option("--seed", sim_cfg.seed, "stream seed")->capture_default_str();
  c_sim->add_option("--w-low", sim_cfg.w_low, "lower weight bound (defaults: 0 or 0.05)")
      ->each([&](const std::string&) { sim_wlow_set = true; });
  c_sim->add_option("--w-high", sim_cfg.w_high, "upper weight bound (defaults: 0.25)")
      ->each([&](const std::string&) { sim_whigh_set = true; });
  c_sim->add_option("--link", sim_link, "draw coefficients and map through this link");
  c_sim->add_option("--beta-range", sim_cfg.beta_range, "coefficient box half-width")
      ->capture_default_str();
  c_sim->add_flag("--records", sim_records, "stream per-draw records (csv or json lines)");
  c_sim->add_option("--threads", sim_cfg.threads, "worker count (results identical)")
      ->capture_default_str();
  c_sim->add_option("--tol", sim_cfg.solver.tol, "numeric certification gap target")
      ->capture_default_str();
  c_sim->add_option("--grid-step", sim_cfg.solver.grid_step, "numeric certification scan pitch")
      ->capture_default_str();

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.get_subcommands().empty()) {
    std::cerr << app.help() << "\n";
    return 2;
  }

  try {
    if (c_weights->parsed()) return cmd_weights(g, w_link, w_beta, w_k);
    if (c_solve->parsed()) return cmd_solve(g, s_in, s_opts, s_revalidate);
    if (c_sat->parsed()) return cmd_saturation(g, sat_in);
    if (c_bound->parsed()) return cmd_boundary(g, b_beta0, b_grid, b_min, b_max, b_count);
    if (c_rob->parsed()) return cmd_robustness(g, r_w, r_regime, r_a, r_b);
    if (c_max->parsed()) return cmd_maximin(g, m_k, m_model, m_effects, m_w, m_p);
    if (c_sim->parsed()) {
      sim_cfg.experiment = parse_experiment(sim_exp);
      if (!sim_link.empty()) sim_cfg.link = parse_link(sim_link);
      if (sim_cfg.experiment == Experiment::approx_loss && !sim_wlow_set) sim_cfg.w_low = 0.05;
      if (sim_cfg.experiment == Experiment::approx_loss && !sim_whigh_set) sim_cfg.w_high = 0.25;
      sim_cfg.keep_records = true;
      return cmd_simulate(g, sim_cfg, sim_records);
    }
  } catch (const CertificationError& e) {
    print_error("certification", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    print_error("validation", e.what());
    return 2;
  } catch (const json::exception& e) {
    print_error("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 2;
}
