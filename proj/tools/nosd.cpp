// nosd: robust frequentist and Bayesian inference for nondestructive
// one-shot device test data under two competing risks.
//
// One JSON config file drives every subcommand; --seed/--out/--gamma/
// --preset override the corresponding config fields.  Machine output is
// full-precision JSON (plus CSV for plot data); a 6-decimal table is
// printed for humans.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "nosd/data.hpp"
#include "nosd/divergence.hpp"
#include "nosd/fit.hpp"
#include "nosd/hmc.hpp"
#include "nosd/influence.hpp"
#include "nosd/io.hpp"
#include "nosd/prior.hpp"
#include "nosd/testing.hpp"

namespace fs = std::filesystem;
using nosd::json;

namespace {

struct RunConfig {
  nosd::TestPlan plan;
  std::optional<nosd::FailureCounts> counts;
  std::optional<nosd::ModelParams> params;  // generating/true parameters
  std::optional<nosd::ModelParams> init;
  std::vector<double> gammas = {0.2, 0.4, 0.6, 0.8, 1.0};
  nosd::PriorSpec prior;
  nosd::HmcConfig hmc;
  nosd::HypothesisSpec hypothesis;
  int n_boot = 500;
  std::uint64_t seed = 1;
  std::string out = "results";
  double ci_level = 0.95;
  bool save_chains = false;
  std::vector<double> tune_grid;
  double tune_c1 = 0.5, tune_c2 = 0.5;
};

nosd::ModelParams params_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 4)
    throw nosd::ConfigError(ctx + ": expected an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json params_to_json(const nosd::ModelParams& p) {
  return json::array({p.a1, p.b1, p.a2, p.b2});
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  if (j.contains("preset")) {
    const std::string name = j.at("preset").get<std::string>();
    if (name == "sim1") {
      cfg.plan = nosd::sim1_plan();
      cfg.params = nosd::sim1_truth();
    } else if (name == "sim2") {
      cfg.plan = nosd::sim2_plan();
      cfg.params = nosd::sim2_truth();
    } else {
      auto [plan, counts] = nosd::named_fixture(name);
      cfg.plan = plan;
      cfg.counts = counts;
    }
  }
  if (j.contains("plan")) cfg.plan = nosd::plan_from_json(j.at("plan"));
  if (cfg.plan.groups.empty())
    throw nosd::ConfigError("config: needs either 'preset' or 'plan'");
  if (j.contains("counts")) cfg.counts = nosd::counts_from_json(j.at("counts"));
  if (j.contains("params")) cfg.params = params_from_json(j.at("params"), "config.params");
  if (j.contains("init")) cfg.init = params_from_json(j.at("init"), "config.init");
  if (j.contains("gamma")) {
    cfg.gammas = j.at("gamma").get<std::vector<double>>();
    if (cfg.gammas.empty()) throw nosd::ConfigError("config.gamma: empty list");
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.contains("kind")) {
      const std::string k = p.at("kind").get<std::string>();
      if (k == "normal")
        cfg.prior.kind = nosd::PriorKind::normal;
      else if (k == "dirichlet")
        cfg.prior.kind = nosd::PriorKind::dirichlet;
      else
        throw nosd::ConfigError("config.prior.kind: expected 'normal' or 'dirichlet'");
    }
    if (p.contains("sigma2_p")) cfg.prior.sigma2_p = p.at("sigma2_p").get<double>();
    if (p.contains("posterior_scale"))
      cfg.prior.posterior_scale = p.at("posterior_scale").get<double>();
  }
  if (j.contains("hmc")) {
    const auto& h = j.at("hmc");
    if (h.contains("step_size")) cfg.hmc.step_size = h.at("step_size").get<double>();
    if (h.contains("n_leapfrog")) cfg.hmc.n_leapfrog = h.at("n_leapfrog").get<int>();
    if (h.contains("n_samples")) cfg.hmc.n_samples = h.at("n_samples").get<int>();
    if (h.contains("burn_in")) cfg.hmc.burn_in = h.at("burn_in").get<int>();
    if (h.contains("n_chains")) cfg.hmc.n_chains = h.at("n_chains").get<int>();
    if (h.contains("mass_diag")) {
      const auto m = h.at("mass_diag").get<std::vector<double>>();
      if (m.size() != 4) throw nosd::ConfigError("config.hmc.mass_diag: expected 4 entries");
      for (int i = 0; i < 4; ++i) cfg.hmc.mass_diag[i] = m[i];
    }
    if (h.contains("seed")) cfg.hmc.seed = h.at("seed").get<std::uint64_t>();
  }
  if (j.contains("hypothesis")) {
    const auto& h = j.at("hypothesis");
    cfg.hypothesis.lambda0 = params_from_json(h.at("lambda0"), "config.hypothesis.lambda0");
    if (h.contains("radius")) cfg.hypothesis.radius = h.at("radius").get<double>();
    if (h.contains("rho0") && !h.at("rho0").is_null())
      cfg.hypothesis.rho0 = h.at("rho0").get<double>();
  }
  if (j.contains("bootstrap") && j.at("bootstrap").contains("n_boot"))
    cfg.n_boot = j.at("bootstrap").at("n_boot").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("ci_level")) cfg.ci_level = j.at("ci_level").get<double>();
  if (j.contains("save_chains")) cfg.save_chains = j.at("save_chains").get<bool>();
  if (j.contains("tune")) {
    const auto& t = j.at("tune");
    if (t.contains("grid")) cfg.tune_grid = t.at("grid").get<std::vector<double>>();
    if (t.contains("c1")) cfg.tune_c1 = t.at("c1").get<double>();
    if (t.contains("c2")) cfg.tune_c2 = t.at("c2").get<double>();
  }
  if (cfg.tune_grid.empty())
    for (int i = 2; i <= 20; ++i) cfg.tune_grid.push_back(0.05 * i);
  cfg.plan.validate();
  if (cfg.counts) cfg.counts->validate(cfg.plan);
  return cfg;
}

const nosd::FailureCounts& require_counts(const RunConfig& cfg) {
  if (!cfg.counts)
    throw nosd::ConfigError("config: this command needs 'counts' (or a data fixture preset)");
  return *cfg.counts;
}

void write_file(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string fmt6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

json chains_to_json(const nosd::PosteriorChains& chains) {
  json draws = json::array();
  for (const auto& chain : chains.draws) {
    json c = json::array();
    for (const auto& x : chain) c.push_back({x[0], x[1], x[2], x[3]});
    draws.push_back(std::move(c));
  }
  return {{"draws", draws},
          {"accept_rate", chains.accept_rate},
          {"rhat", chains.rhat}};
}

json interval_json(const nosd::Interval& iv) { return json::array({iv.lo, iv.hi}); }

// ---- subcommands ----------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
  if (!cfg.params)
    throw nosd::ConfigError("simulate: needs 'params' (or a preset with true values)");
  const auto counts = nosd::simulate_counts(*cfg.params, cfg.plan, cfg.seed);
  json out = {{"plan", nosd::plan_to_json(cfg.plan)},
              {"counts", nosd::counts_to_json(counts)},
              {"params", params_to_json(*cfg.params)},
              {"seed", cfg.seed}};
  write_json(fs::path(cfg.out) / "counts.json", out);
  std::cout << "wrote " << (fs::path(cfg.out) / "counts.json").string() << "\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  json rows = json::array();
  std::cout << "estimator  gamma   a1         b1         a2         b2\n";
  const auto report = [&](const nosd::FitResult& fr) {
    json row = {{"gamma", fr.gamma},
                {"estimator", fr.gamma == 0.0 ? "mle" : "wmdpde"},
                {"params", params_to_json(fr.params)},
                {"objective", fr.objective},
                {"iterations", fr.iterations},
                {"converged", fr.converged}};
    try {
      const auto sw = nosd::sandwich_covariance(fr.params, cfg.plan, fr.gamma);
      const auto ci = nosd::wald_ci(fr, sw, cfg.ci_level);
      json cis = json::array();
      for (const auto& iv : ci) cis.push_back(interval_json(iv));
      row["ci"] = cis;
      row["ci_level"] = cfg.ci_level;
      json cov = json::array();
      for (int r = 0; r < 4; ++r) {
        json line = json::array();
        for (int c = 0; c < 4; ++c) line.push_back(sw.cov(r, c));
        cov.push_back(line);
      }
      row["cov"] = cov;
    } catch (const std::exception& e) {
      row["cov_error"] = e.what();
    }
    rows.push_back(row);
    std::cout << (fr.gamma == 0.0 ? "mle     " : "wmdpde  ") << "  " << fmt6(fr.gamma)
              << "  " << fmt6(fr.params.a1) << "  " << fmt6(fr.params.b1) << "  "
              << fmt6(fr.params.a2) << "  " << fmt6(fr.params.b2) << "\n";
  };
  report(nosd::fit_mle(cfg.plan, counts, cfg.init));
  for (double g : cfg.gammas) report(nosd::fit_wmdpde(cfg.plan, counts, g, cfg.init));
  write_json(fs::path(cfg.out) / "fit.json", {{"results", rows}});
  return 0;
}

int cmd_bayes(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  json rows = json::array();
  std::cout << "prior      gamma   a1         b1         a2         b2       rhat_max\n";
  for (double g : cfg.gammas) {
    nosd::PseudoPosterior post(cfg.plan, counts, g, cfg.prior);
    const nosd::ModelParams start =
        cfg.init ? *cfg.init : nosd::fit_wmdpde(cfg.plan, counts, g).params;
    const auto chains = nosd::sample(
        [&](const nosd::ModelParams& p) { return post.value(p); },
        [&](const nosd::ModelParams& p) { return post.gradient(p); }, cfg.hmc, start);
    const auto est = nosd::posterior_mean(chains);
    const auto hpd = nosd::hpd_interval(chains, cfg.ci_level);
    json hj = json::array();
    for (const auto& iv : hpd) hj.push_back(interval_json(iv));
    json row = {{"gamma", g},
                {"prior", cfg.prior.kind == nosd::PriorKind::normal ? "normal" : "dirichlet"},
                {"posterior_scale", cfg.prior.posterior_scale},
                {"estimate", params_to_json(est)},
                {"hpd", hj},
                {"hpd_level", cfg.ci_level},
                {"accept_rate", chains.accept_rate},
                {"rhat", chains.rhat},
                {"init", params_to_json(start)}};
    if (chains.low_acceptance) row["warning"] = "acceptance rate below 1%";
    if (cfg.save_chains) row["chains"] = chains_to_json(chains);
    rows.push_back(row);
    const double rmax = std::max({chains.rhat[0], chains.rhat[1], chains.rhat[2], chains.rhat[3]});
    std::cout << (cfg.prior.kind == nosd::PriorKind::normal ? "normal  " : "dirichlet")
              << "  " << fmt6(g) << "  " << fmt6(est.a1) << "  " << fmt6(est.b1) << "  "
              << fmt6(est.a2) << "  " << fmt6(est.b2) << "  " << fmt6(rmax) << "\n";
  }
  write_json(fs::path(cfg.out) / "bayes.json", {{"results", rows}});
  return 0;
}

int cmd_bf(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  if (!(cfg.hypothesis.radius > 0.0))
    throw nosd::ConfigError("bf: config needs 'hypothesis' with lambda0 and radius");
  json rows = json::array();
  std::cout << "gamma   prior_odds  posterior_odds  BF01        category\n";
  for (double g : cfg.gammas) {
    nosd::HmcConfig mc = cfg.hmc;
    mc.seed = cfg.hmc.seed;
    const auto r = nosd::bayes_factor(cfg.plan, counts, g, cfg.prior, cfg.hypothesis, mc);
    rows.push_back({{"gamma", g},
                    {"prior_odds", r.prior_odds},
                    {"posterior_odds", r.posterior_odds},
                    {"bf01", r.bf01},
                    {"category", r.category}});
    std::cout << fmt6(g) << "  " << fmt6(r.prior_odds) << "  " << fmt6(r.posterior_odds)
              << "  " << fmt6(r.bf01) << "  " << r.category << "\n";
  }
  write_json(fs::path(cfg.out) / "bf.json", {{"results", rows}});
  return 0;
}

int cmd_gof(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  const auto r = nosd::gof_bootstrap(cfg.plan, counts, cfg.n_boot, cfg.seed, cfg.init);
  json out = {{"t_obs", r.t_obs},
              {"p_value", r.p_value},
              {"n_boot", r.n_boot},
              {"n_failed", r.n_failed},
              {"mle", params_to_json(r.mle.params)}};
  write_json(fs::path(cfg.out) / "gof.json", out);
  std::cout << "T = " << fmt6(r.t_obs) << ", p = " << fmt6(r.p_value) << " ("
            << r.n_boot - r.n_failed << " replicates)\n";
  return 0;
}

int cmd_if(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  const auto grid = nosd::default_time_grid(cfg.plan);
  std::vector<nosd::IfCurve> curves;
  for (double g : cfg.gammas) {
    const auto fit = nosd::fit_wmdpde(cfg.plan, counts, g, cfg.init);
    curves.push_back(nosd::if_curve_wmdpde(fit.params, cfg.plan, g, 1, grid));
    nosd::PseudoPosterior post(cfg.plan, counts, g, cfg.prior);
    const auto chains = nosd::sample(
        [&](const nosd::ModelParams& p) { return post.value(p); },
        [&](const nosd::ModelParams& p) { return post.gradient(p); }, cfg.hmc, fit.params);
    curves.push_back(nosd::if_curve_wrbe(chains, cfg.plan, g, 1, grid));
  }
  std::ostringstream csv;
  nosd::write_if_csv(csv, curves);
  write_file(fs::path(cfg.out) / "if.csv", csv.str());
  std::cout << "wrote " << (fs::path(cfg.out) / "if.csv").string() << " (" << curves.size()
            << " curves)\n";
  return 0;
}

int cmd_tune(const RunConfig& cfg) {
  const auto& counts = require_counts(cfg);
  const auto r = nosd::select_tuning(cfg.plan, counts, cfg.tune_grid, cfg.tune_c1, cfg.tune_c2);
  json rows = json::array();
  std::ostringstream csv;
  csv << "gamma,phi,dpd,trace,ok\n";
  std::cout << "gamma   Phi\n";
  for (const auto& row : r.rows) {
    rows.push_back({{"gamma", row.gamma},
                    {"ok", row.ok},
                    {"phi", row.phi},
                    {"dpd", row.dpd},
                    {"trace", row.trace},
                    {"params", params_to_json(row.fit)},
                    {"note", row.note}});
    csv << row.gamma << ',' << row.phi << ',' << row.dpd << ',' << row.trace << ','
        << (row.ok ? 1 : 0) << "\n";
    std::cout << fmt6(row.gamma) << "  "
              << (row.ok ? fmt6(row.phi) : ("skipped: " + row.note)) << "\n";
  }
  write_json(fs::path(cfg.out) / "tune.json",
             {{"gamma_star", r.gamma_star}, {"rows", rows}});
  write_file(fs::path(cfg.out) / "tune.csv", csv.str());
  std::cout << "gamma* = " << fmt6(r.gamma_star) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust inference for nondestructive one-shot device test data"};
  app.require_subcommand(1);

  std::string config_path, out_override, preset_override;
  std::optional<std::uint64_t> seed_override;
  std::vector<double> gamma_override;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_override, "override config seed");
  app.add_option("--out", out_override, "override output directory");
  app.add_option("--gamma", gamma_override, "override gamma list")->delimiter(',');
  app.add_option("--preset", preset_override, "preset plan/fixture name");

  for (const char* name : {"simulate", "fit", "bayes", "bf", "gof", "if", "tune"})
    app.add_subcommand(name);

  CLI11_PARSE(app, argc, argv);

  try {
    json j = config_path.empty() ? json::object() : nosd::load_json_file(config_path);
    if (!preset_override.empty()) j["preset"] = preset_override;
    RunConfig cfg = parse_config(j);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.hmc.seed = *seed_override;
    }
    if (!out_override.empty()) cfg.out = out_override;
    if (!gamma_override.empty()) cfg.gammas = gamma_override;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "simulate") return cmd_simulate(cfg);
    if (cmd == "fit") return cmd_fit(cfg);
    if (cmd == "bayes") return cmd_bayes(cfg);
    if (cmd == "bf") return cmd_bf(cfg);
    if (cmd == "gof") return cmd_gof(cfg);
    if (cmd == "if") return cmd_if(cfg);
    if (cmd == "tune") return cmd_tune(cfg);
    std::cerr << "unknown command\n";
    return 2;
  } catch (const nosd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
