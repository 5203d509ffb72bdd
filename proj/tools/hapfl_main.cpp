// Command-line front end: single runs, multi-seed sweeps, scenario files, and
// the self-check suites. Outputs are plain CSV/JSON; identical inputs produce
// byte-identical files.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hapfl/baselines.hpp"
#include "hapfl/channel.hpp"
#include "hapfl/exec.hpp"
#include "hapfl/fl.hpp"
#include "hapfl/metrics.hpp"
#include "hapfl/optimizer.hpp"
#include "hapfl/scenario.hpp"
#include "hapfl/verify.hpp"

namespace {

using hapfl::Exec;

struct RunConfig {
  int clients = 20;
  int rounds = 10;
  std::uint64_t seed = 1;
  std::string system = "ccra";
  double eta_cap = 0.95;
  double sigma2 = 1.0;
  double heterogeneity = 0.5;
  int dim = 8;
  int samples = 40;
  std::string loss = "ridge";
  double l2 = 0.1;
  double xi = 1.0;
  int select = 0;           // terr-ran-sel cohort size; 0 picks half the fleet
  int local_iters = -1;
  double epsilon_target = 0.0;
  int min_selected = -1;
  double tolerance = 1e-6;
  int l_max = 50;
  bool parallel = false;
  bool quiet = false;
  std::string out_dir = "out";
  std::string scenario_path;
};

std::string scenario_id(const hapfl::Scenario& s) {
  return "s" + std::to_string(s.seed) + "k" + std::to_string(s.client_count());
}

hapfl::Scenario resolve_scenario(const RunConfig& cfg, bool sigma2_set) {
  if (!cfg.scenario_path.empty()) {
    hapfl::Scenario s = hapfl::load_scenario(cfg.scenario_path);
    if (sigma2_set) s.params.displacement_variance_km2 = cfg.sigma2;
    return s;
  }
  hapfl::SystemParams p;
  p.displacement_variance_km2 = cfg.sigma2;
  return hapfl::generate_scenario(cfg.seed, cfg.clients, p);
}

hapfl::LossModel resolve_model(const RunConfig& cfg, const hapfl::Scenario& s) {
  const hapfl::LossKind kind =
      cfg.loss == "logistic" ? hapfl::LossKind::Logistic : hapfl::LossKind::Ridge;
  if (cfg.loss != "ridge" && cfg.loss != "logistic") {
    throw std::invalid_argument("unknown loss '" + cfg.loss + "' (expected ridge or logistic)");
  }
  return hapfl::make_noniid_tasks(cfg.seed, s.client_count(), cfg.samples, cfg.dim,
                                  cfg.heterogeneity, kind, cfg.l2);
}

hapfl::RoundPlanner resolve_planner(const RunConfig& cfg, const hapfl::Scenario& s,
                                    const hapfl::FlDerived& der) {
  const hapfl::SystemKind kind = hapfl::system_from_string(cfg.system);
  const Exec exec = cfg.parallel ? Exec::Parallel : Exec::Serial;
  switch (kind) {
    case hapfl::SystemKind::Ccra: {
      hapfl::opt::SolverOptions o;
      o.eta_cap = cfg.eta_cap;
      o.iter_coeff = der.iter_coeff;
      o.min_selected = cfg.min_selected;
      o.max_cycles = cfg.l_max;
      o.tolerance = cfg.tolerance;
      o.exec = exec;
      return hapfl::plan_with_solver(o);
    }
    case hapfl::SystemKind::HapsNoSel:
      return hapfl::plan_with_haps_no_sel(der.iter_coeff, cfg.eta_cap);
    case hapfl::SystemKind::TerrNoSel:
      return hapfl::plan_with_terr_no_sel(der.iter_coeff, cfg.eta_cap);
    case hapfl::SystemKind::TerrRanSel: {
      const int count = cfg.select > 0 ? cfg.select : (s.client_count() + 1) / 2;
      return hapfl::plan_with_terr_ran_sel(der.iter_coeff, cfg.eta_cap, count, cfg.seed);
    }
  }
  throw std::logic_error("unhandled system kind");
}

nlohmann::ordered_json effective_config(const RunConfig& cfg, const hapfl::Scenario& s,
                                        const hapfl::FlDerived& der) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario_id(s);
  j["system"] = cfg.system;
  j["clients"] = s.client_count();
  j["rounds"] = cfg.rounds;
  j["seed"] = cfg.seed;
  j["eta_cap"] = cfg.eta_cap;
  j["sigma2_km2"] = s.params.displacement_variance_km2;
  j["heterogeneity"] = cfg.heterogeneity;
  j["dim"] = cfg.dim;
  j["samples"] = cfg.samples;
  j["loss"] = cfg.loss;
  j["l2"] = cfg.l2;
  j["xi"] = cfg.xi;
  j["local_iters"] = cfg.local_iters;
  j["epsilon_target"] = cfg.epsilon_target;
  j["min_selected"] = cfg.min_selected;
  j["tolerance"] = cfg.tolerance;
  j["l_max"] = cfg.l_max;
  j["smoothness"] = der.smoothness;
  j["strong_convexity"] = der.strong_convexity;
  j["step_size"] = der.step;
  j["iter_coeff"] = der.iter_coeff;
  j["parallel"] = cfg.parallel;
  return j;
}

int do_run(const RunConfig& cfg, bool sigma2_set) {
  const hapfl::Scenario scenario = resolve_scenario(cfg, sigma2_set);
  const hapfl::LossModel model = resolve_model(cfg, scenario);

  hapfl::FlParams params;
  params.xi = cfg.xi;
  params.eta = cfg.eta_cap;
  params.local_iters_override = cfg.local_iters;
  params.epsilon_target = cfg.epsilon_target;
  params.rounds = cfg.rounds;
  const hapfl::FlDerived der = hapfl::derive_fl(model, params);
  const hapfl::RoundPlanner planner = resolve_planner(cfg, scenario, der);

  const Exec exec = cfg.parallel ? Exec::Parallel : Exec::Serial;
  const hapfl::FlRun run = hapfl::run_training(scenario, model, params, planner, exec);

  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<hapfl::RunRecord> records =
      hapfl::records_from_run(scenario_id(scenario), cfg.system, cfg.seed, run);
  hapfl::write_csv(cfg.out_dir + "/rounds.csv", records);
  const hapfl::RunSummary summary = hapfl::summarize(records, run.reached_target);
  hapfl::write_text(cfg.out_dir + "/summary.json", hapfl::summary_to_json(summary));
  hapfl::write_text(cfg.out_dir + "/config.json",
                    effective_config(cfg, scenario, der).dump(2) + "\n");
  hapfl::save_scenario(scenario, cfg.out_dir + "/scenario.txt");

  if (!cfg.quiet) {
    std::cout << cfg.system << " " << scenario_id(scenario) << ": rounds=" << summary.rounds
              << " final_loss=" << hapfl::format_double(summary.final_loss)
              << " bound=" << hapfl::format_double(summary.final_bound)
              << " total_delay_s=" << hapfl::format_double(summary.total_delay_s)
              << (summary.reached_target ? " (target reached)" : "") << "\n";
  }
  return 0;
}

int do_sweep(const RunConfig& base, bool sigma2_set, const std::vector<int>& client_list,
             int seeds, const std::vector<std::string>& systems) {
  std::filesystem::create_directories(base.out_dir);
  std::vector<hapfl::RunRecord> all;
  nlohmann::ordered_json summaries = nlohmann::ordered_json::array();
  for (int clients : client_list) {
    for (int s = 0; s < seeds; ++s) {
      RunConfig cfg = base;
      cfg.clients = clients;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      const hapfl::Scenario scenario = resolve_scenario(cfg, sigma2_set);
      const hapfl::LossModel model = resolve_model(cfg, scenario);
      hapfl::FlParams params;
      params.xi = cfg.xi;
      params.eta = cfg.eta_cap;
      params.local_iters_override = cfg.local_iters;
      params.epsilon_target = cfg.epsilon_target;
      params.rounds = cfg.rounds;
      const hapfl::FlDerived der = hapfl::derive_fl(model, params);
      for (const std::string& system : systems) {
        cfg.system = system;
        const hapfl::RoundPlanner planner = resolve_planner(cfg, scenario, der);
        hapfl::FlRun run;
        try {
          run = hapfl::run_training(scenario, model, params, planner,
                                    cfg.parallel ? Exec::Parallel : Exec::Serial);
        } catch (const hapfl::opt::InfeasibleError& e) {
          // a cell the system cannot serve is a result, not a reason to lose
          // the rest of the grid
          nlohmann::ordered_json cell;
          cell["scenario"] = scenario_id(scenario);
          cell["system"] = system;
          cell["seed"] = cfg.seed;
          cell["infeasible"] = true;
          cell["reason"] = e.what();
          summaries.push_back(std::move(cell));
          if (!base.quiet) {
            std::cout << system << " " << scenario_id(scenario) << " infeasible: " << e.what()
                      << "\n";
          }
          continue;
        }
        const std::vector<hapfl::RunRecord> records =
            hapfl::records_from_run(scenario_id(scenario), system, cfg.seed, run);
        all.insert(all.end(), records.begin(), records.end());
        const hapfl::RunSummary sum = hapfl::summarize(records, run.reached_target);
        nlohmann::ordered_json entry =
            nlohmann::ordered_json::parse(hapfl::summary_to_json(sum));
        entry["infeasible"] = false;
        summaries.push_back(std::move(entry));
        if (!base.quiet) {
          std::cout << system << " " << scenario_id(scenario)
                    << " total_delay_s=" << hapfl::format_double(sum.total_delay_s)
                    << " final_loss=" << hapfl::format_double(sum.final_loss) << "\n";
        }
      }
    }
  }
  hapfl::write_csv(base.out_dir + "/sweep.csv", all);
  hapfl::write_text(base.out_dir + "/summaries.json", summaries.dump(2) + "\n");
  return 0;
}

int do_verify(bool quick) {
  int failures = 0;
  const auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
  };

  {
    const hapfl::BoundSuiteResult r =
        hapfl::run_bound_suite(quick ? 3 : 10, 10, 20, {5, 20}, {0.3, 0.7});
    std::ostringstream d;
    d << r.runs << " runs, " << r.rounds << " rounds, violations=" << r.violations
      << ", worst_margin=" << r.worst_margin << ", recursive_gap=" << r.max_recursive_gap;
    report("bound_domination", r.violations == 0, d.str());
    report("bound_recursion", r.max_recursive_gap < 1e-10, d.str());
  }
  {
    const hapfl::SolverSuiteResult r =
        hapfl::run_solver_suite(quick ? 20 : 100, {5, 50, 200}, 42);
    std::ostringstream d;
    d << r.scenarios << " scenarios, redraws=" << r.redraws
      << ", trace_violations=" << r.trace_violations << ", worst_kkt=" << r.worst_kkt;
    report("solver_descent", r.trace_violations == 0, d.str());
    report("solver_stationarity", r.worst_kkt < 1e-6, d.str());
  }
  {
    const hapfl::BruteSuiteResult r = hapfl::run_brute_suite(quick ? 3 : 10, 7);
    std::ostringstream d;
    d << r.cases << " cases, worst_ratio=" << r.worst_ratio;
    report("brute_force_delay", r.worst_ratio <= 1.05, d.str());
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated training over a stratospheric platform: simulator and solvers"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<int> sweep_clients{10, 50};
  int sweep_seeds = 3;
  std::vector<std::string> sweep_systems{"ccra", "haps-no-sel", "terr-no-sel", "terr-ran-sel"};
  bool verify_quick = false;
  std::string scen_out = "scenario.txt";

  const auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--rounds", cfg.rounds, "training rounds")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "base seed");
    sub->add_option("--eta-cap", cfg.eta_cap, "local accuracy cap in (0,1]");
    sub->add_option("--sigma2", cfg.sigma2, "platform displacement variance (km^2)");
    sub->add_option("--heterogeneity", cfg.heterogeneity, "cross-client task shift");
    sub->add_option("--dim", cfg.dim, "model dimension")->check(CLI::PositiveNumber);
    sub->add_option("--samples", cfg.samples, "samples per client")->check(CLI::PositiveNumber);
    sub->add_option("--loss", cfg.loss, "ridge or logistic");
    sub->add_option("--l2", cfg.l2, "l2 regularization");
    sub->add_option("--xi", cfg.xi, "gradient-correction weight");
    sub->add_option("--select", cfg.select, "terr-ran-sel cohort size (0 = half)");
    sub->add_option("--local-iters", cfg.local_iters, "forced local step count (-1 = from eta)");
    sub->add_option("--epsilon-target", cfg.epsilon_target, "stop once the bound is below");
    sub->add_option("--min-selected", cfg.min_selected,
                    "participation floor (-1 = half the fleet)");
    sub->add_option("--tolerance", cfg.tolerance, "solver convergence tolerance");
    sub->add_option("--l-max", cfg.l_max, "max solver cycles")->check(CLI::PositiveNumber);
    sub->add_flag("--parallel", cfg.parallel, "run the data-parallel kernels with OpenMP");
    sub->add_flag("--quiet", cfg.quiet, "suppress the per-run summary line");
    sub->add_option("--out", cfg.out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "single training run");
  run->add_option("--clients", cfg.clients, "fleet size")->check(CLI::PositiveNumber);
  run->add_option("--system", cfg.system, "ccra, haps-no-sel, terr-no-sel or terr-ran-sel");
  run->add_option("--scenario", cfg.scenario_path, "load a saved scenario instead of generating");
  add_shared(run);

  CLI::App* sweep = app.add_subcommand("sweep", "fleet sizes x seeds x systems");
  sweep->add_option("--clients", sweep_clients, "fleet sizes")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds per fleet size")->check(CLI::PositiveNumber);
  sweep->add_option("--systems", sweep_systems, "systems to compare")->delimiter(',');
  add_shared(sweep);

  CLI::App* verify = app.add_subcommand("verify", "run the self-check suites");
  verify->add_flag("--quick", verify_quick, "reduced case counts");

  CLI::App* scen = app.add_subcommand("scenario", "generate and save a scenario file");
  scen->add_option("--clients", cfg.clients, "fleet size")->check(CLI::PositiveNumber);
  scen->add_option("--seed", cfg.seed, "scenario seed");
  scen->add_option("--sigma2", cfg.sigma2, "platform displacement variance (km^2)");
  scen->add_option("--out", scen_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return do_run(cfg, run->count("--sigma2") > 0);
    if (sweep->parsed()) {
      return do_sweep(cfg, sweep->count("--sigma2") > 0, sweep_clients, sweep_seeds,
                      sweep_systems);
    }
    if (verify->parsed()) return do_verify(verify_quick);
    if (scen->parsed()) {
      hapfl::SystemParams p;
      p.displacement_variance_km2 = cfg.sigma2;
      hapfl::save_scenario(hapfl::generate_scenario(cfg.seed, cfg.clients, p), scen_out);
      std::cout << "wrote " << scen_out << "\n";
      return 0;
    }
  } catch (const hapfl::opt::InfeasibleError& e) {
    std::cerr << "infeasible configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
