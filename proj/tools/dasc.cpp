// dasc: run, sweep and tune the damage-aware car-sensing simulation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dasc/experiments.hpp"
#include "dasc/report.hpp"

namespace fs = std::filesystem;
using namespace dasc;

namespace {

struct Overrides {
  std::string scheme = "DASC";
  std::string congestion = "contention";
};

void add_run_flags(CLI::App* app, RunConfig& c, Overrides& o) {
  app->add_option("--scheme", o.scheme, "DASC, DASC_no_MDP, SocialCar, Random, FixedRoute, ShortestDistance, "
                                        "ReputationBased or IncentiveBased");
  app->add_option("--seed", c.seed, "Run seed");
  app->add_option("--lambda1", c.utility.lambda1, "Proximity weight");
  app->add_option("--lambda2", c.utility.lambda2, "Urgency weight");
  app->add_option("--lambda3", c.utility.lambda3, "Uncertainty weight");
  app->add_option("--k", c.utility.k, "Congestion exponent");
  app->add_option("--gamma-floor", c.utility.epsilon, "Congestion rate floor");
  app->add_option("--congestion", o.congestion, "contention or literal");
  app->add_flag("--literal-factors", c.utility.literal_factors, "Raw distance and remaining time in the utility");
  app->add_option("--eta", c.eta, "Reputation coefficient");
  app->add_option("--kp", c.pid.kp, "PID proportional gain");
  app->add_option("--ki", c.pid.ki, "PID integral gain");
  app->add_option("--kd", c.pid.kd, "PID derivative gain");
  app->add_option("--set-point", c.pid.set_point, "Aggregate reputation set point");
  app->add_option("--r0", c.pid.initial_reward, "Initial task reward");
  app->add_option("--psi", c.psi, "Churn threshold (fraction of active tasks)");
  app->add_option("--kappa-default", c.kappa.fallback, "Kappa when the window correlation is undefined");
  app->add_option("--kappa-floor", c.kappa.floor, "Lower clamp of kappa");
  app->add_option("--kappa-window", c.kappa.window, "Correlation window length (cycles)");
  app->add_option("--x0", c.x0, "Initial accessibility index");
  app->add_option("--q", c.q_percent, "Percentage of willing cars sent as scouts");
  app->add_option("--scout-radius", c.scout_radius, "Scout observation radius (hops)");
  app->add_option("--k-routes", c.mdp.k_routes, "Routes enumerated per trip");
  app->add_option("--exploration-cycles", c.exploration_cycles, "Route exploration cycles (-1: a quarter of the run)");
  app->add_option("--mdp-epsilon", c.mdp.epsilon, "Exploration probability after the exploration cycles");
  app->add_option("--ec-threshold", c.ec_threshold, "Confidence at or above which events are concluded");
  app->add_option("--confidence-scale", c.confidence_scale, "Scale of |veracity - 0.5| in the confidence");
  app->add_option("--cycles", c.cycles, "Number of response cycles");
  app->add_option("--cycle-length", c.cycle_length_min, "Cycle length in minutes");
  app->add_option("--completers", c.completers, "Completer cars");
  app->add_option("--aborters", c.aborters, "Aborter cars");
  app->add_option("--refusers", c.refusers, "Refuser cars");
  app->add_option("--abort-probability", c.abort_probability, "Per-step abort probability of aborters");
}

void resolve(RunConfig& c, const Overrides& o) {
  c.scheme = parse_scheme(o.scheme);
  if (o.congestion == "contention")
    c.utility.congestion = CongestionForm::contention;
  else if (o.congestion == "literal")
    c.utility.congestion = CongestionForm::literal;
  else
    throw std::invalid_argument("--congestion must be 'contention' or 'literal'");
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DASC_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto dash = item.find('-');
    if (dash != std::string::npos) {
      auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("seed range '" + item + "' is empty");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(std::stoull(item));
    }
  }
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

int cmd_run(const std::string& scenario_path, RunConfig cfg, const std::string& out_flag) {
  auto sc = load_scenario(scenario_path);
  cfg.scenario_path = scenario_path;
  Simulation sim(sc, cfg);
  auto r = sim.run();
  const auto dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "metrics.json", metrics_json(sc.name, cfg, r).dump(2) + "\n");
  write_file(dir / "summary.csv", std::string(kSummaryCsvHeader) + "\n" + summary_csv_row(sc.name, cfg, r) + "\n");
  if (cfg.trace) {
    std::string lines;
    for (const auto& j : r.trace) lines += j.dump() + "\n";
    write_file(dir / "trace.jsonl", lines);
  }
  for (const auto& d : r.diagnostics) std::cerr << "note: " << d << "\n";
  const auto& c = r.metrics.confusion;
  std::cout << std::fixed << std::setprecision(4) << scheme_name(cfg.scheme) << " seed=" << cfg.seed
            << " accuracy=" << c.accuracy().value << " precision=" << c.precision().value
            << " recall=" << c.recall().value << " f1=" << c.f1().value
            << " deadline_hit_rate=" << r.metrics.deadlines.hit_rate().value << "\n";
  std::cout << "wrote " << (dir / "metrics.json").string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& scenario_path, const RunConfig& base, const std::string& schemes_text,
              const std::string& seeds_text, const std::string& cars_text, const std::string& aborters_text, int jobs,
              const std::string& out_flag) {
  auto sc = load_scenario(scenario_path);
  std::vector<Scheme> schemes;
  for (const auto& s : split(schemes_text)) schemes.push_back(parse_scheme(s));
  auto seeds = parse_seeds(seeds_text);
  std::vector<SweepPoint> points;
  if (!cars_text.empty()) {
    std::vector<int> sizes;
    for (const auto& item : split(cars_text)) sizes.push_back(std::stoi(item));
    points = fleet_size_points(sizes);
  }
  if (!aborters_text.empty()) {
    if (!points.empty()) throw std::invalid_argument("sweep one axis at a time (--cars or --aborter-fractions)");
    points = aborter_share_points(split(aborters_text), sc.fleet.total());
  }
  auto res = sweep(sc, base, schemes, seeds, points, jobs);
  std::ostringstream csv;
  csv << "point,scheme,seed,status,accuracy,precision,recall,f1,deadline_hit_rate\n";
  csv.precision(17);
  for (const auto& r : res.rows)
    csv << r.point << ',' << scheme_name(r.scheme) << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
        << r.confusion.accuracy().value << ',' << r.confusion.precision().value << ','
        << r.confusion.recall().value << ',' << r.f1() << ',' << r.hit_rate() << "\n";
  for (const auto& m : res.medians)
    csv << m.point << ',' << scheme_name(m.scheme) << ",median," << (m.failures ? "partial" : "ok") << ','
        << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.hit_rate << "\n";
  const auto dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "sweep.csv", csv.str());
  std::cout << std::left << std::setw(16) << "point" << std::setw(18) << "scheme" << std::setw(10) << "f1"
            << std::setw(10) << "accuracy" << std::setw(10) << "hit_rate" << "failures\n";
  for (const auto& m : res.medians)
    std::cout << std::left << std::setw(16) << (m.point.empty() ? "-" : m.point) << std::setw(18)
              << scheme_name(m.scheme) << std::fixed << std::setprecision(4) << std::setw(10) << m.f1
              << std::setw(10) << m.accuracy << std::setw(10) << m.hit_rate << m.failures << "\n";
  for (const auto& r : res.rows)
    if (!r.ok) std::cerr << "run " << scheme_name(r.scheme) << " seed " << r.seed << " failed: " << r.error << "\n";
  std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_tune(const std::string& scenario_path, const RunConfig& base, const std::string& seeds_text, int max_evals,
             int jobs, const std::string& out_flag) {
  auto sc = load_scenario(scenario_path);
  TuneConfig tc;
  tc.simplex.max_evaluations = max_evals;
  tc.jobs = jobs;
  if (!seeds_text.empty()) tc.seeds = parse_seeds(seeds_text);
  auto res = tune(sc, base, tc);
  nlohmann::ordered_json j;
  j["schema"] = "dasc-tune/1";
  j["horizon_cycles"] = res.horizon;
  nlohmann::ordered_json params;
  for (std::size_t i = 0; i < kTunedNames.size(); ++i) params[std::string(kTunedNames[i])] = res.values[i];
  j["parameters"] = params;
  j["f1"] = res.f1;
  j["default_f1"] = res.default_f1;
  j["evaluations"] = res.evaluations;
  j["converged"] = res.converged;
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& s : res.stages)
    stages.push_back({{"cycles", s.cycles},
                      {"retained_f1", s.retained_f1},
                      {"candidate_f1", s.candidate_f1},
                      {"accepted", s.accepted},
                      {"converged", s.converged}});
  j["stages"] = stages;
  const auto dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "tuned.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_tune_x0(const std::string& scenario_path, const RunConfig& base, double step) {
  auto sc = load_scenario(scenario_path);
  auto res = tune_x0(sc, base, step);
  for (auto [x0, err] : res.scan) std::cout << std::fixed << std::setprecision(2) << x0 << "  " << std::setprecision(6) << err << "\n";
  std::cout << "best x0 = " << std::setprecision(2) << res.x0 << " (mean |X - (1 - D)| = " << std::setprecision(6)
            << res.error << ")\n";
  return 0;
}

int cmd_validate(const std::string& scenario_path, std::uint64_t seed) {
  auto sc = load_scenario(scenario_path);
  auto w = materialize(sc, seed);
  for (const auto& e : w.events) e.validate(w.grid);
  std::size_t hazards = 0;
  for (std::size_t i = 0; i < w.damage.appear.size(); ++i)
    if (w.damage.appear[i] != sc.appear || w.damage.repair[i] != sc.repair) ++hazards;
  std::cout << "scenario '" << sc.name << "' is valid\n"
            << "  grid " << sc.grid.width() << "x" << sc.grid.height() << ", open cells " << sc.grid.open_cells().size()
            << ", road edges " << sc.grid.edge_count() << "\n"
            << "  cycles " << sc.cycles << " of " << sc.cycle_length_min << " min, " << sc.minutes_per_cell
            << " min per cell\n"
            << "  fleet " << sc.fleet.completers << " completers, " << sc.fleet.aborters << " aborters, "
            << sc.fleet.refusers << " refusers\n"
            << "  cells with their own damage rates " << hazards << "\n"
            << "  events " << w.events.size() << ", reports " << w.reports.size() << " (seed " << seed << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Damage-aware car sensing simulator"};
  app.require_subcommand(1);
  std::string out_flag;

  RunConfig run_cfg;
  Overrides run_o;
  std::string run_scenario;
  auto* run = app.add_subcommand("run", "Run one simulation and write its metrics");
  run->add_option("scenario", run_scenario, "Scenario file")->required();
  run->add_option("--out", out_flag, "Output directory (default $DASC_OUTPUT_DIR or ./out)");
  run->add_flag("--trace", run_cfg.trace, "Also write the event trace");
  add_run_flags(run, run_cfg, run_o);

  RunConfig sweep_cfg;
  Overrides sweep_o;
  std::string sweep_scenario, schemes_text = "DASC,DASC_no_MDP,SocialCar,Random,FixedRoute,ShortestDistance,"
                                             "ReputationBased,IncentiveBased",
                              seeds_text = "1-10", cars_text, aborters_text;
  int jobs = 0;
  auto* sw = app.add_subcommand("sweep", "Compare schemes over seeds and fleet settings");
  sw->add_option("scenario", sweep_scenario, "Scenario file")->required();
  sw->add_option("--schemes", schemes_text, "Comma-separated scheme names");
  sw->add_option("--seeds", seeds_text, "Seeds, e.g. 1-10 or 1,5,9");
  sw->add_option("--cars", cars_text, "Fleet sizes to sweep (equal driver thirds)");
  sw->add_option("--aborter-fractions", aborters_text, "Aborter shares of the fleet to sweep");
  sw->add_option("--jobs", jobs, "Concurrent runs (0: one per core)");
  sw->add_option("--out", out_flag, "Output directory");
  add_run_flags(sw, sweep_cfg, sweep_o);

  RunConfig tune_cfg;
  Overrides tune_o;
  std::string tune_scenario, tune_seeds;
  int max_evals = 60;
  auto* tn = app.add_subcommand("tune", "Nelder-Mead search for the parameters maximising F1");
  tn->add_option("scenario", tune_scenario, "Scenario file")->required();
  tn->add_option("--tune-seeds", tune_seeds, "Seeds averaged per evaluation (default: --seed)");
  tn->add_option("--max-evals", max_evals, "Objective evaluations per stage");
  tn->add_option("--jobs", jobs, "Concurrent runs");
  tn->add_option("--out", out_flag, "Output directory");
  add_run_flags(tn, tune_cfg, tune_o);

  RunConfig x0_cfg;
  Overrides x0_o;
  std::string x0_scenario;
  double x0_step = 0.05;
  auto* tx = app.add_subcommand("tune-x0", "Scan the initial accessibility index");
  tx->add_option("scenario", x0_scenario, "Scenario file")->required();
  tx->add_option("--step", x0_step, "Scan step");
  add_run_flags(tx, x0_cfg, x0_o);

  std::string validate_scenario;
  std::uint64_t validate_seed = 1;
  auto* va = app.add_subcommand("validate-scenario", "Check a scenario file and summarise it");
  va->add_option("scenario", validate_scenario, "Scenario file")->required();
  va->add_option("--seed", validate_seed, "Seed used to draw the synthetic parts");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      resolve(run_cfg, run_o);
      return cmd_run(run_scenario, run_cfg, out_flag);
    }
    if (*sw) {
      resolve(sweep_cfg, sweep_o);
      return cmd_sweep(sweep_scenario, sweep_cfg, schemes_text, seeds_text, cars_text, aborters_text, jobs, out_flag);
    }
    if (*tn) {
      resolve(tune_cfg, tune_o);
      tune_cfg.scheme = Scheme::dasc;
      return cmd_tune(tune_scenario, tune_cfg, tune_seeds, max_evals, jobs, out_flag);
    }
    if (*tx) {
      resolve(x0_cfg, x0_o);
      return cmd_tune_x0(x0_scenario, x0_cfg, x0_step);
    }
    if (*va) return cmd_validate(validate_scenario, validate_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
