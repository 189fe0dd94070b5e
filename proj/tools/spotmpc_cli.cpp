// spotmpc command line: fit-pmv, simulate, compare, sweep-w, gen-traces.
// Exit codes: 0 success, 1 bad arguments or spec, 2 some simulated days failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spotmpc/comfort.hpp"
#include "spotmpc/mpc.hpp"
#include "spotmpc/nlp.hpp"
#include "spotmpc/report.hpp"
#include "spotmpc/sim.hpp"

namespace fs = std::filesystem;
using namespace spotmpc;

namespace {

constexpr int kOk = 0, kSpecError = 1, kPartial = 2;

struct Common {
  std::string config;
  std::string scenario;
  std::string comfort;
  std::vector<std::string> variants;
  std::string season;
  int days = -1;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string weather, occupancy;
  std::string profile;
  int threads = -1;
};

void add_common(CLI::App* app, Common& c, bool many_variants) {
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--scenario", c.scenario, "S1, S2, S3, or a full name like S1-summer-heterogeneous");
  app->add_option("--comfort", c.comfort, "homogeneous or heterogeneous");
  if (many_variants)
    app->add_option("--variant", c.variants, "NS, SA, SU (repeatable)");
  else
    app->add_option("--variant", c.variants, "NS, SA or SU")->expected(1);
  app->add_option("--season", c.season, "winter or summer");
  app->add_option("--days", c.days, "number of simulated days");
  app->add_option("--seed", c.seeds, "base seed, or one per day");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--weather", c.weather, "weather CSV (timestamp,temp_c)");
  app->add_option("--occupancy", c.occupancy, "occupancy CSV (timestamp,room_id,occupied)");
  app->add_option("--profile", c.profile, "synthetic occupancy profile: office, nine-to-five, always-absent");
  app->add_option("--threads", c.threads, "worker threads (0: all cores)");
}

// Config file first, flags override.
ExperimentSpec make_spec(const Common& c) {
  ExperimentSpec s = c.config.empty() ? ExperimentSpec{} : load_spec(c.config);
  if (!c.scenario.empty()) {
    const auto a = c.scenario.find('-');
    if (a == std::string::npos) {
      s.scenario = c.scenario;
    } else {
      const auto b = c.scenario.find('-', a + 1);
      if (b == std::string::npos) throw SpecError("scenario name must be LAYOUT-SEASON-COMFORT");
      s.scenario = c.scenario.substr(0, a);
      s.season = c.scenario.substr(a + 1, b - a - 1);
      s.comfort = c.scenario.substr(b + 1);
    }
  }
  if (!c.comfort.empty()) s.comfort = c.comfort;
  if (!c.variants.empty()) s.variants = c.variants;
  if (!c.season.empty()) s.season = c.season;
  if (c.days >= 0) s.days = c.days;
  if (!c.seeds.empty()) s.seeds = c.seeds;
  if (!c.out.empty()) s.output_dir = c.out;
  if (!c.weather.empty()) s.weather_csv = c.weather;
  if (!c.occupancy.empty()) s.occupancy_csv = c.occupancy;
  if (!c.profile.empty()) s.occupancy_profile = c.profile;
  if (c.threads >= 0) s.threads = c.threads;
  s.validate();
  return s;
}

int fit_pmv(const std::string& season_name, const std::string& out) {
  const Season season = parse_season(season_name.empty() ? "winter" : season_name);
  const PmvContext ctx = PmvContext::for_season(season);
  const auto grid = default_fit_grid();
  auto oracle = [&](double t, double v) { return pmv_full(t, v, ctx); };
  const FitReport rep = fit_simplified(grid, oracle);
  nlohmann::json j = to_json(rep);
  j["season"] = to_string(season);
  j["grid_points"] = grid.size();
  j["reference_model_rmse"] = rmse_against(SimplifiedPmvModel::for_season(season), grid, oracle);
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
    std::ofstream(out) << j.dump(2) << "\n";
    std::cout << "selected form " << rep.selected_form << ", rmse " << rep.selected().rmse << " -> " << out << "\n";
  }
  return kOk;
}

int gen_traces(const ExperimentSpec& s) {
  const Scenario sc = s.scenario_value();
  const fs::path dir = s.output_dir;
  fs::create_directories(dir);
  const auto profile = OccupancyProfile::by_name(s.occupancy_profile);
  for (int d = 0; d < s.days; ++d) {
    const Trace tr = generate_trace(sc, s.seed_for_day(d), d, profile);
    const std::string tag = "day" + std::to_string(d);
    std::ofstream w(dir / ("weather_" + tag + ".csv"));
    write_weather_csv(w, tr);
    std::ofstream o(dir / ("occupancy_" + tag + ".csv"));
    write_occupancy_csv(o, tr);
    std::printf("%s: occupied %.1f%% of the working window\n", tag.c_str(), 100.0 * occupied_fraction(tr, profile));
  }
  return kOk;
}

// The first re-plan of the day, solved once more with an iteration log.
void dump_first_plan(const Scenario& sc, const Trace& tr, ControllerVariant variant, const SimConfig& sim,
                     std::uint64_t seed, const fs::path& dir) {
  const BuildingConfig b = sc.building();
  const MpcConfig cfg = seasonal_config(sim.mpc, sc.season);
  const auto state = initial_state(b, cfg);
  const Forecast fc = slot_forecast(tr, 0, cfg.horizon);
  const ControllerVariant planning = variant == ControllerVariant::SA ? ControllerVariant::SA : ControllerVariant::NS;
  MpcProblem prob = build_problem(b, state, HourClock::at(0, 0.0), fc, cfg, planning,
                                  sc.comfort == ComfortSpec::Heterogeneous);
  std::ofstream log(dir / "nlp_log.csv");
  write_iteration_csv_header(log);
  log.precision(10);
  SolverSettings ss = sim.solver;
  ss.seed = seed * 1000003ULL;
  ss.on_iteration = iteration_csv_logger(log);
  const Solution s = solve_multistart(prob, ss, {});
  std::ofstream(dir / "mpc_problem.json") << prob.dump(s.x).dump(2) << "\n";
}

int simulate(const ExperimentSpec& s) {
  const Scenario sc = s.scenario_value();
  const auto variants = s.variant_values();
  if (variants.size() != 1) throw SpecError("simulate takes exactly one --variant");
  if (s.days != 1) throw SpecError("simulate runs one day; use compare for several");
  const Trace tr = s.weather_csv.empty()
                       ? generate_trace(sc, s.seed_for_day(0), 0, OccupancyProfile::by_name(s.occupancy_profile))
                       : read_trace_files(s.weather_csv, s.occupancy_csv);
  const fs::path dir = s.output_dir;
  fs::create_directories(dir);
  const SimConfig cfg = SimConfig::defaults();
  dump_first_plan(sc, tr, variants[0], cfg, s.seed_for_day(0), dir);
  DayResult r;
  try {
    r = run_closed_loop(sc, tr, variants[0], cfg, s.seed_for_day(0));
  } catch (const SimulationError& e) {
    std::cerr << "day failed: " << e.what() << "\n";
    return kPartial;
  }
  std::ofstream(dir / "result.json") << to_json(r).dump(2) << "\n";
  std::ofstream t(dir / "timeline.csv");
  write_timeline_csv(t, r);
  std::printf("%s %s: %.3f kWh, D = %.4f -> %s\n", r.scenario.c_str(), to_string(r.variant), r.energy.total(),
              r.discomfort.mean, dir.string().c_str());
  return kOk;
}

int compare(const ExperimentSpec& s) {
  const ExperimentOutcome out = run_experiment(s);
  persist(out, s.output_dir);
  const auto& rep = out.report;
  for (const auto& [v, e] : rep.mean_energy_kwh)
    std::printf("%-3s mean energy %.3f kWh, mean D %.4f\n", v.c_str(), e, rep.mean_discomfort.at(v));
  if (rep.mean_savings_pct) std::printf("mean SA savings vs NS: %.2f%%\n", *rep.mean_savings_pct);
  for (const auto& row : rep.w_sweep)
    std::printf("W=%-8g %-3s energy %.3f kWh, D %.4f\n", row.w, row.variant.c_str(), row.mean_energy_kwh,
                row.mean_discomfort);
  for (const auto& f : rep.failures)
    std::fprintf(stderr, "day %d %s (W=%g) failed: %s\n", f.day, f.variant.c_str(), f.w, f.message.c_str());
  return rep.failures.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPOT-aware HVAC model predictive control toolkit"};
  app.require_subcommand(1);

  std::string fit_season, fit_out;
  auto* fit = app.add_subcommand("fit-pmv", "fit the simplified PMV model against the full model");
  fit->add_option("--season", fit_season, "winter or summer");
  fit->add_option("--out", fit_out, "fit report JSON path (stdout when omitted)");

  Common sim_c, cmp_c, sweep_c, gen_c;
  auto* sim = app.add_subcommand("simulate", "simulate one day with one controller");
  add_common(sim, sim_c, false);
  auto* cmp = app.add_subcommand("compare", "simulate several days with several controllers");
  add_common(cmp, cmp_c, true);
  std::vector<double> ws;
  auto* sweep = app.add_subcommand("sweep-w", "compare controllers across discomfort weights W");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--w", ws, "W values (default 100 1000 10000)");
  auto* gen = app.add_subcommand("gen-traces", "write synthetic weather and occupancy CSVs");
  add_common(gen, gen_c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kSpecError;
  }

  try {
    if (*fit) return fit_pmv(fit_season, fit_out);
    if (*sim) return simulate(make_spec(sim_c));
    if (*cmp) return compare(make_spec(cmp_c));
    if (*sweep) {
      ExperimentSpec s = make_spec(sweep_c);
      if (!ws.empty()) s.w_sweep = ws;
      if (s.w_sweep.empty()) s.w_sweep = {100.0, 1000.0, 10000.0};
      if (sweep_c.comfort.empty() && sweep_c.config.empty() && sweep_c.scenario.find('-') == std::string::npos)
        s.comfort = "heterogeneous";
      s.validate();
      return compare(s);
    }
    if (*gen) return gen_traces(make_spec(gen_c));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSpecError;
  }
  return kOk;
}
