// Batch experiments over seeded days: NS/SA/SU comparison, W sweep, and the
// CSV series behind the savings, energy, supply temperature and sweep plots.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotmpc/sim.hpp"

namespace spotmpc {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
  std::string scenario = "S1";
  std::vector<std::string> variants{"NS", "SA"};
  int days = 1;
  // One seed per day, or a single base seed that day d offsets by d.
  std::vector<std::uint64_t> seeds{1};
  std::string season = "winter";
  std::string comfort = "homogeneous";
  std::vector<double> w_sweep;
  std::string output_dir = "out";
  std::string occupancy_profile = "office";
  // Optional recorded traces (single-day experiments only).
  std::string weather_csv;
  std::string occupancy_csv;
  int threads = 0;  // 0: one per hardware thread

  Scenario scenario_value() const {
    return {parse_layout(scenario), parse_season(season), parse_comfort(comfort)};
  }

  std::vector<ControllerVariant> variant_values() const {
    std::vector<ControllerVariant> out;
    for (const auto& v : variants) out.push_back(parse_variant(v));
    return out;
  }

  std::uint64_t seed_for_day(int d) const {
    if (seeds.size() == 1) return seeds[0] + static_cast<std::uint64_t>(d);
    return seeds[static_cast<std::size_t>(d)];
  }

  void validate() const {
    try {
      (void)scenario_value();
      const auto vs = variant_values();
      if (vs.empty()) throw SpecError("at least one variant is required");
      if (std::set<ControllerVariant>(vs.begin(), vs.end()).size() != vs.size())
        throw SpecError("variants must be distinct");
      (void)OccupancyProfile::by_name(occupancy_profile);
    } catch (const SpecError&) {
      throw;
    } catch (const std::exception& e) {
      throw SpecError(e.what());
    }
    if (days < 1) throw SpecError("days must be at least 1");
    if (seeds.empty()) throw SpecError("at least one seed is required");
    if (seeds.size() != 1 && seeds.size() != static_cast<std::size_t>(days))
      throw SpecError("seeds must hold one value or one per day");
    for (double w : w_sweep)
      if (!(w > 0)) throw SpecError("W values must be positive");
    if (weather_csv.empty() != occupancy_csv.empty())
      throw SpecError("weather_csv and occupancy_csv go together");
    if (!weather_csv.empty() && days != 1) throw SpecError("recorded traces cover a single day");
    if (output_dir.empty()) throw SpecError("output_dir is empty");
    if (threads < 0) throw SpecError("threads must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  j = {{"scenario", s.scenario},
       {"variants", s.variants},
       {"days", s.days},
       {"seeds", s.seeds},
       {"season", s.season},
       {"comfort", s.comfort},
       {"w_sweep", s.w_sweep},
       {"output_dir", s.output_dir},
       {"occupancy_profile", s.occupancy_profile},
       {"weather_csv", s.weather_csv},
       {"occupancy_csv", s.occupancy_csv},
       {"threads", s.threads}};
}

inline void from_json(const nlohmann::json& j, ExperimentSpec& s) {
  static const std::set<std::string> known{"scenario", "variants",          "days",        "seeds",
                                           "season",   "comfort",           "w_sweep",     "output_dir",
                                           "threads",  "occupancy_profile", "weather_csv", "occupancy_csv"};
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw SpecError("unknown config field '" + k + "'");
  try {
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) j.at(k).get_to(field);
    };
    get("scenario", s.scenario);
    get("variants", s.variants);
    get("days", s.days);
    get("seeds", s.seeds);
    get("season", s.season);
    get("comfort", s.comfort);
    get("w_sweep", s.w_sweep);
    get("output_dir", s.output_dir);
    get("occupancy_profile", s.occupancy_profile);
    get("weather_csv", s.weather_csv);
    get("occupancy_csv", s.occupancy_csv);
    get("threads", s.threads);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad config value: ") + e.what());
  }
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError("config is not valid JSON: " + std::string(e.what()));
  }
  ExperimentSpec s = j.get<ExperimentSpec>();
  s.validate();
  return s;
}

// ------------------------------------------------------------------ report

inline double savings_percent(double e_ns, double e_sa) {
  if (!(e_ns > 0)) throw std::invalid_argument("reference energy must be positive");
  return 100.0 * (e_ns - e_sa) / e_ns;
}

struct VariantDay {
  double energy_kwh = 0;
  double discomfort = 0;
  double mean_supply_temp = 0;
};

struct DayRecord {
  int day = 0;
  std::uint64_t seed = 0;
  std::map<std::string, VariantDay> variants;  // by variant name; missing when the run failed
  std::optional<double> savings_pct;           // SA vs NS, when both ran
};

struct Failure {
  int day = 0;
  std::string variant;
  double w = 0;
  std::string message;
};

struct SweepRow {
  double w = 0;
  std::string variant;
  double mean_energy_kwh = 0;
  double mean_discomfort = 0;
  int days = 0;
};

// 600 s samples of one day's run.
struct DaySeries {
  int day = 0;
  std::string variant;
  std::vector<double> t, total_kw, hvac_kw, spot_kw, supply_temp;
};

struct ComparisonReport {
  std::string scenario;
  std::vector<std::string> variants;
  double w = 0;
  std::vector<DayRecord> days;
  std::optional<double> mean_savings_pct;
  std::map<std::string, double> mean_energy_kwh, mean_discomfort;
  std::vector<SweepRow> w_sweep;
  std::vector<Failure> failures;
  std::vector<DaySeries> series;

  // Per-day savings, ascending.
  std::vector<std::pair<double, const DayRecord*>> sorted_savings() const {
    std::vector<std::pair<double, const DayRecord*>> out;
    for (const auto& d : days)
      if (d.savings_pct) out.emplace_back(*d.savings_pct, &d);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }
};

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["variants"] = r.variants;
  j["w"] = r.w;
  j["days"] = nlohmann::json::array();
  for (const auto& d : r.days) {
    nlohmann::json dj{{"day", d.day}, {"seed", d.seed}};
    for (const auto& [name, v] : d.variants)
      dj["results"][name] = {{"energy_kwh", v.energy_kwh},
                             {"discomfort", v.discomfort},
                             {"mean_supply_temp", v.mean_supply_temp}};
    if (d.savings_pct) dj["savings_pct"] = *d.savings_pct;
    j["days"].push_back(dj);
  }
  if (r.mean_savings_pct) j["mean_savings_pct"] = *r.mean_savings_pct;
  j["mean_energy_kwh"] = r.mean_energy_kwh;
  j["mean_discomfort"] = r.mean_discomfort;
  j["w_sweep"] = nlohmann::json::array();
  for (const auto& s : r.w_sweep)
    j["w_sweep"].push_back({{"w", s.w},
                            {"variant", s.variant},
                            {"mean_energy_kwh", s.mean_energy_kwh},
                            {"mean_discomfort", s.mean_discomfort},
                            {"days", s.days}});
  j["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures)
    j["failures"].push_back({{"day", f.day}, {"variant", f.variant}, {"w", f.w}, {"message", f.message}});
  return j;
}

inline DaySeries sample_series(const DayResult& r, int day) {
  DaySeries s;
  s.day = day;
  s.variant = to_string(r.variant);
  const std::size_t nr = r.power.empty() ? 0 : r.timeline.size() / r.power.size();
  for (std::size_t i = 0; i < r.power.size(); i += kTicksPerSlot) {
    const auto& p = r.power[i];
    s.t.push_back(p.t);
    s.total_kw.push_back(p.kw.total());
    s.hvac_kw.push_back(p.kw.hvac_heat + p.kw.hvac_cool + p.kw.hvac_fan);
    s.spot_kw.push_back(p.kw.spot_heat + p.kw.spot_fan);
    s.supply_temp.push_back(nr > 0 ? r.timeline[i * nr].u : 0.0);
  }
  return s;
}

// Fills the per-day table and means from whatever runs succeeded.
inline void summarize(ComparisonReport& rep) {
  std::map<std::string, std::vector<double>> e, d;
  std::vector<double> sv;
  for (auto& day : rep.days) {
    for (const auto& [name, v] : day.variants) {
      e[name].push_back(v.energy_kwh);
      d[name].push_back(v.discomfort);
    }
    const auto ns = day.variants.find("NS"), sa = day.variants.find("SA");
    day.savings_pct.reset();
    if (ns != day.variants.end() && sa != day.variants.end() && ns->second.energy_kwh > 0) {
      day.savings_pct = savings_percent(ns->second.energy_kwh, sa->second.energy_kwh);
      sv.push_back(*day.savings_pct);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  rep.mean_energy_kwh.clear();
  rep.mean_discomfort.clear();
  for (const auto& [k, v] : e) rep.mean_energy_kwh[k] = mean(v);
  for (const auto& [k, v] : d) rep.mean_discomfort[k] = mean(v);
  rep.mean_savings_pct.reset();
  if (!sv.empty()) rep.mean_savings_pct = mean(sv);
}

struct ExperimentOutcome {
  ComparisonReport report;
  std::vector<std::vector<std::optional<DayResult>>> runs;  // [day][variant], base W only
};

// Runs `jobs` closures on `threads` workers (0: hardware concurrency).
template <class F>
void run_parallel(std::size_t jobs, int threads, F&& job) {
  std::size_t n = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) job(i);
  };
  if (n <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

inline ExperimentOutcome run_experiment(const ExperimentSpec& spec, const SimConfig& base = SimConfig::defaults()) {
  spec.validate();
  const Scenario sc = spec.scenario_value();
  const auto variants = spec.variant_values();
  const OccupancyProfile profile = OccupancyProfile::by_name(spec.occupancy_profile);

  std::vector<Trace> traces;
  for (int d = 0; d < spec.days; ++d) {
    if (!spec.weather_csv.empty())
      traces.push_back(read_trace_files(spec.weather_csv, spec.occupancy_csv));
    else
      traces.push_back(generate_trace(sc, spec.seed_for_day(d), d, profile));
  }

  // Base W first, then each sweep value that differs from it.
  std::vector<double> ws{base.mpc.weight};
  for (double w : spec.w_sweep)
    if (std::find(ws.begin(), ws.end(), w) == ws.end()) ws.push_back(w);

  const std::size_t nd = static_cast<std::size_t>(spec.days), nv = variants.size();
  struct Slot {
    std::optional<DayResult> result;
    std::string error;
  };
  std::vector<Slot> slots(ws.size() * nd * nv);
  run_parallel(slots.size(), spec.threads, [&](std::size_t i) {
    const std::size_t wi = i / (nd * nv), di = (i / nv) % nd, vi = i % nv;
    SimConfig cfg = base;
    cfg.mpc.weight = ws[wi];
    try {
      slots[i].result = run_closed_loop(sc, traces[di], variants[vi], cfg, spec.seed_for_day(static_cast<int>(di)));
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });

  ExperimentOutcome out;
  ComparisonReport& rep = out.report;
  rep.scenario = sc.name();
  rep.variants = spec.variants;
  rep.w = base.mpc.weight;
  out.runs.assign(nd, std::vector<std::optional<DayResult>>(nv));
  for (std::size_t wi = 0; wi < ws.size(); ++wi) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
    for (std::size_t di = 0; di < nd; ++di) {
      if (wi == 0) rep.days.push_back({static_cast<int>(di), spec.seed_for_day(static_cast<int>(di)), {}, {}});
      for (std::size_t vi = 0; vi < nv; ++vi) {
        auto& slot = slots[(wi * nd + di) * nv + vi];
        const std::string name = to_string(variants[vi]);
        if (!slot.result) {
          rep.failures.push_back({static_cast<int>(di), name, ws[wi], slot.error});
          continue;
        }
        const DayResult& r = *slot.result;
        acc[name].first.push_back(r.energy.total());
        acc[name].second.push_back(r.discomfort.mean);
        if (wi == 0) {
          rep.days[di].variants[name] = {r.energy.total(), r.discomfort.mean, r.mean_supply_temp};
          rep.series.push_back(sample_series(r, static_cast<int>(di)));
          out.runs[di][vi] = std::move(slot.result);
        }
      }
    }
    const bool in_sweep = std::find(spec.w_sweep.begin(), spec.w_sweep.end(), ws[wi]) != spec.w_sweep.end();
    if (!in_sweep) continue;
    for (const auto& v : spec.variants) {
      const auto it = acc.find(to_string(parse_variant(v)));
      SweepRow row{ws[wi], to_string(parse_variant(v)), 0, 0, 0};
      if (it != acc.end()) {
        for (double x : it->second.first) row.mean_energy_kwh += x;
        for (double x : it->second.second) row.mean_discomfort += x;
        row.days = static_cast<int>(it->second.first.size());
        row.mean_energy_kwh /= row.days;
        row.mean_discomfort /= row.days;
      }
      rep.w_sweep.push_back(row);
    }
  }
  std::sort(rep.w_sweep.begin(), rep.w_sweep.end(),
            [](const SweepRow& a, const SweepRow& b) { return std::tie(a.w, a.variant) < std::tie(b.w, b.variant); });
  summarize(rep);
  return out;
}

// ---------------------------------------------------------------- plot data

inline constexpr const char* kDailySavingsCsv = "daily_savings.csv";
inline constexpr const char* kEnergyVsTimeCsv = "energy_vs_time.csv";
inline constexpr const char* kSupplyTempCsv = "supply_air_temperature.csv";
inline constexpr const char* kWSweepCsv = "w_sweep.csv";

inline std::vector<std::string> emit_plot_data(const ComparisonReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  char buf[256];
  {
    auto f = open(kDailySavingsCsv);
    f << "rank,day,seed,savings_pct\n";
    int rank = 0;
    for (const auto& [s, d] : r.sorted_savings()) {
      std::snprintf(buf, sizeof buf, "%d,%d,%llu,%.6f\n", rank++, d->day, static_cast<unsigned long long>(d->seed), s);
      f << buf;
    }
  }
  {
    auto f = open(kEnergyVsTimeCsv);
    f << "day,variant,t,total_kw,hvac_kw,spot_kw,cumulative_kwh\n";
    for (const auto& s : r.series) {
      double cum = 0;
      for (std::size_t i = 0; i < s.t.size(); ++i) {
        cum += s.total_kw[i] * kTicksPerSlot * kSimStep / 3600.0;
        std::snprintf(buf, sizeof buf, "%d,%s,%.0f,%.6f,%.6f,%.6f,%.6f\n", s.day, s.variant.c_str(), s.t[i],
                      s.total_kw[i], s.hvac_kw[i], s.spot_kw[i], cum);
        f << buf;
      }
    }
  }
  {
    auto f = open(kSupplyTempCsv);
    f << "day,variant,t,u\n";
    for (const auto& s : r.series)
      for (std::size_t i = 0; i < s.t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.0f,%.6f\n", s.day, s.variant.c_str(), s.t[i], s.supply_temp[i]);
        f << buf;
      }
  }
  {
    auto f = open(kWSweepCsv);
    f << "w,variant,mean_energy_kwh,mean_discomfort,days\n";
    for (const auto& s : r.w_sweep) {
      std::snprintf(buf, sizeof buf, "%.6g,%s,%.6f,%.6f,%d\n", s.w, s.variant.c_str(), s.mean_energy_kwh,
                    s.mean_discomfort, s.days);
      f << buf;
    }
  }
  return {kDailySavingsCsv, kEnergyVsTimeCsv, kSupplyTempCsv, kWSweepCsv};
}

// Report JSON, plot data, and per-run result JSON + timeline CSV.
inline void persist(const ExperimentOutcome& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "report.json");
    f << to_json(out.report).dump(2) << "\n";
  }
  emit_plot_data(out.report, dir);
  for (const auto& day : out.runs)
    for (const auto& run : day) {
      if (!run) continue;
      const std::string stem = "day" + std::to_string(&day - out.runs.data()) + "_" + to_string(run->variant);
      std::ofstream j(dir / (stem + ".json"));
      j << to_json(*run).dump(2) << "\n";
      std::ofstream t(dir / (stem + "_timeline.csv"));
      write_timeline_csv(t, *run);
    }
}

}  // namespace spotmpc
