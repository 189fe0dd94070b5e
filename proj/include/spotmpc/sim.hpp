// Closed-loop day simulation: 30 s plant and device cycle, MPC re-planning
// every 600 s, AHU set point committed on the hour. Also holds the scenario
// layouts, synthetic traces and their CSV form.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotmpc/comfort.hpp"
#include "spotmpc/mpc.hpp"
#include "spotmpc/nlp.hpp"
#include "spotmpc/spot.hpp"
#include "spotmpc/thermal.hpp"

namespace spotmpc {

inline constexpr double kSimStep = 30.0;
inline constexpr int kTicksPerDay = 2880;
inline constexpr int kTicksPerSlot = 20;
inline constexpr int kLookaheadTicks = 480;  // 4 h

// ---------------------------------------------------------------- scenarios

enum class Layout { S1, S2, S3 };
enum class ComfortSpec { Homogeneous, Heterogeneous };

inline const char* to_string(Layout l) {
  switch (l) {
    case Layout::S1: return "S1";
    case Layout::S2: return "S2";
    case Layout::S3: return "S3";
  }
  return "?";
}

inline Layout parse_layout(const std::string& s) {
  if (s == "S1") return Layout::S1;
  if (s == "S2") return Layout::S2;
  if (s == "S3") return Layout::S3;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

inline const char* to_string(ComfortSpec c) {
  return c == ComfortSpec::Homogeneous ? "homogeneous" : "heterogeneous";
}

inline ComfortSpec parse_comfort(const std::string& s) {
  if (s == "homogeneous") return ComfortSpec::Homogeneous;
  if (s == "heterogeneous") return ComfortSpec::Heterogeneous;
  throw std::invalid_argument("unknown comfort spec '" + s + "'");
}

struct Scenario {
  Layout layout = Layout::S1;
  Season season = Season::Winter;
  ComfortSpec comfort = ComfortSpec::Homogeneous;

  std::string name() const {
    return std::string(to_string(layout)) + "-" + to_string(season) + "-" + to_string(comfort);
  }

  BuildingConfig building() const {
    const auto hetero = heterogeneous_bands(season);
    int next = 0;
    auto s_room = [&] {
      const ComfortBand band =
          comfort == ComfortSpec::Heterogeneous ? hetero[static_cast<std::size_t>(next++) % hetero.size()]
                                                : homogeneous_band(season);
      return RoomSpec{RoomKind::TypeS, band};
    };
    const RoomSpec sbar{RoomKind::TypeSBar, homogeneous_band(season)};
    BuildingConfig b;
    b.season = season;
    switch (layout) {
      case Layout::S1: {
        ZoneSpec z;
        for (int i = 0; i < 5; ++i) z.rooms.push_back(s_room());
        b.zones.push_back(z);
        break;
      }
      case Layout::S2: {
        ZoneSpec z;
        for (int i = 0; i < 4; ++i) z.rooms.push_back(s_room());
        z.rooms.push_back(sbar);
        b.zones.push_back(z);
        break;
      }
      case Layout::S3: {
        ZoneSpec z1, z2;
        for (int i = 0; i < 5; ++i) z1.rooms.push_back(s_room());
        z2.rooms.push_back(sbar);
        b.zones.push_back(z1);
        b.zones.push_back(z2);
        break;
      }
    }
    return b;
  }
};

// ------------------------------------------------------------------- traces

struct Trace {
  std::int64_t start = 0;  // unix seconds, UTC
  std::vector<double> outside_temp;                 // per 30 s sample
  std::vector<std::vector<std::uint8_t>> occupancy; // [room][sample]

  std::size_t samples() const { return outside_temp.size(); }
  std::size_t rooms() const { return occupancy.size(); }

  void validate() const {
    for (const auto& o : occupancy) {
      if (o.size() != outside_temp.size()) throw std::invalid_argument("trace series lengths differ");
      for (auto v : o)
        if (v > 1) throw std::invalid_argument("occupancy must be binary");
    }
    for (double t : outside_temp)
      if (!std::isfinite(t)) throw std::invalid_argument("non-finite outside temperature in trace");
  }
};

struct OccupancyProfile {
  std::string name = "office";
  double arrive_lo = 7.5, arrive_hi = 9.5;  // hours
  double depart_lo = 16.0, depart_hi = 18.5;
  double break_rate = 0.3;        // long-run fraction of presence time spent away
  double stay_minutes = 60.0;     // mean uninterrupted stay
  double absent_probability = 0.05;
  // Occupied fraction of the office window expected from this profile.
  double window_lo = 7.0, window_hi = 19.0;
  double fraction_lo = 0.30, fraction_hi = 0.70;

  static OccupancyProfile always_absent() {
    OccupancyProfile p;
    p.name = "always-absent";
    p.absent_probability = 1.0;
    p.fraction_lo = 0.0;
    p.fraction_hi = 0.0;
    return p;
  }
  static OccupancyProfile nine_to_five(double arrive = 8.0, double depart = 17.0) {
    OccupancyProfile p;
    p.name = "nine-to-five";
    p.arrive_lo = p.arrive_hi = arrive;
    p.depart_lo = p.depart_hi = depart;
    p.break_rate = 0.0;
    p.absent_probability = 0.0;
    p.fraction_lo = p.fraction_hi = (depart - arrive) / (p.window_hi - p.window_lo);
    return p;
  }
  static OccupancyProfile office(double break_rate = 0.3) {
    OccupancyProfile p;
    p.break_rate = break_rate;
    return p;
  }
  static OccupancyProfile by_name(const std::string& n) {
    if (n == "always-absent") return always_absent();
    if (n == "nine-to-five") return nine_to_five();
    if (n == "office") return office();
    throw std::invalid_argument("unknown occupancy profile '" + n + "'");
  }
};

// Occupied fraction of the profile's office window, pooled over rooms, for a
// trace starting at midnight.
inline double occupied_fraction(const Trace& tr, const OccupancyProfile& p) {
  const auto a = static_cast<std::size_t>(p.window_lo * 120), b = static_cast<std::size_t>(p.window_hi * 120);
  double occ = 0, tot = 0;
  for (const auto& o : tr.occupancy)
    for (std::size_t i = a; i < b && i < o.size(); ++i) {
      occ += o[i];
      tot += 1;
    }
  return tot > 0 ? occ / tot : 0.0;
}

inline std::vector<std::vector<std::uint8_t>> generate_synthetic_occupancy(std::size_t rooms, std::uint64_t seed,
                                                                          const OccupancyProfile& p,
                                                                          std::size_t samples) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x0cc0u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<std::uint8_t>> out(rooms, std::vector<std::uint8_t>(samples, 0));
  const double leave = p.stay_minutes > 0 ? kSimStep / (60.0 * p.stay_minutes) : 0.0;
  const double away_minutes = p.break_rate > 0 && p.break_rate < 1 ? p.stay_minutes * p.break_rate / (1 - p.break_rate) : 0.0;
  const double back = away_minutes > 0 ? kSimStep / (60.0 * away_minutes) : 1.0;
  for (std::size_t j = 0; j < rooms; ++j) {
    const double absent = unit(rng);
    const double arrive = p.arrive_lo + (p.arrive_hi - p.arrive_lo) * unit(rng);
    const double depart = p.depart_lo + (p.depart_hi - p.depart_lo) * unit(rng);
    if (absent < p.absent_probability) continue;
    bool here = true;
    for (std::size_t i = 0; i < samples; ++i) {
      const double hour = std::fmod(static_cast<double>(i) * kSimStep / 3600.0, 24.0);
      const bool in_window = hour >= arrive && hour < depart;
      if (!in_window) {
        here = true;
        continue;
      }
      if (p.break_rate > 0) {
        const double r = unit(rng);
        if (here && r < leave) here = false;
        else if (!here && r < back) here = true;
      }
      out[j][i] = here ? 1 : 0;
    }
  }
  return out;
}

struct WeatherProfile {
  double min_temp = -10.0, max_temp = -2.0;  // daily extremes, degC
  double peak_hour = 15.0;
  double day_jitter = 3.0;  // per-day shift, uniform in +-jitter

  static WeatherProfile for_season(Season s) {
    if (s == Season::Winter) return {-10.0, -2.0, 15.0, 3.0};
    return {17.0, 29.0, 15.0, 3.0};
  }
};

inline std::vector<double> generate_weather(const WeatherProfile& w, std::uint64_t seed, std::size_t samples) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7ea7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double shift = w.day_jitter * unit(rng);
  const double mean = 0.5 * (w.min_temp + w.max_temp) + shift;
  const double amp = 0.5 * (w.max_temp - w.min_temp);
  constexpr double pi = 3.14159265358979323846;
  std::vector<double> out(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double hour = static_cast<double>(i) * kSimStep / 3600.0;
    out[i] = mean + amp * std::cos(2 * pi * (hour - w.peak_hour) / 24.0);
  }
  return out;
}

inline std::int64_t day_epoch(Season s, int day) {
  using namespace std::chrono;
  const sys_days base = s == Season::Winter ? sys_days{year{2025} / January / 6} : sys_days{year{2025} / July / 7};
  return duration_cast<seconds>((base + days{day}).time_since_epoch()).count();
}

// One simulated day plus the MPC lookahead.
inline Trace generate_trace(const Scenario& sc, std::uint64_t seed, int day = 0,
                            const OccupancyProfile& occ = OccupancyProfile::office(),
                            std::optional<WeatherProfile> weather = std::nullopt) {
  Trace tr;
  tr.start = day_epoch(sc.season, day);
  const std::size_t n = kTicksPerDay + kLookaheadTicks;
  tr.outside_temp = generate_weather(weather.value_or(WeatherProfile::for_season(sc.season)), seed, n);
  tr.occupancy = generate_synthetic_occupancy(sc.building().room_count(), seed, occ, n);
  return tr;
}

inline std::string iso_utc(std::int64_t t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{tp - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline std::int64_t parse_iso_utc(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char z = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &se, &z) != 7 || z != 'Z')
    throw std::invalid_argument("bad ISO-8601 UTC timestamp '" + s + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) throw std::invalid_argument("invalid timestamp '" + s + "'");
  return duration_cast<seconds>(sys_days{ymd}.time_since_epoch()).count() + h * 3600 + mi * 60 + se;
}

inline void write_weather_csv(std::ostream& os, const Trace& tr) {
  os << "timestamp,temp_c\n";
  char buf[64];
  for (std::size_t i = 0; i < tr.samples(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", tr.outside_temp[i]);
    os << iso_utc(tr.start + static_cast<std::int64_t>(i * 30)) << ',' << buf << '\n';
  }
}

inline void write_occupancy_csv(std::ostream& os, const Trace& tr) {
  os << "timestamp,room_id,occupied\n";
  for (std::size_t i = 0; i < tr.samples(); ++i) {
    const std::string ts = iso_utc(tr.start + static_cast<std::int64_t>(i * 30));
    for (std::size_t j = 0; j < tr.rooms(); ++j) os << ts << ',' << j << ',' << int(tr.occupancy[j][i]) << '\n';
  }
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}
inline void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}
}  // namespace detail

// Reads both series; timestamps must match, step 30 s with no gaps.
inline Trace read_trace_csv(std::istream& weather, std::istream& occupancy) {
  Trace tr;
  std::string line;
  std::vector<std::int64_t> stamps;
  std::getline(weather, line);
  detail::strip_cr(line);
  if (line != "timestamp,temp_c") throw std::invalid_argument("weather CSV header must be 'timestamp,temp_c'");
  while (std::getline(weather, line)) {
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 2) throw std::invalid_argument("weather CSV row needs 2 fields: " + line);
    stamps.push_back(parse_iso_utc(cells[0]));
    tr.outside_temp.push_back(std::stod(cells[1]));
  }
  if (stamps.empty()) throw std::invalid_argument("weather CSV has no rows");
  for (std::size_t i = 1; i < stamps.size(); ++i)
    if (stamps[i] - stamps[i - 1] != 30) throw std::invalid_argument("weather timestamps must advance by 30 s");
  tr.start = stamps.front();

  std::getline(occupancy, line);
  detail::strip_cr(line);
  if (line != "timestamp,room_id,occupied")
    throw std::invalid_argument("occupancy CSV header must be 'timestamp,room_id,occupied'");
  std::map<std::size_t, std::vector<std::pair<std::int64_t, int>>> rows;
  while (std::getline(occupancy, line)) {
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 3) throw std::invalid_argument("occupancy CSV row needs 3 fields: " + line);
    const int o = std::stoi(cells[2]);
    if (o != 0 && o != 1) throw std::invalid_argument("occupancy must be 0 or 1: " + line);
    rows[static_cast<std::size_t>(std::stoul(cells[1]))].push_back({parse_iso_utc(cells[0]), o});
  }
  std::size_t expect = 0;
  for (auto& [room, series] : rows) {
    if (room != expect++) throw std::invalid_argument("occupancy room ids must be 0..n-1");
    if (series.size() != stamps.size()) throw std::invalid_argument("occupancy and weather lengths differ");
    std::vector<std::uint8_t> o;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].first != stamps[i]) throw std::invalid_argument("occupancy timestamps do not match weather");
      o.push_back(static_cast<std::uint8_t>(series[i].second));
    }
    tr.occupancy.push_back(std::move(o));
  }
  tr.validate();
  return tr;
}

inline Trace read_trace_files(const std::string& weather_path, const std::string& occupancy_path) {
  std::ifstream w(weather_path), o(occupancy_path);
  if (!w) throw std::runtime_error("cannot open " + weather_path);
  if (!o) throw std::runtime_error("cannot open " + occupancy_path);
  return read_trace_csv(w, o);
}

// ------------------------------------------------------------------ metrics

struct Discomfort {
  std::vector<double> per_user;
  double mean = 0;
};

// pmv/out_of_band and occupancy are [user][interval].
inline Discomfort compute_discomfort(const std::vector<std::vector<bool>>& out_of_band,
                                     const std::vector<std::vector<bool>>& occupied) {
  if (out_of_band.size() != occupied.size()) throw std::invalid_argument("timelines are not aligned");
  Discomfort d;
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    if (out_of_band[i].size() != occupied[i].size()) throw std::invalid_argument("timelines are not aligned");
    double occ = 0, bad = 0;
    for (std::size_t k = 0; k < occupied[i].size(); ++k)
      if (occupied[i][k]) {
        occ += 1;
        if (out_of_band[i][k]) bad += 1;
      }
    d.per_user.push_back(occ > 0 ? bad / occ : 0.0);
  }
  for (double v : d.per_user) d.mean += v;
  if (!d.per_user.empty()) d.mean /= static_cast<double>(d.per_user.size());
  return d;
}

inline Discomfort compute_discomfort(const std::vector<std::vector<double>>& pmv,
                                     const std::vector<std::vector<bool>>& occupied,
                                     const std::vector<ComfortBand>& bands) {
  if (pmv.size() != bands.size()) throw std::invalid_argument("one band per user is required");
  std::vector<std::vector<bool>> out(pmv.size());
  for (std::size_t i = 0; i < pmv.size(); ++i)
    for (double p : pmv[i]) out[i].push_back(p < bands[i].lo || p > bands[i].hi);
  return compute_discomfort(out, occupied);
}

struct EnergyKwh {
  double hvac_heat = 0, hvac_cool = 0, hvac_fan = 0, spot_heat = 0, spot_fan = 0;
  double hvac() const { return hvac_heat + hvac_cool + hvac_fan; }
  double spot() const { return spot_heat + spot_fan; }
  double total() const { return hvac() + spot(); }
};

struct PowerSample {
  double t = 0;  // s since midnight, start of the interval
  EnergyTerms kw;
};

// State at the start of a 30 s interval and the actions applied over it.
struct TimelineRow {
  double t = 0;
  std::size_t room = 0;
  double x = 0, x1 = 0, x2 = 0, pmv = 0;
  double u = 0, v = 0, r = 0, w = 0, va = 0;
  bool occupied = false;
  bool in_band = true;
};

struct DayResult {
  std::string scenario;
  ControllerVariant variant = ControllerVariant::NS;
  Season season = Season::Winter;
  std::uint64_t seed = 0;
  EnergyKwh energy;
  Discomfort discomfort;
  double mean_supply_temp = 0;
  int mpc_solves = 0, relaxed_solves = 0;
  std::vector<TimelineRow> timeline;
  std::vector<PowerSample> power;
};

inline EnergyKwh integrate_power(const std::vector<PowerSample>& power) {
  EnergyKwh e;
  const double h = kSimStep / 3600.0;
  for (const auto& p : power) {
    e.hvac_heat += p.kw.hvac_heat * h;
    e.hvac_cool += p.kw.hvac_cool * h;
    e.hvac_fan += p.kw.hvac_fan * h;
    e.spot_heat += p.kw.spot_heat * h;
    e.spot_fan += p.kw.spot_fan * h;
  }
  return e;
}

inline nlohmann::json to_json(const EnergyKwh& e) {
  return {{"hvac_heat", e.hvac_heat}, {"hvac_cool", e.hvac_cool}, {"hvac_fan", e.hvac_fan},
          {"spot_heat", e.spot_heat}, {"spot_fan", e.spot_fan},   {"total", e.total()}};
}

inline nlohmann::json to_json(const DayResult& r) {
  return {{"scenario", r.scenario},
          {"variant", to_string(r.variant)},
          {"season", to_string(r.season)},
          {"seed", r.seed},
          {"energy_kwh", to_json(r.energy)},
          {"discomfort", r.discomfort.per_user},
          {"mean_discomfort", r.discomfort.mean},
          {"mean_supply_temp", r.mean_supply_temp},
          {"mpc_solves", r.mpc_solves},
          {"relaxed_solves", r.relaxed_solves}};
}

inline void write_timeline_csv(std::ostream& os, const DayResult& r) {
  os << "t,room,x,x1,x2,pmv,u,v,r,w,va\n";
  char buf[256];
  for (const auto& row : r.timeline) {
    std::snprintf(buf, sizeof buf, "%.0f,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.2f\n", row.t, row.room,
                  row.x, row.x1, row.x2, row.pmv, row.u, row.v, row.r, row.w, row.va);
    os << buf;
  }
}

// -------------------------------------------------------------- closed loop

struct SimConfig {
  MpcConfig mpc;            // season-specific comfort limits are filled in by the harness
  SolverSettings solver;    // multistart = random starts per re-plan
  bool warm_start = true;   // also try the previous plan shifted by one step

  static SimConfig defaults() {
    SimConfig c;
    c.solver.multistart = 2;
    c.solver.max_iterations = 300;
    return c;
  }
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline MpcConfig seasonal_config(MpcConfig cfg, Season s) {
  const MpcConfig seasonal = MpcConfig::for_season(s);
  cfg.kappa_lo = seasonal.kappa_lo;
  cfg.kappa_hi = seasonal.kappa_hi;
  return cfg;
}

// Rooms start in the middle of their occupant's band (kappa for rooms without devices).
inline std::vector<RoomState> initial_state(const BuildingConfig& b, const MpcConfig& cfg) {
  const SimplifiedPmvModel model = SimplifiedPmvModel::for_season(b.season);
  const auto rooms = b.rooms();
  std::vector<RoomState> state(rooms.size());
  for (std::size_t j = 0; j < rooms.size(); ++j)
    state[j].x = rooms[j].kind == RoomKind::TypeS ? model.temp_for(0.5 * (rooms[j].band.lo + rooms[j].band.hi))
                                                  : 0.5 * (cfg.kappa_lo + cfg.kappa_hi);
  return state;
}

// Slot means of the trace from `tick` on, plus where arrivals happen.
inline Forecast slot_forecast(const Trace& trace, int tick, int horizon) {
  const std::size_t nr = trace.rooms();
  const auto end = static_cast<std::size_t>(tick + horizon * kTicksPerSlot);
  if (tick < 0 || end > trace.samples()) throw std::invalid_argument("trace does not cover the MPC horizon");
  Forecast fc;
  for (int k = 0; k < horizon; ++k) {
    const auto a = static_cast<std::size_t>(tick + k * kTicksPerSlot);
    double to = 0;
    std::vector<double> occ(nr, 0.0);
    std::vector<bool> arr(nr, false);
    for (std::size_t i = a; i < a + kTicksPerSlot; ++i) {
      to += trace.outside_temp[i];
      for (std::size_t j = 0; j < nr; ++j) {
        occ[j] += trace.occupancy[j][i];
        if (trace.occupancy[j][i] && (i == 0 || !trace.occupancy[j][i - 1])) arr[j] = true;
      }
    }
    fc.outside_temp.push_back(to / kTicksPerSlot);
    for (auto& o : occ) o /= kTicksPerSlot;
    fc.occupancy.push_back(occ);
    fc.arrivals.push_back(arr);
  }
  return fc;
}

inline DayResult run_closed_loop(const Scenario& sc, const Trace& trace, ControllerVariant variant,
                                 const SimConfig& sim, std::uint64_t seed = 0) {
  const BuildingConfig b = sc.building();
  const std::size_t nr = b.room_count();
  if (trace.rooms() != nr) throw std::invalid_argument("trace room count does not match the scenario");
  if (trace.samples() < static_cast<std::size_t>(kTicksPerDay + kLookaheadTicks))
    throw std::invalid_argument("trace must cover the day plus a 4 h lookahead");
  trace.validate();
  const auto rooms = b.rooms();
  const auto zone_of = b.zone_of_room();
  const std::size_t nz = b.zones.size();
  bool has_device = false;
  for (const auto& r : rooms) has_device = has_device || r.kind == RoomKind::TypeS;
  if (variant == ControllerVariant::SA && !has_device)
    throw std::invalid_argument("SA needs at least one room with a device");

  const MpcConfig mcfg = seasonal_config(sim.mpc, sc.season);
  const ControllerVariant planning = variant == ControllerVariant::SA ? ControllerVariant::SA : ControllerVariant::NS;
  const bool devices_on = deploys_devices(variant);
  const bool always_relaxed = sc.comfort == ComfortSpec::Heterogeneous;
  const SimplifiedPmvModel model = SimplifiedPmvModel::for_season(sc.season);
  const DiscreteMatrices plant = build_discrete_matrices(b.thermal, kSimStep, nr, b.load);
  const double d3 = plant.D3(0, 0);

  std::vector<RoomState> state = initial_state(b, mcfg);
  std::vector<SpotDeviceState> dev(nr);
  std::vector<SpotPolicyParams> policy;
  for (const auto& r : rooms)
    policy.push_back(SpotPolicyParams::make(r.band, model, b.thermal.heater_power, b.thermal.spot_capacity));

  DayResult res;
  res.scenario = sc.name();
  res.variant = variant;
  res.season = sc.season;
  res.seed = seed;

  double U = 0;
  std::vector<double> flows(nz, 0.0);
  double reuse = 0;
  std::optional<MpcProblem> prev_problem;
  std::vector<double> prev_x;
  std::vector<std::vector<bool>> out_of_band(nr), occupied(nr);
  double u_sum = 0;

  for (int tick = 0; tick < kTicksPerDay; ++tick) {
    const auto ti = static_cast<std::size_t>(tick);
    if (tick % kTicksPerSlot == 0) {
      const int ell = tick / kTicksPerSlot;
      HourClock clock = HourClock::at(ell, U);
      const Forecast fc = slot_forecast(trace, tick, mcfg.horizon);
      // The model's region-2 state is only tracked when the planner knows devices.
      std::vector<RoomState> measured = state;
      if (planning != ControllerVariant::SA)
        for (auto& m : measured) m.delta_x = m.delta_x_prev = 0.0;

      SolverSettings ss = sim.solver;
      ss.seed = seed * 1000003ULL + static_cast<std::uint64_t>(ell);
      ss.on_iteration = nullptr;
      std::optional<Solution> chosen;
      std::optional<MpcProblem> chosen_problem;
      for (bool relaxed : {false, true}) {
        if (always_relaxed && !relaxed) continue;
        MpcProblem prob = build_problem(b, measured, clock, fc, mcfg, planning, relaxed);
        std::vector<std::vector<double>> extra;
        if (sim.warm_start && prev_problem) extra.push_back(prob.shifted_guess(*prev_problem, prev_x));
        Solution s = solve_multistart(prob, ss, extra);
        ++res.mpc_solves;
        if (relaxed) ++res.relaxed_solves;
        if (s.feasible()) {
          chosen = std::move(s);
          chosen_problem.emplace(std::move(prob));
          break;
        }
      }
      if (!chosen)
        throw SimulationError("MPC infeasible after relaxation at " + iso_utc(trace.start + tick * 30) + " (" +
                              res.scenario + ", " + to_string(variant) + ")");
      const Plan plan = chosen_problem->extract_plan(chosen->x);
      if (clock.q == 0) U = *plan.supply_temp;
      flows = plan.zone_flows;
      reuse = plan.reuse;
      prev_x = chosen->x;
      prev_problem.emplace(std::move(*chosen_problem));
      for (auto& d : dev) begin_slot(d);
    }

    // Devices act on the measured region-2 temperature.
    std::vector<double> w(nr, 0.0), va(nr, 0.0);
    for (std::size_t j = 0; j < nr; ++j) {
      const bool occ = trace.occupancy[j][ti] != 0;
      if (devices_on && rooms[j].kind == RoomKind::TypeS) {
        const SpotAction a = react(dev[j], state[j].x2(), occ, policy[j]);
        w[j] = a.heater_on ? 1.0 : 0.0;
        va[j] = a.fan_speed;
      }
    }

    // Powers over this interval.
    std::vector<double> xs(nr);
    for (std::size_t j = 0; j < nr; ++j) xs[j] = state[j].x;
    const double to = trace.outside_temp[ti];
    const double tm = mixer_temp(reuse, exhaust_temp(state), to, mcfg.r_max);
    const double tc = std::min(tm, U);
    PowerSample ps;
    ps.t = tick * kSimStep;
    ps.kw = energy_terms(U, flows, tm, tc, w, va, mcfg, b.thermal);
    res.power.push_back(ps);
    u_sum += U;

    for (std::size_t j = 0; j < nr; ++j) {
      const bool occ = trace.occupancy[j][ti] != 0;
      TimelineRow row;
      row.t = ps.t;
      row.room = j;
      row.x = state[j].x;
      row.x1 = state[j].x1(d3);
      row.x2 = state[j].x2();
      row.pmv = pmv_simplified(model, row.x2, va[j]);
      row.u = U;
      row.v = flows[zone_of[j]];
      row.r = reuse;
      row.w = w[j];
      row.va = va[j];
      row.occupied = occ;
      row.in_band = rooms[j].kind == RoomKind::TypeS
                        ? row.pmv >= rooms[j].band.lo && row.pmv <= rooms[j].band.hi
                        : row.x >= mcfg.kappa_lo && row.x <= mcfg.kappa_hi;
      out_of_band[j].push_back(!row.in_band);
      occupied[j].push_back(occ);
      res.timeline.push_back(row);
    }

    // Plant step.
    std::vector<RoomState> next(nr);
    for (std::size_t j = 0; j < nr; ++j) {
      RoomInputs in;
      in.supply_temp = U;
      in.flow = flows[zone_of[j]];
      in.outside_temp = to;
      in.occupied = trace.occupancy[j][ti] != 0;
      in.load = b.load;
      next[j] = step_room(state[j], j, xs, in, plant, w[j], rooms[j].kind);
    }
    state = next;
  }
  res.energy = integrate_power(res.power);
  res.discomfort = compute_discomfort(out_of_band, occupied);
  res.mean_supply_temp = u_sum / kTicksPerDay;
  return res;
}

}  // namespace spotmpc
