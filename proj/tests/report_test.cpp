#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spotmpc/report.hpp"

using namespace spotmpc;
namespace fs = std::filesystem;

namespace {

ComparisonReport two_days() {
  ComparisonReport r;
  r.scenario = "S1-winter-homogeneous";
  r.variants = {"NS", "SA"};
  r.w = 1000;
  DayRecord a, b;
  a.day = 0;
  a.seed = 1;
  a.variants["NS"] = {10.0, 0.01, 25.0};
  a.variants["SA"] = {8.0, 0.02, 24.0};
  b.day = 1;
  b.seed = 2;
  b.variants["NS"] = {10.0, 0.0, 25.0};
  b.variants["SA"] = {11.0, 0.0, 25.5};
  r.days = {a, b};
  summarize(r);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("spotmpc_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Savings, SignConvention) {
  EXPECT_DOUBLE_EQ(savings_percent(10, 8), 20.0);
  EXPECT_DOUBLE_EQ(savings_percent(10, 11), -10.0);
  EXPECT_THROW(savings_percent(0, 1), std::invalid_argument);
}

TEST(Summary, PerDayAndMeans) {
  const auto r = two_days();
  ASSERT_TRUE(r.days[0].savings_pct && r.days[1].savings_pct);
  EXPECT_DOUBLE_EQ(*r.days[0].savings_pct, 20.0);
  EXPECT_DOUBLE_EQ(*r.days[1].savings_pct, -10.0);
  EXPECT_DOUBLE_EQ(*r.mean_savings_pct, 5.0);
  EXPECT_DOUBLE_EQ(r.mean_energy_kwh.at("SA"), 9.5);
  EXPECT_DOUBLE_EQ(r.mean_discomfort.at("SA"), 0.01);
  const auto s = r.sorted_savings();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].second->day, 1);
  EXPECT_LE(s[0].first, s[1].first);
}

TEST(Summary, MissingVariantHasNoSavings) {
  auto r = two_days();
  r.days[1].variants.erase("SA");
  summarize(r);
  EXPECT_FALSE(r.days[1].savings_pct);
  EXPECT_DOUBLE_EQ(*r.mean_savings_pct, 20.0);
  EXPECT_DOUBLE_EQ(r.mean_energy_kwh.at("SA"), 8.0);
}

TEST(ReportJson, StableSerialization) {
  const auto r = two_days();
  const std::string a = to_json(r).dump(2), b = to_json(two_days()).dump(2);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["days"][0]["results"]["SA"]["energy_kwh"], 8.0);
  EXPECT_EQ(j["mean_savings_pct"], 5.0);
  EXPECT_TRUE(j["failures"].empty());
}

TEST(Spec, DefaultsAreValid) {
  ExperimentSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.scenario_value().name(), "S1-winter-homogeneous");
  EXPECT_EQ(s.seed_for_day(3), 4u);
  s.days = 2;
  s.seeds = {7, 9};
  EXPECT_EQ(s.seed_for_day(1), 9u);
}

TEST(Spec, JsonRoundTrip) {
  ExperimentSpec s;
  s.scenario = "S3";
  s.variants = {"NS", "SA", "SU"};
  s.days = 3;
  s.seeds = {4};
  s.season = "summer";
  s.comfort = "heterogeneous";
  s.w_sweep = {100, 10000};
  s.threads = 2;
  const nlohmann::json j = s;
  const auto back = j.get<ExperimentSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_NO_THROW(back.validate());
}

TEST(Spec, RejectsUnknownFieldsAndBadValues) {
  EXPECT_THROW(nlohmann::json({{"scenario", "S1"}, {"horizon", 24}}).get<ExperimentSpec>(), SpecError);
  EXPECT_THROW(nlohmann::json({{"days", "three"}}).get<ExperimentSpec>(), SpecError);
  EXPECT_THROW(nlohmann::json::array().get<ExperimentSpec>(), SpecError);
}

TEST(Spec, ValidationErrors) {
  auto bad = [](auto mutate) {
    ExperimentSpec s;
    mutate(s);
    EXPECT_THROW(s.validate(), SpecError);
  };
  bad([](ExperimentSpec& s) { s.scenario = "S9"; });
  bad([](ExperimentSpec& s) { s.variants = {}; });
  bad([](ExperimentSpec& s) { s.variants = {"SA", "SA"}; });
  bad([](ExperimentSpec& s) { s.variants = {"XX"}; });
  bad([](ExperimentSpec& s) { s.days = 0; });
  bad([](ExperimentSpec& s) { s.seeds = {}; });
  bad([](ExperimentSpec& s) {
    s.days = 3;
    s.seeds = {1, 2};
  });
  bad([](ExperimentSpec& s) { s.season = "spring"; });
  bad([](ExperimentSpec& s) { s.comfort = "mixed"; });
  bad([](ExperimentSpec& s) { s.w_sweep = {0}; });
  bad([](ExperimentSpec& s) { s.weather_csv = "w.csv"; });
  bad([](ExperimentSpec& s) { s.occupancy_profile = "gym"; });
  bad([](ExperimentSpec& s) { s.threads = -1; });
  bad([](ExperimentSpec& s) { s.output_dir = ""; });
}

TEST(Spec, LoadFromFile) {
  const fs::path d = fresh_dir("spec");
  fs::create_directories(d);
  {
    std::ofstream(d / "ok.json") << R"({"scenario": "S2", "days": 2, "seeds": [5, 6], "season": "summer"})";
    std::ofstream(d / "bad.json") << R"({"scenario": "S2", "days": 0})";
    std::ofstream(d / "broken.json") << "{";
  }
  const auto s = load_spec((d / "ok.json").string());
  EXPECT_EQ(s.scenario, "S2");
  EXPECT_EQ(s.seed_for_day(1), 6u);
  EXPECT_THROW(load_spec((d / "bad.json").string()), SpecError);
  EXPECT_THROW(load_spec((d / "broken.json").string()), SpecError);
  EXPECT_THROW(load_spec((d / "missing.json").string()), SpecError);
  fs::remove_all(d);
}

TEST(PlotData, HeadersOnlyForEmptyReport) {
  const fs::path d = fresh_dir("empty");
  const auto files = emit_plot_data(ComparisonReport{}, d);
  ASSERT_EQ(files.size(), 4u);
  EXPECT_EQ(slurp(d / kDailySavingsCsv), "rank,day,seed,savings_pct\n");
  EXPECT_EQ(slurp(d / kEnergyVsTimeCsv), "day,variant,t,total_kw,hvac_kw,spot_kw,cumulative_kwh\n");
  EXPECT_EQ(slurp(d / kSupplyTempCsv), "day,variant,t,u\n");
  EXPECT_EQ(slurp(d / kWSweepCsv), "w,variant,mean_energy_kwh,mean_discomfort,days\n");
  fs::remove_all(d);
}

TEST(PlotData, SavingsRankedAscending) {
  const fs::path d = fresh_dir("ranked");
  auto r = two_days();
  r.w_sweep.push_back({100, "SA", 9.0, 0.05, 2});
  DaySeries s;
  s.day = 0;
  s.variant = "NS";
  s.t = {0, 600};
  s.total_kw = {6, 6};
  s.hvac_kw = {6, 6};
  s.spot_kw = {0, 0};
  s.supply_temp = {25, 25};
  r.series.push_back(s);
  emit_plot_data(r, d);
  EXPECT_EQ(slurp(d / kDailySavingsCsv), "rank,day,seed,savings_pct\n0,1,2,-10.000000\n1,0,1,20.000000\n");
  EXPECT_EQ(slurp(d / kWSweepCsv), "w,variant,mean_energy_kwh,mean_discomfort,days\n100,SA,9.000000,0.050000,2\n");
  const std::string e = slurp(d / kEnergyVsTimeCsv);
  EXPECT_NE(e.find("0,NS,600,6.000000,6.000000,0.000000,2.000000\n"), std::string::npos);
  fs::remove_all(d);
}

TEST(Parallel, RunsEveryJobOnce) {
  std::vector<std::atomic<int>> hits(37);
  run_parallel(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  run_parallel(0, 4, [&](std::size_t) { FAIL(); });
}

TEST(Experiment, EmptyBuildingDayEndToEnd) {
  ExperimentSpec spec;
  spec.season = "summer";
  spec.variants = {"NS", "SU"};
  spec.occupancy_profile = "always-absent";
  spec.w_sweep = {100};
  spec.threads = 2;
  spec.validate();
  const auto out = run_experiment(spec);
  const auto& r = out.report;
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.days.size(), 1u);
  EXPECT_EQ(r.days[0].variants.size(), 2u);
  EXPECT_FALSE(r.days[0].savings_pct);
  ASSERT_EQ(r.w_sweep.size(), 2u);
  EXPECT_EQ(r.w_sweep[0].w, 100.0);
  EXPECT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.series[0].t.size(), 144u);
  ASSERT_EQ(out.runs.size(), 1u);
  ASSERT_TRUE(out.runs[0][0]);
  const auto s = sample_series(*out.runs[0][0], 0);
  EXPECT_EQ(s.supply_temp.size(), 144u);

  const fs::path d = fresh_dir("experiment");
  persist(out, d);
  for (const char* f : {"report.json", "daily_savings.csv", "energy_vs_time.csv", "supply_air_temperature.csv",
                        "w_sweep.csv", "day0_NS.json", "day0_NS_timeline.csv", "day0_SU.json"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  const auto j = nlohmann::json::parse(slurp(d / "report.json"));
  EXPECT_EQ(j["scenario"], "S1-summer-homogeneous");
  fs::remove_all(d);
}
