#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "checks.hpp"
#include "spotmpc/mpc.hpp"

using namespace spotmpc;
using namespace spotmpc::testing;

namespace {

std::vector<int> lengths(const std::vector<HourBlock>& b) {
  std::vector<int> out;
  for (const auto& x : b) out.push_back(x.length);
  return out;
}

SolverSettings quick() {
  SolverSettings s;
  s.multistart = 3;
  s.seed = 5;
  s.max_iterations = 300;
  return s;
}

}  // namespace

TEST(HourBlocks, AlignedStart) {
  const auto b = hour_block_constraints(HourClock::at(0, 20));
  EXPECT_EQ(lengths(b), (std::vector<int>{6, 6, 6, 6}));
  for (const auto& x : b) EXPECT_FALSE(x.pinned);
}

TEST(HourBlocks, MidHourPinsRemainder) {
  auto b = hour_block_constraints(HourClock::at(2, 20));
  EXPECT_EQ(lengths(b), (std::vector<int>{4, 6, 6, 6, 2}));
  EXPECT_TRUE(b[0].pinned);
  b = hour_block_constraints(HourClock::at(5, 20));
  EXPECT_EQ(lengths(b), (std::vector<int>{1, 6, 6, 6, 5}));
  EXPECT_TRUE(b[0].pinned);
  EXPECT_FALSE(b[1].pinned);
}

TEST(HourBlocks, PartitionHorizonForEverySlot) {
  for (int q = 0; q < 6; ++q) {
    const auto b = hour_block_constraints(HourClock::at(q, 20));
    int next = 0;
    for (const auto& x : b) {
      EXPECT_EQ(x.first, next);
      EXPECT_GE(x.length, 1);
      EXPECT_LE(x.length, 6);
      next += x.length;
    }
    EXPECT_EQ(next, 24);
    EXPECT_EQ(b.front().pinned, q != 0);
  }
  EXPECT_THROW(hour_block_constraints(HourClock{0, 6, 20}), std::invalid_argument);
}

TEST(Energy, PowerTerms) {
  const ThermalParams p;
  const MpcConfig cfg;
  const std::vector<double> v{1.0}, none;
  const auto e = energy_terms(20, v, 10, 10, none, none, cfg, p);
  EXPECT_NEAR(e.hvac_heat, 13.379, 1e-3);
  EXPECT_NEAR(e.hvac_cool, 0.0, 1e-12);
  const std::vector<double> v45{4.5};
  EXPECT_NEAR(energy_terms(20, v45, 20, 20, none, none, cfg, p).hvac_fan, 1.9035, 1e-9);
  const std::vector<double> w{1.0}, va{0.0};
  EXPECT_NEAR(energy_terms(20, v, 20, 20, w, va, cfg, p).spot_heat, 0.7, 1e-12);
  const std::vector<double> w0{0.0}, va1{1.0};
  EXPECT_NEAR(energy_terms(20, v, 20, 20, w0, va1, cfg, p).spot_fan, 0.03, 1e-12);
}

TEST(Energy, CoolingChargedOnMixerDrop) {
  const ThermalParams p;
  const MpcConfig cfg;
  const std::vector<double> v{2.0}, none;
  const auto e = energy_terms(14, v, 26, 14, none, none, cfg, p);
  EXPECT_NEAR(e.hvac_cool, 2.0 * p.rho_sigma() / 0.9 * 12.0, 1e-9);
  EXPECT_NEAR(e.hvac_heat, 0.0, 1e-12);
}

TEST(FanRounding, NearestLevel) {
  EXPECT_DOUBLE_EQ(round_fan_speed(0.34), 0.3);
  EXPECT_DOUBLE_EQ(round_fan_speed(0.05), 0.1);
  EXPECT_DOUBLE_EQ(round_fan_speed(0.0), 0.0);
  EXPECT_DOUBLE_EQ(round_fan_speed(1.2), 1.0);
  EXPECT_DOUBLE_EQ(round_fan_speed(0.96), 1.0);
}

TEST(Layout, NsHasNoDeviceVariables) {
  const auto ns = s1_problem(Season::Winter, ControllerVariant::NS);
  EXPECT_EQ(ns.num_devices(), 0u);
  EXPECT_EQ(ns.num_free_supply_values(), 4u);
  const auto sa = s1_problem(Season::Winter, ControllerVariant::SA);
  EXPECT_EQ(sa.num_devices(), 5u);
  std::size_t w = 0, va = 0;
  for (std::size_t i = 0; i < sa.dimension(); ++i) {
    const auto n = sa.variable_name(i);
    if (n.rfind("w[", 0) == 0) ++w;
    if (n.rfind("va[", 0) == 0) ++va;
  }
  EXPECT_EQ(w, 5u * 24u);
  EXPECT_EQ(va, 5u * 24u);
  for (std::size_t i = 0; i < ns.dimension(); ++i) EXPECT_EQ(ns.variable_name(i).rfind("w[", 0), std::string::npos);
}

TEST(Layout, SuPlansLikeNs) {
  const auto ns = s1_problem(Season::Summer, ControllerVariant::NS);
  const auto su = s1_problem(Season::Summer, ControllerVariant::SU);
  EXPECT_EQ(ns.dimension(), su.dimension());
  EXPECT_EQ(ns.num_constraints(), su.num_constraints());
  EXPECT_EQ(su.num_devices(), 0u);
}

TEST(Layout, MidHourPinsSupplyBounds) {
  const auto p = small_problem(Season::Winter, ControllerVariant::SA, false, 3, 24.5);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(p.lower()[p.iu(k)], 24.5);
    EXPECT_EQ(p.upper()[p.iu(k)], 24.5);
  }
  EXPECT_EQ(p.lower()[p.iu(3)], 12.0);
}

TEST(Layout, DevicesGatedByOccupancy) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(p.upper()[p.iw(k, 1)], 0.0);
    EXPECT_EQ(p.upper()[p.iva(k, 1)], 0.0);
  }
  EXPECT_EQ(p.upper()[p.iw(2, 1)], 1.0);
  EXPECT_EQ(p.upper()[p.iva(0, 0)], 1.0);
}

TEST(Layout, ArrivalRowsOnArrivalSteps) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA);
  std::set<std::pair<std::size_t, int>> arr;
  for (const auto& rb : p.room_bounds())
    if (rb.target == MpcProblem::Target::PmvArrival) arr.insert({rb.room, rb.t});
  // Room 1 arrives during step 2 (times 2 and 3); room 0 during step 0 (time 1 only).
  EXPECT_EQ(arr, (std::set<std::pair<std::size_t, int>>{{0, 1}, {1, 2}, {1, 3}}));
  const auto ns = small_problem(Season::Summer, ControllerVariant::NS);
  for (const auto& rb : ns.room_bounds()) EXPECT_NE(rb.target, MpcProblem::Target::PmvArrival);
}

TEST(Layout, ComfortMarginGrowsAlongHorizon) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA);
  const ComfortBand band = homogeneous_band(Season::Summer);
  std::map<int, double> lo;
  for (const auto& rb : p.room_bounds())
    if (rb.target == MpcProblem::Target::Pmv && rb.room == 0 && !rb.upper) lo[rb.t] = rb.bound;
  ASSERT_EQ(lo.size(), 6u);
  const double expect[] = {0.01, 0.02, 0.03, 0.04, 0.05, 0.05};
  for (int t = 1; t <= 6; ++t) EXPECT_NEAR(lo[t] - band.lo, expect[t - 1], 1e-12) << t;
}

TEST(Objective, PenaltyNeutralAtZeroRelaxation) {
  const auto strict = small_problem(Season::Winter, ControllerVariant::SA, false);
  const auto relaxed = small_problem(Season::Winter, ControllerVariant::SA, true);
  ASSERT_EQ(relaxed.dimension(), strict.dimension() + 2 * strict.num_banded_rooms());
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    auto z = random_point(strict, rng);
    const double e = strict.objective_kj(z);
    z.resize(relaxed.dimension(), 0.0);
    EXPECT_NEAR(relaxed.objective_kj(z), e + 1000.0, 1e-9 * std::max(1.0, e));
    EXPECT_NEAR(relaxed.energy_kj(z), e, 1e-9 * std::max(1.0, e));
  }
}

TEST(Objective, PenaltyIsProductOverRooms) {
  const auto relaxed = small_problem(Season::Winter, ControllerVariant::SA, true);
  std::vector<double> z(relaxed.dimension(), 0.0);
  z[relaxed.ieps(0, false)] = 0.5;
  z[relaxed.ieps(1, true)] = 0.2;
  EXPECT_NEAR(relaxed.penalty(z), 1000.0 * 1.5 * 1.2, 1e-9);
}

class Derivatives : public ::testing::TestWithParam<std::tuple<Season, ControllerVariant, bool, int>> {};

TEST_P(Derivatives, MatchCentralDifferences) {
  const auto [season, variant, relaxed, q] = GetParam();
  const auto p = small_problem(season, variant, relaxed, q);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto z = random_point(p, rng);
    const auto err = check_gradients(p, z);
    ASSERT_LE(err.objective, 1e-4) << "point " << i;
    ASSERT_LE(err.jacobian, 1e-4) << "point " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Mpc, Derivatives,
                         ::testing::Values(std::make_tuple(Season::Winter, ControllerVariant::SA, false, 0),
                                           std::make_tuple(Season::Summer, ControllerVariant::SA, true, 2),
                                           std::make_tuple(Season::Winter, ControllerVariant::NS, true, 0),
                                           std::make_tuple(Season::Summer, ControllerVariant::NS, false, 5)));

TEST(Hessian, MatchesGradientDifferences) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA, true);
  std::mt19937_64 rng(23);
  const std::size_t n = p.dimension(), m = p.num_constraints();
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 5; ++rep) {
    const auto z = random_point(p, rng);
    std::vector<double> lam(m);
    for (auto& l : lam) l = nd(rng);
    std::vector<Triplet> trip;
    p.hessian(z, 1.0, lam, trip);
    std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
    for (const auto& t : trip) {
      const auto a = static_cast<std::size_t>(t.row()), b = static_cast<std::size_t>(t.col());
      ASSERT_GE(a, b);
      h[a][b] += t.value();
      if (a != b) h[b][a] += t.value();
    }
    std::vector<double> zp(z), gp(n), gm(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double step = 1e-6 * std::max(1.0, std::abs(z[j]));
      zp[j] = z[j] + step;
      p.gradient(zp, 1.0, lam, gp);
      zp[j] = z[j] - step;
      p.gradient(zp, 1.0, lam, gm);
      zp[j] = z[j];
      for (std::size_t i = 0; i < n; ++i) {
        const double fd = (gp[i] - gm[i]) / (2 * step);
        ASSERT_NEAR(h[i][j], fd, 1e-4 * std::max(1.0, std::abs(fd))) << p.variable_name(i) << " / " << p.variable_name(j);
      }
    }
  }
}

TEST(Residuals, AgreeWithSolverRows) {
  for (bool relaxed : {false, true}) {
    const auto p = small_problem(Season::Winter, ControllerVariant::SA, relaxed, 1, 23.0);
    std::mt19937_64 rng(9);
    std::vector<double> c(p.num_constraints());
    for (int i = 0; i < 20; ++i) {
      const auto z = random_point(p, rng);
      p.evaluate(z, c);
      const auto res = p.full_residuals(p.expand(z));
      EXPECT_NEAR(constraint_violation(p, c), std::max(0.0, MpcProblem::max_violation(res)), 1e-9);
    }
  }
}

TEST(Residuals, CompletedStartSatisfiesEqualities) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA, false, 4, 20.0);
  auto z = random_start(p, 1, 0);
  for (const auto& r : p.full_residuals(p.expand(z)))
    if (r.equality) {
      EXPECT_NEAR(r.value, 0.0, 1e-9) << r.name;
    }
}

TEST(Solve, SmallInstanceFeasibleAndComfortable) {
  for (Season s : {Season::Winter, Season::Summer}) {
    const auto p = small_problem(s, ControllerVariant::SA);
    const Solution sol = solve_multistart(p, quick());
    ASSERT_TRUE(sol.feasible()) << to_string(s);
    EXPECT_LE(MpcProblem::max_violation(p.full_residuals(p.expand(sol.x))), 1e-5);
    const auto dv = p.expand(sol.x);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(dv.w[static_cast<std::size_t>(k)][1], 0.0, 1e-9);
      EXPECT_NEAR(dv.va[static_cast<std::size_t>(k)][1], 0.0, 1e-9);
    }
    for (std::size_t k = 1; k < 6; ++k) EXPECT_NEAR(dv.u[k], dv.u[0], 1e-6);
  }
}

TEST(Plan, SupplyTemperatureOnlyAtHourBoundary) {
  for (int q : {0, 3}) {
    const auto p = small_problem(Season::Winter, ControllerVariant::NS, false, q, 24.0);
    const Solution sol = solve_multistart(p, quick());
    ASSERT_TRUE(sol.feasible());
    const Plan plan = p.extract_plan(sol.x);
    EXPECT_EQ(plan.supply_temp.has_value(), q == 0);
    if (q == 3) {
      EXPECT_DOUBLE_EQ(plan.committed_supply_temp, 24.0);
    }
    ASSERT_EQ(plan.zone_flows.size(), 1u);
    EXPECT_TRUE(plan.device_fan.empty());
    EXPECT_EQ(plan.predicted_x.size(), 2u);
  }
}

TEST(Plan, DeviceFanRoundedToSpeedSet) {
  const auto p = small_problem(Season::Summer, ControllerVariant::SA);
  const Solution sol = solve_multistart(p, quick());
  ASSERT_TRUE(sol.feasible());
  for (double f : p.extract_plan(sol.x).device_fan) EXPECT_NEAR(f * 10, std::round(f * 10), 1e-12);
}

TEST(Plan, ShiftedGuessStaysInBox) {
  const auto p = small_problem(Season::Winter, ControllerVariant::SA, false, 0, 22.0);
  const Solution sol = solve_multistart(p, quick());
  ASSERT_TRUE(sol.feasible());
  const auto next = small_problem(Season::Winter, ControllerVariant::SA, false, 1, sol.x[p.iu(0)]);
  const auto z = next.shifted_guess(p, sol.x);
  ASSERT_EQ(z.size(), next.dimension());
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_GE(z[i], next.lower()[i]);
    EXPECT_LE(z[i], next.upper()[i]);
  }
}

TEST(Dump, DescribesEveryVariableAndResidual) {
  const auto p = small_problem(Season::Winter, ControllerVariant::SA, true);
  const auto z = random_start(p, 2, 0);
  const auto j = p.dump(z);
  EXPECT_EQ(j["variables"].size(), p.dimension());
  EXPECT_EQ(j["variables"][0]["name"], "u[0]");
  EXPECT_EQ(j["variant"], "SA");
  EXPECT_TRUE(j["relaxed"].get<bool>());
  EXPECT_EQ(j["num_equalities"].get<std::size_t>() + j["num_inequalities"].get<std::size_t>(), p.num_constraints());
  EXPECT_GT(j["residuals"].size(), 0u);
  EXPECT_EQ(p.variable_name(p.ieps(1, true)), "eps_hi[1]");
  EXPECT_EQ(p.variable_name(p.ix(3, 1)), "x[3][1]");
  EXPECT_EQ(p.variable_name(p.ip(2, 0)), "P[2][0]");
}

TEST(Problem, RejectsMismatchedInputs) {
  MpcConfig cfg = MpcConfig::for_season(Season::Winter);
  cfg.horizon = 6;
  const auto b = two_room_building(Season::Winter);
  const auto state = initial_state(b, cfg);
  auto fc = small_forecast(Season::Winter, 5);
  EXPECT_THROW(build_problem(b, state, HourClock::at(0, 20), fc, cfg, ControllerVariant::SA, false),
               std::invalid_argument);
  fc = small_forecast(Season::Winter, 6);
  const std::vector<RoomState> one(1);
  EXPECT_THROW(build_problem(b, one, HourClock::at(0, 20), fc, cfg, ControllerVariant::SA, false),
               std::invalid_argument);
  BuildingConfig bare = b;
  for (auto& r : bare.zones[0].rooms) r.kind = RoomKind::TypeSBar;
  EXPECT_THROW(build_problem(bare, state, HourClock::at(0, 20), fc, cfg, ControllerVariant::SA, false),
               std::invalid_argument);
}

TEST(Variant, Parsing) {
  EXPECT_EQ(parse_variant("SU"), ControllerVariant::SU);
  EXPECT_STREQ(to_string(ControllerVariant::SA), "SA");
  EXPECT_THROW(parse_variant("sa"), std::invalid_argument);
  EXPECT_TRUE(deploys_devices(ControllerVariant::SU));
  EXPECT_FALSE(plans_with_devices(ControllerVariant::SU));
}
