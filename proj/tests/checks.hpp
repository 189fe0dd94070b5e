// Shared fixtures and numerical checks for the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spotmpc/mpc.hpp"
#include "spotmpc/nlp.hpp"
#include "spotmpc/sim.hpp"

namespace spotmpc::testing {

inline BuildingConfig two_room_building(Season s) {
  BuildingConfig b;
  b.season = s;
  ZoneSpec z;
  z.rooms = {{RoomKind::TypeS, homogeneous_band(s)}, {RoomKind::TypeS, homogeneous_band(s)}};
  b.zones.push_back(z);
  return b;
}

// Room 0 present throughout, room 1 arrives after two steps.
inline Forecast small_forecast(Season s, int horizon) {
  Forecast fc;
  for (int k = 0; k < horizon; ++k) {
    fc.outside_temp.push_back(s == Season::Winter ? -5.0 + 0.5 * k : 24.0 + 0.5 * k);
    fc.occupancy.push_back({1.0, k >= 2 ? 1.0 : 0.0});
    fc.arrivals.push_back({k == 0, k == 2});
  }
  return fc;
}

// Small instance: 1 zone, 2 Type S rooms, N = 6.
inline MpcProblem small_problem(Season s, ControllerVariant v, bool relaxed = false, int q = 0,
                                double carried = 22.0) {
  MpcConfig cfg = MpcConfig::for_season(s);
  cfg.horizon = 6;
  const BuildingConfig b = two_room_building(s);
  const auto state = initial_state(b, cfg);
  return build_problem(b, state, HourClock::at(q, carried), small_forecast(s, cfg.horizon), cfg, v, relaxed);
}

inline MpcProblem s1_problem(Season s, ControllerVariant v, bool relaxed = false, int q = 0, std::uint64_t seed = 3) {
  const Scenario sc{Layout::S1, s, ComfortSpec::Homogeneous};
  const BuildingConfig b = sc.building();
  const MpcConfig cfg = seasonal_config(MpcConfig{}, s);
  const Trace tr = generate_trace(sc, seed);
  // 08:00, when occupants start arriving.
  return build_problem(b, initial_state(b, cfg), HourClock::at(q, 22.0), slot_forecast(tr, 960 + q * 20, cfg.horizon),
                       cfg, v, relaxed);
}

// Interior point of the box, with states completed by forward simulation.
inline std::vector<double> random_point(const NlpInstance& inst, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::vector<double> z(inst.dimension());
  const auto lo = inst.lower(), hi = inst.upper();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = std::isfinite(lo[i]) ? lo[i] : -5.0, b = std::isfinite(hi[i]) ? hi[i] : 30.0;
    z[i] = a == b ? a : a + (b - a) * unit(rng);
  }
  inst.complete_start(z);
  // Leave the completed point slightly so multiplier-weighted rows are not all zero.
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (lo[i] != hi[i]) z[i] = std::clamp(z[i] + jitter(rng), std::isfinite(lo[i]) ? lo[i] + 1e-6 : -1e9,
                                          std::isfinite(hi[i]) ? hi[i] - 1e-6 : 1e9);
  return z;
}

struct GradientCheck {
  double objective = 0;  // worst relative error of the objective gradient
  double jacobian = 0;   // worst relative error over all constraint gradients
};

// Central differences against the analytic objective gradient and Jacobian.
// Error of an entry: |a - fd| / max(1, |fd|).
inline GradientCheck check_gradients(const NlpInstance& inst, std::span<const double> z) {
  const std::size_t n = inst.dimension(), m = inst.num_constraints();
  GradientCheck out;
  std::vector<double> g(n), zero(m, 0.0);
  inst.gradient(z, 1.0, zero, g);
  std::vector<Triplet> trip;
  inst.jacobian(z, trip);
  std::vector<std::vector<double>> jac(n, std::vector<double>(m, 0.0));  // [col][row]
  for (const auto& t : trip) jac[static_cast<std::size_t>(t.col())][static_cast<std::size_t>(t.row())] += t.value();
  std::vector<double> zp(z.begin(), z.end()), cp(m), cm(m);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
    zp[j] = z[j] + h;
    const double fp = inst.evaluate(zp, cp);
    zp[j] = z[j] - h;
    const double fm = inst.evaluate(zp, cm);
    zp[j] = z[j];
    const double fd = (fp - fm) / (2 * h);
    out.objective = std::max(out.objective, std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)));
    for (std::size_t i = 0; i < m; ++i) {
      const double cd = (cp[i] - cm[i]) / (2 * h);
      out.jacobian = std::max(out.jacobian, std::abs(jac[j][i] - cd) / std::max(1.0, std::abs(cd)));
    }
  }
  return out;
}

// Worst gap between one 600 s Euler step and 1 s Euler substeps of the
// continuous model, over a grid of the operating box.
inline double euler_gap(double tau, double substep, std::span<const double> xs, std::span<const double> us,
                        std::span<const double> vs, std::span<const double> tos) {
  const ThermalParams p;
  const auto big = build_discrete_matrices(p, tau, 1, 0.0);
  double worst = 0;
  for (double x : xs)
    for (double u : us)
      for (double v : vs)
        for (double to : tos) {
          RoomInputs in;
          in.supply_temp = u;
          in.flow = v;
          in.outside_temp = to;
          RoomState s;
          s.x = x;
          const std::vector<double> zx{x};
          const double coarse = step_room(s, 0, zx, in, big, 0.0, RoomKind::TypeSBar).x;
          double fine = x;
          for (double t = 0; t < tau - 1e-9; t += substep) fine += substep * continuous_rhs(fine, {}, in, p);
          worst = std::max(worst, std::abs(coarse - fine));
        }
  return worst;
}

}  // namespace spotmpc::testing
