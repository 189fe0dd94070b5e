// Two-time-scale MPC for a central AHU with per-zone VAV flows and optional
// desk devices. The horizon is N steps of tau seconds; the AHU supply
// temperature is held constant over clock hours.
//
// Variable packing (every symbol is a solver variable):
//   for k in 0..N-1: u(k), v_z(k) per zone, r(k), T_m(k), T_c(k),
//                    then w(k), va(k) per device room
//   x(t) per room, t = 0..N         (x(0) fixed to the measurement)
//   dx(t) per device room, t = 0..N (dx(0) fixed)
//   P(t) per device room, t = 1..N  (PMV of region 2 at the fan of step t-1)
//   relaxed only: eps_lo, eps_hi per banded room
// Equality rows: room dynamics, offset dynamics, PMV definitions, mixer,
// hour-block chains. Pinned supply values are fixed through their bounds.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotmpc/comfort.hpp"
#include "spotmpc/nlp.hpp"
#include "spotmpc/spot.hpp"
#include "spotmpc/thermal.hpp"

namespace spotmpc {

struct RoomSpec {
  RoomKind kind = RoomKind::TypeS;
  ComfortBand band;  // occupant PMV band
};

struct ZoneSpec {
  std::vector<RoomSpec> rooms;
};

struct BuildingConfig {
  std::vector<ZoneSpec> zones;
  ThermalParams thermal;
  Season season = Season::Winter;
  double load = 0.2;  // kW per occupied room

  std::size_t room_count() const {
    std::size_t n = 0;
    for (const auto& z : zones) n += z.rooms.size();
    return n;
  }
  // Rooms in zone order.
  std::vector<RoomSpec> rooms() const {
    std::vector<RoomSpec> out;
    for (const auto& z : zones) out.insert(out.end(), z.rooms.begin(), z.rooms.end());
    return out;
  }
  std::vector<std::size_t> zone_of_room() const {
    std::vector<std::size_t> out;
    for (std::size_t z = 0; z < zones.size(); ++z) out.insert(out.end(), zones[z].rooms.size(), z);
    return out;
  }
};

struct MpcConfig {
  int horizon = 24;
  double tau = 600.0;
  double u_min = 12.0, u_max = 30.0;
  double v_min = 0.236, v_max = 4.5;
  double va_max = 1.0;
  double r_max = 0.8;
  double eta_h = 0.9, eta_c = 0.9;
  double theta3 = 0.094;  // kW s^2 / m^6
  double theta4 = 0.7;    // kW, device heater
  double theta5 = 0.03;   // kW per m/s of device fan
  double weight = 1000.0; // W
  double gamma_lo = 18.0, gamma_hi = 28.0;
  double kappa_lo = 21.0, kappa_hi = 23.0;
  // PMV units shaved off each side of the occupant bands inside the planner:
  // comfort_margin at the first predicted step, growing by comfort_margin_step
  // per step up to comfort_margin_max. Temperature bands use the same margin
  // divided by the surrogate's c_t.
  double comfort_margin = 0.01;
  double comfort_margin_step = 0.01;
  double comfort_margin_max = 0.05;
  double eps_max = 4.0;
  // Largest tau (alpha_o + rho sigma v) / C the planner may use; keeps the
  // 600 s Euler model near the continuous response. <= 0 disables the cap.
  double euler_step_limit = 0.3;
  // Fan speed assumed while a device spins up after an arrival (the lower
  // band is checked with the fan at rest).
  double arrival_fan = 0.2;
  double objective_scale = 1e-3;  // kJ -> MJ for the solver

  static MpcConfig for_season(Season s) {
    MpcConfig c;
    if (s == Season::Summer) {
      c.kappa_lo = 23.0;
      c.kappa_hi = 25.0;
    }
    return c;
  }

  double theta1(const ThermalParams& p) const { return p.rho_sigma() / eta_h; }
  double theta2(const ThermalParams& p) const { return p.rho_sigma() / eta_c; }

  // Per-zone flow ceiling used in planning.
  double zone_flow_max(const ThermalParams& p) const {
    if (euler_step_limit <= 0) return v_max;
    const double cap = (euler_step_limit * p.capacity / tau - p.alpha_outside) / p.rho_sigma();
    return std::clamp(cap, v_min, v_max);
  }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be positive");
    if (!(tau > 0)) throw std::invalid_argument("MPC step must be positive");
    if (!(u_min < u_max && 0 <= v_min && v_min < v_max && va_max > 0 && r_max >= 0 && r_max <= 1 &&
          gamma_lo < gamma_hi && kappa_lo < kappa_hi))
      throw std::invalid_argument("MPC bounds are not ordered");
    if (!(eta_h > 0 && eta_c > 0 && theta3 >= 0 && theta4 >= 0 && theta5 >= 0 && weight > 0))
      throw std::invalid_argument("MPC coefficients must be positive");
    if (!(comfort_margin >= 0 && comfort_margin_step >= 0 && comfort_margin_max >= 0))
      throw std::invalid_argument("comfort margins must be non-negative");
  }
};

struct HourClock {
  int p = 0;          // hour of day
  int q = 0;          // 10-minute slot within the hour, 0..5
  double U = 20.0;    // AHU set point currently committed

  int ell() const { return 6 * p + q; }
  static HourClock at(int ell, double carried) { return {ell / 6, ell % 6, carried}; }
};

enum class ControllerVariant { SA, NS, SU };

inline const char* to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::SA: return "SA";
    case ControllerVariant::NS: return "NS";
    case ControllerVariant::SU: return "SU";
  }
  return "?";
}

inline ControllerVariant parse_variant(const std::string& s) {
  if (s == "SA") return ControllerVariant::SA;
  if (s == "NS") return ControllerVariant::NS;
  if (s == "SU") return ControllerVariant::SU;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

// SU plans exactly like NS.
inline bool plans_with_devices(ControllerVariant v) { return v == ControllerVariant::SA; }
inline bool deploys_devices(ControllerVariant v) { return v != ControllerVariant::NS; }

struct HourBlock {
  int first = 0;   // horizon offset
  int length = 0;
  bool pinned = false;  // held at the carried set point
};

inline std::vector<HourBlock> hour_block_constraints(const HourClock& clock, int horizon = 24) {
  if (clock.q < 0 || clock.q > 5) throw std::invalid_argument("slot index q must lie in 0..5");
  std::vector<HourBlock> blocks;
  int k = 0;
  if (clock.q != 0) {
    blocks.push_back({0, std::min(6 - clock.q, horizon), true});
    k = blocks.back().length;
  }
  while (k < horizon) {
    const int len = std::min(6, horizon - k);
    blocks.push_back({k, len, false});
    k += len;
  }
  return blocks;
}

// Exogenous inputs over the horizon.
struct Forecast {
  std::vector<double> outside_temp;            // per step
  std::vector<std::vector<double>> occupancy;  // [step][room], occupied fraction in [0, 1]
  std::vector<std::vector<bool>> arrivals;     // [step][room]; empty = inferred from occupancy

  bool occupied(std::size_t k, std::size_t room) const { return occupancy[k][room] > 0.0; }
};

struct EnergyTerms {
  double hvac_heat = 0, hvac_cool = 0, hvac_fan = 0, spot_heat = 0, spot_fan = 0;  // kW
  double total() const { return hvac_heat + hvac_cool + hvac_fan + spot_heat + spot_fan; }
};

inline EnergyTerms energy_terms(double u, std::span<const double> zone_flows, double mixer,
                                double cooler, std::span<const double> w, std::span<const double> va,
                                const MpcConfig& cfg, const ThermalParams& p) {
  const double vsum = std::accumulate(zone_flows.begin(), zone_flows.end(), 0.0);
  EnergyTerms e;
  e.hvac_heat = vsum * cfg.theta1(p) * (u - cooler);
  e.hvac_cool = vsum * cfg.theta2(p) * (mixer - cooler);
  e.hvac_fan = cfg.theta3 * vsum * vsum;
  e.spot_heat = cfg.theta4 * std::accumulate(w.begin(), w.end(), 0.0);
  e.spot_fan = cfg.theta5 * std::accumulate(va.begin(), va.end(), 0.0);
  return e;
}

// Nearest member of the device speed set, ties rounded up.
inline double round_fan_speed(double va) {
  const double idx = std::floor(std::clamp(va, 0.0, 1.0) * kFanLevels + 0.5 + 1e-9);
  return std::min(idx, static_cast<double>(kFanLevels)) / kFanLevels;
}

// Every symbol of the full formulation at one point.
struct DecisionVector {
  std::vector<double> u, r, mixer, cooler;           // per step
  std::vector<std::vector<double>> v;                // [step][zone]
  std::vector<std::vector<double>> w, va;            // [step][device room]
  std::vector<std::vector<double>> x;                // [0..N][room]
  std::vector<std::vector<double>> dx;               // [0..N][device room]
  std::vector<std::vector<double>> pmv;              // [1..N] stored at index k-1, [device room]
  std::vector<double> eps_lo, eps_hi;                // per banded room
};

struct Plan {
  std::optional<double> supply_temp;  // set only at hour boundaries
  double committed_supply_temp = 0;   // u applied over the first step
  std::vector<double> zone_flows;
  double reuse = 0;
  std::vector<double> device_duty;    // predicted w, first step, per device room
  std::vector<double> device_fan;     // predicted va rounded to the speed set
  std::vector<double> predicted_x;    // room temperatures at the end of the first step
};
class MpcProblem final : public NlpInstance {
 public:
  enum class Target { X, X1, Pmv, PmvArrival };

  // One-sided bound on a room expression at horizon time `t`.
  struct RoomBound {
    Target target = Target::X;
    std::size_t room = 0;
    int t = 0;          // state time 1..N (for X1, the offset is taken at t-1)
    int fan_step = -1;  // device fan step used for PMV
    double bound = 0;
    bool upper = false;
    int eps = -1;       // relaxation variable index into eps arrays
  };

  MpcProblem(const BuildingConfig& building, const MpcConfig& cfg, ControllerVariant variant,
             bool relaxed, const HourClock& clock, std::span<const RoomState> state,
             const Forecast& forecast)
      : b_(building),
        cfg_(cfg),
        variant_(variant),
        relaxed_(relaxed),
        clock_(clock),
        forecast_(forecast),
        model_(SimplifiedPmvModel::for_season(building.season)) {
    cfg_.validate();
    const std::size_t nr = b_.room_count();
    N_ = cfg_.horizon;
    if (b_.zones.empty() || nr == 0) throw std::invalid_argument("building has no rooms");
    if (state.size() != nr) throw std::invalid_argument("state does not match building layout");
    if (forecast.outside_temp.size() != static_cast<std::size_t>(N_) ||
        forecast.occupancy.size() != static_cast<std::size_t>(N_))
      throw std::invalid_argument("forecast length does not match horizon");
    for (const auto& o : forecast.occupancy)
      if (o.size() != nr) throw std::invalid_argument("forecast occupancy does not match rooms");

    rooms_ = b_.rooms();
    zone_of_ = b_.zone_of_room();
    nz_ = b_.zones.size();
    nr_ = nr;
    mats_ = build_discrete_matrices(b_.thermal, cfg_.tau, nr, b_.load);
    for (std::size_t j = 0; j < nr; ++j) {
      x0_.push_back(state[j].x);
      dx0_.push_back(state[j].delta_x);
      if (plans_with_devices(variant_) && rooms_[j].kind == RoomKind::TypeS) {
        device_index_.push_back(static_cast<int>(devices_.size()));
        devices_.push_back(j);
      } else {
        device_index_.push_back(-1);
      }
    }
    nd_ = devices_.size();
    if (variant_ == ControllerVariant::SA && devices_.empty())
      throw std::invalid_argument("SA planning needs at least one room with a device");
    for (std::size_t j = 0; j < nr; ++j)
      if (rooms_[j].kind == RoomKind::TypeS) {
        band_index_.push_back(static_cast<int>(banded_.size()));
        banded_.push_back(j);
      } else {
        band_index_.push_back(-1);
      }

    blocks_ = hour_block_constraints(clock_, N_);
    n_u_ = 0;
    for (const auto& blk : blocks_)
      if (!blk.pinned) ++n_u_;
    per_step_ = 4 + nz_ + 2 * nd_;
    const auto N = static_cast<std::size_t>(N_);
    x_base_ = per_step_ * N;
    dx_base_ = x_base_ + (N + 1) * nr_;
    p_base_ = dx_base_ + (N + 1) * nd_;
    e_base_ = p_base_ + N * nd_;
    n_ = e_base_ + (relaxed_ ? 2 * banded_.size() : 0);

    build_bounds();
    build_constraints();
  }

  // NlpInstance
  std::size_t dimension() const override { return n_; }
  std::size_t num_equalities() const override { return n_eq_; }
  std::size_t num_inequalities() const override { return n_ineq_; }
  std::span<const double> lower() const override { return lo_; }
  std::span<const double> upper() const override { return hi_; }

  double evaluate(std::span<const double> z, std::span<double> c) const override {
    rows(z, c, nullptr);
    return cfg_.objective_scale * objective_kj(z);
  }

  void jacobian(std::span<const double> z, std::vector<Triplet>& out) const override {
    std::vector<double> c(num_constraints());
    rows(z, c, &out);
  }

  void gradient(std::span<const double> z, double s, std::span<const double> wts,
                std::span<double> grad) const override {
    std::fill(grad.begin(), grad.end(), 0.0);
    if (s != 0.0) objective_gradient(z, s * cfg_.objective_scale, grad);
    std::vector<Triplet> jac;
    jacobian(z, jac);
    for (const auto& t : jac) grad[static_cast<std::size_t>(t.col())] += wts[static_cast<std::size_t>(t.row())] * t.value();
  }

  void hessian(std::span<const double> z, double s, std::span<const double> wts,
               std::vector<Triplet>& out) const override {
    auto put = [&](std::size_t a, std::size_t b, double v) {
      if (v == 0.0) return;
      if (a < b) std::swap(a, b);
      out.emplace_back(static_cast<int>(a), static_cast<int>(b), v);
    };
    const double os = s * cfg_.objective_scale;
    const double th1 = cfg_.theta1(b_.thermal), th2 = cfg_.theta2(b_.thermal);
    if (os != 0.0) {
      for (int k = 0; k < N_; ++k) {
        for (std::size_t a = 0; a < nz_; ++a) {
          put(iv(k, a), iu(k), os * cfg_.tau * th1);
          put(iv(k, a), itc(k), -os * cfg_.tau * (th1 + th2));
          put(iv(k, a), itm(k), os * cfg_.tau * th2);
          for (std::size_t b = 0; b <= a; ++b) put(iv(k, a), iv(k, b), os * cfg_.tau * 2 * cfg_.theta3);
        }
      }
      if (relaxed_) {
        const std::size_t m = banded_.size();
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < a; ++b) {
            double prod = os * cfg_.weight;
            for (std::size_t o = 0; o < m; ++o)
              if (o != a && o != b) prod *= 1.0 + z[ieps(o, false)] + z[ieps(o, true)];
            for (bool ha : {false, true})
              for (bool hb : {false, true}) put(ieps(a, ha), ieps(b, hb), prod);
          }
      }
    }
    std::size_t row = 0;
    for (int k = 0; k < N_; ++k)
      for (std::size_t j = 0; j < nr_; ++j) {
        const double lam = wts[row++];
        const auto jj = static_cast<Eigen::Index>(j);
        put(ix(k, j), iv(k, zone_of_[j]), -lam * mats_.A1(jj, jj));
        put(iu(k), iv(k, zone_of_[j]), -lam * mats_.B(jj));
      }
    row += static_cast<std::size_t>(N_) * nd_;  // offsets are linear
    for (int k = 0; k < N_; ++k)
      for (std::size_t d = 0; d < nd_; ++d) put(iva(k, d), iva(k, d), -wts[row++] * 2 * model_.c_v2);
    for (int k = 0; k < N_; ++k) {
      const double lam = wts[row++];
      for (std::size_t j = 0; j < nr_; ++j) put(ir(k), ix(k, j), -lam / static_cast<double>(nr_));
    }
    row = n_eq_;
    for (const auto& rb : room_bounds_) {
      const double lam = wts[row++];
      const int d = device_index_[rb.room];
      if (rb.target == Target::Pmv && d >= 0 && rb.fan_step == rb.t) {
        const double sign = rb.upper ? 1.0 : -1.0;
        put(iva(rb.fan_step, static_cast<std::size_t>(d)), iva(rb.fan_step, static_cast<std::size_t>(d)),
            lam * sign * 2 * model_.c_v2);
      }
    }
  }

  // Fills states, mixer and PMV values by forward simulation from the inputs,
  // equalizes hour blocks, caps T_c, and sizes eps to cover any violation.
  void complete_start(std::span<double> z) const override {
    for (const auto& blk : blocks_)
      for (int k = blk.first; k < blk.first + blk.length; ++k)
        z[iu(k)] = blk.pinned ? clock_.U : z[iu(blk.first)];
    for (std::size_t j = 0; j < nr_; ++j) z[ix(0, j)] = x0_[j];
    for (std::size_t d = 0; d < nd_; ++d) z[idx(0, d)] = dx0_[devices_[d]];
    for (int k = 0; k < N_; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      for (std::size_t j = 0; j < nr_; ++j) z[ix(k + 1, j)] = next_x(z, k, j);
      for (std::size_t d = 0; d < nd_; ++d) {
        const auto jj = static_cast<Eigen::Index>(devices_[d]);
        z[idx(k + 1, d)] = mats_.A0_tilde(jj, jj) * z[idx(k, d)] + mats_.B_tilde(jj, jj) * z[iw(k, d)];
        z[ip(k + 1, d)] = pmv_simplified(model_, z[ix(k + 1, devices_[d])] + z[idx(k + 1, d)], z[iva(k, d)]);
      }
      z[itm(k)] = z[ir(k)] * mean_x(z, k) + (1 - z[ir(k)]) * forecast_.outside_temp[kk];
      z[itc(k)] = std::clamp(std::min({z[itc(k)], z[itm(k)], z[iu(k)]}), lo_[itc(k)], hi_[itc(k)]);
    }
    if (relaxed_) {
      for (std::size_t i = e_base_; i < n_; ++i) z[i] = 0.0;
      std::vector<double> need(2 * banded_.size(), 0.0);
      for (const auto& rb : room_bounds_)
        if (rb.eps >= 0) {
          const double v = bound_value(rb, z);
          auto& n = need[2 * static_cast<std::size_t>(rb.eps) + (rb.upper ? 1 : 0)];
          n = std::max(n, v);
        }
      for (std::size_t e = 0; e < need.size(); ++e)
        z[e_base_ + e] = std::min(cfg_.eps_max, need[e] > 0 ? need[e] + 1e-3 : 0.0);
    }
  }

  // Layout accessors.
  int horizon() const { return N_; }
  std::size_t num_free_supply_values() const { return static_cast<std::size_t>(n_u_); }
  std::size_t num_devices() const { return nd_; }
  std::size_t num_banded_rooms() const { return banded_.size(); }
  bool relaxed() const { return relaxed_; }
  ControllerVariant variant() const { return variant_; }
  const HourClock& clock() const { return clock_; }
  const std::vector<HourBlock>& blocks() const { return blocks_; }
  const std::vector<std::size_t>& device_rooms() const { return devices_; }
  const std::vector<std::size_t>& banded_rooms() const { return banded_; }
  const std::vector<RoomBound>& room_bounds() const { return room_bounds_; }

  std::size_t iu(int k) const { return step_base(k); }
  std::size_t iv(int k, std::size_t zone) const { return step_base(k) + 1 + zone; }
  std::size_t ir(int k) const { return step_base(k) + 1 + nz_; }
  std::size_t itm(int k) const { return step_base(k) + 2 + nz_; }
  std::size_t itc(int k) const { return step_base(k) + 3 + nz_; }
  std::size_t iw(int k, std::size_t d) const { return step_base(k) + 4 + nz_ + 2 * d; }
  std::size_t iva(int k, std::size_t d) const { return step_base(k) + 5 + nz_ + 2 * d; }
  std::size_t ix(int t, std::size_t room) const { return x_base_ + static_cast<std::size_t>(t) * nr_ + room; }
  std::size_t idx(int t, std::size_t d) const { return dx_base_ + static_cast<std::size_t>(t) * nd_ + d; }
  std::size_t ip(int t, std::size_t d) const { return p_base_ + static_cast<std::size_t>(t - 1) * nd_ + d; }
  std::size_t ieps(std::size_t e, bool high) const { return e_base_ + 2 * e + (high ? 1 : 0); }

  // Energy over the horizon in kJ (without the relaxation penalty).
  double energy_kj(std::span<const double> z) const {
    double total = 0;
    std::vector<double> v(nz_), w(nd_), va(nd_);
    for (int k = 0; k < N_; ++k) {
      for (std::size_t a = 0; a < nz_; ++a) v[a] = z[iv(k, a)];
      for (std::size_t d = 0; d < nd_; ++d) {
        w[d] = z[iw(k, d)];
        va[d] = z[iva(k, d)];
      }
      total += cfg_.tau * energy_terms(z[iu(k)], v, z[itm(k)], z[itc(k)], w, va, cfg_, b_.thermal).total();
    }
    return total;
  }

  double penalty(std::span<const double> z) const {
    if (!relaxed_) return 0.0;
    double prod = cfg_.weight;
    for (std::size_t e = 0; e < banded_.size(); ++e) prod *= 1.0 + z[ieps(e, false)] + z[ieps(e, true)];
    return prod;
  }

  // Energy plus relaxation penalty, kJ.
  double objective_kj(std::span<const double> z) const { return energy_kj(z) + penalty(z); }

  DecisionVector expand(std::span<const double> z) const {
    DecisionVector dv;
    for (int k = 0; k < N_; ++k) {
      dv.u.push_back(z[iu(k)]);
      dv.r.push_back(z[ir(k)]);
      dv.mixer.push_back(z[itm(k)]);
      dv.cooler.push_back(z[itc(k)]);
      std::vector<double> vk, wk, vak;
      for (std::size_t a = 0; a < nz_; ++a) vk.push_back(z[iv(k, a)]);
      for (std::size_t d = 0; d < nd_; ++d) {
        wk.push_back(z[iw(k, d)]);
        vak.push_back(z[iva(k, d)]);
      }
      dv.v.push_back(vk);
      dv.w.push_back(wk);
      dv.va.push_back(vak);
    }
    for (int t = 0; t <= N_; ++t) {
      std::vector<double> xs, ds;
      for (std::size_t j = 0; j < nr_; ++j) xs.push_back(z[ix(t, j)]);
      for (std::size_t d = 0; d < nd_; ++d) ds.push_back(z[idx(t, d)]);
      dv.x.push_back(xs);
      dv.dx.push_back(ds);
    }
    for (int t = 1; t <= N_; ++t) {
      std::vector<double> ps;
      for (std::size_t d = 0; d < nd_; ++d) ps.push_back(z[ip(t, d)]);
      dv.pmv.push_back(ps);
    }
    if (relaxed_)
      for (std::size_t e = 0; e < banded_.size(); ++e) {
        dv.eps_lo.push_back(z[ieps(e, false)]);
        dv.eps_hi.push_back(z[ieps(e, true)]);
      }
    return dv;
  }

  struct Residual {
    std::string name;
    double value;  // equality residual or inequality value (<= 0 feasible)
    bool equality;
  };

  // Every constraint evaluated independently on an expanded point, bounds
  // included.
  std::vector<Residual> full_residuals(const DecisionVector& dv) const {
    std::vector<Residual> out;
    const std::size_t nr = nr_;
    auto eq = [&](std::string n, double v) { out.push_back({std::move(n), v, true}); };
    auto le = [&](std::string n, double v) { out.push_back({std::move(n), v, false}); };
    for (std::size_t j = 0; j < nr; ++j) eq("x0[" + std::to_string(j) + "]", dv.x[0][j] - x0_[j]);
    for (std::size_t d = 0; d < nd_; ++d) eq("dx0[" + std::to_string(d) + "]", dv.dx[0][d] - dx0_[devices_[d]]);
    for (int k = 0; k < N_; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const std::string ks = "[" + std::to_string(k) + "]";
      for (std::size_t j = 0; j < nr; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        double next = mats_.D1(jj) * forecast_.outside_temp[kk] + mats_.D2(jj, jj) * forecast_.occupancy[kk][j];
        for (std::size_t l = 0; l < nr; ++l) next += mats_.A0(jj, static_cast<Eigen::Index>(l)) * dv.x[kk][l];
        const double v = dv.v[kk][zone_of_[j]];
        next += mats_.A1(jj, jj) * dv.x[kk][j] * v + mats_.B(jj) * dv.u[kk] * v;
        eq("dynamics" + ks + "[" + std::to_string(j) + "]", dv.x[kk + 1][j] - next);
      }
      for (std::size_t d = 0; d < nd_; ++d) {
        const auto jj = static_cast<Eigen::Index>(devices_[d]);
        eq("offset" + ks + "[" + std::to_string(d) + "]",
           dv.dx[kk + 1][d] - mats_.A0_tilde(jj, jj) * dv.dx[kk][d] - mats_.B_tilde(jj, jj) * dv.w[kk][d]);
        eq("pmv" + ks + "[" + std::to_string(d) + "]",
           dv.pmv[kk][d] - pmv_simplified(model_, dv.x[kk + 1][devices_[d]] + dv.dx[kk + 1][d], dv.va[kk][d]));
        const double o = forecast_.occupied(kk, devices_[d]) ? 1.0 : 0.0;
        le("w_gate" + ks, dv.w[kk][d] - o);
        le("va_gate" + ks, dv.va[kk][d] - o * cfg_.va_max);
        le("w_nonneg" + ks, -dv.w[kk][d]);
        le("va_nonneg" + ks, -dv.va[kk][d]);
      }
      double mean = 0;
      for (double xv : dv.x[kk]) mean += xv;
      mean /= static_cast<double>(nr);
      eq("mixer" + ks, dv.mixer[kk] - (dv.r[kk] * mean + (1 - dv.r[kk]) * forecast_.outside_temp[kk]));
      le("cooler_le_mixer" + ks, dv.cooler[kk] - dv.mixer[kk]);
      le("cooler_le_supply" + ks, dv.cooler[kk] - dv.u[kk]);
      le("u_min" + ks, cfg_.u_min - dv.u[kk]);
      le("u_max" + ks, dv.u[kk] - cfg_.u_max);
      le("r_min" + ks, -dv.r[kk]);
      le("r_max" + ks, dv.r[kk] - cfg_.r_max);
      double vs = 0;
      for (std::size_t a = 0; a < nz_; ++a) {
        vs += dv.v[kk][a];
        le("v_min" + ks, zone_flow_min(k, a) - dv.v[kk][a]);
        le("v_max" + ks, dv.v[kk][a] - cfg_.zone_flow_max(b_.thermal));
      }
      if (any_occupied(k)) le("v_sum_min" + ks, cfg_.v_min - vs);
      le("v_sum_max" + ks, vs - cfg_.v_max);
    }
    for (const auto& blk : blocks_)
      for (int k = blk.first + 1; k < blk.first + blk.length; ++k)
        eq("hour_block[" + std::to_string(k) + "]",
           dv.u[static_cast<std::size_t>(k)] - dv.u[static_cast<std::size_t>(blk.first)]);
    for (const auto& blk : blocks_)
      if (blk.pinned) eq("hour_pin", dv.u[static_cast<std::size_t>(blk.first)] - clock_.U);
    for (const auto& rb : room_bounds_) {
      const auto t = static_cast<std::size_t>(rb.t);
      const int d = device_index_[rb.room];
      const auto du = static_cast<std::size_t>(d);
      double e = 0;
      switch (rb.target) {
        case Target::X: e = dv.x[t][rb.room]; break;
        case Target::X1: e = dv.x[t][rb.room] + (d >= 0 ? d3() * dv.dx[t - 1][du] : 0.0); break;
        case Target::Pmv:
          if (d >= 0 && rb.fan_step == rb.t - 1)
            e = dv.pmv[t - 1][du];
          else if (d >= 0)
            e = pmv_simplified(model_, dv.x[t][rb.room] + dv.dx[t][du], dv.va[static_cast<std::size_t>(rb.fan_step)][du]);
          else
            e = pmv_simplified(model_, dv.x[t][rb.room], 0.0);
          break;
        case Target::PmvArrival:
          e = pmv_simplified(model_, dv.x[t][rb.room] + dv.dx[t][du], rb.upper ? cfg_.arrival_fan : 0.0);
          break;
      }
      double eps = 0;
      if (rb.eps >= 0)
        eps = rb.upper ? dv.eps_hi[static_cast<std::size_t>(rb.eps)] : dv.eps_lo[static_cast<std::size_t>(rb.eps)];
      le("room_bound[" + std::to_string(rb.room) + "," + std::to_string(rb.t) + "]",
         rb.upper ? e - rb.bound - eps : rb.bound - e - eps);
    }
    for (double e : dv.eps_lo) le("eps_lo_nonneg", -e);
    for (double e : dv.eps_hi) le("eps_hi_nonneg", -e);
    return out;
  }

  static double max_violation(std::span<const Residual> rs) {
    double m = 0;
    for (const auto& r : rs) m = std::max(m, r.equality ? std::abs(r.value) : r.value);
    return m;
  }

  Plan extract_plan(std::span<const double> z) const {
    Plan p;
    p.committed_supply_temp = z[iu(0)];
    if (clock_.q == 0) p.supply_temp = p.committed_supply_temp;
    for (std::size_t a = 0; a < nz_; ++a) p.zone_flows.push_back(z[iv(0, a)]);
    p.reuse = z[ir(0)];
    for (std::size_t d = 0; d < nd_; ++d) {
      p.device_duty.push_back(z[iw(0, d)]);
      p.device_fan.push_back(round_fan_speed(z[iva(0, d)]));
    }
    for (std::size_t j = 0; j < nr_; ++j) p.predicted_x.push_back(z[ix(1, j)]);
    return p;
  }

  // Start point from a previous plan shifted by one step, states re-simulated.
  std::vector<double> shifted_guess(const MpcProblem& prev, std::span<const double> zp) const {
    std::vector<double> z(n_, 0.0);
    for (int k = 0; k < N_; ++k) {
      const int src = std::min(k + 1, prev.N_ - 1);
      z[iu(k)] = zp[prev.iu(src)];
      for (std::size_t a = 0; a < nz_ && a < prev.nz_; ++a) z[iv(k, a)] = zp[prev.iv(src, a)];
      z[ir(k)] = zp[prev.ir(src)];
      z[itc(k)] = zp[prev.itc(src)];
      for (std::size_t d = 0; d < nd_ && d < prev.nd_; ++d) {
        z[iw(k, d)] = zp[prev.iw(src, d)];
        z[iva(k, d)] = zp[prev.iva(src, d)];
      }
    }
    for (std::size_t i = 0; i < n_; ++i) z[i] = std::clamp(z[i], lo_[i], hi_[i]);
    complete_start(z);
    for (std::size_t i = 0; i < n_; ++i) z[i] = std::clamp(z[i], lo_[i], hi_[i]);
    return z;
  }

  nlohmann::json dump(std::span<const double> z) const {
    nlohmann::json j;
    j["variant"] = to_string(variant_);
    j["relaxed"] = relaxed_;
    j["clock"] = {{"p", clock_.p}, {"q", clock_.q}, {"U", clock_.U}};
    j["horizon"] = N_;
    j["tau"] = cfg_.tau;
    nlohmann::json layout = nlohmann::json::array();
    for (std::size_t i = 0; i < n_; ++i)
      layout.push_back({{"index", i}, {"name", variable_name(i)}, {"lower", lo_[i]}, {"upper", hi_[i]},
                        {"value", z[i]}});
    j["variables"] = layout;
    j["num_equalities"] = n_eq_;
    j["num_inequalities"] = n_ineq_;
    j["objective_kj"] = objective_kj(z);
    j["energy_kj"] = energy_kj(z);
    const auto res = full_residuals(expand(z));
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : res) rj.push_back({{"name", r.name}, {"value", r.value}, {"equality", r.equality}});
    j["residuals"] = rj;
    j["max_violation"] = max_violation(res);
    return j;
  }

  std::string variable_name(std::size_t i) const {
    auto br = [](std::size_t a) { return "[" + std::to_string(a) + "]"; };
    if (i < x_base_) {
      const std::size_t k = i / per_step_, o = i % per_step_;
      if (o == 0) return "u" + br(k);
      if (o < 1 + nz_) return "v" + br(k) + br(o - 1);
      if (o == 1 + nz_) return "r" + br(k);
      if (o == 2 + nz_) return "T_m" + br(k);
      if (o == 3 + nz_) return "T_c" + br(k);
      const std::size_t d = (o - 4 - nz_) / 2;
      return ((o - 4 - nz_) % 2 == 0 ? "w" : "va") + br(k) + br(devices_[d]);
    }
    if (i < dx_base_) return "x" + br((i - x_base_) / nr_) + br((i - x_base_) % nr_);
    if (i < p_base_) return "dx" + br((i - dx_base_) / nd_) + br(devices_[(i - dx_base_) % nd_]);
    if (i < e_base_) return "P" + br((i - p_base_) / nd_ + 1) + br(devices_[(i - p_base_) % nd_]);
    const std::size_t e = i - e_base_;
    return (e % 2 == 0 ? "eps_lo" : "eps_hi") + br(banded_[e / 2]);
  }

 private:
  struct FlowCons {
    int k;
    double bound;
    bool upper;
  };

  std::size_t step_base(int k) const { return per_step_ * static_cast<std::size_t>(k); }
  double d3() const { return mats_.D3(0, 0); }

  // Step k may contain an arrival. Without explicit arrivals: partially
  // occupied, or following a step that was not fully occupied.
  bool arrival_step(int k, std::size_t j) const {
    const auto kk = static_cast<std::size_t>(k);
    if (!forecast_.arrivals.empty()) return forecast_.arrivals[kk][j];
    const double o = forecast_.occupancy[kk][j];
    if (o <= 0.0) return false;
    return o < 1.0 || k == 0 || forecast_.occupancy[kk - 1][j] < 1.0;
  }

  double margin(int t) const {
    return std::min(cfg_.comfort_margin + cfg_.comfort_margin_step * (t - 1), cfg_.comfort_margin_max);
  }

  bool any_occupied(int k) const {
    for (double o : forecast_.occupancy[static_cast<std::size_t>(k)])
      if (o > 0) return true;
    return false;
  }
  bool zone_occupied(int k, std::size_t zone) const {
    for (std::size_t j = 0; j < nr_; ++j)
      if (zone_of_[j] == zone && forecast_.occupied(static_cast<std::size_t>(k), j)) return true;
    return false;
  }
  double zone_flow_min(int k, std::size_t zone) const {
    if (!zone_occupied(k, zone)) return 0.0;
    if (nz_ == 1) return cfg_.v_min;
    return cfg_.v_min * static_cast<double>(b_.zones[zone].rooms.size()) / static_cast<double>(nr_);
  }

  double mean_x(std::span<const double> z, int t) const {
    double s = 0;
    for (std::size_t j = 0; j < nr_; ++j) s += z[ix(t, j)];
    return s / static_cast<double>(nr_);
  }

  // Model prediction of x_j(k+1).
  double next_x(std::span<const double> z, int k, std::size_t j) const {
    const auto kk = static_cast<std::size_t>(k);
    const auto jj = static_cast<Eigen::Index>(j);
    const double v = z[iv(k, zone_of_[j])];
    double next = mats_.A1(jj, jj) * z[ix(k, j)] * v + mats_.B(jj) * z[iu(k)] * v +
                  mats_.D1(jj) * forecast_.outside_temp[kk] + mats_.D2(jj, jj) * forecast_.occupancy[kk][j];
    for (std::size_t l = 0; l < nr_; ++l) next += mats_.A0(jj, static_cast<Eigen::Index>(l)) * z[ix(k, l)];
    return next;
  }

  void objective_gradient(std::span<const double> z, double os, std::span<double> grad) const {
    const double th1 = cfg_.theta1(b_.thermal), th2 = cfg_.theta2(b_.thermal);
    const double t = os * cfg_.tau;
    for (int k = 0; k < N_; ++k) {
      double vsum = 0;
      for (std::size_t a = 0; a < nz_; ++a) vsum += z[iv(k, a)];
      const double u = z[iu(k)], tc = z[itc(k)], tm = z[itm(k)];
      const double dv = t * (th1 * (u - tc) + th2 * (tm - tc) + 2 * cfg_.theta3 * vsum);
      for (std::size_t a = 0; a < nz_; ++a) grad[iv(k, a)] += dv;
      grad[iu(k)] += t * th1 * vsum;
      grad[itc(k)] -= t * (th1 + th2) * vsum;
      grad[itm(k)] += t * th2 * vsum;
      for (std::size_t d = 0; d < nd_; ++d) {
        grad[iw(k, d)] += t * cfg_.theta4;
        grad[iva(k, d)] += t * cfg_.theta5;
      }
    }
    if (relaxed_) {
      const std::size_t m = banded_.size();
      for (std::size_t e = 0; e < m; ++e) {
        double prod = os * cfg_.weight;
        for (std::size_t o = 0; o < m; ++o)
          if (o != e) prod *= 1.0 + z[ieps(o, false)] + z[ieps(o, true)];
        grad[ieps(e, false)] += prod;
        grad[ieps(e, true)] += prod;
      }
    }
  }

  // Signed inequality value of a room bound (<= 0 feasible).
  double bound_value(const RoomBound& rb, std::span<const double> z) const {
    const int d = device_index_[rb.room];
    const auto du = static_cast<std::size_t>(d);
    double e = 0;
    switch (rb.target) {
      case Target::X: e = z[ix(rb.t, rb.room)]; break;
      case Target::X1: e = z[ix(rb.t, rb.room)] + (d >= 0 ? d3() * z[idx(rb.t - 1, du)] : 0.0); break;
      case Target::Pmv:
        if (d >= 0 && rb.fan_step == rb.t - 1)
          e = z[ip(rb.t, du)];
        else if (d >= 0)
          e = pmv_simplified(model_, z[ix(rb.t, rb.room)] + z[idx(rb.t, du)], z[iva(rb.fan_step, du)]);
        else
          e = pmv_simplified(model_, z[ix(rb.t, rb.room)], 0.0);
        break;
      case Target::PmvArrival:
        e = pmv_simplified(model_, z[ix(rb.t, rb.room)] + z[idx(rb.t, du)], rb.upper ? cfg_.arrival_fan : 0.0);
        break;
    }
    double c = rb.upper ? e - rb.bound : rb.bound - e;
    if (rb.eps >= 0) c -= z[ieps(static_cast<std::size_t>(rb.eps), rb.upper)];
    return c;
  }

  // Constraint values, plus Jacobian triplets when `jac` is set.
  void rows(std::span<const double> z, std::span<double> c, std::vector<Triplet>* jac) const {
    std::size_t row = 0;
    auto J = [&](std::size_t col, double v) {
      if (jac) jac->emplace_back(static_cast<int>(row), static_cast<int>(col), v);
    };
    for (int k = 0; k < N_; ++k)
      for (std::size_t j = 0; j < nr_; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const std::size_t vi = iv(k, zone_of_[j]);
        const double v = z[vi];
        c[row] = z[ix(k + 1, j)] - next_x(z, k, j);
        if (jac) {
          J(ix(k + 1, j), 1.0);
          for (std::size_t l = 0; l < nr_; ++l) {
            double a = mats_.A0(jj, static_cast<Eigen::Index>(l));
            if (l == j) a += mats_.A1(jj, jj) * v;
            if (a != 0.0) J(ix(k, l), -a);
          }
          J(vi, -(mats_.A1(jj, jj) * z[ix(k, j)] + mats_.B(jj) * z[iu(k)]));
          J(iu(k), -mats_.B(jj) * v);
        }
        ++row;
      }
    for (int k = 0; k < N_; ++k)
      for (std::size_t d = 0; d < nd_; ++d) {
        const auto jj = static_cast<Eigen::Index>(devices_[d]);
        c[row] = z[idx(k + 1, d)] - mats_.A0_tilde(jj, jj) * z[idx(k, d)] - mats_.B_tilde(jj, jj) * z[iw(k, d)];
        J(idx(k + 1, d), 1.0);
        J(idx(k, d), -mats_.A0_tilde(jj, jj));
        J(iw(k, d), -mats_.B_tilde(jj, jj));
        ++row;
      }
    for (int k = 0; k < N_; ++k)
      for (std::size_t d = 0; d < nd_; ++d) {
        const std::size_t j = devices_[d];
        const double va = z[iva(k, d)];
        c[row] = z[ip(k + 1, d)] - pmv_simplified(model_, z[ix(k + 1, j)] + z[idx(k + 1, d)], va);
        J(ip(k + 1, d), 1.0);
        J(ix(k + 1, j), -model_.c_t);
        J(idx(k + 1, d), -model_.c_t);
        J(iva(k, d), -(2 * model_.c_v2 * va + model_.c_v1));
        ++row;
      }
    for (int k = 0; k < N_; ++k) {
      const double to = forecast_.outside_temp[static_cast<std::size_t>(k)];
      const double r = z[ir(k)], mx = mean_x(z, k);
      c[row] = z[itm(k)] - r * mx - (1 - r) * to;
      J(itm(k), 1.0);
      J(ir(k), -(mx - to));
      for (std::size_t j = 0; j < nr_; ++j) J(ix(k, j), -r / static_cast<double>(nr_));
      ++row;
    }
    for (const auto& blk : blocks_) {
      if (blk.pinned) continue;
      for (int k = blk.first + 1; k < blk.first + blk.length; ++k) {
        c[row] = z[iu(k)] - z[iu(blk.first)];
        J(iu(k), 1.0);
        J(iu(blk.first), -1.0);
        ++row;
      }
    }
    // Inequalities.
    for (const auto& rb : room_bounds_) {
      c[row] = bound_value(rb, z);
      if (jac) {
        const double sg = rb.upper ? 1.0 : -1.0;
        const int d = device_index_[rb.room];
        const auto du = static_cast<std::size_t>(d);
        switch (rb.target) {
          case Target::X: J(ix(rb.t, rb.room), sg); break;
          case Target::X1:
            J(ix(rb.t, rb.room), sg);
            if (d >= 0) J(idx(rb.t - 1, du), sg * d3());
            break;
          case Target::Pmv:
            if (d >= 0 && rb.fan_step == rb.t - 1) {
              J(ip(rb.t, du), sg);
            } else if (d >= 0) {
              const double va = z[iva(rb.fan_step, du)];
              J(ix(rb.t, rb.room), sg * model_.c_t);
              J(idx(rb.t, du), sg * model_.c_t);
              J(iva(rb.fan_step, du), sg * (2 * model_.c_v2 * va + model_.c_v1));
            } else {
              J(ix(rb.t, rb.room), sg * model_.c_t);
            }
            break;
          case Target::PmvArrival:
            J(ix(rb.t, rb.room), sg * model_.c_t);
            J(idx(rb.t, du), sg * model_.c_t);
            break;
        }
        if (rb.eps >= 0) J(ieps(static_cast<std::size_t>(rb.eps), rb.upper), -1.0);
      }
      ++row;
    }
    for (int k = 0; k < N_; ++k) {
      c[row] = z[itc(k)] - z[itm(k)];
      J(itc(k), 1.0);
      J(itm(k), -1.0);
      ++row;
      c[row] = z[itc(k)] - z[iu(k)];
      J(itc(k), 1.0);
      J(iu(k), -1.0);
      ++row;
    }
    for (const auto& fc : flow_cons_) {
      double s = 0;
      for (std::size_t a = 0; a < nz_; ++a) s += z[iv(fc.k, a)];
      c[row] = fc.upper ? s - fc.bound : fc.bound - s;
      for (std::size_t a = 0; a < nz_; ++a) J(iv(fc.k, a), fc.upper ? 1.0 : -1.0);
      ++row;
    }
  }

  void build_bounds() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    lo_.assign(n_, 0.0);
    hi_.assign(n_, 0.0);
    const double to_min = *std::min_element(forecast_.outside_temp.begin(), forecast_.outside_temp.end());
    const double tc_lo = std::min(cfg_.u_min, to_min) - 1.0;
    std::vector<bool> pinned(static_cast<std::size_t>(N_), false);
    for (const auto& blk : blocks_)
      if (blk.pinned)
        for (int k = blk.first; k < blk.first + blk.length; ++k) pinned[static_cast<std::size_t>(k)] = true;
    for (int k = 0; k < N_; ++k) {
      if (pinned[static_cast<std::size_t>(k)]) {
        lo_[iu(k)] = hi_[iu(k)] = clock_.U;
      } else {
        lo_[iu(k)] = cfg_.u_min;
        hi_[iu(k)] = cfg_.u_max;
      }
      for (std::size_t a = 0; a < nz_; ++a) {
        lo_[iv(k, a)] = zone_flow_min(k, a);
        hi_[iv(k, a)] = cfg_.zone_flow_max(b_.thermal);
      }
      lo_[ir(k)] = 0.0;
      hi_[ir(k)] = cfg_.r_max;
      lo_[itm(k)] = -inf;
      hi_[itm(k)] = inf;
      lo_[itc(k)] = tc_lo;
      hi_[itc(k)] = cfg_.u_max;
      for (std::size_t d = 0; d < nd_; ++d) {
        const double o = forecast_.occupied(static_cast<std::size_t>(k), devices_[d]) ? 1.0 : 0.0;
        hi_[iw(k, d)] = o;
        hi_[iva(k, d)] = o * cfg_.va_max;
      }
    }
    for (std::size_t i = x_base_; i < e_base_; ++i) {
      lo_[i] = -inf;
      hi_[i] = inf;
    }
    for (std::size_t j = 0; j < nr_; ++j) lo_[ix(0, j)] = hi_[ix(0, j)] = x0_[j];
    for (std::size_t d = 0; d < nd_; ++d) lo_[idx(0, d)] = hi_[idx(0, d)] = dx0_[devices_[d]];
    for (std::size_t i = e_base_; i < n_; ++i) hi_[i] = cfg_.eps_max;
  }

  void build_constraints() {
    auto add = [&](Target tg, std::size_t j, int t, int fan, double bound, bool upper, int eps) {
      room_bounds_.push_back({tg, j, t, fan, bound, upper, eps});
    };
    for (int t = 1; t <= N_; ++t) {
      const int k = t - 1;  // step that ends at t
      for (std::size_t j = 0; j < nr_; ++j) {
        add(Target::X, j, t, -1, cfg_.gamma_lo, false, -1);
        add(Target::X, j, t, -1, cfg_.gamma_hi, true, -1);
        if (!forecast_.occupied(static_cast<std::size_t>(k), j)) continue;
        if (device_index_[j] >= 0) {
          add(Target::X1, j, t, -1, cfg_.gamma_lo, false, -1);
          add(Target::X1, j, t, -1, cfg_.gamma_hi, true, -1);
        }
        if (rooms_[j].kind == RoomKind::TypeSBar) {
          for (int tt : {t - 1, t}) {
            if (tt < 1) continue;
            const double m = margin(tt) / model_.c_t;
            add(Target::X, j, tt, -1, cfg_.kappa_lo + m, false, -1);
            add(Target::X, j, tt, -1, cfg_.kappa_hi - m, true, -1);
          }
          continue;
        }
        // Occupant band at both ends of the occupied step, with that step's fan.
        const ComfortBand& band = rooms_[j].band;
        const int eps = relaxed_ ? band_index_[j] : -1;
        for (int tt : {t - 1, t}) {
          if (tt < 1) continue;
          add(Target::Pmv, j, tt, k, band.lo + margin(tt), false, eps);
          add(Target::Pmv, j, tt, k, band.hi - margin(tt), true, eps);
        }
        // A device restarts from rest on arrival, so the room has to be
        // acceptable before the fan catches up.
        if (device_index_[j] >= 0 && arrival_step(k, j))
          for (int tt : {t - 1, t}) {
            if (tt < 1) continue;
            add(Target::PmvArrival, j, tt, -1, band.lo + margin(tt), false, eps);
            add(Target::PmvArrival, j, tt, -1, band.hi - margin(tt), true, eps);
          }
      }
    }
    for (int k = 0; k < N_; ++k) {
      if (nz_ > 1 && any_occupied(k)) flow_cons_.push_back({k, cfg_.v_min, false});
      if (nz_ > 1) flow_cons_.push_back({k, cfg_.v_max, true});
    }
    std::size_t chains = 0;
    for (const auto& blk : blocks_)
      if (!blk.pinned) chains += static_cast<std::size_t>(blk.length - 1);
    const auto N = static_cast<std::size_t>(N_);
    n_eq_ = N * nr_ + 2 * N * nd_ + N + chains;
    n_ineq_ = room_bounds_.size() + 2 * N + flow_cons_.size();
  }

  BuildingConfig b_;
  MpcConfig cfg_;
  ControllerVariant variant_;
  bool relaxed_;
  HourClock clock_;
  Forecast forecast_;
  SimplifiedPmvModel model_;
  int N_ = 0;
  std::vector<RoomSpec> rooms_;
  std::vector<std::size_t> zone_of_;
  std::size_t nz_ = 0, nr_ = 0, nd_ = 0;
  DiscreteMatrices mats_;
  std::vector<double> x0_, dx0_;
  std::vector<std::size_t> devices_;  // room index per device
  std::vector<int> device_index_;     // per room, -1 when not planned with a device
  std::vector<std::size_t> banded_;
  std::vector<int> band_index_;
  std::vector<HourBlock> blocks_;
  int n_u_ = 0;
  std::size_t per_step_ = 0, x_base_ = 0, dx_base_ = 0, p_base_ = 0, e_base_ = 0, n_ = 0;
  std::vector<double> lo_, hi_;
  std::vector<RoomBound> room_bounds_;
  std::vector<FlowCons> flow_cons_;
  std::size_t n_eq_ = 0, n_ineq_ = 0;
};

inline MpcProblem build_problem(const BuildingConfig& building, std::span<const RoomState> state,
                                const HourClock& clock, const Forecast& forecast,
                                const MpcConfig& cfg, ControllerVariant variant, bool relaxed) {
  return MpcProblem(building, cfg, variant, relaxed, clock, state, forecast);
}

}  // namespace spotmpc
