// Bilinear lumped-capacitance thermal model for office rooms served by a
// central AHU/VAV system, with an optional desk-level heater region.
//
// A zone is a set of rooms that share one VAV flow v. Every room in the zone
// receives the same supply air (temperature u, flow v). A room with a personal
// device (RoomKind::TypeS) carries an extra state: the temperature offset of the
// device region over the room air, delta_x.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotmpc {

enum class RoomKind { TypeS, TypeSBar };

inline const char* to_string(RoomKind kind) { return kind == RoomKind::TypeS ? "S" : "Sbar"; }

struct ThermalParams {
  double capacity = 2000.0;        // C, kJ/K
  double spot_capacity = 200.0;    // C~, kJ/K (device region)
  double alpha_outside = 0.048;    // kJ/(K s)
  double alpha_region = 0.1425;    // kJ/(K s), device region <-> room air
  double air_density = 1.2041;     // kg/m^3
  double air_specific_heat = 1.0;  // kJ/(kg K)
  double heater_power = 0.7;       // Q_h, kW
  // Room-to-room coupling inside the zone; empty means insulated rooms.
  std::vector<std::vector<double>> alpha_inter;

  double rho_sigma() const { return air_density * air_specific_heat; }

  double coupling(std::size_t from, std::size_t to) const {
    if (alpha_inter.empty()) return 0.0;
    return alpha_inter.at(from).at(to);
  }

  void validate(std::size_t zone_size) const {
    if (!(capacity > 0 && spot_capacity > 0 && alpha_outside > 0 && alpha_region > 0 &&
          air_density > 0 && air_specific_heat > 0 && heater_power > 0))
      throw std::invalid_argument("thermal parameters must be strictly positive");
    if (!(spot_capacity < capacity))
      throw std::invalid_argument("device region capacity must be below the room capacity");
    if (alpha_inter.empty()) return;
    if (alpha_inter.size() != zone_size)
      throw std::invalid_argument("coupling matrix does not match zone size");
    for (std::size_t i = 0; i < zone_size; ++i) {
      if (alpha_inter[i].size() != zone_size)
        throw std::invalid_argument("coupling matrix must be square");
      if (alpha_inter[i][i] != 0.0) throw std::invalid_argument("coupling diagonal must be zero");
      for (std::size_t j = 0; j < zone_size; ++j) {
        if (alpha_inter[i][j] < 0) throw std::invalid_argument("coupling must be nonnegative");
        if (alpha_inter[i][j] != alpha_inter[j][i])
          throw std::invalid_argument("coupling matrix must be symmetric");
      }
    }
  }
};

struct RoomState {
  double x = 20.0;              // room air temperature, degC
  double delta_x = 0.0;         // device-region offset, K (Type S only)
  double delta_x_prev = 0.0;    // offset one step earlier

  // Device region (occupant) temperature.
  double x2() const { return x + delta_x; }
  // Rest of the room, warmed by convection from the device region.
  double x1(double d3) const { return x + d3 * delta_x_prev; }
};

// Inputs seen by one room over a step. Flow is the zone VAV flow.
struct RoomInputs {
  double supply_temp = 20.0;  // u, degC
  double flow = 0.0;          // v, m^3/s
  double outside_temp = 20.0; // T_o, degC
  bool occupied = false;
  double load = 0.0;          // d, kW while occupied
};

struct Neighbor {
  double coupling = 0.0;  // kJ/(K s)
  double temp = 20.0;     // degC
};

struct HvacCommand {
  double supply_temp = 20.0;   // u
  std::vector<double> flows;   // v per zone
  double reuse = 0.0;          // r
  double mixer_temp = 20.0;    // T_m
  double cooler_temp = 20.0;   // T_c
};

// dx/dt in K/s for one room (continuous-time energy balance).
inline double continuous_rhs(double x, std::span<const Neighbor> neighbors, const RoomInputs& in,
                             const ThermalParams& p) {
  double conduction = -p.alpha_outside * x;
  for (const auto& n : neighbors) conduction += n.coupling * n.temp;
  const double rs = p.rho_sigma() / p.capacity;
  return conduction / p.capacity - rs * x * in.flow + rs * in.flow * in.supply_temp +
         p.alpha_outside / p.capacity * in.outside_temp +
         (in.occupied ? in.load / p.capacity : 0.0);
}

// Euler-discretized zone matrices. The zone-level ones advance room air; the
// tilde ones advance the device-region offset.
struct DiscreteMatrices {
  double tau = 0.0;
  Eigen::MatrixXd A0;
  Eigen::MatrixXd A1;
  Eigen::VectorXd B;
  Eigen::VectorXd D1;
  Eigen::MatrixXd D2;
  Eigen::MatrixXd A0_tilde;
  Eigen::MatrixXd B_tilde;
  Eigen::MatrixXd D3;

  std::size_t size() const { return static_cast<std::size_t>(A0.rows()); }
};

inline DiscreteMatrices build_discrete_matrices(const ThermalParams& p, double tau,
                                                std::span<const double> loads) {
  const std::size_t n = loads.size();
  p.validate(n);
  if (!(tau >= 0)) throw std::invalid_argument("time step must be nonnegative");
  const double spot_decay = 1.0 - p.alpha_region * tau / p.spot_capacity;
  if (spot_decay < 0)
    throw std::invalid_argument("time step " + std::to_string(tau) +
                                " s makes the device-region Euler update unstable");
  const auto sz = static_cast<Eigen::Index>(n);
  DiscreteMatrices m;
  m.tau = tau;
  m.A0 = Eigen::MatrixXd::Identity(sz, sz);
  for (Eigen::Index i = 0; i < sz; ++i) {
    m.A0(i, i) -= tau * p.alpha_outside / p.capacity;
    for (Eigen::Index j = 0; j < sz; ++j)
      if (i != j) m.A0(i, j) += tau / p.capacity * p.coupling(j, i);
  }
  m.A1 = -tau * p.rho_sigma() / p.capacity * Eigen::MatrixXd::Identity(sz, sz);
  m.B = Eigen::VectorXd::Constant(sz, tau * p.rho_sigma() / p.capacity);
  m.D1 = Eigen::VectorXd::Constant(sz, tau * p.alpha_outside / p.capacity);
  m.D2 = Eigen::MatrixXd::Zero(sz, sz);
  for (Eigen::Index i = 0; i < sz; ++i) m.D2(i, i) = tau / p.capacity * loads[i];
  m.A0_tilde = spot_decay * Eigen::MatrixXd::Identity(sz, sz);
  m.B_tilde = tau / p.spot_capacity * p.heater_power * Eigen::MatrixXd::Identity(sz, sz);
  m.D3 = p.alpha_region * tau / (p.capacity - p.spot_capacity) * Eigen::MatrixXd::Identity(sz, sz);
  return m;
}

inline DiscreteMatrices build_discrete_matrices(const ThermalParams& p, double tau,
                                                std::size_t zone_size, double load = 0.2) {
  const std::vector<double> loads(zone_size, load);
  return build_discrete_matrices(p, tau, loads);
}

// Advances room `j` of a zone by one step. `zone_x` holds the current air
// temperatures of every room in the zone (neighbors enter through A0).
inline RoomState step_room(const RoomState& state, std::size_t j, std::span<const double> zone_x,
                           const RoomInputs& in, const DiscreteMatrices& m, double heater_w,
                           RoomKind kind) {
  if (heater_w < 0 || heater_w > 1) throw std::invalid_argument("heater duty must lie in [0, 1]");
  if (kind == RoomKind::TypeSBar && heater_w != 0)
    throw std::invalid_argument("rooms without a device cannot have heater duty");
  const auto jj = static_cast<Eigen::Index>(j);
  double next = m.A1(jj, jj) * state.x * in.flow + m.B(jj) * in.supply_temp * in.flow +
                m.D1(jj) * in.outside_temp + (in.occupied ? m.D2(jj, jj) : 0.0);
  for (std::size_t l = 0; l < zone_x.size(); ++l)
    next += m.A0(jj, static_cast<Eigen::Index>(l)) * (l == j ? state.x : zone_x[l]);

  RoomState out;
  out.x = next;
  if (kind == RoomKind::TypeS) {
    out.delta_x = m.A0_tilde(jj, jj) * state.delta_x + m.B_tilde(jj, jj) * heater_w;
    out.delta_x_prev = state.delta_x;
  }
  return out;
}

// Vectorized zone update: x' = A0 x + A1 (x o v) + B u v + D1 T_o + D2 O.
inline Eigen::VectorXd step_zone(const Eigen::VectorXd& x, double supply_temp, double flow,
                                 double outside_temp, const Eigen::VectorXd& occupancy,
                                 const DiscreteMatrices& m) {
  return m.A0 * x + m.A1 * x * flow + m.B * (supply_temp * flow) + m.D1 * outside_temp +
         m.D2 * occupancy;
}

inline double mixer_temp(double reuse, double exhaust_temp, double outside_temp,
                         double reuse_max = 0.8) {
  if (reuse < 0 || reuse > reuse_max)
    throw std::invalid_argument("reuse ratio outside [0, " + std::to_string(reuse_max) + "]");
  return reuse * exhaust_temp + (1.0 - reuse) * outside_temp;
}

inline double exhaust_temp(std::span<const RoomState> rooms) {
  if (rooms.empty()) throw std::invalid_argument("exhaust temperature needs at least one room");
  double sum = 0.0;
  for (const auto& r : rooms) sum += r.x;
  return sum / static_cast<double>(rooms.size());
}

}  // namespace spotmpc
