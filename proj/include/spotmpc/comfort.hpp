// Thermal comfort: the full Fanger PMV heat-balance model, the two-variable
// polynomial surrogate used by the controllers, and the regression that fits
// the surrogate to the full model.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace spotmpc {

enum class Season { Winter, Summer };

inline const char* to_string(Season s) { return s == Season::Winter ? "winter" : "summer"; }

inline Season parse_season(const std::string& s) {
  if (s == "winter") return Season::Winter;
  if (s == "summer") return Season::Summer;
  throw std::invalid_argument("unknown season '" + s + "'");
}

struct PmvContext {
  double humidity = 50.0;   // relative humidity, %
  double metabolic = 1.1;   // met
  double clothing = 1.0;    // clo
  // Mean radiant temperature is taken equal to air temperature.

  static PmvContext for_season(Season s) {
    return s == Season::Winter ? PmvContext{50.0, 1.1, 1.0} : PmvContext{50.0, 1.1, 0.5};
  }
};

class PmvConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ISO 7730 PMV with MRT = air temperature and no external work.
inline double pmv_full(double temp, double air_speed, const PmvContext& ctx) {
  if (!(temp >= 10 && temp <= 40)) throw std::domain_error("PMV temperature outside [10, 40] degC");
  if (!(air_speed >= 0 && air_speed <= 2)) throw std::domain_error("PMV air speed outside [0, 2] m/s");

  const double ta = temp;
  const double tr = temp;
  const double pa = ctx.humidity * 10.0 * std::exp(16.6536 - 4030.183 / (ta + 235.0));
  const double icl = 0.155 * ctx.clothing;
  const double m = ctx.metabolic * 58.15;
  const double mw = m;
  const double fcl = icl <= 0.078 ? 1.0 + 1.29 * icl : 1.05 + 0.645 * icl;
  const double hcf = 12.1 * std::sqrt(air_speed);
  const double taa = ta + 273.0;
  const double tra = tr + 273.0;

  // Fixed point on the clothing surface temperature.
  const double tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1);
  const double p1 = icl * fcl;
  const double p2 = p1 * 3.96;
  const double p3 = p1 * 100.0;
  const double p4 = p1 * taa;
  const double p5 = 308.7 - 0.028 * mw + p2 * std::pow(tra / 100.0, 4);
  double xn = tcla / 100.0;
  double xf = tcla / 50.0;
  double hc = hcf;
  int iterations = 0;
  while (std::abs(xn - xf) > 1e-5) {
    xf = (xf + xn) / 2.0;
    const double hcn = 2.38 * std::pow(std::abs(100.0 * xf - taa), 0.25);
    hc = std::max(hcf, hcn);
    xn = (p5 + p4 * hc - p2 * std::pow(xf, 4)) / (100.0 + p3 * hc);
    if (++iterations > 150) throw PmvConvergenceError("PMV clothing temperature did not converge");
  }
  const double tcl = 100.0 * xn - 273.0;

  const double hl1 = 3.05e-3 * (5733.0 - 6.99 * mw - pa);         // skin diffusion
  const double hl2 = mw > 58.15 ? 0.42 * (mw - 58.15) : 0.0;       // sweating
  const double hl3 = 1.7e-5 * m * (5867.0 - pa);                   // latent respiration
  const double hl4 = 0.0014 * m * (34.0 - ta);                     // dry respiration
  const double hl5 = 3.96 * fcl * (std::pow(xn, 4) - std::pow(tra / 100.0, 4));
  const double hl6 = fcl * hc * (tcl - ta);
  const double ts = 0.303 * std::exp(-0.036 * m) + 0.028;
  const double pmv = ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6);
  return std::clamp(pmv, -4.0, 4.0);
}

// PMV ~= c_T T + c_v2 v^2 + c_v1 v + c_0.
struct SimplifiedPmvModel {
  double c_t = 0.25;
  double c_v2 = 0.58;
  double c_v1 = -1.41;
  double c_0 = -5.47;
  Season season = Season::Winter;

  static SimplifiedPmvModel winter() { return {0.25, 0.58, -1.41, -5.47, Season::Winter}; }
  static SimplifiedPmvModel summer() { return {0.37, 0.76, -2.14, -9.22, Season::Summer}; }
  static SimplifiedPmvModel for_season(Season s) { return s == Season::Winter ? winter() : summer(); }

  double fan_term(double air_speed) const { return c_v2 * air_speed * air_speed + c_v1 * air_speed; }

  // Temperature at which the model gives `pmv` with the fan off.
  double temp_for(double pmv) const { return (pmv - c_0) / c_t; }
};

inline double pmv_simplified(const SimplifiedPmvModel& m, double temp, double air_speed) {
  return m.c_t * temp + m.c_v2 * air_speed * air_speed + m.c_v1 * air_speed + m.c_0;
}

struct ComfortBand {
  double lo = -0.5;
  double hi = 0.5;

  ComfortBand() = default;
  ComfortBand(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo < hi)) throw std::invalid_argument("comfort band needs lo < hi");
  }
  bool contains(double pmv) const { return pmv >= lo && pmv <= hi; }
};

inline ComfortBand homogeneous_band(Season s) {
  return s == Season::Winter ? ComfortBand{-0.29, 0.21} : ComfortBand{-0.7, 0.0};
}

// Per-room bands for the five-room heterogeneous study.
inline std::vector<ComfortBand> heterogeneous_bands(Season s) {
  if (s == Season::Winter)
    return {{-0.4, -0.16}, {-0.29, -0.04}, {-0.16, 0.08}, {-0.04, 0.21}, {0.08, 0.33}};
  return {{-0.92, -0.56}, {-0.74, -0.37}, {-0.56, -0.19}, {-0.37, 0.0}, {-0.19, 0.18}};
}

// Functional forms, all with intercept and linear temperature term:
//   1: + f v      2: + f v^2      3: + f v^2 + f v
struct FormFit {
  int form = 0;
  std::vector<double> coefficients;  // {c_0, c_T, then velocity terms in form order}
  double rmse = 0.0;
};

struct FitReport {
  std::vector<FormFit> forms;
  int selected_form = 0;

  const FormFit& selected() const {
    for (const auto& f : forms)
      if (f.form == selected_form) return f;
    throw std::logic_error("selected form missing from report");
  }

  // Only meaningful when form 3 is selected.
  SimplifiedPmvModel as_model(Season season) const {
    const auto& f = selected();
    if (f.form != 3) throw std::logic_error("only form 3 maps onto the simplified model");
    return {f.coefficients[1], f.coefficients[2], f.coefficients[3], f.coefficients[0], season};
  }
};

struct GridPoint {
  double temp;
  double air_speed;
};

// Default fitting grid: T in [18, 30] step 0.5 degC, v in [0, 1] step 0.05 m/s.
inline std::vector<GridPoint> default_fit_grid() {
  std::vector<GridPoint> grid;
  for (int i = 0; i <= 24; ++i)
    for (int k = 0; k <= 20; ++k) grid.push_back({18.0 + 0.5 * i, 0.05 * k});
  return grid;
}

inline FitReport fit_simplified(std::span<const GridPoint> grid,
                                const std::function<double(double, double)>& oracle,
                                std::span<const int> forms = std::array<int, 3>{1, 2, 3}) {
  if (grid.empty()) throw std::invalid_argument("empty fitting grid");
  const auto rows = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = oracle(grid[i].temp, grid[i].air_speed);

  FitReport report;
  double best = std::numeric_limits<double>::infinity();
  for (int form : forms) {
    if (form < 1 || form > 3) throw std::invalid_argument("unknown functional form");
    const Eigen::Index cols = form == 3 ? 4 : 3;
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = grid[i].air_speed;
      a(i, 0) = 1.0;
      a(i, 1) = grid[i].temp;
      if (form == 1) a(i, 2) = v;
      if (form == 2) a(i, 2) = v * v;
      if (form == 3) {
        a(i, 2) = v * v;
        a(i, 3) = v;
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < cols)
      throw std::invalid_argument("fitting grid gives a rank-deficient design for form " +
                                  std::to_string(form));
    const Eigen::VectorXd c = qr.solve(y);
    const double rmse = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(rows));
    report.forms.push_back({form, std::vector<double>(c.data(), c.data() + c.size()), rmse});
    if (rmse < best) {
      best = rmse;
      report.selected_form = form;
    }
  }
  return report;
}

inline double rmse_against(const SimplifiedPmvModel& model, std::span<const GridPoint> grid,
                           const std::function<double(double, double)>& oracle) {
  double sq = 0.0;
  for (const auto& g : grid) {
    const double e = pmv_simplified(model, g.temp, g.air_speed) - oracle(g.temp, g.air_speed);
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(grid.size()));
}

inline nlohmann::json to_json(const FitReport& r) {
  nlohmann::json j;
  j["selected_form"] = r.selected_form;
  j["forms"] = nlohmann::json::array();
  for (const auto& f : r.forms)
    j["forms"].push_back({{"form", f.form}, {"coefficients", f.coefficients}, {"rmse", f.rmse}});
  return j;
}

}  // namespace spotmpc
