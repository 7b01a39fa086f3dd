#include "omsq/model.hpp"

#include "omsq/errors.hpp"
#include "omsq/units.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace omsq {

namespace {

// Cavity response 1 / (d^2 + kappa^2/4).
double cavity_response(double detuning, double kappa) {
  return 1.0 / (detuning * detuning + 0.25 * kappa * kappa);
}

void require_gain_range(double s) {
  if (!(s >= 0.0)) {
    throw std::invalid_argument("parametric gain must be >= 0, got " + std::to_string(s));
  }
}

} // namespace

void OscillatorParams::validate() const {
  if (!(omega_m > 0.0) || !std::isfinite(omega_m)) {
    throw ConfigError("omega_m must be positive and finite");
  }
  if (!(gamma_m >= 0.0)) throw ConfigError("gamma_m must be >= 0");
  if (!(n_bar >= 0.0)) throw ConfigError("n_bar must be >= 0");
  if (mass && !(*mass > 0.0)) throw ConfigError("mass must be positive");
  if (temperature && !(*temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (auto x = x_zpf(); x && !(std::isfinite(*x) && *x > 0.0)) {
    throw ConfigError("x_zpf is not finite");
  }
}

std::optional<double> OscillatorParams::x_zpf() const {
  if (!mass) return std::nullopt;
  return std::sqrt(kHbar / (2.0 * *mass * omega_m));
}

void CavityPumpParams::validate(const OscillatorParams& osc) const {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(epsilon_c >= 0.0 && epsilon_c <= 1.0)) throw ConfigError("epsilon_c must lie in [0, 1]");
  if (!(delta_lo > 0.0)) throw ConfigError("delta_lo must be positive");
  // "delta_lo << omega_m": an order of magnitude is the working margin.
  if (!(delta_lo < 0.1 * osc.omega_m)) {
    throw ConfigError("delta_lo must be much smaller than omega_m (< omega_m / 10)");
  }
  if (!std::isfinite(g) || !std::isfinite(delta_pump)) throw ConfigError("g and delta_pump must be finite");
}

DerivedRates DerivedRates::from_gain(double n_bar, double gamma_eff, double s) {
  DerivedRates r;
  r.n_bar = n_bar;
  r.gamma_eff = gamma_eff;
  r.s = s;
  r.gamma_par = s * gamma_eff;
  r.gamma_plus = gamma_eff * (1.0 + s);
  r.gamma_minus = gamma_eff * (1.0 - s);
  r.weights = sideband_weights(n_bar, s);
  r.ratios = omsq::ratios(n_bar, s);
  return r;
}

double gamma_par(const CavityPumpParams& p, const OscillatorParams&) {
  return 4.0 * p.g * p.g * std::sqrt(p.epsilon_c * (1.0 - p.epsilon_c)) * p.delta_pump *
         cavity_response(p.delta_pump, p.kappa);
}

DampingRate gamma_eff(const CavityPumpParams& p, const OscillatorParams& o) {
  const double eps = p.epsilon_c;
  const double d = p.delta_pump;
  const double two_omega = 2.0 * o.omega_m;
  const double optical =
      eps * cavity_response(d, p.kappa) - eps * cavity_response(d - two_omega, p.kappa) +
      (1.0 - eps) * cavity_response(d + two_omega, p.kappa) -
      (1.0 - eps) * cavity_response(d, p.kappa);
  DampingRate out;
  out.value = o.gamma_m + p.g * p.g * p.kappa * optical;
  out.anti_damped = !(out.value > 0.0);
  return out;
}

double squeeze_param(const CavityPumpParams& p, const OscillatorParams& o) {
  const DampingRate eff = gamma_eff(p, o);
  if (eff.anti_damped) {
    throw NumericalError("gamma_eff <= 0 (anti-damping pump), squeeze parameter undefined");
  }
  return gamma_par(p, o) / eff.value;
}

SidebandWeights sideband_weights(double n_bar, double s) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("n_bar must be >= 0");
  require_gain_range(s);
  SidebandWeights w;
  w.stokes_narrow = 1.0 + n_bar - 0.5 * s;
  w.stokes_broad = 1.0 + n_bar + 0.5 * s;
  w.antistokes_narrow = n_bar + 0.5 * s;
  w.antistokes_broad = n_bar - 0.5 * s;
  w.negative_weight = w.antistokes_broad < 0.0;
  return w;
}

SidebandRatios ratios(double n_bar, double s) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("n_bar must be >= 0");
  require_gain_range(s);
  constexpr double inf = std::numeric_limits<double>::infinity();
  SidebandRatios r;
  r.r_plain = n_bar > 0.0 ? (n_bar + 1.0) / n_bar : inf;
  const double broad_den = n_bar - 0.5 * s;
  r.at_threshold = broad_den == 0.0;
  r.r_plus = r.at_threshold ? inf : (n_bar + 1.0 + 0.5 * s) / broad_den;
  const double narrow_den = n_bar + 0.5 * s;
  r.r_minus = narrow_den > 0.0 ? (n_bar + 1.0 - 0.5 * s) / narrow_den : inf;
  return r;
}

QuadratureVariances quadrature_variances(double n_bar, double s) {
  require_gain_range(s);
  if (!(s < 1.0)) {
    throw RegimeError("parametric instability: stationary drive requires s < 1 (s = " +
                      std::to_string(s) + ")");
  }
  const double base = (2.0 * n_bar + 1.0) / 4.0;
  return {base / (1.0 + s), base / (1.0 - s)};
}

double sideband_density(double n_bar, double s, double gamma_eff, Sideband side,
                        double omega) {
  const SidebandWeights w = sideband_weights(n_bar, s);
  const double gp = gamma_eff * (1.0 + s);
  const double gm = gamma_eff * (1.0 - s);
  const double narrow = 1.0 / (omega * omega + 0.25 * gm * gm);
  const double broad = 1.0 / (omega * omega + 0.25 * gp * gp);
  const double wn = side == Sideband::stokes ? w.stokes_narrow : w.antistokes_narrow;
  const double wb = side == Sideband::stokes ? w.stokes_broad : w.antistokes_broad;
  return 0.5 * gamma_eff * (wn * narrow + wb * broad);
}

Psd analytic_sideband_psd(double n_bar, double s, double gamma_eff, Sideband side,
                          std::span<const double> omega_grid) {
  if (!(s < 1.0)) throw RegimeError("analytic sideband spectra require s < 1");
  Psd psd;
  psd.one_sided = false;
  psd.freqs.reserve(omega_grid.size());
  psd.density.reserve(omega_grid.size());
  for (double w : omega_grid) {
    if (!std::isfinite(w)) throw std::invalid_argument("omega grid must be finite");
    psd.freqs.push_back(rad_to_hz(w));
    psd.density.push_back(sideband_density(n_bar, s, gamma_eff, side, w));
  }
  if (psd.freqs.size() > 1) psd.rbw = psd.freqs[1] - psd.freqs[0];
  psd.enbw = psd.rbw;
  return psd;
}

RegimeReport thresholds(double n_bar, double s) {
  RegimeReport r;
  r.stable = s < 1.0;
  r.quantum_squeezed = s > 2.0 * n_bar;
  r.quantum_reachable = n_bar < 0.5;
  return r;
}

double bose_occupancy(double temperature, double omega_m) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const double x = kHbar * omega_m / (kBoltzmann * temperature);
  return 1.0 / std::expm1(x);
}

DerivedRates derive_rates(const OscillatorParams& o, const CavityPumpParams& p) {
  const DampingRate eff = gamma_eff(p, o);
  if (eff.anti_damped) {
    throw RegimeError("pump configuration is anti-damping (gamma_eff = " +
                      std::to_string(eff.value) + " rad/s)");
  }
  const double s = gamma_par(p, o) / eff.value;
  if (s < 0.0) {
    throw RegimeError("negative parametric gain: delta_pump must be positive (red detuned cooling tone)");
  }
  return DerivedRates::from_gain(o.n_bar, eff.value, s);
}

double tone_ratio_for_gain(const OscillatorParams& o, CavityPumpParams p, double s_target) {
  require_gain_range(s_target);
  if (s_target == 0.0) return 1.0;
  if (!(p.delta_pump > 0.0)) throw ConfigError("tone ratio search needs delta_pump > 0");

  // Gain as a function of eps; anti-damping counts as "beyond any target".
  auto gain_at = [&](double eps) {
    p.epsilon_c = eps;
    const DampingRate eff = gamma_eff(p, o);
    if (eff.anti_damped) return std::numeric_limits<double>::infinity();
    return gamma_par(p, o) / eff.value;
  };

  double hi = 1.0; // gain 0
  double lo = 1.0;
  const double step = 1e-3;
  while (true) {
    lo -= step;
    if (lo <= 0.0) throw ConfigError("requested gain is not reachable by any tone ratio");
    if (gain_at(lo) >= s_target) break;
    hi = lo;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gain_at(mid) >= s_target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace omsq
