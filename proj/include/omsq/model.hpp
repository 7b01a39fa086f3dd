#pragma once

#include "omsq/psd.hpp"

#include <optional>
#include <span>

// Closed-form physics of the parametrically driven, optically damped
// oscillator. All rates are angular (rad/s).
namespace omsq {

struct OscillatorParams {
  double omega_m = 0.0;  // rad/s
  double gamma_m = 0.0;  // intrinsic damping, rad/s
  double n_bar = 0.0;    // mean occupancy under cooling
  std::optional<double> mass;        // kg
  std::optional<double> temperature; // K

  void validate() const;
  // sqrt(hbar / (2 m omega_m)); empty without a mass.
  std::optional<double> x_zpf() const;
};

// Cooling tone plus modulation tone at +Omega_par = +2 Omega_m.
// delta_pump > 0 is the detuning for which gamma_par > 0.
struct CavityPumpParams {
  double kappa = 0.0;      // cavity linewidth, rad/s
  double g = 0.0;          // total pump coupling, rad/s
  double epsilon_c = 1.0;  // cooling-tone fraction of pump power
  double delta_pump = 0.0; // mean pump detuning, rad/s
  double delta_lo = 0.0;   // heterodyne LO offset, rad/s
  double omega_par_offset = 0.0; // modulation-tone shift in reference segments, rad/s

  void validate(const OscillatorParams& osc) const;
};

struct DampingRate {
  double value = 0.0;
  bool anti_damped = false; // value <= 0
};

// Lorentzian numerators of the Stokes / anti-Stokes spectra (quanta).
struct SidebandWeights {
  double stokes_narrow = 0.0;
  double stokes_broad = 0.0;
  double antistokes_narrow = 0.0;
  double antistokes_broad = 0.0;
  bool negative_weight = false; // antistokes_broad < 0: quantum squeezing
};

struct SidebandRatios {
  double r_plain = 0.0; // (n+1)/n
  double r_plus = 0.0;  // broad component
  double r_minus = 0.0; // narrow component
  bool at_threshold = false; // s == 2 n, r_plus infinite
};

struct QuadratureVariances {
  double var_x = 0.0; // over-damped quadrature, width gamma_plus
  double var_y = 0.0; // under-damped quadrature, width gamma_minus
};

struct RegimeReport {
  bool stable = false;            // s < 1
  bool quantum_squeezed = false;  // s > 2 n
  bool quantum_reachable = false; // n < 0.5, needed for both at once
};

enum class Sideband { stokes, antistokes };

struct DerivedRates {
  double n_bar = 0.0;
  double gamma_eff = 0.0;
  double gamma_par = 0.0;
  double s = 0.0;
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  SidebandWeights weights;
  SidebandRatios ratios;

  // Rates for a given gain at fixed n and gamma_eff; gamma_par = s gamma_eff.
  static DerivedRates from_gain(double n_bar, double gamma_eff, double s);
  DerivedRates with_gain(double s) const { return from_gain(n_bar, gamma_eff, s); }
  // Detuned modulation tone: damping kept, coherent parametric action removed.
  DerivedRates detuned() const { return with_gain(0.0); }
};

double gamma_par(const CavityPumpParams& p, const OscillatorParams& o);
DampingRate gamma_eff(const CavityPumpParams& p, const OscillatorParams& o);
// Throws NumericalError when gamma_eff <= 0.
double squeeze_param(const CavityPumpParams& p, const OscillatorParams& o);

SidebandWeights sideband_weights(double n_bar, double s);
SidebandRatios ratios(double n_bar, double s);
// Throws RegimeError for s >= 1.
QuadratureVariances quadrature_variances(double n_bar, double s);

// Sideband spectrum at offset omega (rad/s) from the sideband
// center. Two-sided, per Hz: integrating over omega/2pi gives quanta.
double sideband_density(double n_bar, double s, double gamma_eff, Sideband side,
                        double omega);
Psd analytic_sideband_psd(double n_bar, double s, double gamma_eff, Sideband side,
                          std::span<const double> omega_grid);

RegimeReport thresholds(double n_bar, double s);

// Bose-Einstein occupancy at temperature T for a mode at omega_m.
double bose_occupancy(double temperature, double omega_m);

// Throws RegimeError when the pump is anti-damping.
DerivedRates derive_rates(const OscillatorParams& o, const CavityPumpParams& p);

// Cooling fraction epsilon_c in (0, 1] giving the requested gain at the
// other pump settings. Bisection on the branch connected to epsilon_c = 1.
double tone_ratio_for_gain(const OscillatorParams& o, CavityPumpParams p, double s_target);

} // namespace omsq
