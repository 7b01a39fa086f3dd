#pragma once

#include "omsq/model.hpp"
#include "omsq/units.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace omsq {

// Sampling grid of a synthesized record. The record carrier is a reduced
// intermediate frequency standing in for omega_m; only gamma_pm, delta_lo,
// n_bar and s enter the statistics, so the reduction is exact.
struct SimGrid {
  double sample_rate = 250e3;         // Hz
  double duration = 1.0;              // s
  double carrier = kDefaultCarrier;   // rad/s
  std::uint64_t seed = 1;

  static constexpr double kDefaultCarrier = kTwoPi * 50e3;

  std::size_t size() const;
  double dt() const { return 1.0 / sample_rate; }
  // Nyquist margin: sample_rate > 2 (carrier + delta_lo + 10 gamma_plus) / 2pi.
  void validate(double delta_lo, double gamma_plus) const;
};

enum class DriveTag { detuned, resonant };

const char* to_string(DriveTag tag);

// One drive period [start, end) in seconds. Data before start + guard is
// settling and is excluded from analysis.
struct Segment {
  double start = 0.0;
  double end = 0.0;
  DriveTag tag = DriveTag::resonant;
  double guard = 0.0;

  double usable_start() const { return start + guard; }
};

struct QuadTrajectory {
  std::vector<double> x; // quanta units
  std::vector<double> y;
  SimGrid grid;
  DerivedRates rates;
};

struct SidebandEnvelopes {
  std::vector<std::complex<double>> stokes;
  std::vector<std::complex<double>> antistokes;
  SimGrid grid;
  DerivedRates rates;
};

struct RecordFrame {
  double carrier = 0.0;  // rad/s
  double delta_lo = 0.0; // rad/s
  double lo_phase = 0.0; // rad
};

// Real detector record with its drive schedule.
struct Record {
  std::vector<double> samples;
  double sample_rate = 0.0;
  std::vector<Segment> schedule;
  RecordFrame frame;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Exact Ornstein-Uhlenbeck update: alpha prev + sqrt(v (1 - alpha^2)) z,
// alpha = exp(-decay_rate dt).
double ou_step(double prev, double decay_rate, double stationary_var, double dt, double noise_draw);

// Precomputed coefficients of ou_step for a fixed (decay, variance, dt).
class OuCoefficients {
public:
  OuCoefficients(double decay_rate, double stationary_var, double dt);
  double step(double prev, double noise_draw) const { return alpha_ * prev + scale_ * noise_draw; }
  double alpha() const { return alpha_; }
  double stationary_sd() const { return sd_; }

private:
  double alpha_;
  double scale_;
  double sd_;
};

// Wigner backend: X and Y as independent OU chains with amplitude decay
// gamma_pm / 2 and variances (2n+1) / (4 (1 +- s)). Detuned schedule
// segments run at s = 0. Throws RegimeError for s >= 1.
QuadTrajectory simulate_quadratures(const DerivedRates& rates, const SimGrid& grid,
                                    std::span<const Segment> schedule = {});

// simulate_quadratures with s forced to 0 at unchanged gamma_eff.
QuadTrajectory detuned_reference_trajectory(const DerivedRates& rates, const SimGrid& grid);

// Component backend: each sideband envelope is a sum of two independent
// complex OU processes (narrow, broad) whose spectra add up to the Stokes /
// anti-Stokes Lorentzian pair. Throws RegimeError when a weight is negative.
SidebandEnvelopes simulate_sideband_envelopes(const DerivedRates& rates, const SimGrid& grid,
                                              std::span<const Segment> schedule = {});

// Variance of one complex component: weight gamma_eff / (2 gamma).
double component_variance(double weight, double gamma_eff, double gamma);

} // namespace omsq
