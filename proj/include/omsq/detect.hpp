#pragma once

#include "omsq/kernels.hpp"
#include "omsq/spectral.hpp"
#include "omsq/synth.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omsq {

// Optional spurious electronic line injected into a record.
struct TestTone {
  double frequency_hz = 0.0;
  double amplitude = 0.0; // detector units, peak
};

struct DetectionParams {
  double gain = 1.0;            // detector units per quadrature quantum
  double shot_psd = 0.0;        // one-sided white floor, units^2/Hz
  double demod_phase = 0.0;     // rad
  double lowpass_cutoff = 20e3; // Hz
  double schedule_period = 5.0; // s
  double frame_phase = 0.0;     // quadrature frame phase of the oscillator, rad
  double lo_phase = 0.0;        // rad
  std::optional<TestTone> tone;

  // shot_psd >= 0 and delta_lo + 10 gamma_plus < cutoff < carrier (all in Hz).
  void validate(double carrier, double delta_lo, double gamma_plus) const;
};

// Linear-phase lowpass used by the lock-in.
struct LowpassDesign {
  std::vector<double> taps;
  std::size_t decimation = 1;
  double passband_hz = 0.0;
  double stopband_hz = 0.0;
  double ripple_db = 0.0;      // measured peak passband deviation
  double attenuation_db = 0.0; // measured minimum stopband attenuation
  double beta = 0.0;           // Kaiser shape
};

// Kaiser windowed-sinc with 70 dB design attenuation. The transition band is
// placed symmetrically around `cutoff_hz` from `passband_hz`; the stopband
// edge must not exceed `image_hz` or the Nyquist frequency. Throws
// NumericalError when the constraints cannot be met or the measured
// response misses < 0.1 dB ripple / >= 60 dB attenuation.
LowpassDesign design_lowpass(double sample_rate, double cutoff_hz, double passband_hz,
                             double image_hz);

struct DemodOutput {
  std::vector<double> ch_x;
  std::vector<double> ch_y;
  double sample_rate = 0.0; // after decimation
  double demod_phase = 0.0;
  LowpassDesign filter;

  // Output sample m is built from input samples [m D, m D + L).
  std::size_t input_start(std::size_t m) const { return m * filter.decimation; }
  double time_of(std::size_t m, double input_rate) const;
};

// Schedule segments of one tag as record-sample spans (guard removed).
std::vector<SampleSpan> spans_for(std::span<const Segment> schedule, DriveTag tag,
                                  double sample_rate, std::size_t n_samples);
// Same, as demodulated-sample spans whose full filter support lies inside
// the usable part of each segment.
std::vector<SampleSpan> spans_for(std::span<const Segment> schedule, DriveTag tag,
                                  const DemodOutput& demod, double input_rate,
                                  std::size_t n_output);

// Alternating detuned / resonant segments of length `period`, starting
// detuned, each with a settling guard of 10 / gamma_minus. Throws
// ConfigError when the guard exceeds a quarter period or no resonant
// segment fits.
std::vector<Segment> schedule_drive(const SimGrid& grid, double period, double gamma_minus);

// 2 gain [X cos(wc t + phi) + Y sin(wc t + phi)] cos(dlo t + theta) + shot noise.
Record compose_heterodyne_wigner(const QuadTrajectory& traj, const DetectionParams& d,
                                 double delta_lo, std::vector<Segment> schedule = {},
                                 kernels::Exec exec = kernels::Exec::parallel);

// gain Re{b_S e^{i(wc + dlo) t}} + gain Re{b_AS e^{i(wc - dlo) t}} + shot noise.
// Each sideband's one-sided PSD is gain^2 / 2 times its envelope density.
Record compose_heterodyne_components(const SidebandEnvelopes& env, const DetectionParams& d,
                                     double delta_lo, std::vector<Segment> schedule = {},
                                     kernels::Exec exec = kernels::Exec::parallel);

// ch_x = LP(2 rec cos(wc t + theta)), ch_y = LP(2 rec sin(wc t + theta)),
// theta = d.demod_phase. gamma_plus sets the passband edge.
DemodOutput lockin_demodulate(const Record& rec, const DetectionParams& d, double gamma_plus,
                              kernels::Exec exec = kernels::Exec::parallel);

struct PhaseSearch {
  double phase = 0.0;     // in [0, pi)
  double var_min = 0.0;
  double var_max = 0.0;
  double contrast = 0.0;  // (max - min) / (max + min)
  bool flat = false;      // contrast < 0.05: phase undefined
};

// Phase minimizing the ch_x variance over the resonant segments: a 180
// point grid over [0, pi) refined by golden-section search to 1 mrad.
PhaseSearch optimize_demod_phase(const Record& rec, const DetectionParams& d, double gamma_plus,
                                 kernels::Exec exec = kernels::Exec::parallel);

} // namespace omsq
