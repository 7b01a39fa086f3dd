#include "omsq/detect.hpp"

#include "omsq/errors.hpp"
#include "omsq/rng.hpp"
#include "omsq/units.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

namespace omsq {

void DetectionParams::validate(double carrier, double delta_lo, double gamma_plus) const {
  if (!(shot_psd >= 0.0)) throw ConfigError("shot_psd must be >= 0");
  if (!std::isfinite(gain)) throw ConfigError("gain must be finite");
  if (!(schedule_period > 0.0)) throw ConfigError("schedule_period must be positive");
  const double pass = rad_to_hz(delta_lo + 10.0 * gamma_plus);
  if (!(lowpass_cutoff > pass)) {
    throw ConfigError("lowpass_cutoff must exceed delta_lo + 10 gamma_plus (" + std::to_string(pass) + " Hz)");
  }
  if (!(lowpass_cutoff < rad_to_hz(carrier))) throw ConfigError("lowpass_cutoff must be below the carrier");
  if (tone && !(tone->frequency_hz > 0.0)) throw ConfigError("test tone frequency must be positive");
}

double DemodOutput::time_of(std::size_t m, double input_rate) const {
  const double center = static_cast<double>(filter.taps.size() - 1) / 2.0;
  return (static_cast<double>(input_start(m)) + center) / input_rate;
}

namespace {

constexpr double kDesignAttenuation = 70.0; // dB
constexpr double kMaxRipple = 0.1;          // dB
constexpr double kMinAttenuation = 60.0;    // dB

double response_at(std::span<const double> taps, double f_norm) {
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < taps.size(); ++n) {
    acc += taps[n] * std::polar(1.0, -kTwoPi * f_norm * static_cast<double>(n));
  }
  return std::abs(acc);
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

} // namespace

LowpassDesign design_lowpass(double sample_rate, double cutoff_hz, double passband_hz,
                             double image_hz) {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (!(cutoff_hz > passband_hz) || !(passband_hz > 0.0)) {
    throw NumericalError("lowpass design: cutoff must lie above the passband edge");
  }
  const double stop = 2.0 * cutoff_hz - passband_hz;
  if (stop > image_hz) {
    throw NumericalError("lowpass design: stopband edge " + std::to_string(stop) +
                         " Hz lies above the image frequency " + std::to_string(image_hz) + " Hz");
  }
  if (!(stop < 0.5 * sample_rate)) {
    throw NumericalError("lowpass design: stopband edge above Nyquist");
  }
  const double transition = (stop - passband_hz) / sample_rate;
  const double a = kDesignAttenuation;
  LowpassDesign out;
  out.beta = 0.1102 * (a - 8.7);
  auto len = static_cast<std::size_t>(std::ceil((a - 7.95) / (14.36 * transition))) + 1;
  if (len % 2 == 0) ++len;
  if (len > 1u << 20) throw NumericalError("lowpass design: filter too long");

  const double fc = 0.5 * (passband_hz + stop) / sample_rate;
  const double mid = static_cast<double>(len - 1) / 2.0;
  const double i0_beta = boost::math::cyl_bessel_i(0, out.beta);
  out.taps.resize(len);
  for (std::size_t n = 0; n < len; ++n) {
    const double k = static_cast<double>(n) - mid;
    const double r = k / mid;
    const double w = boost::math::cyl_bessel_i(0, out.beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    out.taps[n] = 2.0 * fc * sinc(2.0 * fc * k) * w;
  }
  const double dc = std::accumulate(out.taps.begin(), out.taps.end(), 0.0);
  for (double& t : out.taps) t /= dc;

  constexpr int kProbe = 512;
  double ripple = 0.0;
  for (int j = 0; j <= kProbe; ++j) {
    const double f = passband_hz * j / kProbe / sample_rate;
    ripple = std::max(ripple, std::abs(20.0 * std::log10(response_at(out.taps, f))));
  }
  double leak = 0.0;
  for (int j = 0; j <= kProbe; ++j) {
    const double f = (stop + (0.5 * sample_rate - stop) * j / kProbe) / sample_rate;
    leak = std::max(leak, response_at(out.taps, f));
  }
  out.ripple_db = ripple;
  out.attenuation_db = -20.0 * std::log10(leak);
  if (!(out.ripple_db < kMaxRipple) || !(out.attenuation_db >= kMinAttenuation)) {
    throw NumericalError("lowpass design: measured ripple " + std::to_string(out.ripple_db) +
                         " dB / attenuation " + std::to_string(out.attenuation_db) + " dB out of spec");
  }
  out.passband_hz = passband_hz;
  out.stopband_hz = stop;
  out.decimation = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(sample_rate / (stop + passband_hz))));
  return out;
}

std::vector<SampleSpan> spans_for(std::span<const Segment> schedule, DriveTag tag,
                                  double sample_rate, std::size_t n_samples) {
  std::vector<SampleSpan> out;
  for (const Segment& seg : schedule) {
    if (seg.tag != tag) continue;
    const auto begin = static_cast<std::size_t>(std::ceil(seg.usable_start() * sample_rate - 1e-9));
    const auto end = std::min(n_samples, static_cast<std::size_t>(std::floor(seg.end * sample_rate + 1e-9)));
    if (end > begin) out.push_back({begin, end});
  }
  return out;
}

std::vector<SampleSpan> spans_for(std::span<const Segment> schedule, DriveTag tag,
                                  const DemodOutput& demod, double input_rate,
                                  std::size_t n_output) {
  const std::size_t d = demod.filter.decimation;
  const std::size_t len = demod.filter.taps.size();
  std::vector<SampleSpan> out;
  for (const SampleSpan& s : spans_for(schedule, tag, input_rate, static_cast<std::size_t>(-1))) {
    if (s.end < s.begin + len) continue;
    const std::size_t first = (s.begin + d - 1) / d;
    const std::size_t last = std::min(n_output, (s.end - len) / d + 1);
    if (last > first) out.push_back({first, last});
  }
  return out;
}

std::vector<Segment> schedule_drive(const SimGrid& grid, double period, double gamma_minus) {
  if (!(period > 0.0)) throw ConfigError("schedule period must be positive");
  if (!(gamma_minus > 0.0)) throw ConfigError("schedule guard needs gamma_minus > 0");
  const double duration = static_cast<double>(grid.size()) / grid.sample_rate;
  const double guard = 10.0 / gamma_minus;
  // Settling may take at most a quarter of each segment.
  if (guard > 0.25 * period) {
    throw ConfigError("settling guard 10/gamma_minus = " + std::to_string(guard) +
                      " s exceeds a quarter of the " + std::to_string(period) + " s drive period");
  }
  std::vector<Segment> out;
  DriveTag tag = DriveTag::detuned;
  for (std::size_t k = 0; static_cast<double>(k) * period < duration - 1e-12; ++k) {
    const double t = static_cast<double>(k) * period;
    out.push_back({t, std::min(duration, t + period), tag, guard});
    tag = tag == DriveTag::detuned ? DriveTag::resonant : DriveTag::detuned;
  }
  const bool has_resonant = std::any_of(out.begin(), out.end(), [&](const Segment& s) {
    return s.tag == DriveTag::resonant && s.end - s.usable_start() > 0.0;
  });
  if (!has_resonant) {
    throw ConfigError("drive schedule has no resonant segment (period >= duration)");
  }
  return out;
}

namespace {

void check_aliasing(const SimGrid& grid, double delta_lo, const DetectionParams& d) {
  const double top = rad_to_hz(grid.carrier + delta_lo);
  if (!(top < 0.5 * grid.sample_rate)) {
    throw ConfigError("carrier + delta_lo (" + std::to_string(top) + " Hz) exceeds Nyquist");
  }
  if (d.tone && !(d.tone->frequency_hz < 0.5 * grid.sample_rate)) {
    throw ConfigError("test tone above Nyquist");
  }
}

// Shot noise and optional test tone, shared by both composers.
void add_floor(std::vector<double>& out, const SimGrid& grid, const DetectionParams& d,
               Stream record_kind, kernels::Exec exec) {
  const double sigma = std::sqrt(d.shot_psd * grid.sample_rate / 2.0);
  kernels::add_white_noise(out, sigma,
                           derive_seed(grid.seed, {static_cast<std::uint64_t>(Stream::shot_noise),
                                                   static_cast<std::uint64_t>(record_kind)}),
                           exec);
  if (d.tone) kernels::add_tone(d.tone->amplitude, hz_to_rad(d.tone->frequency_hz), grid.dt(), out, exec);
}

} // namespace

Record compose_heterodyne_wigner(const QuadTrajectory& traj, const DetectionParams& d,
                                 double delta_lo, std::vector<Segment> schedule,
                                 kernels::Exec exec) {
  const SimGrid& grid = traj.grid;
  check_aliasing(grid, delta_lo, d);
  if (traj.x.size() != grid.size() || traj.y.size() != grid.size()) {
    throw std::invalid_argument("trajectory does not match its grid");
  }
  Record rec;
  rec.sample_rate = grid.sample_rate;
  rec.schedule = std::move(schedule);
  rec.frame = {grid.carrier, delta_lo, d.lo_phase};
  rec.samples.assign(grid.size(), 0.0);
  kernels::add_wigner_heterodyne(traj.x, traj.y, d.gain, grid.carrier, d.frame_phase, delta_lo,
                                 d.lo_phase, grid.dt(), rec.samples, exec);
  add_floor(rec.samples, grid, d, Stream::quadrature_record, exec);
  return rec;
}

Record compose_heterodyne_components(const SidebandEnvelopes& env, const DetectionParams& d,
                                     double delta_lo, std::vector<Segment> schedule,
                                     kernels::Exec exec) {
  const SimGrid& grid = env.grid;
  check_aliasing(grid, delta_lo, d);
  if (env.stokes.size() != grid.size() || env.antistokes.size() != grid.size()) {
    throw std::invalid_argument("envelopes do not match their grid");
  }
  Record rec;
  rec.sample_rate = grid.sample_rate;
  rec.schedule = std::move(schedule);
  rec.frame = {grid.carrier, delta_lo, d.lo_phase};
  rec.samples.assign(grid.size(), 0.0);
  kernels::add_sideband_heterodyne(env.stokes, env.antistokes, d.gain, grid.carrier + delta_lo,
                                   grid.carrier - delta_lo, grid.dt(), rec.samples, exec);
  add_floor(rec.samples, grid, d, Stream::sideband_record, exec);
  return rec;
}

DemodOutput lockin_demodulate(const Record& rec, const DetectionParams& d, double gamma_plus,
                              kernels::Exec exec) {
  const double fs = rec.sample_rate;
  d.validate(rec.frame.carrier, rec.frame.delta_lo, gamma_plus);
  const double pass = rad_to_hz(rec.frame.delta_lo + 10.0 * gamma_plus);
  const double image = rad_to_hz(2.0 * rec.frame.carrier - rec.frame.delta_lo - 10.0 * gamma_plus);
  DemodOutput out;
  out.filter = design_lowpass(fs, d.lowpass_cutoff, pass, image);
  out.demod_phase = d.demod_phase;
  out.sample_rate = fs / static_cast<double>(out.filter.decimation);
  const std::size_t m = kernels::decimated_length(rec.samples.size(), out.filter.taps.size(),
                                                  out.filter.decimation);
  if (m == 0) throw NumericalError("record shorter than the lock-in filter");
  out.ch_x.resize(m);
  out.ch_y.resize(m);
  kernels::mix_and_decimate(rec.samples, rec.frame.carrier, d.demod_phase, 1.0 / fs, out.filter.taps,
                            out.filter.decimation, out.ch_x, out.ch_y, exec);
  return out;
}

PhaseSearch optimize_demod_phase(const Record& rec, const DetectionParams& d, double gamma_plus,
                                 kernels::Exec exec) {
  DetectionParams at_zero = d;
  at_zero.demod_phase = 0.0;
  const DemodOutput iq = lockin_demodulate(rec, at_zero, gamma_plus, exec);
  std::vector<SampleSpan> spans =
      rec.schedule.empty()
          ? std::vector<SampleSpan>{{0, iq.ch_x.size()}}
          : spans_for(rec.schedule, DriveTag::resonant, iq, rec.sample_rate, iq.ch_x.size());
  if (spans.empty()) throw ConfigError("phase search needs resonant-drive data");

  // Second moments of (I, Q); ch_x(theta) = I cos(theta) - Q sin(theta).
  double si = 0, sq = 0, sii = 0, sqq = 0, siq = 0, count = 0;
  for (const SampleSpan& s : spans) {
    for (std::size_t m = s.begin; m < s.end; ++m) {
      const double i = iq.ch_x[m];
      const double q = iq.ch_y[m];
      si += i; sq += q; sii += i * i; sqq += q * q; siq += i * q;
      count += 1.0;
    }
  }
  const double mi = si / count, mq = sq / count;
  const double cii = sii / count - mi * mi;
  const double cqq = sqq / count - mq * mq;
  const double ciq = siq / count - mi * mq;
  auto variance = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    return c * c * cii + s * s * cqq - 2.0 * s * c * ciq;
  };

  constexpr int kGrid = 180;
  int best = 0;
  double vmin = variance(0.0), vmax = vmin;
  for (int k = 1; k < kGrid; ++k) {
    const double v = variance(kPi * k / kGrid);
    if (v < vmin) { vmin = v; best = k; }
    vmax = std::max(vmax, v);
  }
  // Golden-section search on the bracketing grid cells.
  const double step = kPi / kGrid;
  double a = (best - 1) * step, b = (best + 1) * step;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a), e = a + ratio * (b - a);
  double fc = variance(c), fe = variance(e);
  while (b - a > 1e-3) {
    if (fc < fe) {
      b = e; e = c; fe = fc;
      c = b - ratio * (b - a); fc = variance(c);
    } else {
      a = c; c = e; fc = fe;
      e = a + ratio * (b - a); fe = variance(e);
    }
  }
  PhaseSearch out;
  out.phase = std::fmod(0.5 * (a + b) + kPi, kPi);
  out.var_min = std::min(vmin, variance(out.phase));
  out.var_max = vmax;
  out.contrast = (vmax - out.var_min) / (vmax + out.var_min);
  out.flat = out.contrast < 0.05;
  return out;
}

} // namespace omsq
