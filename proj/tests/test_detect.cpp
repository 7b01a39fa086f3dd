#include "omsq/detect.hpp"
#include "omsq/errors.hpp"
#include "omsq/spectral.hpp"
#include "omsq/units.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace omsq;

namespace {

double mean_sq(const std::vector<double>& v, std::size_t skip = 0) {
  double s = 0.0;
  for (std::size_t i = skip; i < v.size(); ++i) s += v[i] * v[i];
  return s / static_cast<double>(v.size() - skip);
}

SimGrid grid(double duration, std::uint64_t seed = 1) { return {250e3, duration, hz_to_rad(50e3), seed}; }

DetectionParams params(double frame_phase) {
  DetectionParams d;
  d.frame_phase = frame_phase;
  return d;
}

QuadTrajectory constant(double x, double y, const SimGrid& g) {
  QuadTrajectory t;
  t.grid = g;
  t.x.assign(g.size(), x);
  t.y.assign(g.size(), y);
  return t;
}

const double kLo = hz_to_rad(11e3);
const double kGammaPlus = hz_to_rad(55.0);

} // namespace

TEST_SUITE("detect") {

TEST_CASE("Kaiser lowpass meets its response specification") {
  const LowpassDesign f = design_lowpass(250e3, 20e3, 11.55e3, 88e3);
  CHECK(f.ripple_db < 0.1);
  CHECK(f.attenuation_db >= 60.0);
  CHECK(f.taps.size() % 2 == 1);
  for (std::size_t i = 0; i < f.taps.size() / 2; ++i) CHECK(f.taps[i] == doctest::Approx(f.taps[f.taps.size() - 1 - i]));
  CHECK(std::accumulate(f.taps.begin(), f.taps.end(), 0.0) == doctest::Approx(1.0));
  CHECK(f.stopband_hz == doctest::Approx(28.45e3));
  CHECK(f.decimation == static_cast<std::size_t>(250e3 / (28.45e3 + 11.55e3)));
  CHECK(f.beta == doctest::Approx(0.1102 * (70.0 - 8.7)));
}

TEST_CASE("lowpass design rejects infeasible edges") {
  CHECK_THROWS_AS(design_lowpass(250e3, 20e3, 11.55e3, 25e3), NumericalError);
  CHECK_THROWS_AS(design_lowpass(250e3, 10e3, 11.55e3, 88e3), NumericalError);
  CHECK_THROWS_AS(design_lowpass(50e3, 20e3, 11.55e3, 88e3), NumericalError);
}

TEST_CASE("drive schedule alternates from detuned with a settling guard") {
  const auto s = schedule_drive(grid(23.0), 5.0, 20.0);
  REQUIRE(s.size() == 5);
  CHECK(s[0].tag == DriveTag::detuned);
  CHECK(s[1].tag == DriveTag::resonant);
  CHECK(s[2].tag == DriveTag::detuned);
  CHECK(s[4].end == doctest::Approx(23.0));
  CHECK(s[1].guard == doctest::Approx(0.5));
  CHECK_THROWS_AS(schedule_drive(grid(23.0), 5.0, 7.9), ConfigError);  // guard > period / 4
  CHECK_THROWS_AS(schedule_drive(grid(4.0), 5.0, 20.0), ConfigError);  // no resonant segment
  CHECK_THROWS_AS(schedule_drive(grid(4.0), 0.0, 20.0), ConfigError);
}

TEST_CASE("record spans exclude the guard") {
  const auto s = schedule_drive(grid(20.0), 5.0, 20.0);
  const auto det = spans_for(s, DriveTag::detuned, 1000.0, 20000);
  REQUIRE(det.size() == 2);
  CHECK(det[0].begin == 500);
  CHECK(det[0].end == 5000);
  CHECK(det[1].begin == 10500);
}

TEST_CASE("lock-in at the frame phase recovers the quadratures") {
  const SimGrid g = grid(0.4);
  const double phi = 0.7;
  const Record rec = compose_heterodyne_wigner(constant(1.5, -0.4, g), params(phi), kLo);
  DetectionParams d = params(phi);
  d.demod_phase = phi;
  const DemodOutput out = lockin_demodulate(rec, d, kGammaPlus);
  // ch_x = 2 X cos(dlo t), ch_y = 2 Y cos(dlo t).
  CHECK(mean_sq(out.ch_x) == doctest::Approx(2.0 * 1.5 * 1.5).epsilon(2e-3));
  CHECK(mean_sq(out.ch_y) == doctest::Approx(2.0 * 0.4 * 0.4).epsilon(2e-3));
  CHECK(out.sample_rate == doctest::Approx(250e3 / out.filter.decimation));
  const std::size_t m = out.ch_x.size() / 2;
  const double t = out.time_of(m, 250e3);
  CHECK(out.ch_x[m] == doctest::Approx(2.0 * 1.5 * std::cos(kLo * t)).epsilon(1e-2));
}

TEST_CASE("phase search finds the squeezed quadrature") {
  const SimGrid g = grid(2.0, 4);
  const DerivedRates r = DerivedRates::from_gain(5.8, hz_to_rad(40.0), 0.5);
  const QuadTrajectory t = simulate_quadratures(r, g);
  for (double phi : {0.3, 1.2, 2.9}) {
    const Record rec = compose_heterodyne_wigner(t, params(phi), kLo);
    const PhaseSearch p = optimize_demod_phase(rec, params(phi), r.gamma_plus);
    CHECK_FALSE(p.flat);
    const double err = std::remainder(p.phase - phi, kPi);
    CHECK(std::abs(err) < 0.1);
  }
}

TEST_CASE("phase search reports a flat response for a thermal state") {
  const SimGrid g = grid(2.0, 5);
  const DerivedRates r = DerivedRates::from_gain(5.8, hz_to_rad(40.0), 0.0);
  const Record rec = compose_heterodyne_wigner(simulate_quadratures(r, g), params(0.0), kLo);
  CHECK(optimize_demod_phase(rec, params(0.0), r.gamma_plus).flat);
}

TEST_CASE("shot noise sets a white floor of the requested level") {
  const SimGrid g = grid(4.0, 6);
  DetectionParams d;
  d.shot_psd = 2.5e-3;
  const Record rec = compose_heterodyne_wigner(constant(0.0, 0.0, g), d, kLo);
  const Psd p = welch_psd(rec.samples, 250e3, {4096, 0.5, WindowKind::hann});
  CHECK(p.integral() == doctest::Approx(2.5e-3 * 125e3).epsilon(0.01));
  double mid = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 10; i + 10 < p.size(); ++i, ++n) mid += p.density[i];
  CHECK(mid / n == doctest::Approx(2.5e-3).epsilon(0.01));
}

TEST_CASE("component record places the sidebands at carrier +- dlo") {
  const SimGrid g = grid(10.0, 7);
  const DerivedRates r = DerivedRates::from_gain(5.8, hz_to_rad(40.0), 0.3);
  const SidebandEnvelopes env = simulate_sideband_envelopes(r, g);
  DetectionParams d;
  d.gain = 2.0;
  const Record rec = compose_heterodyne_components(env, d, kLo);
  const Psd p = welch_psd(rec.samples, 250e3, {1 << 16, 0.5, WindowKind::hann});
  auto band_power = [&](double f0) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (std::abs(p.freqs[i] - f0) < 2e3) s += p.density[i] * p.rbw;
    }
    return s;
  };
  double es = 0.0, ea = 0.0;
  for (std::size_t i = 0; i < env.stokes.size(); ++i) {
    es += std::norm(env.stokes[i]);
    ea += std::norm(env.antistokes[i]);
  }
  es /= env.stokes.size();
  ea /= env.antistokes.size();
  // Re{b e^{iwt}} carries half of |b|^2.
  CHECK(band_power(61e3) == doctest::Approx(2.0 * es).epsilon(0.02));
  CHECK(band_power(39e3) == doctest::Approx(2.0 * ea).epsilon(0.02));
}

TEST_CASE("composition and demodulation errors") {
  SimGrid g = grid(0.1);
  g.sample_rate = 100e3;
  CHECK_THROWS_AS(compose_heterodyne_wigner(constant(0, 0, g), params(0), kLo), ConfigError);
  DetectionParams d;
  d.lowpass_cutoff = 5e3;
  CHECK_THROWS_AS(d.validate(hz_to_rad(50e3), kLo, kGammaPlus), ConfigError);
  d.lowpass_cutoff = 20e3;
  d.shot_psd = -1.0;
  CHECK_THROWS_AS(d.validate(hz_to_rad(50e3), kLo, kGammaPlus), ConfigError);
}

}
