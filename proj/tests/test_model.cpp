#include "omsq/errors.hpp"
#include "omsq/model.hpp"
#include "omsq/units.hpp"

#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace omsq;

namespace {

OscillatorParams desk_osc() {
  return {hz_to_rad(530e3), hz_to_rad(530e3) / 6.4e6, 5.8, std::nullopt, 7.0};
}

CavityPumpParams pump(double g_hz, double eps, double delta_hz) {
  return {hz_to_rad(1.4e6), hz_to_rad(g_hz), eps, hz_to_rad(delta_hz), hz_to_rad(11e3), hz_to_rad(12e3)};
}

// Frozen from tests/oracles/model_goldens.py (mpmath, 50 digits).
constexpr double kGammaParHighDetuning = 6.9115853424416776916;
constexpr double kGammaEffResonantCooling = 13.02083448345440637;
constexpr double kGammaM = 0.52032628325080950512;
constexpr double kGammaEffHighDetuning = -1.1788872365436720717;
constexpr double kGammaEffDesk = 6.9751132063738641443;
constexpr double kGammaParDesk = 2.126000981768384287;
constexpr double kGainDesk = 0.3047980611734936221;
constexpr double kBose7K = 275200.13009966504684;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST_SUITE("model") {

TEST_CASE("pump rates match the high-precision oracle") {
  const OscillatorParams o = desk_osc();
  CHECK(rel(o.gamma_m, kGammaM) < 1e-14);
  CHECK(rel(gamma_par(pump(1e3, 0.8, 530e3), o), kGammaParHighDetuning) < 1e-12);
  CHECK(rel(gamma_eff(pump(1e3, 1.0, 0.0), o).value, kGammaEffResonantCooling) < 1e-12);
  const DampingRate anti = gamma_eff(pump(1e3, 0.8, 530e3), o);
  CHECK(rel(anti.value, kGammaEffHighDetuning) < 1e-12);
  CHECK(anti.anti_damped);
  CHECK(rel(gamma_eff(pump(1e3, 0.8, 106e3), o).value, kGammaEffDesk) < 1e-12);
  CHECK(rel(gamma_par(pump(1e3, 0.8, 106e3), o), kGammaParDesk) < 1e-12);
  CHECK(rel(squeeze_param(pump(1e3, 0.8, 106e3), o), kGainDesk) < 1e-12);
  CHECK(rel(bose_occupancy(7.0, hz_to_rad(530e3)), kBose7K) < 1e-9);
}

TEST_CASE("resonant cooling tone alone gives no parametric gain") {
  const OscillatorParams o = desk_osc();
  CHECK(gamma_par(pump(1e3, 1.0, 0.0), o) == 0.0);
  CHECK(gamma_par(pump(7e3, 1.0, 106e3), o) == 0.0);
  CHECK_THROWS_AS(squeeze_param(pump(1e3, 0.8, 530e3), o), NumericalError);
  CHECK_THROWS_AS(derive_rates(o, pump(1e3, 0.8, 530e3)), RegimeError);
}

TEST_CASE("sideband ratios match the printed values") {
  const SidebandRatios r0 = ratios(5.8, 0.0);
  CHECK(r0.r_plain == doctest::Approx(1.1724137931034482759).epsilon(1e-15));
  CHECK(r0.r_plus == doctest::Approx(r0.r_plain).epsilon(1e-15));
  CHECK(r0.r_minus == doctest::Approx(r0.r_plain).epsilon(1e-15));
  const SidebandRatios r = ratios(5.8, 0.5);
  CHECK(r.r_plus == doctest::Approx(1.2702702702702702703).epsilon(1e-15));
  CHECK(r.r_minus == doctest::Approx(1.0826446280991735537).epsilon(1e-15));
}

TEST_CASE("ratio threshold and domain errors") {
  const SidebandRatios t = ratios(0.25, 0.5);
  CHECK(t.at_threshold);
  CHECK(std::isinf(t.r_plus));
  CHECK_THROWS(ratios(5.8, -0.1));
  CHECK_THROWS(ratios(-1.0, 0.1));
  CHECK(std::isinf(ratios(0.0, 0.0).r_plain));
}

TEST_CASE("weights satisfy the commutator and variance identities") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> un(0.0, 50.0), us(0.0, 0.99);
  for (int i = 0; i < 200; ++i) {
    const double n = un(gen), s = us(gen);
    const SidebandWeights w = sideband_weights(n, s);
    CHECK(w.stokes_narrow - w.antistokes_narrow == doctest::Approx(1.0 - s));
    CHECK(w.stokes_broad - w.antistokes_broad == doctest::Approx(1.0 + s));
    CHECK(w.negative_weight == (s > 2.0 * n));
    const QuadratureVariances v = quadrature_variances(n, s);
    CHECK(v.var_x * (1.0 + s) == doctest::Approx(v.var_y * (1.0 - s)));
    CHECK(v.var_x + v.var_y >= (2.0 * n + 1.0) / 2.0 - 1e-12);
  }
  CHECK_THROWS_AS(quadrature_variances(5.8, 1.0), RegimeError);
}

TEST_CASE("sum rule: Stokes minus anti-Stokes integrates to one quantum") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double inf = std::numeric_limits<double>::infinity();
  for (double n : {0.1, 5.8, 100.0}) {
    for (double s : {0.0, 0.5, 0.95}) {
      const double ge = 37.0;
      auto f = [&](double w) {
        return (sideband_density(n, s, ge, Sideband::stokes, w) -
                sideband_density(n, s, ge, Sideband::antistokes, w)) / kTwoPi;
      };
      CHECK(integrator.integrate(f, -inf, inf) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("quantum-squeezing regime gives negative weights but nonnegative spectra") {
  const SidebandWeights w = sideband_weights(0.3, 0.7);
  CHECK(w.negative_weight);
  CHECK(w.antistokes_broad == doctest::Approx(-0.05));
  std::vector<double> grid;
  for (int i = -500; i <= 500; ++i) grid.push_back(i * 0.5);
  const Psd p = analytic_sideband_psd(0.3, 0.7, 10.0, Sideband::antistokes, grid);
  for (double d : p.density) CHECK(d >= 0.0);
  CHECK(thresholds(0.3, 0.7).quantum_squeezed);
  CHECK_FALSE(thresholds(0.35, 0.7).quantum_squeezed);
  CHECK(thresholds(0.3, 0.7).quantum_reachable);
}

TEST_CASE("from_gain keeps gamma_eff and sets the split rates") {
  const DerivedRates r = DerivedRates::from_gain(5.8, 200.0, 0.4);
  CHECK(r.gamma_par == doctest::Approx(80.0));
  CHECK(r.gamma_plus == doctest::Approx(280.0));
  CHECK(r.gamma_minus == doctest::Approx(120.0));
  const DerivedRates d = r.detuned();
  CHECK(d.s == 0.0);
  CHECK(d.gamma_eff == r.gamma_eff);
}

TEST_CASE("tone ratio search inverts the gain") {
  const OscillatorParams o = desk_osc();
  for (double s : {0.0, 0.1, 0.3, 0.5, 0.515}) {
    CavityPumpParams p = pump(7e3, 1.0, 106e3);
    p.epsilon_c = tone_ratio_for_gain(o, p, s);
    CHECK(p.epsilon_c > 0.0);
    CHECK(p.epsilon_c <= 1.0);
    CHECK(squeeze_param(p, o) == doctest::Approx(s).epsilon(1e-9));
  }
}

TEST_CASE("parameter validation") {
  OscillatorParams o = desk_osc();
  CHECK_NOTHROW(o.validate());
  o.n_bar = -1.0;
  CHECK_THROWS(o.validate());
  o = desk_osc();
  CHECK_FALSE(o.x_zpf().has_value());
  o.mass = 1e-12;
  REQUIRE(o.x_zpf().has_value());
  CHECK(*o.x_zpf() > 0.0);
}

}
