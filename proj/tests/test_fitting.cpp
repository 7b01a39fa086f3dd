#include "omsq/errors.hpp"
#include "omsq/fitting.hpp"
#include "omsq/units.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace omsq;

namespace {

// Averaged-periodogram-like spectrum of `m` at parameters `p`: each bin is
// the model times a Gamma(K, 1/K) variate (chi^2 with 2K dof over 2K).
Psd synthetic(const SpectralModel& m, const std::vector<double>& p, double f0, double f1, double rbw,
              double k, std::uint64_t seed, double shift = 0.0) {
  Psd psd;
  psd.rbw = rbw;
  psd.enbw = rbw;
  psd.n_averages = static_cast<std::size_t>(k);
  psd.effective_averages = k;
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> g(k, 1.0 / k);
  for (double f = f0; f <= f1; f += rbw) {
    psd.freqs.push_back(f + shift);
    psd.density.push_back(m.density(f, p) * (seed ? g(gen) : 1.0));
  }
  return psd;
}

FitOptions opts(double half) {
  FitOptions o;
  o.half_width_hz = half;
  return o;
}

const double kGe = hz_to_rad(37.0);

} // namespace

TEST_SUITE("fitting") {

TEST_CASE("Lorentzian has unit area and the right width") {
  double area = 0.0;
  for (double f = -2e4; f <= 2e4; f += 0.01) area += lorentzian(f, kGe) * 0.01;
  CHECK(area == doctest::Approx(1.0).epsilon(2e-3));
  const double peak = lorentzian(0.0, kGe);
  CHECK(lorentzian(18.5, kGe) == doctest::Approx(0.5 * peak));
  const double h = 1e-4;
  CHECK(lorentzian_dgamma(3.0, kGe) ==
        doctest::Approx((lorentzian(3.0, kGe + h) - lorentzian(3.0, kGe - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("noise-free spectra are recovered exactly") {
  const SpectralModel single = SpectralModel::single_pair(61e3, 39e3);
  const Psd a = synthetic(single, {1e-3, kGe, 2.0, 1.7}, 38e3, 62e3, 1.8, 100, 0);
  const FitResult rs = fit_single_pair(a, 61e3, 39e3, opts(800.0));
  CHECK(rs.value("gamma") == doctest::Approx(kGe).epsilon(1e-6));
  CHECK(rs.derived_value("R").value == doctest::Approx(2.0 / 1.7).epsilon(1e-6));
  CHECK(rs.derived_value("n_bar").value == doctest::Approx(1.7 / 0.3).epsilon(1e-5));

  const SpectralModel dbl = SpectralModel::double_pair(61e3, 39e3, kGe, 0.0);
  const std::vector<double> p{1e-3, 0.5, kGe, 6.55, 7.05, 6.05, 5.55};
  const Psd b = synthetic(dbl, p, 38e3, 62e3, 1.8, 100, 0);
  const FitResult rd = fit_double_pair(b, 61e3, 39e3, kGe, 0.0, opts(800.0));
  CHECK(rd.value("s") == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rd.derived_value("R_plus").value == doctest::Approx(7.05 / 5.55).epsilon(1e-6));
  CHECK(rd.derived_value("R_minus").value == doctest::Approx(6.55 / 6.05).epsilon(1e-6));
  CHECK(rd.derived_value("gamma_plus").value == doctest::Approx(1.5 * kGe));

  const SpectralModel q = SpectralModel::quadrature(11e3);
  const Psd c = synthetic(q, {2e-3, kGe, 3.0}, 9e3, 13e3, 1.8, 100, 0);
  const FitResult rq = fit_quadrature(c, 11e3, opts(800.0));
  CHECK(rq.value("sigma2") == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(rq.value("gamma") == doctest::Approx(kGe).epsilon(1e-6));
}

TEST_CASE("fits are invariant under scaling the density") {
  const SpectralModel q = SpectralModel::quadrature(11e3);
  Psd a = synthetic(q, {2e-3, kGe, 3.0}, 9e3, 13e3, 1.8, 100, 7);
  const FitResult r1 = fit_quadrature(a, 11e3, opts(800.0));
  for (double& d : a.density) d *= 1e6;
  const FitResult r2 = fit_quadrature(a, 11e3, opts(800.0));
  CHECK(r2.value("gamma") == doctest::Approx(r1.value("gamma")).epsilon(1e-7));
  CHECK(r2.value("sigma2") == doctest::Approx(1e6 * r1.value("sigma2")).epsilon(1e-7));
  CHECK(r2.sigma("gamma") == doctest::Approx(r1.sigma("gamma")).epsilon(1e-6));
}

TEST_CASE("fits are invariant under shifting the axis and centers") {
  const SpectralModel single = SpectralModel::single_pair(61e3, 39e3);
  const std::vector<double> p{1e-3, kGe, 2.0, 1.7};
  const Psd a = synthetic(single, p, 38e3, 62e3, 1.8, 100, 8);
  const Psd b = synthetic(single, p, 38e3, 62e3, 1.8, 100, 8, 1234.0);
  const FitResult ra = fit_single_pair(a, 61e3, 39e3, opts(800.0));
  const FitResult rb = fit_single_pair(b, 61e3 + 1234.0, 39e3 + 1234.0, opts(800.0));
  CHECK(rb.value("gamma") == doctest::Approx(ra.value("gamma")).epsilon(1e-6));
  CHECK(rb.derived_value("R").value == doctest::Approx(ra.derived_value("R").value).epsilon(1e-6));
}

TEST_CASE("masks remove a spurious line") {
  const SpectralModel q = SpectralModel::quadrature(11e3);
  Psd a = synthetic(q, {2e-3, kGe, 3.0}, 9e3, 13e3, 1.8, 100, 9);
  const std::size_t spur = a.bin_of(11.3e3);
  a.density[spur] += 5.0;
  const FitResult dirty = fit_quadrature(a, 11e3, opts(800.0));
  FitOptions o = opts(800.0);
  o.masks = {{11.3e3 - 3.0, 11.3e3 + 3.0}};
  const FitResult clean = fit_quadrature(a, 11e3, o);
  CHECK(std::abs(clean.value("sigma2") - 3.0) < 3.0 * clean.sigma("sigma2"));
  CHECK(std::abs(dirty.value("sigma2") - 3.0) > std::abs(clean.value("sigma2") - 3.0));
  REQUIRE(clean.masks.size() == 1);
  o.masks = {{10.5e3, 11e3}};
  CHECK_THROWS_AS(fit_quadrature(a, 11e3, o), ConfigError);
}

TEST_CASE("reported sigma is calibrated on independent spectra") {
  const SpectralModel q = SpectralModel::quadrature(11e3);
  std::vector<double> pulls_g, pulls_s;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    const Psd a = synthetic(q, {2e-3, kGe, 3.0}, 10e3, 12e3, 1.8, 60, seed);
    const FitResult r = fit_quadrature(a, 11e3, opts(600.0));
    pulls_g.push_back((r.value("gamma") - kGe) / r.sigma("gamma"));
    pulls_s.push_back((r.value("sigma2") - 3.0) / r.sigma("sigma2"));
  }
  auto var = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  CHECK(var(pulls_g) > 0.7);
  CHECK(var(pulls_g) < 1.4);
  CHECK(var(pulls_s) > 0.7);
  CHECK(var(pulls_s) < 1.4);
}

TEST_CASE("fit report serializes provenance fields") {
  const SpectralModel q = SpectralModel::quadrature(11e3);
  const Psd a = synthetic(q, {2e-3, kGe, 3.0}, 9e3, 13e3, 1.8, 100, 3);
  const FitResult r = fit_quadrature(a, 11e3, opts(800.0));
  const nlohmann::json j = r.to_json();
  CHECK(j["model"] == "quadrature");
  CHECK(j.contains("chi2"));
  CHECK(j.contains("params"));
  CHECK(r.converged);
  CHECK(r.reduced_chi2 == doctest::Approx(1.0).epsilon(0.3));
  CHECK_THROWS(r.value("nope"));
}

TEST_CASE("fit preconditions") {
  const SpectralModel q = SpectralModel::quadrature(11e3);
  const Psd a = synthetic(q, {2e-3, kGe, 3.0}, 9e3, 13e3, 1.8, 100, 3);
  CHECK_THROWS(fit_quadrature(a, 11e3, opts(0.0)));
  CHECK_THROWS_AS(fit_quadrature(a, 50e3, opts(100.0)), ConfigError);
  CHECK_THROWS(fit_double_pair(a, 11e3, 10e3, -1.0, 0.0, opts(100.0)));
}

}
