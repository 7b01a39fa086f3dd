#include "omsq/errors.hpp"
#include "omsq/rng.hpp"
#include "omsq/spectral.hpp"
#include "omsq/units.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

using namespace omsq;

namespace {

std::vector<double> white(std::size_t n, double sigma, std::uint64_t seed) {
  NormalStream z(seed);
  std::vector<double> v(n);
  for (double& x : v) x = sigma * z();
  return v;
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / v.size();
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("segment tiling") {
  const WelchParams p{100, 0.5, WindowKind::hann};
  const auto all = segment_starts(400, p, {});
  CHECK(all == std::vector<std::size_t>{0, 50, 100, 150, 200, 250, 300});
  const std::vector<SampleSpan> spans{{0, 180}, {200, 320}};
  CHECK(segment_starts(400, p, spans) == std::vector<std::size_t>{0, 50, 200});
  CHECK_THROWS(segment_starts(400, {1, 0.5, WindowKind::hann}, {}));
  CHECK_THROWS(segment_starts(400, {100, 1.0, WindowKind::hann}, {}));
}

TEST_CASE("windows are periodic and normalized kernels sum to one") {
  const auto w = make_window(WindowKind::hann, 8);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(w[6]));
  const auto r = make_window(WindowKind::rectangular, 5);
  for (double x : r) CHECK(x == 1.0);
  const auto x = white(1 << 14, 1.0, 1);
  const Psd p = welch_psd(x, 1e3, {512, 0.5, WindowKind::blackman});
  CHECK(std::accumulate(p.kernel_weights.begin(), p.kernel_weights.end(), 0.0) == doctest::Approx(1.0));
  CHECK(p.enbw > p.rbw);
}

TEST_CASE("white noise level and Parseval") {
  const double fs = 2e3, sigma = 1.7;
  const auto x = white(1 << 19, sigma, 2);
  for (WindowKind k : {WindowKind::hann, WindowKind::blackman, WindowKind::rectangular}) {
    const Psd p = welch_psd(x, fs, {1024, 0.5, k});
    CHECK(p.integral() == doctest::Approx(variance(x)).epsilon(0.01));
    double mid = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 10; i + 10 < p.size(); ++i, ++n) mid += p.density[i];
    CHECK(mid / n == doctest::Approx(2.0 * sigma * sigma / fs).epsilon(0.01));
  }
}

TEST_CASE("complex input is two-sided on an ascending axis") {
  NormalStream z(3);
  std::vector<std::complex<double>> x(1 << 17);
  for (auto& v : x) v = {z(), z()};
  const Psd p = welch_psd(std::span<const std::complex<double>>(x), 1e3, {256, 0.5, WindowKind::hann});
  CHECK_FALSE(p.one_sided);
  CHECK(p.freqs.front() == doctest::Approx(-500.0));
  for (std::size_t i = 1; i < p.size(); ++i) CHECK(p.freqs[i] > p.freqs[i - 1]);
  CHECK(p.integral() == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("sinusoid power lands at its frequency") {
  const double fs = 1e3, f0 = 125.0, a = 2.0;
  std::vector<double> x(1 << 16);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * std::cos(kTwoPi * f0 * i / fs);
  const Psd p = welch_psd(x, fs, {1000, 0.5, WindowKind::hann});
  CHECK(p.integral() == doctest::Approx(a * a / 2).epsilon(1e-3));
  const std::size_t k = p.bin_of(f0);
  CHECK(p.freqs[k] == doctest::Approx(f0));
  double near = 0.0;
  for (std::size_t i = k - 3; i <= k + 3; ++i) near += p.density[i] * p.rbw;
  CHECK(near == doctest::Approx(a * a / 2).epsilon(1e-3));
}

TEST_CASE("overlap statistics") {
  const auto x = white(1 << 16, 1.0, 4);
  const Psd none = welch_psd(x, 1e3, {1024, 0.0, WindowKind::hann});
  CHECK(none.effective_averages == doctest::Approx(static_cast<double>(none.n_averages)));
  CHECK(none.bin_correlation[0] == doctest::Approx(4.0 / 9.0).epsilon(1e-3)); // Hann adjacent-bin correlation
  const Psd half = welch_psd(x, 1e3, {1024, 0.5, WindowKind::hann});
  // 50% overlap Hann: segment correlation 1/6, K_eff ~ K / (1 + 2/36).
  CHECK(half.effective_averages / half.n_averages == doctest::Approx(1.0 / (1.0 + 2.0 / 36.0)).epsilon(0.02));
}

TEST_CASE("empirical scatter matches the effective averages") {
  const auto x = white(1 << 20, 1.0, 5);
  const Psd p = welch_psd(x, 1e3, {1024, 0.5, WindowKind::hann});
  double m = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 5; i + 5 < p.size(); ++i, ++n) m += p.density[i];
  m /= n;
  for (std::size_t i = 5; i + 5 < p.size(); ++i) s2 += (p.density[i] - m) * (p.density[i] - m);
  s2 /= n;
  CHECK(s2 / (m * m) == doctest::Approx(1.0 / p.effective_averages).epsilon(0.15));
}

TEST_CASE("resolution helpers and errors") {
  CHECK(segment_len_for(hz_to_rad(10.0), 1e3, 10.0) == 1000);
  CHECK(segment_len_for(hz_to_rad(30.0), 1e3, 10.0) % 2 == 0);
  CHECK_THROWS(segment_len_for(0.0, 1e3));
  Psd p;
  p.rbw = 1.0;
  CHECK(resolution_check(p, 5.0));
  CHECK_FALSE(resolution_check(p, 4.9));
  const auto x = white(1000, 1.0, 6);
  CHECK_THROWS_AS(welch_psd(x, 1e3, {2000, 0.5, WindowKind::hann}), NumericalError);
  CHECK_THROWS_AS(welch_psd(x, 1e3, {700, 0.5, WindowKind::hann}), NumericalError);
}

}
