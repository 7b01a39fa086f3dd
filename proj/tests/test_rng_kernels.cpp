#include "omsq/kernels.hpp"
#include "omsq/rng.hpp"
#include "omsq/spectral.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <set>
#include <vector>

using namespace omsq;
using kernels::Exec;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  NormalStream z(seed);
  std::vector<double> v(n);
  for (double& x : v) x = z();
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Runs f with the given OpenMP thread count.
template <class F>
void with_threads(int n, F&& f) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(n);
  f();
  omp_set_num_threads(saved);
}

constexpr std::size_t kN = 3 * kernels::kBlock + 123;
constexpr double kDt = 1.0 / 250e3;

} // namespace

TEST_SUITE("rng_kernels") {

TEST_CASE("derived seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t p = 0; p < 20; ++p) {
    for (std::uint64_t r = 0; r < 20; ++r) seen.insert(derive_seed(1, {p, r}));
  }
  CHECK(seen.size() == 400);
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("normal stream moments") {
  const std::vector<double> v = normals(200000, 5);
  double m = 0.0, s2 = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= v.size();
  CHECK(std::abs(m) < 0.01);
  CHECK(s2 == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("white noise: serial and parallel are bit-identical") {
  std::vector<double> a(kN, 0.0), b(kN, 0.0);
  kernels::add_white_noise(a, 0.7, 9, Exec::serial);
  kernels::add_white_noise(b, 0.7, 9, Exec::parallel);
  CHECK(a == b);
}

TEST_CASE("heterodyne kernels agree with the serial reference") {
  const auto x = normals(kN, 1), y = normals(kN, 2);
  std::vector<double> a(kN, 0.0), b(kN, 0.0);
  kernels::add_wigner_heterodyne(x, y, 1.3, 3.1e5, 0.7, 6.9e4, 0.2, kDt, a, Exec::serial);
  kernels::add_wigner_heterodyne(x, y, 1.3, 3.1e5, 0.7, 6.9e4, 0.2, kDt, b, Exec::parallel);
  CHECK(max_abs_diff(a, b) < 1e-10);

  std::vector<kernels::cplx> s(kN), as(kN);
  for (std::size_t i = 0; i < kN; ++i) {
    s[i] = {x[i], y[i]};
    as[i] = {y[i], -x[i]};
  }
  std::fill(a.begin(), a.end(), 0.0);
  std::fill(b.begin(), b.end(), 0.0);
  kernels::add_sideband_heterodyne(s, as, 0.9, 3.8e5, 2.4e5, kDt, a, Exec::serial);
  kernels::add_sideband_heterodyne(s, as, 0.9, 3.8e5, 2.4e5, kDt, b, Exec::parallel);
  CHECK(max_abs_diff(a, b) < 1e-10);

  std::fill(a.begin(), a.end(), 0.0);
  std::fill(b.begin(), b.end(), 0.0);
  kernels::add_tone(0.5, 1.2e5, kDt, a, Exec::serial);
  kernels::add_tone(0.5, 1.2e5, kDt, b, Exec::parallel);
  CHECK(max_abs_diff(a, b) < 1e-10);
  CHECK(a[0] == doctest::Approx(0.5));
}

TEST_CASE("mix and decimate matches the serial reference") {
  const auto x = normals(kN, 4);
  const std::vector<double> taps{0.1, 0.2, 0.4, 0.2, 0.1};
  const std::size_t m = kernels::decimated_length(kN, taps.size(), 3);
  CHECK(m == (kN - taps.size()) / 3 + 1);
  std::vector<double> ai(m), aq(m), bi(m), bq(m);
  kernels::mix_and_decimate(x, 3.1e5, 0.3, kDt, taps, 3, ai, aq, Exec::serial);
  kernels::mix_and_decimate(x, 3.1e5, 0.3, kDt, taps, 3, bi, bq, Exec::parallel);
  // Phasor re-anchoring per block changes rounding only.
  CHECK(max_abs_diff(ai, bi) < 1e-10);
  CHECK(max_abs_diff(aq, bq) < 1e-10);
  // Direct evaluation of one output sample.
  const std::size_t k = m / 2;
  double ref = 0.0;
  for (std::size_t j = 0; j < taps.size(); ++j) {
    const std::size_t n = 3 * k + j;
    ref += taps[j] * 2.0 * x[n] * std::cos(3.1e5 * n * kDt + 0.3);
  }
  CHECK(ai[k] == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("periodogram accumulation matches the serial reference") {
  const auto x = normals(kN, 6);
  const WelchParams wp{1024, 0.5, WindowKind::hann};
  const auto starts = segment_starts(kN, wp, {});
  const auto win = make_window(WindowKind::hann, 1024);
  std::vector<double> a(513, 0.0), b(513, 0.0);
  kernels::accumulate_periodograms(x, starts, win, a, Exec::serial);
  kernels::accumulate_periodograms(x, starts, win, b, Exec::parallel);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  const auto x = normals(kN, 7), y = normals(kN, 8);
  std::vector<double> ref(kN, 0.0);
  with_threads(1, [&] {
    kernels::add_white_noise(ref, 1.0, 3, Exec::parallel);
    kernels::add_wigner_heterodyne(x, y, 1.0, 3.1e5, 0.7, 6.9e4, 0.0, kDt, ref, Exec::parallel);
  });
  for (int t : {2, 3, 4}) {
    std::vector<double> out(kN, 0.0);
    with_threads(t, [&] {
      kernels::add_white_noise(out, 1.0, 3, Exec::parallel);
      kernels::add_wigner_heterodyne(x, y, 1.0, 3.1e5, 0.7, 6.9e4, 0.0, kDt, out, Exec::parallel);
    });
    CHECK(out == ref);
  }
}

}
