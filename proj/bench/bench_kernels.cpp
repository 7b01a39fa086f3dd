#include "omsq/kernels.hpp"
#include "omsq/rng.hpp"
#include "omsq/spectral.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace omsq;
using kernels::Exec;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
  f(); // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, const std::function<void(Exec)>& f, int reps) {
  const double s = time_ms([&] { f(Exec::serial); }, reps);
  const double p = time_ms([&] { f(Exec::parallel); }, reps);
  std::printf("%-24s %10.2f %10.2f %8.2f\n", name, s, p, s / p);
}

} // namespace

int main() {
  constexpr std::size_t n = 1 << 22;
  constexpr double dt = 1.0 / 250e3;
  std::vector<double> x(n), y(n), out(n);
  std::vector<kernels::cplx> a(n), b(n);
  NormalStream z(7);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = z();
    y[i] = z();
    a[i] = {z(), z()};
    b[i] = {z(), z()};
  }
  std::printf("threads: %d, samples: %zu\n", omp_get_max_threads(), n);
  std::printf("%-24s %10s %10s %8s\n", "kernel", "serial_ms", "omp_ms", "speedup");

  row("add_white_noise", [&](Exec e) { kernels::add_white_noise(out, 1.0, 3, e); }, 5);
  row("add_wigner_heterodyne", [&](Exec e) {
    kernels::add_wigner_heterodyne(x, y, 1.0, 3.14e5, 0.7, 6.9e4, 0.0, dt, out, e);
  }, 5);
  row("add_sideband_heterodyne", [&](Exec e) {
    kernels::add_sideband_heterodyne(a, b, 1.0, 3.8e5, 2.4e5, dt, out, e);
  }, 5);
  const std::vector<double> taps(129, 1.0 / 129);
  const std::size_t m = kernels::decimated_length(n, taps.size(), 5);
  std::vector<double> oi(m), oq(m);
  row("mix_and_decimate", [&](Exec e) {
    kernels::mix_and_decimate(x, 3.1e5, 0.0, dt, taps, 5, oi, oq, e);
  }, 3);
  const WelchParams wp{16384, 0.5, WindowKind::hann};
  const std::vector<std::size_t> starts = segment_starts(n, wp, {});
  const std::vector<double> win = make_window(WindowKind::hann, wp.segment_len);
  std::vector<double> acc(wp.segment_len / 2 + 1);
  row("accumulate_periodograms", [&](Exec e) { kernels::accumulate_periodograms(x, starts, win, acc, e); }, 3);
  return 0;
}
