#include "omsq/kernels.hpp"

#include "omsq/fft.hpp"
#include "omsq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace omsq::kernels {

namespace {

using Index = std::ptrdiff_t;

std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

// Runs f(begin, end) over fixed blocks of [0, n).
template <class F>
void for_each_block(std::size_t n, F&& f) {
  const Index nb = static_cast<Index>(block_count(n));
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < nb; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    f(begin, std::min(n, begin + kBlock));
  }
}

// e^{i (w dt n + phase)} evaluated directly.
cplx phasor_at(double w, double dt, std::size_t n, double phase) {
  const double arg = w * dt * static_cast<double>(n) + phase;
  return {std::cos(arg), std::sin(arg)};
}

// Phasor sequence anchored exactly at `begin` and advanced by rotation.
class PhasorRun {
public:
  PhasorRun(double w, double dt, std::size_t begin, double phase)
      : z_(phasor_at(w, dt, begin, phase)), step_(std::cos(w * dt), std::sin(w * dt)) {}

  cplx value() const { return z_; }
  void advance() { z_ *= step_; }

private:
  cplx z_;
  cplx step_;
};

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": input lengths differ");
}

} // namespace

void add_white_noise(std::span<double> out, double sigma, std::uint64_t seed, Exec exec) {
  if (sigma == 0.0) return;
  auto fill = [&](std::size_t begin, std::size_t end) {
    NormalStream normal(derive_seed(seed, {begin / kBlock}));
    for (std::size_t n = begin; n < end; ++n) out[n] += sigma * normal();
  };
  if (exec == Exec::parallel) {
    for_each_block(out.size(), fill);
  } else {
    for (std::size_t b = 0; b < block_count(out.size()); ++b) {
      fill(b * kBlock, std::min(out.size(), (b + 1) * kBlock));
    }
  }
}

void add_wigner_heterodyne(std::span<const double> x, std::span<const double> y, double gain,
                           double carrier, double frame_phase, double lo, double lo_phase,
                           double dt, std::span<double> out, Exec exec) {
  check_same_size(x.size(), y.size(), "add_wigner_heterodyne");
  check_same_size(x.size(), out.size(), "add_wigner_heterodyne");
  const double a = 2.0 * gain;
  if (exec == Exec::serial) {
    for (std::size_t n = 0; n < out.size(); ++n) {
      const double t = dt * static_cast<double>(n);
      const double osc = carrier * t + frame_phase;
      out[n] += a * (x[n] * std::cos(osc) + y[n] * std::sin(osc)) * std::cos(lo * t + lo_phase);
    }
    return;
  }
  for_each_block(out.size(), [&](std::size_t begin, std::size_t end) {
    PhasorRun zc(carrier, dt, begin, frame_phase);
    PhasorRun zl(lo, dt, begin, lo_phase);
    for (std::size_t n = begin; n < end; ++n) {
      const cplx c = zc.value();
      out[n] += a * (x[n] * c.real() + y[n] * c.imag()) * zl.value().real();
      zc.advance();
      zl.advance();
    }
  });
}

void add_sideband_heterodyne(std::span<const cplx> stokes, std::span<const cplx> antistokes,
                             double gain, double w_stokes, double w_antistokes, double dt,
                             std::span<double> out, Exec exec) {
  check_same_size(stokes.size(), antistokes.size(), "add_sideband_heterodyne");
  check_same_size(stokes.size(), out.size(), "add_sideband_heterodyne");
  if (exec == Exec::serial) {
    for (std::size_t n = 0; n < out.size(); ++n) {
      out[n] += gain * (stokes[n] * phasor_at(w_stokes, dt, n, 0.0)).real() +
                gain * (antistokes[n] * phasor_at(w_antistokes, dt, n, 0.0)).real();
    }
    return;
  }
  for_each_block(out.size(), [&](std::size_t begin, std::size_t end) {
    PhasorRun zs(w_stokes, dt, begin, 0.0);
    PhasorRun za(w_antistokes, dt, begin, 0.0);
    for (std::size_t n = begin; n < end; ++n) {
      out[n] += gain * (stokes[n] * zs.value()).real() + gain * (antistokes[n] * za.value()).real();
      zs.advance();
      za.advance();
    }
  });
}

void add_tone(double amplitude, double w, double dt, std::span<double> out, Exec exec) {
  if (amplitude == 0.0) return;
  if (exec == Exec::serial) {
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += amplitude * phasor_at(w, dt, n, 0.0).real();
    return;
  }
  for_each_block(out.size(), [&](std::size_t begin, std::size_t end) {
    PhasorRun z(w, dt, begin, 0.0);
    for (std::size_t n = begin; n < end; ++n) {
      out[n] += amplitude * z.value().real();
      z.advance();
    }
  });
}

std::size_t decimated_length(std::size_t n, std::size_t taps, std::size_t decimation) {
  if (decimation == 0 || taps == 0) throw std::invalid_argument("decimation and taps must be positive");
  if (n < taps) return 0;
  return (n - taps) / decimation + 1;
}

void mix_and_decimate(std::span<const double> x, double carrier, double phase, double dt,
                      std::span<const double> taps, std::size_t decimation,
                      std::span<double> out_i, std::span<double> out_q, Exec exec) {
  const std::size_t m_total = decimated_length(x.size(), taps.size(), decimation);
  check_same_size(out_i.size(), m_total, "mix_and_decimate");
  check_same_size(out_q.size(), m_total, "mix_and_decimate");
  const std::size_t L = taps.size();

  if (exec == Exec::serial) {
    std::vector<double> ui(x.size()), uq(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double arg = carrier * dt * static_cast<double>(n) + phase;
      ui[n] = 2.0 * x[n] * std::cos(arg);
      uq[n] = 2.0 * x[n] * std::sin(arg);
    }
    for (std::size_t m = 0; m < m_total; ++m) {
      double si = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < L; ++k) {
        si += taps[k] * ui[m * decimation + k];
        sq += taps[k] * uq[m * decimation + k];
      }
      out_i[m] = si;
      out_q[m] = sq;
    }
    return;
  }

  // Output blocks; each block mixes the input span it needs into local buffers.
  for_each_block(m_total, [&](std::size_t m0, std::size_t m1) {
    const std::size_t n0 = m0 * decimation;
    const std::size_t n1 = (m1 - 1) * decimation + L;
    std::vector<double> ui(n1 - n0), uq(n1 - n0);
    PhasorRun z(carrier, dt, n0, phase);
    for (std::size_t n = n0; n < n1; ++n) {
      const cplx c = z.value();
      ui[n - n0] = 2.0 * x[n] * c.real();
      uq[n - n0] = 2.0 * x[n] * c.imag();
      z.advance();
    }
    for (std::size_t m = m0; m < m1; ++m) {
      const std::size_t off = m * decimation - n0;
      double si = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < L; ++k) {
        si += taps[k] * ui[off + k];
        sq += taps[k] * uq[off + k];
      }
      out_i[m] = si;
      out_q[m] = sq;
    }
  });
}

namespace {

// Segments per partial sum in the parallel Welch reduction.
constexpr std::size_t kSegmentsPerChunk = 8;

template <class Sample, class Plan>
void periodogram_into(std::span<const Sample> x, std::size_t start, std::span<const double> window,
                      const Plan& plan, std::vector<Sample>& in, std::vector<cplx>& out,
                      std::span<double> acc) {
  const std::size_t n = window.size();
  Sample mean{};
  for (std::size_t i = 0; i < n; ++i) mean += x[start + i];
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = (x[start + i] - mean) * window[i];
  plan.execute(in.data(), out.data());
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::norm(out[k]);
}

template <class Sample, class Plan>
void accumulate_impl(std::span<const Sample> x, std::span<const std::size_t> starts,
                     std::span<const double> window, std::span<double> acc, Exec exec,
                     std::size_t out_bins) {
  const std::size_t n = window.size();
  if (acc.size() != out_bins) throw std::invalid_argument("accumulate_periodograms: bad accumulator size");
  for (std::size_t s : starts) {
    if (s + n > x.size()) throw std::invalid_argument("accumulate_periodograms: segment out of range");
  }
  std::fill(acc.begin(), acc.end(), 0.0);
  const Plan plan(n);

  if (exec == Exec::serial) {
    std::vector<Sample> in(n);
    std::vector<cplx> out(out_bins);
    for (std::size_t s : starts) periodogram_into(x, s, window, plan, in, out, acc);
    return;
  }

  const std::size_t n_chunks = (starts.size() + kSegmentsPerChunk - 1) / kSegmentsPerChunk;
  std::vector<std::vector<double>> partial(n_chunks);
#pragma omp parallel
  {
    std::vector<Sample> in(n);
    std::vector<cplx> out(out_bins);
#pragma omp for schedule(static)
    for (Index c = 0; c < static_cast<Index>(n_chunks); ++c) {
      auto& part = partial[static_cast<std::size_t>(c)];
      part.assign(out_bins, 0.0);
      const std::size_t s0 = static_cast<std::size_t>(c) * kSegmentsPerChunk;
      const std::size_t s1 = std::min(starts.size(), s0 + kSegmentsPerChunk);
      for (std::size_t s = s0; s < s1; ++s) periodogram_into(x, starts[s], window, plan, in, out, part);
    }
  }
  for (const auto& part : partial) {
    for (std::size_t k = 0; k < out_bins; ++k) acc[k] += part[k];
  }
}

} // namespace

void accumulate_periodograms(std::span<const double> x, std::span<const std::size_t> starts,
                             std::span<const double> window, std::span<double> acc, Exec exec) {
  accumulate_impl<double, fft::RealForward>(x, starts, window, acc, exec, window.size() / 2 + 1);
}

void accumulate_periodograms(std::span<const cplx> x, std::span<const std::size_t> starts,
                             std::span<const double> window, std::span<double> acc, Exec exec) {
  accumulate_impl<cplx, fft::ComplexForward>(x, starts, window, acc, exec, window.size());
}

} // namespace omsq::kernels
