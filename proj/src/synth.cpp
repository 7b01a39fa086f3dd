#include "omsq/synth.hpp"

#include "omsq/errors.hpp"
#include "omsq/rng.hpp"
#include "omsq/units.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace omsq {

std::size_t SimGrid::size() const {
  if (!(sample_rate > 0.0) || !(duration > 0.0)) {
    throw ConfigError("sample_rate and duration must be positive");
  }
  const double n = std::round(duration * sample_rate);
  if (!(n < 4e9)) throw ConfigError("record too long to hold in memory");
  return static_cast<std::size_t>(n);
}

void SimGrid::validate(double delta_lo, double gamma_plus) const {
  (void)size();
  const double needed = 2.0 * rad_to_hz(carrier + delta_lo + 10.0 * gamma_plus);
  if (!(sample_rate > needed)) {
    throw ConfigError("sample_rate " + std::to_string(sample_rate) +
                      " Hz below the Nyquist margin " + std::to_string(needed) + " Hz");
  }
  if (!(carrier > delta_lo + 10.0 * gamma_plus)) {
    throw ConfigError("carrier must exceed delta_lo + 10 gamma_plus so both sidebands stay at positive frequency");
  }
}

const char* to_string(DriveTag tag) {
  return tag == DriveTag::resonant ? "resonant" : "detuned";
}

double ou_step(double prev, double decay_rate, double stationary_var, double dt, double noise_draw) {
  if (!(decay_rate > 0.0) || !(dt > 0.0)) throw std::invalid_argument("ou_step: decay_rate and dt must be positive");
  const double alpha = std::exp(-decay_rate * dt);
  return alpha * prev + std::sqrt(stationary_var * (1.0 - alpha * alpha)) * noise_draw;
}

OuCoefficients::OuCoefficients(double decay_rate, double stationary_var, double dt) {
  if (!(decay_rate > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("OU decay rate and dt must be positive");
  }
  if (!(stationary_var >= 0.0)) throw std::invalid_argument("OU variance must be >= 0");
  alpha_ = std::exp(-decay_rate * dt);
  // 1 - alpha^2 via expm1 keeps precision for decay * dt << 1.
  scale_ = std::sqrt(-stationary_var * std::expm1(-2.0 * decay_rate * dt));
  sd_ = std::sqrt(stationary_var);
}

double component_variance(double weight, double gamma_eff, double gamma) {
  return weight * gamma_eff / (2.0 * gamma);
}

namespace {

// Sample ranges [first, last) of each schedule segment with its rates.
struct Phase {
  std::size_t first = 0;
  std::size_t last = 0;
  DerivedRates rates;
};

std::vector<Phase> phases_for(const DerivedRates& rates, const SimGrid& grid,
                              std::span<const Segment> schedule) {
  const std::size_t n = grid.size();
  if (schedule.empty()) return {Phase{0, n, rates}};
  std::vector<Phase> out;
  std::size_t cursor = 0;
  for (const Segment& seg : schedule) {
    const auto last = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::llround(seg.end * grid.sample_rate)));
    if (last <= cursor) continue;
    out.push_back({cursor, last, seg.tag == DriveTag::resonant ? rates : rates.detuned()});
    cursor = last;
  }
  if (cursor < n) {
    throw std::invalid_argument("schedule does not cover the record");
  }
  return out;
}

void require_stable(const DerivedRates& rates) {
  if (!(rates.s < 1.0)) {
    throw RegimeError("parametric instability: synthesis requires s < 1 (s = " +
                      std::to_string(rates.s) + ")");
  }
  if (!(rates.gamma_minus > 0.0)) throw RegimeError("gamma_minus must be positive");
}

// Real OU chain over scheduled phases, started from the stationary law of
// the first phase.
void run_real_chain(std::vector<double>& out, const std::vector<Phase>& phases, double dt,
                    std::uint64_t seed, bool broad) {
  NormalStream normal(seed);
  double value = 0.0;
  bool first = true;
  for (const Phase& ph : phases) {
    const QuadratureVariances v = quadrature_variances(ph.rates.n_bar, ph.rates.s);
    const double var = broad ? v.var_x : v.var_y;
    const double decay = 0.5 * (broad ? ph.rates.gamma_plus : ph.rates.gamma_minus);
    const OuCoefficients ou(decay, var, dt);
    if (first) {
      value = ou.stationary_sd() * normal();
      first = false;
    }
    for (std::size_t i = ph.first; i < ph.last; ++i) {
      out[i] = value;
      value = ou.step(value, normal());
    }
  }
}

enum class Component { stokes_narrow, stokes_broad, antistokes_narrow, antistokes_broad };

double weight_of(const SidebandWeights& w, Component c) {
  switch (c) {
  case Component::stokes_narrow: return w.stokes_narrow;
  case Component::stokes_broad: return w.stokes_broad;
  case Component::antistokes_narrow: return w.antistokes_narrow;
  case Component::antistokes_broad: return w.antistokes_broad;
  }
  return 0.0;
}

bool is_broad(Component c) {
  return c == Component::stokes_broad || c == Component::antistokes_broad;
}

// Adds one complex OU component to `out`.
void add_complex_chain(std::vector<std::complex<double>>& out, const std::vector<Phase>& phases,
                       double dt, std::uint64_t seed, Component c) {
  NormalStream normal(seed);
  std::complex<double> value;
  bool first = true;
  for (const Phase& ph : phases) {
    const double gamma = is_broad(c) ? ph.rates.gamma_plus : ph.rates.gamma_minus;
    const double var = component_variance(weight_of(ph.rates.weights, c), ph.rates.gamma_eff, gamma);
    // Real and imaginary parts each carry half the variance.
    const OuCoefficients ou(0.5 * gamma, 0.5 * var, dt);
    if (first) {
      const double re = normal();
      const double im = normal();
      value = ou.stationary_sd() * std::complex<double>(re, im);
      first = false;
    }
    for (std::size_t i = ph.first; i < ph.last; ++i) {
      out[i] += value;
      const double re = normal();
      const double im = normal();
      value = {ou.step(value.real(), re), ou.step(value.imag(), im)};
    }
  }
}

} // namespace

QuadTrajectory simulate_quadratures(const DerivedRates& rates, const SimGrid& grid,
                                    std::span<const Segment> schedule) {
  require_stable(rates);
  const std::vector<Phase> phases = phases_for(rates, grid, schedule);
  QuadTrajectory traj;
  traj.grid = grid;
  traj.rates = rates;
  traj.x.resize(grid.size());
  traj.y.resize(grid.size());
  run_real_chain(traj.x, phases, grid.dt(), derive_seed(grid.seed, {static_cast<std::uint64_t>(Stream::quadrature_x)}), true);
  run_real_chain(traj.y, phases, grid.dt(), derive_seed(grid.seed, {static_cast<std::uint64_t>(Stream::quadrature_y)}), false);
  return traj;
}

QuadTrajectory detuned_reference_trajectory(const DerivedRates& rates, const SimGrid& grid) {
  require_stable(rates);
  return simulate_quadratures(rates.detuned(), grid);
}

SidebandEnvelopes simulate_sideband_envelopes(const DerivedRates& rates, const SimGrid& grid,
                                              std::span<const Segment> schedule) {
  require_stable(rates);
  if (rates.weights.negative_weight || rates.s > 2.0 * rates.n_bar) {
    throw RegimeError("quantum-squeezing regime (s > 2n_bar): the broad anti-Stokes weight " +
                      std::to_string(rates.weights.antistokes_broad) +
                      " is negative and cannot be synthesized as a component process; "
                      "use the analytic spectra");
  }
  const std::vector<Phase> phases = phases_for(rates, grid, schedule);
  SidebandEnvelopes env;
  env.grid = grid;
  env.rates = rates;
  env.stokes.assign(grid.size(), {});
  env.antistokes.assign(grid.size(), {});
  const double dt = grid.dt();
  auto seed = [&](Stream s) { return derive_seed(grid.seed, {static_cast<std::uint64_t>(s)}); };
  add_complex_chain(env.stokes, phases, dt, seed(Stream::stokes_narrow), Component::stokes_narrow);
  add_complex_chain(env.stokes, phases, dt, seed(Stream::stokes_broad), Component::stokes_broad);
  add_complex_chain(env.antistokes, phases, dt, seed(Stream::antistokes_narrow), Component::antistokes_narrow);
  add_complex_chain(env.antistokes, phases, dt, seed(Stream::antistokes_broad), Component::antistokes_broad);
  return env;
}

} // namespace omsq
