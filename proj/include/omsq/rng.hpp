#pragma once

#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace omsq {

// Stream identifiers below a master seed. Each component process draws
// from its own stream so records are reproducible under parallel sweeps.
enum class Stream : std::uint64_t {
  quadrature_x = 1,
  quadrature_y = 2,
  stokes_narrow = 3,
  stokes_broad = 4,
  antistokes_narrow = 5,
  antistokes_broad = 6,
  shot_noise = 7,
  sideband_record = 8,
  quadrature_record = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for a node of the stream tree: derive_seed(master, {point, rep, stream}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Unit normal draws: mt19937_64 engine, ziggurat transform. Both are
// specified bit-for-bit, so streams are identical across platforms.
class NormalStream {
public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return dist_(engine_); }

private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

} // namespace omsq
