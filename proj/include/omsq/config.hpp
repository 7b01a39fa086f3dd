#pragma once

#include "omsq/detect.hpp"
#include "omsq/fitting.hpp"
#include "omsq/model.hpp"
#include "omsq/psd.hpp"
#include "omsq/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace omsq {

struct AnalysisParams {
  WindowKind window = WindowKind::hann;
  double overlap = 0.5;
  double points_across = 10.0; // Welch bins across gamma_minus
  double band_widths = 15.0;   // fit half-band in units of the broad width
  std::vector<Interval> masks; // Hz, applied to sideband-record fits
};

enum class PathSelect { both, sideband, quadrature };

std::string to_string(PathSelect p);

// A full run description. Defaults are the desk-scale paper configuration.
struct RunConfig {
  OscillatorParams osc{hz_to_rad(530e3), hz_to_rad(530e3) / 6.4e6, 5.8, std::nullopt, 7.0};
  CavityPumpParams pump{hz_to_rad(1.4e6), hz_to_rad(7e3), 1.0, hz_to_rad(106e3), hz_to_rad(11e3),
                        hz_to_rad(12e3)};
  // When set, epsilon_c is solved so that the gain equals s_target.
  std::optional<double> s_target = 0.5;
  SimGrid grid{250e3, 100.0, hz_to_rad(50e3), 1};
  DetectionParams detect{1.0, 2.5e-3, 0.0, 20e3, 5.0, 0.7, 0.0, std::nullopt};
  AnalysisParams analysis;
  PathSelect paths = PathSelect::both;
  int repetitions = 5;
  std::vector<double> sweep_s;       // sweep-ratios axis
  std::vector<double> sweep_epsilon; // sweep-variances axis
  // Gains converted to sweep_epsilon entries by resolve().
  std::vector<double> sweep_epsilon_for_s;

  // Execution settings; not part of the hash.
  std::string output_dir = "omsq_out";
  int workers = 1;
  bool keep_raw = false;

  // Solves epsilon_c from s_target and sweep_epsilon_for_s into sweep_epsilon.
  void resolve();
  // Cross-module preconditions. Throws ConfigError or RegimeError.
  void validate() const;
  DerivedRates rates() const;

  // Sorted key = value lines in SI units; execution settings excluded.
  std::string canonical() const;
  // FNV-1a of canonical(), 16 hex digits.
  std::string hash() const;
};

// Flat "key = value" text; '#' starts a comment. Dimensional values need a
// unit suffix: angular rates take Hz, kHz, MHz, GHz (times 2 pi) or rad/s;
// plain frequencies Hz, kHz, MHz; times s, ms, us; temperature K, mK; mass
// kg, g, mg, ug, ng, pg; phases rad, deg.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Value with unit, e.g. "1.4MHz" for an angular key -> 2 pi 1.4e6.
enum class Quantity { angular, frequency, time, temperature, mass, phase, plain };
double parse_quantity(std::string_view text, Quantity kind);

std::uint64_t fnv1a(std::string_view data);

} // namespace omsq
