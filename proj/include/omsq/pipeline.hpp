#pragma once

#include "omsq/config.hpp"
#include "omsq/detect.hpp"
#include "omsq/fitting.hpp"
#include "omsq/psd.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace omsq {

// Sideband path of one record: component backend, reference fit on the
// detuned segments, constrained double fit on the resonant segments.
struct SidebandRep {
  FitResult reference;
  FitResult resonant;
  Psd detuned_psd;
  Psd resonant_psd;
  double stokes_hz = 0.0;
  double antistokes_hz = 0.0;
};

// Quadrature path of one record: Wigner backend and lock-in.
struct QuadratureRep {
  PhaseSearch phase;
  LowpassDesign filter;
  double demod_rate = 0.0;
  FitResult detuned_x, detuned_y, resonant_x, resonant_y;
  Psd detuned_x_psd, detuned_y_psd, resonant_x_psd, resonant_y_psd;
  // sigma2 normalized by the detuned mean sigma_0^2.
  double norm_x = 0.0, norm_x_sigma = 0.0;
  double norm_y = 0.0, norm_y_sigma = 0.0;
  // Width ratios gamma / gamma_detuned: 1 + s and 1 - s.
  double width_plus = 0.0, width_plus_sigma = 0.0;
  double width_minus = 0.0, width_minus_sigma = 0.0;
  double gamma_detuned = 0.0, gamma_detuned_sigma = 0.0;
  // Detuned X vs Y spectra: chi^2 of the difference on decorrelated bins.
  double symmetry_chi2 = 0.0;
  std::size_t symmetry_dof = 0;
  double symmetry_p = 0.0;
};

struct RepOptions {
  kernels::Exec exec = kernels::Exec::parallel;
  const std::filesystem::path* raw_dir = nullptr; // dump raw records here when set
};

// Seeds: repetition r of sweep point k uses derive_seed(master, {k, r}).
std::uint64_t rep_seed(std::uint64_t master, std::uint64_t point, std::uint64_t rep);

SidebandRep run_sideband_rep(const RunConfig& cfg, const DerivedRates& rates, std::uint64_t seed,
                             const RepOptions& opts = {});
QuadratureRep run_quadrature_rep(const RunConfig& cfg, const DerivedRates& rates, std::uint64_t seed,
                                 const RepOptions& opts = {});

// Mean, sample standard deviation and RMS of the per-record fit sigma.
struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  double sigma_rms = 0.0;
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values, std::span<const double> sigmas);

// Writes config.cfg, per-repetition PSD CSVs and fit reports, and
// report.json into `dir`. Module errors are rethrown as StageError.
nlohmann::json run_single(const RunConfig& cfg, const std::filesystem::path& dir);

// One row per s value at fixed n_bar and gamma_eff; failures are recorded
// in the row and the sweep continues.
nlohmann::json run_sweep_ratio_vs_s(const RunConfig& cfg, std::span<const double> s_values,
                                    const std::filesystem::path& dir);

// One row per cooling fraction epsilon_c at fixed total pump power.
nlohmann::json run_sweep_variance_vs_tone_ratio(const RunConfig& cfg,
                                                std::span<const double> epsilon_values,
                                                const std::filesystem::path& dir);

struct ReportOutcome {
  bool complete = true; // no missing artifacts
  bool passed = true;   // every check within its acceptance bound
  std::vector<std::string> gaps;
};

// Human-readable summary followed by a tab-separated check table.
ReportOutcome report(const std::filesystem::path& dir, std::ostream& out);

} // namespace omsq
