#pragma once

#include "omsq/lm.hpp"
#include "omsq/psd.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omsq {

enum class ModelId { single_pair, double_pair, quadrature };

std::string to_string(ModelId id);

// Closed frequency interval in Hz.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double f) const { return f >= lo && f <= hi; }
};

// Lorentzian line shape of unit area in Hz for a full width gamma in rad/s.
double lorentzian(double offset_hz, double gamma);
// d lorentzian / d gamma
double lorentzian_dgamma(double offset_hz, double gamma);

// Parametrized PSD model: floor plus Lorentzians with fixed centers.
//
//   single_pair: floor, gamma, area_stokes, area_antistokes
//   double_pair: floor, s, stokes_narrow, stokes_broad, antistokes_narrow,
//                antistokes_broad; gamma_eff fixed; widths gamma_eff (1 -+ s)
//   quadrature:  floor, gamma, sigma2; lines at +-center (one-sided axis)
//
// Areas are in density units times Hz.
struct SpectralModel {
  ModelId id = ModelId::single_pair;
  std::vector<std::string> names;  // all parameters, free and fixed
  std::vector<double> values;      // current / initial values
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> fixed;
  std::vector<double> fixed_sigma; // 1 sigma of fixed values, propagated when > 0
  std::vector<double> centers;     // Hz: {stokes, antistokes} or {delta_lo}
  std::vector<Interval> masks;

  static SpectralModel single_pair(double stokes_hz, double antistokes_hz);
  static SpectralModel double_pair(double stokes_hz, double antistokes_hz, double gamma_eff,
                                   double gamma_eff_sigma);
  static SpectralModel quadrature(double center_hz);

  std::size_t index_of(const std::string& name) const;
  void set(const std::string& name, double value) { values[index_of(name)] = value; }
  std::size_t free_count() const;

  // Model density at f for parameters p (all parameters), and its gradient.
  double density(double f, const std::vector<double>& p) const;
  void gradient(double f, const std::vector<double>& p, std::vector<double>& out) const;

  // Throws ConfigError for non-finite bounds of free parameters.
  void validate() const;
};

struct ParamEstimate {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool fixed = false;
};

struct DerivedValue {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
};

struct FitResult {
  ModelId model = ModelId::single_pair;
  std::vector<ParamEstimate> params;
  std::vector<DerivedValue> derived;
  // Covariance over the free parameters followed by fixed parameters whose
  // uncertainty was propagated, in cov_names order.
  std::vector<std::string> cov_names;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  std::size_t n_bins = 0;
  std::size_t dof = 0;
  int iterations = 0;
  int irls_passes = 0;
  bool converged = false;
  std::string stop_reason;
  double gradient_norm = 0.0;
  std::vector<Interval> masks;
  std::vector<std::string> warnings;
  std::optional<std::string> degeneracy;

  const ParamEstimate& param(const std::string& name) const;
  const DerivedValue& derived_value(const std::string& name) const;
  double value(const std::string& name) const;
  double sigma(const std::string& name) const;

  nlohmann::json to_json() const;
};

struct FitOptions {
  double half_width_hz = 0.0;     // fit band around each center, required
  std::vector<Interval> masks;    // excluded intervals
  bool use_kernel = true;         // convolve with the estimator's spectral window
  int max_irls_passes = 8;
  lm::Options lm;
};

// Fit bins: within half_width of any center and outside all masks. Throws
// ConfigError when masks remove more than 20% of the band.
std::vector<std::size_t> fit_bins(const Psd& psd, std::span<const double> centers,
                                  double half_width_hz, std::span<const Interval> masks);

// Shared engine: model-weighted least squares (sigma_i = model_i / sqrt(K_eff)),
// weights refreshed between LM runs until the parameters settle. Covariance
// is the sandwich estimate under the estimator's inter-bin correlation,
// scaled by the reduced chi^2; fixed parameters with a sigma add their
// propagated contribution.
FitResult lm_minimize(const SpectralModel& model, const Psd& psd, const FitOptions& opts = {});

// Two Lorentzians sharing one width. Derived: R, n_bar.
FitResult fit_single_pair(const Psd& psd, double stokes_hz, double antistokes_hz,
                          const FitOptions& opts = {});

// Constrained double pair at fixed gamma_eff (rad/s). Derived: R_plus,
// R_minus, gamma_plus, gamma_minus.
FitResult fit_double_pair(const Psd& psd, double stokes_hz, double antistokes_hz,
                          double gamma_eff, double gamma_eff_sigma, const FitOptions& opts = {});

// Quadrature-channel spectrum with lines at +-center_hz.
FitResult fit_quadrature(const Psd& psd, double center_hz, const FitOptions& opts = {});

} // namespace omsq
