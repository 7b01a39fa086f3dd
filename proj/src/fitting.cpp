#include "omsq/fitting.hpp"

#include "omsq/errors.hpp"
#include "omsq/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace omsq {

std::string to_string(ModelId id) {
  switch (id) {
  case ModelId::single_pair: return "single_pair";
  case ModelId::double_pair: return "double_pair";
  case ModelId::quadrature: return "quadrature";
  }
  return "unknown";
}

double lorentzian(double offset_hz, double gamma) {
  const double hw = gamma / (4.0 * kPi);
  return hw / (kPi * (offset_hz * offset_hz + hw * hw));
}

double lorentzian_dgamma(double offset_hz, double gamma) {
  const double hw = gamma / (4.0 * kPi);
  const double x2 = offset_hz * offset_hz;
  const double den = x2 + hw * hw;
  return (x2 - hw * hw) / (kPi * den * den) / (4.0 * kPi);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SpectralModel make_model(ModelId id, std::vector<std::string> names, std::vector<double> centers) {
  SpectralModel m;
  m.id = id;
  const std::size_t n = names.size();
  m.names = std::move(names);
  m.values.assign(n, 0.0);
  m.lower.assign(n, -kInf);
  m.upper.assign(n, kInf);
  m.fixed.assign(n, false);
  m.fixed_sigma.assign(n, 0.0);
  m.centers = std::move(centers);
  return m;
}

} // namespace

SpectralModel SpectralModel::single_pair(double stokes_hz, double antistokes_hz) {
  return make_model(ModelId::single_pair, {"floor", "gamma", "area_stokes", "area_antistokes"},
                    {stokes_hz, antistokes_hz});
}

SpectralModel SpectralModel::double_pair(double stokes_hz, double antistokes_hz, double gamma_eff,
                                         double gamma_eff_sigma) {
  SpectralModel m = make_model(ModelId::double_pair,
                               {"floor", "s", "gamma_eff", "stokes_narrow", "stokes_broad",
                                "antistokes_narrow", "antistokes_broad"},
                               {stokes_hz, antistokes_hz});
  const std::size_t g = m.index_of("gamma_eff");
  m.values[g] = gamma_eff;
  m.lower[g] = m.upper[g] = gamma_eff;
  m.fixed[g] = true;
  m.fixed_sigma[g] = gamma_eff_sigma;
  const std::size_t s = m.index_of("s");
  m.lower[s] = 0.0;
  m.upper[s] = 0.99;
  return m;
}

SpectralModel SpectralModel::quadrature(double center_hz) {
  return make_model(ModelId::quadrature, {"floor", "gamma", "sigma2"}, {center_hz});
}

std::size_t SpectralModel::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("unknown model parameter '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::size_t SpectralModel::free_count() const {
  return static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), false));
}

void SpectralModel::validate() const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (fixed[i]) continue;
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] <= upper[i])) {
      throw ConfigError("free parameter '" + names[i] + "' needs finite bounds");
    }
  }
}

double SpectralModel::density(double f, const std::vector<double>& p) const {
  switch (id) {
  case ModelId::single_pair:
    return p[0] + p[2] * lorentzian(f - centers[0], p[1]) + p[3] * lorentzian(f - centers[1], p[1]);
  case ModelId::double_pair: {
    const double gm = p[2] * (1.0 - p[1]);
    const double gp = p[2] * (1.0 + p[1]);
    return p[0] + p[3] * lorentzian(f - centers[0], gm) + p[4] * lorentzian(f - centers[0], gp) +
           p[5] * lorentzian(f - centers[1], gm) + p[6] * lorentzian(f - centers[1], gp);
  }
  case ModelId::quadrature:
    return p[0] + p[2] * (lorentzian(f - centers[0], p[1]) + lorentzian(f + centers[0], p[1]));
  }
  return 0.0;
}

void SpectralModel::gradient(double f, const std::vector<double>& p, std::vector<double>& out) const {
  out.assign(p.size(), 0.0);
  out[0] = 1.0;
  switch (id) {
  case ModelId::single_pair: {
    const double ls = lorentzian(f - centers[0], p[1]);
    const double la = lorentzian(f - centers[1], p[1]);
    out[1] = p[2] * lorentzian_dgamma(f - centers[0], p[1]) + p[3] * lorentzian_dgamma(f - centers[1], p[1]);
    out[2] = ls;
    out[3] = la;
    break;
  }
  case ModelId::double_pair: {
    const double s = p[1], ge = p[2];
    const double gm = ge * (1.0 - s), gp = ge * (1.0 + s);
    const double xs = f - centers[0], xa = f - centers[1];
    const double dn = p[3] * lorentzian_dgamma(xs, gm) + p[5] * lorentzian_dgamma(xa, gm);
    const double db = p[4] * lorentzian_dgamma(xs, gp) + p[6] * lorentzian_dgamma(xa, gp);
    out[1] = ge * (db - dn);
    out[2] = (1.0 - s) * dn + (1.0 + s) * db;
    out[3] = lorentzian(xs, gm);
    out[4] = lorentzian(xs, gp);
    out[5] = lorentzian(xa, gm);
    out[6] = lorentzian(xa, gp);
    break;
  }
  case ModelId::quadrature: {
    const double c = centers[0];
    out[1] = p[2] * (lorentzian_dgamma(f - c, p[1]) + lorentzian_dgamma(f + c, p[1]));
    out[2] = lorentzian(f - c, p[1]) + lorentzian(f + c, p[1]);
    break;
  }
  }
}

const ParamEstimate& FitResult::param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("fit has no parameter '" + name + "'");
}

const DerivedValue& FitResult::derived_value(const std::string& name) const {
  for (const auto& d : derived) {
    if (d.name == name) return d;
  }
  throw std::out_of_range("fit has no derived value '" + name + "'");
}

double FitResult::value(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  return derived_value(name).value;
}

double FitResult::sigma(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.sigma;
  }
  return derived_value(name).sigma;
}

nlohmann::json FitResult::to_json() const {
  nlohmann::json j;
  j["model"] = to_string(model);
  for (const auto& p : params) {
    j["params"].push_back({{"name", p.name},
                           {"value", p.value},
                           {"sigma", p.sigma},
                           {"fixed", p.fixed},
                           {"lower", p.lower},
                           {"upper", p.upper}});
  }
  j["derived"] = nlohmann::json::array();
  for (const auto& d : derived) j["derived"].push_back({{"name", d.name}, {"value", d.value}, {"sigma", d.sigma}});
  j["chi2"] = chi2;
  j["reduced_chi2"] = reduced_chi2;
  j["n_bins"] = n_bins;
  j["dof"] = dof;
  j["iterations"] = iterations;
  j["irls_passes"] = irls_passes;
  j["converged"] = converged;
  j["stop_reason"] = stop_reason;
  j["gradient_norm"] = gradient_norm;
  j["masks"] = nlohmann::json::array();
  for (const auto& m : masks) j["masks"].push_back({m.lo, m.hi});
  j["warnings"] = warnings;
  if (degeneracy) j["degeneracy"] = *degeneracy;
  return j;
}

std::vector<std::size_t> fit_bins(const Psd& psd, std::span<const double> centers,
                                  double half_width_hz, std::span<const Interval> masks) {
  if (!(half_width_hz > 0.0)) throw std::invalid_argument("fit band half width must be positive");
  std::vector<std::size_t> out;
  std::size_t band = 0;
  for (std::size_t i = 0; i < psd.size(); ++i) {
    const double f = psd.freqs[i];
    const bool in_band = std::any_of(centers.begin(), centers.end(),
                                     [&](double c) { return std::abs(f - c) <= half_width_hz; });
    if (!in_band) continue;
    ++band;
    if (std::none_of(masks.begin(), masks.end(), [&](const Interval& m) { return m.contains(f); })) {
      out.push_back(i);
    }
  }
  if (band == 0) throw ConfigError("fit band contains no PSD bins");
  if (static_cast<double>(band - out.size()) > 0.2 * static_cast<double>(band)) {
    throw ConfigError("exclusion masks cover more than 20% of the fit band");
  }
  return out;
}

namespace {

// Lorentzian-convolved evaluation over the fit bins.
class BinModel {
public:
  BinModel(const SpectralModel& model, const Psd& psd, std::vector<std::size_t> bins, bool use_kernel)
      : model_(model), psd_(psd), bins_(std::move(bins)) {
    if (use_kernel && !psd.kernel_weights.empty()) {
      offsets_ = psd.kernel_offsets;
      weights_ = psd.kernel_weights;
    } else {
      offsets_ = {0.0};
      weights_ = {1.0};
    }
  }

  std::size_t size() const { return bins_.size(); }
  std::size_t bin(std::size_t i) const { return bins_[i]; }
  double data(std::size_t i) const { return psd_.density[bins_[i]]; }

  double value(std::size_t i, const std::vector<double>& p) const {
    const double f = psd_.freqs[bins_[i]];
    double acc = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j) acc += weights_[j] * model_.density(f + offsets_[j], p);
    return acc;
  }

  void gradient(std::size_t i, const std::vector<double>& p, std::vector<double>& out) const {
    const double f = psd_.freqs[bins_[i]];
    out.assign(p.size(), 0.0);
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      model_.gradient(f + offsets_[j], p, scratch_);
      for (std::size_t k = 0; k < p.size(); ++k) out[k] += weights_[j] * scratch_[k];
    }
  }

private:
  const SpectralModel& model_;
  const Psd& psd_;
  std::vector<std::size_t> bins_;
  std::vector<double> offsets_;
  std::vector<double> weights_;
  mutable std::vector<double> scratch_;
};

std::vector<double> band_centers(const SpectralModel& m) { return m.centers; }

} // namespace

FitResult lm_minimize(const SpectralModel& model, const Psd& psd, const FitOptions& opts) {
  model.validate();
  std::vector<Interval> masks = model.masks;
  masks.insert(masks.end(), opts.masks.begin(), opts.masks.end());
  const std::vector<double> centers = band_centers(model);
  const BinModel bins(model, psd, fit_bins(psd, centers, opts.half_width_hz, masks), opts.use_kernel);
  const std::size_t n = bins.size();

  std::vector<std::size_t> free_idx;
  for (std::size_t k = 0; k < model.names.size(); ++k) {
    if (!model.fixed[k]) free_idx.push_back(k);
  }
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  if (n <= free_idx.size()) throw NumericalError("fit band has fewer bins than free parameters");

  const double k_eff = psd.is_estimate() && psd.effective_averages > 0.0 ? psd.effective_averages : 1.0;
  const double sqrt_k = std::sqrt(k_eff);

  double data_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) data_scale = std::max(data_scale, std::abs(bins.data(i)));
  if (!(data_scale > 0.0)) throw NumericalError("fit band holds no power");
  const double weight_floor = 1e-9 * data_scale;

  std::vector<double> full = model.values;
  auto expand = [&](const Eigen::VectorXd& p) {
    for (Eigen::Index k = 0; k < nf; ++k) full[free_idx[static_cast<std::size_t>(k)]] = p(k);
  };

  std::vector<double> sigma(n);
  auto refresh_weights = [&]() {
    for (std::size_t i = 0; i < n; ++i) sigma[i] = std::max(bins.value(i, full), weight_floor) / sqrt_k;
  };

  lm::Problem problem;
  problem.lower.resize(nf);
  problem.upper.resize(nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    const std::size_t idx = free_idx[static_cast<std::size_t>(k)];
    problem.names.push_back(model.names[idx]);
    problem.lower(k) = model.lower[idx];
    problem.upper(k) = model.upper[idx];
  }
  std::vector<double> grad;
  problem.evaluate = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    expand(p);
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), nf);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (bins.data(i) - bins.value(i, full)) / sigma[i];
      if (jac) {
        bins.gradient(i, full, grad);
        for (Eigen::Index k = 0; k < nf; ++k) (*jac)(row, k) = -grad[free_idx[static_cast<std::size_t>(k)]] / sigma[i];
      }
    }
  };
  if (model.id == ModelId::double_pair) {
    // Anti-Stokes broad area may dip below zero by at most 0.2 x narrow area.
    const auto pos = [&](const std::string& name) {
      const auto it = std::find(problem.names.begin(), problem.names.end(), name);
      return static_cast<Eigen::Index>(it - problem.names.begin());
    };
    const Eigen::Index asn = pos("antistokes_narrow");
    const Eigen::Index asb = pos("antistokes_broad");
    if (asn < nf && asb < nf) {
      problem.project = [asn, asb](Eigen::VectorXd& p) { p(asb) = std::max(p(asb), -0.2 * p(asn)); };
    }
  }

  Eigen::VectorXd p(nf);
  for (Eigen::Index k = 0; k < nf; ++k) p(k) = model.values[free_idx[static_cast<std::size_t>(k)]];
  lm::project(problem, p);
  expand(p);

  FitResult out;
  out.model = model.id;
  out.masks = masks;
  lm::Result lm_res;
  int iterations = 0;
  for (int pass = 0; pass < std::max(1, opts.max_irls_passes); ++pass) {
    refresh_weights();
    lm_res = lm::minimize(problem, p, opts.lm);
    iterations += lm_res.iterations;
    out.irls_passes = pass + 1;
    const double change = ((lm_res.params - p).cwiseAbs().array() /
                           (p.cwiseAbs().array() + 1e-12 * (problem.upper - problem.lower).cwiseAbs().array() + 1e-300))
                              .maxCoeff();
    p = lm_res.params;
    expand(p);
    if (change < 1e-7) break;
  }
  // Residuals and Jacobian under the final weights.
  refresh_weights();
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(p, r, &jac);

  out.iterations = iterations;
  out.converged = lm_res.converged;
  out.stop_reason = lm::to_string(lm_res.stop);
  out.gradient_norm = lm::gradient_measure(jac, r);
  out.n_bins = n;
  out.dof = n - free_idx.size();
  out.chi2 = r.squaredNorm();
  out.reduced_chi2 = out.chi2 / static_cast<double>(out.dof);

  const auto degeneracy = lm::check_degeneracy(jac, problem.names, opts.lm.singular_tol);
  if (degeneracy) {
    out.degeneracy = degeneracy->description;
    out.warnings.push_back("parameter degeneracy along " + degeneracy->description);
  }

  // Sandwich covariance with banded inter-bin correlation.
  const Eigen::MatrixXd h = jac.transpose() * jac;
  const Eigen::MatrixXd h_inv = lm::pseudo_inverse(h);
  Eigen::MatrixXd meat = h;
  auto add_correlation = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.cols(), b.cols());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::size_t lag = bins.bin(j) - bins.bin(i);
        if (lag > psd.bin_correlation.size()) break;
        const double rho = psd.bin_correlation[lag - 1];
        const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
        m += rho * (a.row(ri).transpose() * b.row(rj) + a.row(rj).transpose() * b.row(ri));
      }
    }
    return m;
  };
  if (!psd.bin_correlation.empty()) meat += add_correlation(jac, jac);
  const double scale = std::max(out.reduced_chi2, 0.0);
  Eigen::MatrixXd cov = h_inv * meat * h_inv * scale;

  // Propagate fixed parameters that carry an uncertainty.
  std::vector<std::size_t> prop_idx;
  for (std::size_t k = 0; k < model.names.size(); ++k) {
    if (model.fixed[k] && model.fixed_sigma[k] > 0.0) prop_idx.push_back(k);
  }
  out.cov_names = problem.names;
  if (!prop_idx.empty()) {
    const auto np = static_cast<Eigen::Index>(prop_idx.size());
    Eigen::MatrixXd jc(static_cast<Eigen::Index>(n), np);
    for (std::size_t i = 0; i < n; ++i) {
      bins.gradient(i, full, grad);
      for (Eigen::Index c = 0; c < np; ++c) {
        jc(static_cast<Eigen::Index>(i), c) = -grad[prop_idx[static_cast<std::size_t>(c)]] / sigma[i];
      }
    }
    const Eigen::MatrixXd g = -h_inv * (jac.transpose() * jc);
    Eigen::VectorXd var_c(np);
    for (Eigen::Index c = 0; c < np; ++c) {
      const double sc = model.fixed_sigma[prop_idx[static_cast<std::size_t>(c)]];
      var_c(c) = sc * sc;
      out.cov_names.push_back(model.names[prop_idx[static_cast<std::size_t>(c)]]);
    }
    Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(nf + np, nf + np);
    ext.topLeftCorner(nf, nf) = cov + g * var_c.asDiagonal() * g.transpose();
    ext.topRightCorner(nf, np) = g * var_c.asDiagonal();
    ext.bottomLeftCorner(np, nf) = ext.topRightCorner(nf, np).transpose();
    ext.bottomRightCorner(np, np) = var_c.asDiagonal();
    cov = ext;
  }
  out.covariance = cov;

  for (std::size_t k = 0; k < model.names.size(); ++k) {
    ParamEstimate e;
    e.name = model.names[k];
    e.value = full[k];
    e.fixed = model.fixed[k];
    e.lower = model.lower[k];
    e.upper = model.upper[k];
    if (e.fixed) {
      e.sigma = model.fixed_sigma[k];
    } else {
      const auto it = std::find(free_idx.begin(), free_idx.end(), k);
      const auto c = static_cast<Eigen::Index>(it - free_idx.begin());
      e.sigma = std::sqrt(std::max(0.0, cov(c, c)));
    }
    out.params.push_back(e);
  }
  if (!out.converged) out.warnings.push_back("did not converge: " + out.stop_reason);
  return out;
}

namespace {

struct PeakGuess {
  double height = 0.0;
  double fwhm_hz = 0.0;
  double area = 0.0;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Floor: median of the band's outer 40% on each side of every center.
double guess_floor(const Psd& psd, std::span<const double> centers, double half) {
  std::vector<double> edge, all;
  for (std::size_t i = 0; i < psd.size(); ++i) {
    double nearest = kInf;
    for (double c : centers) nearest = std::min(nearest, std::abs(psd.freqs[i] - c));
    if (nearest > half) continue;
    all.push_back(psd.density[i]);
    if (nearest > 0.6 * half) edge.push_back(psd.density[i]);
  }
  return std::max(0.0, median(edge.empty() ? all : edge));
}

// Peak height above floor near `center` and the half-maximum width found
// by walking outwards from the maximum.
PeakGuess guess_peak(const Psd& psd, double center, double half, double floor) {
  const double rbw = psd.rbw > 0.0 ? psd.rbw : 1.0;
  const std::size_t c = psd.bin_of(center);
  const auto reach = static_cast<std::size_t>(std::max(1.0, std::floor(0.2 * half / rbw)));
  std::size_t peak = c;
  for (std::size_t i = c > reach ? c - reach : 0; i <= std::min(psd.size() - 1, c + reach); ++i) {
    if (psd.density[i] > psd.density[peak]) peak = i;
  }
  PeakGuess g;
  g.height = std::max(psd.density[peak] - floor, 0.0);
  const double level = floor + 0.5 * g.height;
  std::size_t lo = peak, hi = peak;
  const auto span = static_cast<std::size_t>(half / rbw);
  while (lo > 0 && peak - lo < span && psd.density[lo - 1] > level) --lo;
  while (hi + 1 < psd.size() && hi - peak < span && psd.density[hi + 1] > level) ++hi;
  g.fwhm_hz = std::max(rbw, static_cast<double>(hi - lo + 1) * rbw);
  g.area = 0.5 * kPi * g.height * g.fwhm_hz;
  return g;
}

double band_peak(const Psd& psd, std::span<const double> centers, double half) {
  double top = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < psd.size(); ++i) {
    for (double c : centers) {
      if (std::abs(psd.freqs[i] - c) <= half) {
        top = std::max(top, std::abs(psd.density[i]));
        ++count;
      }
    }
  }
  if (count == 0) throw ConfigError("fit band contains no PSD bins");
  if (!(top > 0.0)) throw NumericalError("fit band holds no power");
  return top;
}

void require_converged(const FitResult& r) {
  if (!r.converged) {
    throw NumericalError(to_string(r.model) + " fit did not converge (" + r.stop_reason + ")");
  }
}

DerivedValue ratio_of(const std::string& name, const FitResult& r, const std::string& num,
                      const std::string& den) {
  const auto& names = r.cov_names;
  const auto in = std::find(names.begin(), names.end(), num) - names.begin();
  const auto id = std::find(names.begin(), names.end(), den) - names.begin();
  const double a = r.value(num), b = r.value(den);
  DerivedValue d{name, a / b, 0.0};
  const double ga = 1.0 / b, gb = -a / (b * b);
  const double var = ga * ga * r.covariance(in, in) + gb * gb * r.covariance(id, id) +
                     2.0 * ga * gb * r.covariance(in, id);
  d.sigma = std::sqrt(std::max(0.0, var));
  return d;
}

} // namespace

FitResult fit_single_pair(const Psd& psd, double stokes_hz, double antistokes_hz,
                          const FitOptions& opts) {
  SpectralModel m = SpectralModel::single_pair(stokes_hz, antistokes_hz);
  const double half = opts.half_width_hz;
  const double top = band_peak(psd, m.centers, half);
  const double area_max = 10.0 * top * 2.0 * half;
  const double rbw = psd.rbw > 0.0 ? psd.rbw : 1.0;
  const double floor = guess_floor(psd, m.centers, half);
  const PeakGuess gs = guess_peak(psd, stokes_hz, half, floor);
  const PeakGuess ga = guess_peak(psd, antistokes_hz, half, floor);

  m.set("floor", floor);
  m.set("gamma", kTwoPi * std::max(gs.fwhm_hz, ga.fwhm_hz));
  m.set("area_stokes", gs.area);
  m.set("area_antistokes", ga.area);
  m.lower = {0.0, kTwoPi * 0.01 * rbw, -area_max, -area_max};
  m.upper = {10.0 * top, kTwoPi * 2.0 * half, area_max, area_max};

  FitResult r = lm_minimize(m, psd, opts);
  require_converged(r);
  const DerivedValue ratio = ratio_of("R", r, "area_stokes", "area_antistokes");
  r.derived.push_back(ratio);
  const double nb = 1.0 / (ratio.value - 1.0);
  r.derived.push_back({"n_bar", nb, ratio.sigma * nb * nb});
  for (const char* name : {"area_stokes", "area_antistokes"}) {
    if (r.value(name) < 0.0) r.warnings.push_back(std::string("negative ") + name);
    if (std::abs(r.value(name)) < 2.0 * r.sigma(name)) {
      r.warnings.push_back(std::string(name) + " consistent with zero");
    }
  }
  return r;
}

FitResult fit_double_pair(const Psd& psd, double stokes_hz, double antistokes_hz,
                          double gamma_eff, double gamma_eff_sigma, const FitOptions& opts) {
  if (!(gamma_eff > 0.0)) throw std::invalid_argument("fit_double_pair: gamma_eff must be positive");
  const FitResult seed = fit_single_pair(psd, stokes_hz, antistokes_hz, opts);
  const double half = opts.half_width_hz;
  const double top = band_peak(psd, std::vector<double>{stokes_hz, antistokes_hz}, half);
  const double area_max = 10.0 * top * 2.0 * half;

  std::optional<FitResult> best;
  std::string last_error;
  for (double s0 : {0.15, 0.45, 0.75}) {
    SpectralModel m = SpectralModel::double_pair(stokes_hz, antistokes_hz, gamma_eff, gamma_eff_sigma);
    const double as = std::max(seed.value("area_stokes"), 0.0);
    const double aa = std::max(seed.value("area_antistokes"), 0.0);
    m.set("floor", seed.value("floor"));
    m.set("s", s0);
    m.set("stokes_narrow", 0.5 * as);
    m.set("stokes_broad", 0.5 * as);
    m.set("antistokes_narrow", 0.5 * aa);
    m.set("antistokes_broad", 0.5 * aa);
    for (const char* name : {"floor", "stokes_narrow", "stokes_broad", "antistokes_narrow"}) {
      m.lower[m.index_of(name)] = 0.0;
    }
    m.upper[m.index_of("floor")] = 10.0 * top;
    for (const char* name : {"stokes_narrow", "stokes_broad", "antistokes_narrow", "antistokes_broad"}) {
      m.upper[m.index_of(name)] = area_max;
    }
    m.lower[m.index_of("antistokes_broad")] = -area_max;
    try {
      FitResult r = lm_minimize(m, psd, opts);
      if (r.converged && (!best || r.chi2 < best->chi2)) best = std::move(r);
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw NumericalError("double_pair fit did not converge from any start " + last_error);
  FitResult r = std::move(*best);

  r.derived.push_back(ratio_of("R_plus", r, "stokes_broad", "antistokes_broad"));
  r.derived.push_back(ratio_of("R_minus", r, "stokes_narrow", "antistokes_narrow"));
  // gamma_pm = gamma_eff (1 +- s), with gamma_eff's uncertainty when propagated.
  const auto& names = r.cov_names;
  const auto is = std::find(names.begin(), names.end(), "s") - names.begin();
  const auto ig = std::find(names.begin(), names.end(), "gamma_eff") - names.begin();
  const bool have_g = ig < static_cast<std::ptrdiff_t>(names.size());
  const double s = r.value("s");
  for (int sign : {+1, -1}) {
    const double gs = sign * gamma_eff;     // d/ds
    const double gg = 1.0 + sign * s;       // d/dgamma_eff
    double var = gs * gs * r.covariance(is, is);
    if (have_g) var += gg * gg * r.covariance(ig, ig) + 2.0 * gs * gg * r.covariance(is, ig);
    r.derived.push_back({sign > 0 ? "gamma_plus" : "gamma_minus", gamma_eff * gg, std::sqrt(std::max(0.0, var))});
  }
  if (rad_to_hz(s * gamma_eff) < 2.0 * psd.rbw) {
    r.warnings.push_back("degenerate widths: s gamma_eff below 2 rbw, narrow and broad components unresolved");
  }
  if (r.value("antistokes_broad") < 0.0) r.warnings.push_back("negative antistokes_broad area");
  return r;
}

FitResult fit_quadrature(const Psd& psd, double center_hz, const FitOptions& opts) {
  SpectralModel m = SpectralModel::quadrature(center_hz);
  const double half = opts.half_width_hz;
  const double top = band_peak(psd, m.centers, half);
  const double rbw = psd.rbw > 0.0 ? psd.rbw : 1.0;
  const double floor = guess_floor(psd, m.centers, half);
  const PeakGuess g = guess_peak(psd, center_hz, half, floor);
  m.set("floor", floor);
  m.set("gamma", kTwoPi * g.fwhm_hz);
  m.set("sigma2", g.area);
  m.lower = {0.0, kTwoPi * 0.01 * rbw, 0.0};
  m.upper = {10.0 * top, kTwoPi * 2.0 * half, 10.0 * top * 2.0 * half};
  FitResult r = lm_minimize(m, psd, opts);
  require_converged(r);
  return r;
}

} // namespace omsq
