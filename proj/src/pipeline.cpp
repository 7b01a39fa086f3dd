#include "omsq/pipeline.hpp"

#include "omsq/errors.hpp"
#include "omsq/io.hpp"
#include "omsq/rng.hpp"
#include "omsq/spectral.hpp"
#include "omsq/synth.hpp"
#include "omsq/units.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace omsq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs f, rethrowing module errors with the failing stage attached.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(name, ErrorKind::config, e.what());
  } catch (const RegimeError& e) {
    throw StageError(name, ErrorKind::regime, e.what());
  } catch (const NumericalError& e) {
    throw StageError(name, ErrorKind::numerical, e.what());
  } catch (const std::invalid_argument& e) {
    throw StageError(name, ErrorKind::numerical, e.what());
  } catch (const std::domain_error& e) {
    throw StageError(name, ErrorKind::numerical, e.what());
  }
}

std::string two_digits(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", k);
  return buf;
}

// Bins of `psd` within [lo, hi] Hz.
Psd crop(const Psd& psd, double lo, double hi) {
  Psd out = psd;
  out.freqs.clear();
  out.density.clear();
  for (std::size_t i = 0; i < psd.size(); ++i) {
    if (psd.freqs[i] >= lo && psd.freqs[i] <= hi) {
      out.freqs.push_back(psd.freqs[i]);
      out.density.push_back(psd.density[i]);
    }
  }
  return out;
}

SimGrid grid_for(const RunConfig& cfg, std::uint64_t seed) {
  SimGrid grid = cfg.grid;
  grid.seed = seed;
  return grid;
}

double half_band(const RunConfig& cfg, const DerivedRates& rates) {
  return cfg.analysis.band_widths * rad_to_hz(rates.gamma_plus);
}

void dump_raw(const RepOptions& opts, const std::string& name, double rate,
              std::initializer_list<std::span<const double>> channels) {
  if (!opts.raw_dir) return;
  const std::vector<std::span<const double>> list(channels);
  io::write_raw(*opts.raw_dir / name, rate, list);
}

// Detuned X/Y symmetry: chi^2 of the spectral difference on bins spaced
// beyond the estimator's correlation length.
void symmetry_test(QuadratureRep& q, const Psd& x, const Psd& y, double center, double half) {
  std::size_t stride = 1;
  while (stride <= x.bin_correlation.size() && std::abs(x.bin_correlation[stride - 1]) > 0.05) ++stride;
  const double k = x.effective_averages;
  double chi2 = 0.0;
  std::size_t dof = 0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x.freqs[i] - center) > half || i < next) continue;
    const double m = 0.5 * (x.density[i] + y.density[i]);
    const double diff = x.density[i] - y.density[i];
    chi2 += diff * diff / (2.0 * m * m / k);
    ++dof;
    next = i + stride;
  }
  q.symmetry_chi2 = chi2;
  q.symmetry_dof = dof;
  q.symmetry_p = dof ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(dof)), chi2)) : kNaN;
}

json fit_report(const FitResult& r, std::uint64_t seed, const std::string& hash,
                const std::string& input_name, const std::string& input_text) {
  json j = r.to_json();
  j["provenance"] = {{"seed", seed},
                     {"config_hash", hash},
                     {"input", input_name},
                     {"input_fnv1a", fnv1a(input_text)}};
  return j;
}

json theory_json(const DerivedRates& r) {
  json t;
  t["n_bar"] = r.n_bar;
  t["s"] = r.s;
  t["gamma_eff"] = r.gamma_eff;
  t["gamma_par"] = r.gamma_par;
  t["gamma_plus"] = r.gamma_plus;
  t["gamma_minus"] = r.gamma_minus;
  t["weights"] = {r.weights.stokes_narrow, r.weights.stokes_broad, r.weights.antistokes_narrow,
                  r.weights.antistokes_broad};
  t["R"] = r.ratios.r_plain;
  t["R_plus"] = r.ratios.r_plus;
  t["R_minus"] = r.ratios.r_minus;
  if (r.s < 1.0) {
    const QuadratureVariances v = quadrature_variances(r.n_bar, r.s);
    t["var_x"] = v.var_x;
    t["var_y"] = v.var_y;
    t["norm_x"] = 1.0 / (1.0 + r.s);
    t["norm_y"] = 1.0 / (1.0 - r.s);
  }
  return t;
}

json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"sigma_rms", a.sigma_rms}, {"n", a.n}};
}

// Collects per-repetition values and sigmas under a name.
class Collector {
public:
  void add(const std::string& name, double value, double sigma) {
    auto& e = entries_[name];
    e.first.push_back(value);
    e.second.push_back(sigma);
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [name, e] : entries_) j[name] = aggregate_json(aggregate(e.first, e.second));
    return j;
  }
  Aggregate get(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) return {};
    return aggregate(it->second.first, it->second.second);
  }

private:
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> entries_;
};

void collect_sideband(Collector& c, const SidebandRep& sb) {
  c.add("s_hat", sb.resonant.value("s"), sb.resonant.sigma("s"));
  c.add("R_plus", sb.resonant.value("R_plus"), sb.resonant.sigma("R_plus"));
  c.add("R_minus", sb.resonant.value("R_minus"), sb.resonant.sigma("R_minus"));
  c.add("gamma_plus", sb.resonant.value("gamma_plus"), sb.resonant.sigma("gamma_plus"));
  c.add("gamma_minus", sb.resonant.value("gamma_minus"), sb.resonant.sigma("gamma_minus"));
  c.add("R_reference", sb.reference.value("R"), sb.reference.sigma("R"));
  c.add("n_bar_reference", sb.reference.value("n_bar"), sb.reference.sigma("n_bar"));
  c.add("gamma_eff_reference", sb.reference.value("gamma"), sb.reference.sigma("gamma"));
}

void collect_quadrature(Collector& c, const QuadratureRep& q) {
  c.add("norm_x", q.norm_x, q.norm_x_sigma);
  c.add("norm_y", q.norm_y, q.norm_y_sigma);
  c.add("width_plus", q.width_plus, q.width_plus_sigma);
  c.add("width_minus", q.width_minus, q.width_minus_sigma);
  c.add("variance_plus", 1.0 / q.norm_x, q.norm_x_sigma / (q.norm_x * q.norm_x));
  c.add("variance_minus", 1.0 / q.norm_y, q.norm_y_sigma / (q.norm_y * q.norm_y));
  c.add("gamma_detuned", q.gamma_detuned, q.gamma_detuned_sigma);
  c.add("gamma_x", q.resonant_x.value("gamma"), q.resonant_x.sigma("gamma"));
  c.add("gamma_y", q.resonant_y.value("gamma"), q.resonant_y.sigma("gamma"));
  c.add("demod_phase", q.phase.phase, 0.0);
}

json sideband_rep_json(const SidebandRep& sb) {
  return {{"s_hat", sb.resonant.value("s")},
          {"s_sigma", sb.resonant.sigma("s")},
          {"R_plus", sb.resonant.value("R_plus")},
          {"R_plus_sigma", sb.resonant.sigma("R_plus")},
          {"R_minus", sb.resonant.value("R_minus")},
          {"R_minus_sigma", sb.resonant.sigma("R_minus")},
          {"R_reference", sb.reference.value("R")},
          {"R_reference_sigma", sb.reference.sigma("R")},
          {"gamma_eff", sb.reference.value("gamma")},
          {"gamma_eff_sigma", sb.reference.sigma("gamma")},
          {"rbw_hz", sb.resonant_psd.rbw},
          {"n_averages", sb.resonant_psd.n_averages},
          {"warnings", sb.resonant.warnings}};
}

json quadrature_rep_json(const QuadratureRep& q) {
  return {{"demod_phase", q.phase.phase},
          {"phase_contrast", q.phase.contrast},
          {"phase_flat", q.phase.flat},
          {"norm_x", q.norm_x},
          {"norm_x_sigma", q.norm_x_sigma},
          {"norm_y", q.norm_y},
          {"norm_y_sigma", q.norm_y_sigma},
          {"width_plus", q.width_plus},
          {"width_plus_sigma", q.width_plus_sigma},
          {"width_minus", q.width_minus},
          {"width_minus_sigma", q.width_minus_sigma},
          {"gamma_detuned", q.gamma_detuned},
          {"gamma_detuned_sigma", q.gamma_detuned_sigma},
          {"symmetry_chi2", q.symmetry_chi2},
          {"symmetry_dof", q.symmetry_dof},
          {"symmetry_p", q.symmetry_p}};
}

json lockin_json(const LowpassDesign& f, double cutoff, double rate) {
  return {{"cutoff_hz", cutoff},
          {"taps", f.taps.size()},
          {"decimation", f.decimation},
          {"passband_hz", f.passband_hz},
          {"stopband_hz", f.stopband_hz},
          {"ripple_db", f.ripple_db},
          {"attenuation_db", f.attenuation_db},
          {"kaiser_beta", f.beta},
          {"output_rate_hz", rate}};
}

// PSD CSV plus its text, for provenance hashing.
std::string write_psd(const fs::path& path, const Psd& psd, const std::string& hash) {
  io::write_psd_csv(path, psd, hash);
  return io::read_text(path);
}

struct RepArtifacts {
  json summary;
  std::vector<std::string> files;
};

RepArtifacts write_sideband_rep(const SidebandRep& sb, const fs::path& dir, const std::string& rel,
                                std::uint64_t seed, const std::string& hash) {
  RepArtifacts a;
  const std::string det = write_psd(dir / "sideband_detuned_psd.csv", sb.detuned_psd, hash);
  const std::string res = write_psd(dir / "sideband_resonant_psd.csv", sb.resonant_psd, hash);
  json fits;
  fits["reference"] = fit_report(sb.reference, seed, hash, "sideband_detuned_psd.csv", det);
  fits["resonant"] = fit_report(sb.resonant, seed, hash, "sideband_resonant_psd.csv", res);
  io::write_text(dir / "sideband_fits.json", fits.dump(2) + "\n");
  a.files = {rel + "/sideband_detuned_psd.csv", rel + "/sideband_resonant_psd.csv", rel + "/sideband_fits.json"};
  a.summary = sideband_rep_json(sb);
  return a;
}

RepArtifacts write_quadrature_rep(const QuadratureRep& q, const fs::path& dir, const std::string& rel,
                                  std::uint64_t seed, const std::string& hash) {
  RepArtifacts a;
  json fits;
  const std::pair<const char*, std::pair<const Psd*, const FitResult*>> items[] = {
      {"detuned_x", {&q.detuned_x_psd, &q.detuned_x}},
      {"detuned_y", {&q.detuned_y_psd, &q.detuned_y}},
      {"resonant_x", {&q.resonant_x_psd, &q.resonant_x}},
      {"resonant_y", {&q.resonant_y_psd, &q.resonant_y}},
  };
  for (const auto& [name, pr] : items) {
    const std::string file = std::string("quadrature_") + name + "_psd.csv";
    const std::string text = write_psd(dir / file, *pr.first, hash);
    fits[name] = fit_report(*pr.second, seed, hash, file, text);
    a.files.push_back(rel + "/" + file);
  }
  io::write_text(dir / "quadrature_fits.json", fits.dump(2) + "\n");
  a.files.push_back(rel + "/quadrature_fits.json");
  a.summary = quadrature_rep_json(q);
  return a;
}

void write_config_snapshot(const RunConfig& cfg, const fs::path& dir) {
  io::write_text(dir / "config.cfg", "# config_hash=" + cfg.hash() + "\n" + cfg.canonical());
}

} // namespace

std::uint64_t rep_seed(std::uint64_t master, std::uint64_t point, std::uint64_t rep) {
  return derive_seed(master, {point, rep});
}

Aggregate aggregate(std::span<const double> values, std::span<const double> sigmas) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) return {kNaN, kNaN, kNaN, 0};
  double sum = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < a.n; ++i) {
    sum += values[i];
    s2 += sigmas[i] * sigmas[i];
  }
  a.mean = sum / static_cast<double>(a.n);
  a.sigma_rms = std::sqrt(s2 / static_cast<double>(a.n));
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.sd = a.n > 1 ? std::sqrt(ss / static_cast<double>(a.n - 1)) : 0.0;
  return a;
}

SidebandRep run_sideband_rep(const RunConfig& cfg, const DerivedRates& rates, std::uint64_t seed,
                             const RepOptions& opts) {
  const SimGrid grid = grid_for(cfg, seed);
  const double delta_lo = cfg.pump.delta_lo;
  stage("config", [&] { grid.validate(delta_lo, rates.gamma_plus); return 0; });
  const std::vector<Segment> schedule =
      stage("schedule", [&] { return schedule_drive(grid, cfg.detect.schedule_period, rates.gamma_minus); });

  Record rec = stage("synth", [&] {
    const SidebandEnvelopes env = simulate_sideband_envelopes(rates, grid, schedule);
    return compose_heterodyne_components(env, cfg.detect, delta_lo, schedule, opts.exec);
  });
  dump_raw(opts, "sideband_record.raw", rec.sample_rate, {rec.samples});

  SidebandRep out;
  out.stokes_hz = rad_to_hz(grid.carrier + delta_lo);
  out.antistokes_hz = rad_to_hz(grid.carrier - delta_lo);
  const double half = half_band(cfg, rates);
  stage("spectral", [&] {
    const WelchParams wp{segment_len_for(rates.gamma_minus, grid.sample_rate, cfg.analysis.points_across),
                         cfg.analysis.overlap, cfg.analysis.window};
    const auto det = spans_for(schedule, DriveTag::detuned, rec.sample_rate, rec.samples.size());
    const auto res = spans_for(schedule, DriveTag::resonant, rec.sample_rate, rec.samples.size());
    out.detuned_psd = welch_psd(rec.samples, rec.sample_rate, wp, det, opts.exec);
    out.resonant_psd = welch_psd(rec.samples, rec.sample_rate, wp, res, opts.exec);
    if (!resolution_check(out.resonant_psd, rad_to_hz(rates.gamma_minus))) {
      throw NumericalError("resolution bandwidth does not resolve gamma_minus");
    }
    return 0;
  });
  rec = Record{};

  FitOptions fo;
  fo.half_width_hz = half;
  fo.masks = cfg.analysis.masks;
  out.reference = stage("fit_reference", [&] {
    return fit_single_pair(out.detuned_psd, out.stokes_hz, out.antistokes_hz, fo);
  });
  out.resonant = stage("fit_double", [&] {
    return fit_double_pair(out.resonant_psd, out.stokes_hz, out.antistokes_hz, out.reference.value("gamma"),
                           out.reference.sigma("gamma"), fo);
  });
  const double lo = out.antistokes_hz - 2.0 * half, hi = out.stokes_hz + 2.0 * half;
  out.detuned_psd = crop(out.detuned_psd, lo, hi);
  out.resonant_psd = crop(out.resonant_psd, lo, hi);
  return out;
}

QuadratureRep run_quadrature_rep(const RunConfig& cfg, const DerivedRates& rates, std::uint64_t seed,
                                 const RepOptions& opts) {
  const SimGrid grid = grid_for(cfg, seed);
  const double delta_lo = cfg.pump.delta_lo;
  stage("config", [&] { grid.validate(delta_lo, rates.gamma_plus); return 0; });
  const std::vector<Segment> schedule =
      stage("schedule", [&] { return schedule_drive(grid, cfg.detect.schedule_period, rates.gamma_minus); });

  Record rec = stage("synth", [&] {
    const QuadTrajectory traj = simulate_quadratures(rates, grid, schedule);
    return compose_heterodyne_wigner(traj, cfg.detect, delta_lo, schedule, opts.exec);
  });
  dump_raw(opts, "quadrature_record.raw", rec.sample_rate, {rec.samples});

  QuadratureRep q;
  DemodOutput demod = stage("demodulate", [&] {
    q.phase = optimize_demod_phase(rec, cfg.detect, rates.gamma_plus, opts.exec);
    DetectionParams d = cfg.detect;
    d.demod_phase = q.phase.phase;
    return lockin_demodulate(rec, d, rates.gamma_plus, opts.exec);
  });
  const double input_rate = rec.sample_rate;
  rec = Record{};
  q.filter = demod.filter;
  q.demod_rate = demod.sample_rate;
  dump_raw(opts, "demod_channels.raw", demod.sample_rate, {demod.ch_x, demod.ch_y});

  const double center = rad_to_hz(delta_lo);
  const double half = half_band(cfg, rates);
  stage("spectral", [&] {
    const WelchParams wp{segment_len_for(rates.gamma_minus, demod.sample_rate, cfg.analysis.points_across),
                         cfg.analysis.overlap, cfg.analysis.window};
    const auto det = spans_for(schedule, DriveTag::detuned, demod, input_rate, demod.ch_x.size());
    const auto res = spans_for(schedule, DriveTag::resonant, demod, input_rate, demod.ch_x.size());
    q.detuned_x_psd = welch_psd(demod.ch_x, demod.sample_rate, wp, det, opts.exec);
    q.detuned_y_psd = welch_psd(demod.ch_y, demod.sample_rate, wp, det, opts.exec);
    q.resonant_x_psd = welch_psd(demod.ch_x, demod.sample_rate, wp, res, opts.exec);
    q.resonant_y_psd = welch_psd(demod.ch_y, demod.sample_rate, wp, res, opts.exec);
    return 0;
  });
  demod = DemodOutput{};

  FitOptions fo;
  fo.half_width_hz = half;
  stage("fit_quadrature", [&] {
    q.detuned_x = fit_quadrature(q.detuned_x_psd, center, fo);
    q.detuned_y = fit_quadrature(q.detuned_y_psd, center, fo);
    q.resonant_x = fit_quadrature(q.resonant_x_psd, center, fo);
    q.resonant_y = fit_quadrature(q.resonant_y_psd, center, fo);
    return 0;
  });

  const double s0 = 0.5 * (q.detuned_x.value("sigma2") + q.detuned_y.value("sigma2"));
  const double s0_sigma = 0.5 * std::hypot(q.detuned_x.sigma("sigma2"), q.detuned_y.sigma("sigma2"));
  auto normalized = [&](const FitResult& r, double& value, double& sigma) {
    value = r.value("sigma2") / s0;
    sigma = value * std::hypot(r.sigma("sigma2") / r.value("sigma2"), s0_sigma / s0);
  };
  normalized(q.resonant_x, q.norm_x, q.norm_x_sigma);
  normalized(q.resonant_y, q.norm_y, q.norm_y_sigma);

  q.gamma_detuned = 0.5 * (q.detuned_x.value("gamma") + q.detuned_y.value("gamma"));
  q.gamma_detuned_sigma = 0.5 * std::hypot(q.detuned_x.sigma("gamma"), q.detuned_y.sigma("gamma"));
  auto width = [&](const FitResult& r, double& value, double& sigma) {
    value = r.value("gamma") / q.gamma_detuned;
    sigma = value * std::hypot(r.sigma("gamma") / r.value("gamma"), q.gamma_detuned_sigma / q.gamma_detuned);
  };
  width(q.resonant_x, q.width_plus, q.width_plus_sigma);
  width(q.resonant_y, q.width_minus, q.width_minus_sigma);

  symmetry_test(q, q.detuned_x_psd, q.detuned_y_psd, center, half);
  const double lo = std::max(0.0, center - 2.0 * half), hi = center + 2.0 * half;
  q.detuned_x_psd = crop(q.detuned_x_psd, lo, hi);
  q.detuned_y_psd = crop(q.detuned_y_psd, lo, hi);
  q.resonant_x_psd = crop(q.resonant_x_psd, lo, hi);
  q.resonant_y_psd = crop(q.resonant_y_psd, lo, hi);
  return q;
}

namespace {

// Sideband spectra from the closed form, for the quantum-squeezed regime
// where component synthesis is impossible.
void write_analytic_sidebands(const RunConfig& cfg, const DerivedRates& r, const fs::path& dir,
                              const std::string& hash, std::vector<std::string>& files) {
  const double half = half_band(cfg, r);
  std::vector<double> omega;
  constexpr int kPoints = 2001;
  for (int i = 0; i < kPoints; ++i) omega.push_back(hz_to_rad(-half + 2.0 * half * i / (kPoints - 1)));
  for (Sideband side : {Sideband::stokes, Sideband::antistokes}) {
    const Psd psd = analytic_sideband_psd(r.n_bar, r.s, r.gamma_eff, side, omega);
    const std::string name = side == Sideband::stokes ? "analytic_stokes_psd.csv" : "analytic_antistokes_psd.csv";
    io::write_psd_csv(dir / name, psd, hash);
    files.push_back(name);
  }
}

} // namespace

json run_single(const RunConfig& cfg_in, const fs::path& dir) {
  RunConfig cfg = cfg_in;
  stage("config", [&] { cfg.resolve(); cfg.validate(); return 0; });
  const DerivedRates rates = cfg.rates();
  const RegimeReport regime = thresholds(rates.n_bar, rates.s);
  const std::string hash = cfg.hash();
  fs::create_directories(dir);
  write_config_snapshot(cfg, dir);

  const bool do_sideband = cfg.paths != PathSelect::quadrature;
  const bool do_quadrature = cfg.paths != PathSelect::sideband;
  const bool analytic_only = do_sideband && regime.quantum_squeezed;

  json report;
  report["kind"] = "single";
  report["config_hash"] = hash;
  report["seed"] = cfg.grid.seed;
  report["theory"] = theory_json(rates);
  report["regime"] = {{"stable", regime.stable},
                      {"quantum_squeezed", regime.quantum_squeezed},
                      {"quantum_reachable", regime.quantum_reachable}};
  report["analytic_only"] = analytic_only;
  report["paths"] = to_string(cfg.paths);
  report["repetitions"] = cfg.repetitions;
  report["welch"] = {{"window", to_string(cfg.analysis.window)},
                     {"overlap", cfg.analysis.overlap},
                     {"points_across", cfg.analysis.points_across},
                     {"band_half_width_hz", half_band(cfg, rates)}};
  std::vector<std::string> files{"config.cfg"};
  if (analytic_only) write_analytic_sidebands(cfg, rates, dir, hash, files);

  Collector collect;
  json reps = json::array();
  for (int r = 0; r < cfg.repetitions; ++r) {
    const std::uint64_t seed = rep_seed(cfg.grid.seed, 0, static_cast<std::uint64_t>(r));
    const std::string rel = "rep_" + two_digits(static_cast<std::size_t>(r));
    const fs::path rep_dir = dir / rel;
    fs::create_directories(rep_dir);
    RepOptions opts;
    if (cfg.keep_raw) opts.raw_dir = &rep_dir;
    json rep{{"index", r}, {"seed", seed}};
    if (do_sideband && !analytic_only) {
      const SidebandRep sb = run_sideband_rep(cfg, rates, seed, opts);
      collect_sideband(collect, sb);
      RepArtifacts a = write_sideband_rep(sb, rep_dir, rel, seed, hash);
      rep["sideband"] = a.summary;
      files.insert(files.end(), a.files.begin(), a.files.end());
    }
    if (do_quadrature) {
      const QuadratureRep q = run_quadrature_rep(cfg, rates, seed, opts);
      collect_quadrature(collect, q);
      RepArtifacts a = write_quadrature_rep(q, rep_dir, rel, seed, hash);
      rep["quadrature"] = a.summary;
      files.insert(files.end(), a.files.begin(), a.files.end());
      report["lockin"] = lockin_json(q.filter, cfg.detect.lowpass_cutoff, q.demod_rate);
      double chi2 = report.value("symmetry_chi2", 0.0) + q.symmetry_chi2;
      double dof = report.value("symmetry_dof", 0.0) + static_cast<double>(q.symmetry_dof);
      report["symmetry_chi2"] = chi2;
      report["symmetry_dof"] = dof;
    }
    reps.push_back(rep);
  }
  if (report.contains("symmetry_dof")) {
    const double dof = report["symmetry_dof"];
    report["symmetry_p"] = boost::math::cdf(boost::math::complement(
        boost::math::chi_squared(dof), report["symmetry_chi2"].get<double>()));
  }
  report["reps"] = reps;
  report["aggregate"] = collect.to_json();
  report["expected_files"] = files;
  io::write_text(dir / "report.json", report.dump(2) + "\n");
  return report;
}

namespace {

// Runs body(k) for every sweep point on `workers` threads; each point's
// failure is captured in its own row.
template <class Body>
std::vector<json> run_points(std::size_t n, int workers, Body&& body) {
  std::vector<json> rows(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    try {
      rows[idx] = body(idx);
      rows[idx]["status"] = "ok";
    } catch (const StageError& e) {
      rows[idx]["status"] = "failed";
      rows[idx]["stage"] = e.stage();
      rows[idx]["error"] = e.what();
    } catch (const std::exception& e) {
      rows[idx]["status"] = "failed";
      rows[idx]["error"] = e.what();
    }
    rows[idx]["index"] = idx;
  }
  return rows;
}

double row_value(const json& row, const char* group, const char* field) {
  if (!row.contains(group) || row[group].is_null() || !row[group].contains(field)) return kNaN;
  const json& v = row[group][field];
  return v.is_number() ? v.get<double>() : kNaN;
}

} // namespace

json run_sweep_ratio_vs_s(const RunConfig& cfg_in, std::span<const double> s_values, const fs::path& dir) {
  RunConfig cfg = cfg_in;
  cfg.paths = PathSelect::sideband;
  stage("config", [&] { cfg.resolve(); cfg.validate(); return 0; });
  const DerivedRates base = cfg.rates();
  const std::string hash = cfg.hash();
  fs::create_directories(dir);
  write_config_snapshot(cfg, dir);
  std::vector<std::string> files{"config.cfg", "summary.csv", "theory_overlay.csv"};

  const std::vector<double> axis(s_values.begin(), s_values.end());
  std::vector<std::vector<std::string>> point_files(axis.size());
  std::vector<json> rows = run_points(axis.size(), cfg.workers, [&](std::size_t k) {
    json row;
    row["s_set"] = axis[k];
    const DerivedRates rates = stage("model", [&] {
      if (!(axis[k] >= 0.0 && axis[k] < 1.0)) throw ConfigError("s must lie in [0, 1)");
      return base.with_gain(axis[k]);
    });
    row["theory"] = theory_json(rates);
    Collector collect;
    json reps = json::array();
    for (int r = 0; r < cfg.repetitions; ++r) {
      const std::uint64_t seed = rep_seed(cfg.grid.seed, k, static_cast<std::uint64_t>(r));
      const std::string rel = "point_" + two_digits(k) + "/rep_" + two_digits(static_cast<std::size_t>(r));
      fs::create_directories(dir / rel);
      RepOptions opts;
      const fs::path raw = dir / rel;
      if (cfg.keep_raw) opts.raw_dir = &raw;
      const SidebandRep sb = run_sideband_rep(cfg, rates, seed, opts);
      collect_sideband(collect, sb);
      RepArtifacts a = write_sideband_rep(sb, dir / rel, rel, seed, hash);
      point_files[k].insert(point_files[k].end(), a.files.begin(), a.files.end());
      reps.push_back(a.summary);
    }
    row["reps"] = reps;
    row["aggregate"] = collect.to_json();
    return row;
  });

  std::vector<std::vector<double>> cols(10);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const json& row = rows[k];
    files.insert(files.end(), point_files[k].begin(), point_files[k].end());
    const bool ok = row["status"] == "ok";
    const DerivedRates th = axis[k] >= 0.0 && axis[k] < 1.0 ? base.with_gain(axis[k]) : base;
    const double vals[] = {axis[k],
                           row_value(row, "aggregate", "s_hat") ,
                           ok ? row["aggregate"]["s_hat"]["sd"].get<double>() : kNaN,
                           ok ? row["aggregate"]["R_plus"]["mean"].get<double>() : kNaN,
                           ok ? row["aggregate"]["R_plus"]["sigma_rms"].get<double>() : kNaN,
                           ok ? row["aggregate"]["R_minus"]["mean"].get<double>() : kNaN,
                           ok ? row["aggregate"]["R_minus"]["sigma_rms"].get<double>() : kNaN,
                           th.ratios.r_plus,
                           th.ratios.r_minus,
                           ok ? 1.0 : 0.0};
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(vals[c]);
  }
  // s_hat column holds the mean.
  for (std::size_t k = 0; k < rows.size(); ++k) {
    cols[1][k] = rows[k]["status"] == "ok" ? rows[k]["aggregate"]["s_hat"]["mean"].get<double>() : kNaN;
  }
  const std::vector<std::string> header{"s_set", "s_hat", "s_hat_sd", "R_plus", "R_plus_sigma", "R_minus",
                                        "R_minus_sigma", "theory_R_plus", "theory_R_minus", "ok"};
  io::write_table_csv(dir / "summary.csv", header, cols, "config_hash=" + hash);

  std::vector<std::vector<double>> overlay(4);
  const double s_max = std::min(0.99, 2.0 * base.n_bar);
  for (int i = 0; i <= 200; ++i) {
    const double s = s_max * i / 200.0;
    if (s >= 2.0 * base.n_bar) break;
    const SidebandRatios r = ratios(base.n_bar, s);
    overlay[0].push_back(s);
    overlay[1].push_back(r.r_plain);
    overlay[2].push_back(r.r_plus);
    overlay[3].push_back(r.r_minus);
  }
  const std::vector<std::string> oh{"s", "R", "R_plus", "R_minus"};
  io::write_table_csv(dir / "theory_overlay.csv", oh, overlay, "config_hash=" + hash);

  json summary;
  summary["kind"] = "sweep_ratios";
  summary["config_hash"] = hash;
  summary["seed"] = cfg.grid.seed;
  summary["theory"] = theory_json(base);
  summary["rows"] = rows;
  summary["expected_files"] = files;
  io::write_text(dir / "report.json", summary.dump(2) + "\n");
  return summary;
}

json run_sweep_variance_vs_tone_ratio(const RunConfig& cfg_in, std::span<const double> epsilon_values,
                                      const fs::path& dir) {
  RunConfig cfg = cfg_in;
  cfg.paths = PathSelect::quadrature;
  stage("config", [&] { cfg.resolve(); return 0; });
  const std::string hash = cfg.hash();
  fs::create_directories(dir);
  write_config_snapshot(cfg, dir);
  std::vector<std::string> files{"config.cfg", "summary.csv", "theory_overlay.csv"};

  const std::vector<double> axis(epsilon_values.begin(), epsilon_values.end());
  std::vector<std::vector<std::string>> point_files(axis.size());
  std::vector<json> rows = run_points(axis.size(), cfg.workers, [&](std::size_t k) {
    json row;
    row["epsilon_c"] = axis[k];
    RunConfig point = cfg;
    point.s_target.reset();
    point.pump.epsilon_c = axis[k];
    const DerivedRates rates = stage("model", [&] {
      point.validate();
      return point.rates();
    });
    row["theory"] = theory_json(rates);
    Collector collect;
    json reps = json::array();
    double chi2 = 0.0, dof = 0.0;
    for (int r = 0; r < cfg.repetitions; ++r) {
      const std::uint64_t seed = rep_seed(cfg.grid.seed, k, static_cast<std::uint64_t>(r));
      const std::string rel = "point_" + two_digits(k) + "/rep_" + two_digits(static_cast<std::size_t>(r));
      fs::create_directories(dir / rel);
      RepOptions opts;
      const fs::path raw = dir / rel;
      if (cfg.keep_raw) opts.raw_dir = &raw;
      const QuadratureRep q = run_quadrature_rep(point, rates, seed, opts);
      collect_quadrature(collect, q);
      chi2 += q.symmetry_chi2;
      dof += static_cast<double>(q.symmetry_dof);
      RepArtifacts a = write_quadrature_rep(q, dir / rel, rel, seed, hash);
      point_files[k].insert(point_files[k].end(), a.files.begin(), a.files.end());
      reps.push_back(a.summary);
    }
    row["reps"] = reps;
    row["aggregate"] = collect.to_json();
    row["symmetry_p"] = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
    return row;
  });

  const std::vector<std::string> header{"epsilon_c", "s_theory", "norm_x", "norm_x_sd", "norm_y", "norm_y_sd",
                                        "theory_norm_x", "theory_norm_y", "width_plus", "width_plus_sigma",
                                        "width_minus", "width_minus_sigma", "variance_plus", "variance_minus", "ok"};
  std::vector<std::vector<double>> cols(header.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const json& row = rows[k];
    files.insert(files.end(), point_files[k].begin(), point_files[k].end());
    const bool ok = row["status"] == "ok";
    const double s = ok ? row["theory"]["s"].get<double>() : kNaN;
    auto agg = [&](const char* name, const char* field) {
      return ok ? row["aggregate"][name][field].get<double>() : kNaN;
    };
    const double vals[] = {axis[k], s, agg("norm_x", "mean"), agg("norm_x", "sd"), agg("norm_y", "mean"),
                           agg("norm_y", "sd"), 1.0 / (1.0 + s), 1.0 / (1.0 - s), agg("width_plus", "mean"),
                           agg("width_plus", "sigma_rms"), agg("width_minus", "mean"),
                           agg("width_minus", "sigma_rms"), agg("variance_plus", "mean"),
                           agg("variance_minus", "mean"), ok ? 1.0 : 0.0};
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(vals[c]);
  }
  io::write_table_csv(dir / "summary.csv", header, cols, "config_hash=" + hash);

  std::vector<std::vector<double>> overlay(4);
  for (int i = 0; i <= 200; ++i) {
    CavityPumpParams p = cfg.pump;
    p.epsilon_c = 0.5 + 0.5 * i / 200.0;
    const DampingRate eff = gamma_eff(p, cfg.osc);
    if (eff.anti_damped) continue;
    const double s = gamma_par(p, cfg.osc) / eff.value;
    if (!(s >= 0.0 && s < 1.0)) continue;
    overlay[0].push_back(p.epsilon_c);
    overlay[1].push_back(s);
    overlay[2].push_back(1.0 / (1.0 + s));
    overlay[3].push_back(1.0 / (1.0 - s));
  }
  const std::vector<std::string> oh{"epsilon_c", "s", "norm_x", "norm_y"};
  io::write_table_csv(dir / "theory_overlay.csv", oh, overlay, "config_hash=" + hash);

  json summary;
  summary["kind"] = "sweep_variances";
  summary["config_hash"] = hash;
  summary["seed"] = cfg.grid.seed;
  summary["rows"] = rows;
  summary["expected_files"] = files;
  io::write_text(dir / "report.json", summary.dump(2) + "\n");
  return summary;
}

} // namespace omsq
