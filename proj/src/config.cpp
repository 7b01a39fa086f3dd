#include "omsq/config.hpp"

#include "omsq/errors.hpp"
#include "omsq/spectral.hpp"
#include "omsq/units.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace omsq {

std::string to_string(PathSelect p) {
  switch (p) {
  case PathSelect::both: return "both";
  case PathSelect::sideband: return "sideband";
  case PathSelect::quadrature: return "quadrature";
  }
  return "unknown";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

struct UnitScale {
  const char* unit;
  double scale;
};

const std::vector<UnitScale>& units_for(Quantity kind) {
  static const std::vector<UnitScale> angular{{"GHz", kTwoPi * 1e9}, {"MHz", kTwoPi * 1e6},
                                              {"kHz", kTwoPi * 1e3}, {"Hz", kTwoPi},
                                              {"rad/s", 1.0}};
  static const std::vector<UnitScale> frequency{{"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}};
  static const std::vector<UnitScale> time{{"ms", 1e-3}, {"us", 1e-6}, {"s", 1.0}};
  static const std::vector<UnitScale> temperature{{"mK", 1e-3}, {"K", 1.0}};
  static const std::vector<UnitScale> mass{{"kg", 1.0}, {"mg", 1e-6}, {"ug", 1e-9},
                                           {"ng", 1e-12}, {"pg", 1e-15}, {"g", 1e-3}};
  static const std::vector<UnitScale> phase{{"rad", 1.0}, {"deg", kPi / 180.0}};
  static const std::vector<UnitScale> plain{};
  switch (kind) {
  case Quantity::angular: return angular;
  case Quantity::frequency: return frequency;
  case Quantity::time: return time;
  case Quantity::temperature: return temperature;
  case Quantity::mass: return mass;
  case Quantity::phase: return phase;
  case Quantity::plain: return plain;
  }
  return plain;
}

double parse_number(std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("not a number: '" + t + "'");
  }
  return v;
}

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) out.push_back(parse_number(item));
  return out;
}

bool parse_bool(std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("not a boolean: '" + t + "'");
}

std::uint64_t parse_u64(std::string_view text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("not an unsigned integer: '" + t + "'");
  }
  return v;
}

int parse_int(std::string_view text) {
  const std::uint64_t v = parse_u64(text);
  if (v > 1'000'000) throw ConfigError("integer out of range: " + std::string(text));
  return static_cast<int>(v);
}

} // namespace

double parse_quantity(std::string_view text, Quantity kind) {
  const std::string t = trim(text);
  if (kind == Quantity::plain) return parse_number(t);
  for (const UnitScale& u : units_for(kind)) {
    const std::string_view unit(u.unit);
    if (t.size() > unit.size() && t.compare(t.size() - unit.size(), unit.size(), unit) == 0) {
      return parse_number(std::string_view(t).substr(0, t.size() - unit.size())) * u.scale;
    }
  }
  throw ConfigError("value '" + t + "' needs a unit suffix");
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }

  RunConfig c;
  auto take = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto quantity = [&](const char* key, Quantity kind, double& dst) {
    if (auto v = take(key)) dst = parse_quantity(*v, kind);
  };

  quantity("omega_m", Quantity::angular, c.osc.omega_m);
  const auto gamma_m = take("gamma_m");
  const auto q = take("quality_factor");
  if (gamma_m && q) throw ConfigError("give gamma_m or quality_factor, not both");
  if (gamma_m) c.osc.gamma_m = parse_quantity(*gamma_m, Quantity::angular);
  if (q) {
    const double qv = parse_number(*q);
    if (!(qv > 0.0)) throw ConfigError("quality_factor must be positive");
    c.osc.gamma_m = c.osc.omega_m / qv;
  } else if (!gamma_m) {
    c.osc.gamma_m = c.osc.omega_m / 6.4e6;
  }
  quantity("n_bar", Quantity::plain, c.osc.n_bar);
  if (auto v = take("mass")) c.osc.mass = parse_quantity(*v, Quantity::mass);
  if (auto v = take("temperature")) c.osc.temperature = parse_quantity(*v, Quantity::temperature);

  quantity("kappa", Quantity::angular, c.pump.kappa);
  quantity("g", Quantity::angular, c.pump.g);
  quantity("delta_pump", Quantity::angular, c.pump.delta_pump);
  quantity("delta_lo", Quantity::angular, c.pump.delta_lo);
  quantity("omega_par_offset", Quantity::angular, c.pump.omega_par_offset);
  const auto eps = take("epsilon_c");
  const auto st = take("s_target");
  if (eps && st) throw ConfigError("give epsilon_c or s_target, not both");
  if (eps) {
    c.pump.epsilon_c = parse_number(*eps);
    c.s_target.reset();
  }
  if (st) c.s_target = parse_number(*st);

  quantity("sample_rate", Quantity::frequency, c.grid.sample_rate);
  quantity("duration", Quantity::time, c.grid.duration);
  quantity("carrier", Quantity::angular, c.grid.carrier);
  if (auto v = take("seed")) c.grid.seed = parse_u64(*v);

  quantity("gain", Quantity::plain, c.detect.gain);
  quantity("shot_psd", Quantity::plain, c.detect.shot_psd);
  quantity("demod_phase", Quantity::phase, c.detect.demod_phase);
  quantity("lowpass_cutoff", Quantity::frequency, c.detect.lowpass_cutoff);
  quantity("schedule_period", Quantity::time, c.detect.schedule_period);
  quantity("frame_phase", Quantity::phase, c.detect.frame_phase);
  quantity("lo_phase", Quantity::phase, c.detect.lo_phase);
  const auto tone_f = take("test_tone_frequency");
  const auto tone_a = take("test_tone_amplitude");
  if (tone_f.has_value() != tone_a.has_value()) {
    throw ConfigError("test_tone_frequency and test_tone_amplitude go together");
  }
  if (tone_f) {
    c.detect.tone = TestTone{parse_quantity(*tone_f, Quantity::frequency), parse_number(*tone_a)};
  }

  if (auto v = take("window")) c.analysis.window = parse_window(trim(*v));
  quantity("overlap", Quantity::plain, c.analysis.overlap);
  quantity("points_across", Quantity::plain, c.analysis.points_across);
  quantity("band_widths", Quantity::plain, c.analysis.band_widths);
  if (auto v = take("masks")) {
    for (const std::string& item : split(*v, ',')) {
      const auto dots = item.find("..");
      if (dots == std::string::npos) throw ConfigError("mask '" + item + "' must read lo..hi");
      const double lo = parse_quantity(item.substr(0, dots), Quantity::frequency);
      const double hi = parse_quantity(item.substr(dots + 2), Quantity::frequency);
      if (!(hi > lo)) throw ConfigError("mask '" + item + "' is empty");
      c.analysis.masks.push_back({lo, hi});
    }
  }
  if (auto v = take("paths")) {
    const std::string p = trim(*v);
    if (p == "both") c.paths = PathSelect::both;
    else if (p == "sideband") c.paths = PathSelect::sideband;
    else if (p == "quadrature") c.paths = PathSelect::quadrature;
    else throw ConfigError("paths must be both, sideband or quadrature");
  }
  if (auto v = take("repetitions")) c.repetitions = parse_int(*v);
  if (auto v = take("sweep_s")) c.sweep_s = parse_list(*v);
  if (auto v = take("sweep_epsilon")) c.sweep_epsilon = parse_list(*v);
  if (auto v = take("sweep_epsilon_for_s")) c.sweep_epsilon_for_s = parse_list(*v);
  if (auto v = take("output_dir")) c.output_dir = trim(*v);
  if (auto v = take("workers")) c.workers = parse_int(*v);
  if (auto v = take("keep_raw")) c.keep_raw = parse_bool(*v);

  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void RunConfig::resolve() {
  if (s_target) pump.epsilon_c = tone_ratio_for_gain(osc, pump, *s_target);
  for (double s : sweep_epsilon_for_s) sweep_epsilon.push_back(tone_ratio_for_gain(osc, pump, s));
  sweep_epsilon_for_s.clear();
}

DerivedRates RunConfig::rates() const { return derive_rates(osc, pump); }

void RunConfig::validate() const {
  osc.validate();
  pump.validate(osc);
  if (s_target && !(*s_target >= 0.0 && *s_target < 1.0)) throw ConfigError("s_target must lie in [0, 1)");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(analysis.overlap >= 0.0 && analysis.overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  if (!(analysis.points_across > 0.0)) throw ConfigError("points_across must be positive");
  if (!(analysis.band_widths > 0.0)) throw ConfigError("band_widths must be positive");
  for (double s : sweep_s) {
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("sweep_s values must lie in [0, 1)");
  }
  for (double e : sweep_epsilon) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("sweep_epsilon values must lie in [0, 1]");
  }

  const DerivedRates r = rates();
  if (!(r.s < 1.0)) throw RegimeError("configured gain s = " + std::to_string(r.s) + " is unstable (s >= 1)");
  (void)grid.size();
  grid.validate(pump.delta_lo, r.gamma_plus);
  detect.validate(grid.carrier, pump.delta_lo, r.gamma_plus);
  const std::vector<Segment> schedule = schedule_drive(grid, detect.schedule_period, r.gamma_minus);
  const std::size_t n_seg = segment_len_for(r.gamma_minus, grid.sample_rate, analysis.points_across);
  const double usable = detect.schedule_period - schedule.front().guard;
  if (static_cast<double>(n_seg) / grid.sample_rate > usable) {
    throw ConfigError("Welch segment (" + std::to_string(static_cast<double>(n_seg) / grid.sample_rate) +
                      " s) longer than the usable part of a drive period");
  }
  const double half = analysis.band_widths * rad_to_hz(r.gamma_plus);
  if (!(half < rad_to_hz(pump.delta_lo))) {
    throw ConfigError("fit band overlaps between sidebands: reduce band_widths");
  }
  try {
    const double pass = rad_to_hz(pump.delta_lo + 10.0 * r.gamma_plus);
    const double image = rad_to_hz(2.0 * grid.carrier - pump.delta_lo - 10.0 * r.gamma_plus);
    (void)design_lowpass(grid.sample_rate, detect.lowpass_cutoff, pass, image);
  } catch (const NumericalError& e) {
    throw ConfigError(e.what());
  }
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  auto put = [&](const std::string& key, double v, const char* unit) {
    kv[key] = format(v) + unit;
  };
  auto put_list = [&](const std::string& key, const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
    kv[key] = s;
  };
  put("omega_m", osc.omega_m, "rad/s");
  put("gamma_m", osc.gamma_m, "rad/s");
  put("n_bar", osc.n_bar, "");
  if (osc.mass) put("mass", *osc.mass, "kg");
  if (osc.temperature) put("temperature", *osc.temperature, "K");
  put("kappa", pump.kappa, "rad/s");
  put("g", pump.g, "rad/s");
  if (s_target) put("s_target", *s_target, "");
  else put("epsilon_c", pump.epsilon_c, "");
  put("delta_pump", pump.delta_pump, "rad/s");
  put("delta_lo", pump.delta_lo, "rad/s");
  put("omega_par_offset", pump.omega_par_offset, "rad/s");
  put("sample_rate", grid.sample_rate, "Hz");
  put("duration", grid.duration, "s");
  put("carrier", grid.carrier, "rad/s");
  kv["seed"] = std::to_string(grid.seed);
  put("gain", detect.gain, "");
  put("shot_psd", detect.shot_psd, "");
  put("demod_phase", detect.demod_phase, "rad");
  put("lowpass_cutoff", detect.lowpass_cutoff, "Hz");
  put("schedule_period", detect.schedule_period, "s");
  put("frame_phase", detect.frame_phase, "rad");
  put("lo_phase", detect.lo_phase, "rad");
  if (detect.tone) {
    put("test_tone_frequency", detect.tone->frequency_hz, "Hz");
    put("test_tone_amplitude", detect.tone->amplitude, "");
  }
  kv["window"] = to_string(analysis.window);
  put("overlap", analysis.overlap, "");
  put("points_across", analysis.points_across, "");
  put("band_widths", analysis.band_widths, "");
  if (!analysis.masks.empty()) {
    std::string s;
    for (std::size_t i = 0; i < analysis.masks.size(); ++i) {
      s += (i ? ", " : "") + format(analysis.masks[i].lo) + "Hz.." + format(analysis.masks[i].hi) + "Hz";
    }
    kv["masks"] = s;
  }
  kv["paths"] = to_string(paths);
  kv["repetitions"] = std::to_string(repetitions);
  if (!sweep_s.empty()) put_list("sweep_s", sweep_s);
  std::vector<double> eps = sweep_epsilon;
  for (double s : sweep_epsilon_for_s) eps.push_back(tone_ratio_for_gain(osc, pump, s));
  if (!eps.empty()) put_list("sweep_epsilon", eps);

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

} // namespace omsq
