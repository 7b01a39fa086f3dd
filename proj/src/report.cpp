#include "omsq/pipeline.hpp"

#include "omsq/errors.hpp"
#include "omsq/io.hpp"
#include "omsq/units.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace omsq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Check {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double bound = 0.0; // |measured - expected| must not exceed this
  bool pass = false;
};

Check make_check(std::string name, double measured, double expected, double bound) {
  const bool pass = std::isfinite(measured) && std::abs(measured - expected) <= bound;
  return {std::move(name), measured, expected, bound, pass};
}

double num(const json& j, const char* a, const char* b) {
  if (!j.contains(a) || !j[a].contains(b)) return std::nan("");
  const json& v = j[a][b];
  return v.is_number() ? v.get<double>() : std::nan("");
}

// Checks on one set of aggregates against the theory block.
void add_checks(std::vector<Check>& checks, const std::string& prefix, const json& agg, const json& theory) {
  const double s = theory.value("s", 0.0);
  if (agg.contains("s_hat")) {
    checks.push_back(make_check(prefix + "s_hat", num(agg, "s_hat", "mean"), s, 0.05));
    checks.push_back(make_check(prefix + "R_plus", num(agg, "R_plus", "mean"), theory["R_plus"].get<double>(),
                                num(agg, "R_plus", "sigma_rms")));
    checks.push_back(make_check(prefix + "R_minus", num(agg, "R_minus", "mean"),
                                theory["R_minus"].get<double>(), num(agg, "R_minus", "sigma_rms")));
    checks.push_back(make_check(prefix + "R_reference", num(agg, "R_reference", "mean"),
                                theory["R"].get<double>(), num(agg, "R_reference", "sigma_rms")));
  }
  if (agg.contains("norm_x") && theory.contains("norm_x")) {
    const double nx = theory["norm_x"].get<double>(), ny = theory["norm_y"].get<double>();
    checks.push_back(make_check(prefix + "norm_x", num(agg, "norm_x", "mean"), nx, 0.05 * nx));
    checks.push_back(make_check(prefix + "norm_y", num(agg, "norm_y", "mean"), ny, 0.05 * ny));
    checks.push_back(make_check(prefix + "width_plus_vs_variance", num(agg, "width_plus", "mean"),
                                num(agg, "variance_plus", "mean"),
                                std::hypot(num(agg, "width_plus", "sigma_rms"), num(agg, "variance_plus", "sigma_rms"))));
    checks.push_back(make_check(prefix + "width_minus_vs_variance", num(agg, "width_minus", "mean"),
                                num(agg, "variance_minus", "mean"),
                                std::hypot(num(agg, "width_minus", "sigma_rms"),
                                           num(agg, "variance_minus", "sigma_rms"))));
    const double ge = theory["gamma_eff"].get<double>();
    checks.push_back(make_check(prefix + "gamma_detuned", num(agg, "gamma_detuned", "mean"), ge, 0.05 * ge));
  }
}

void add_symmetry(std::vector<Check>& checks, const std::string& prefix, const json& j) {
  if (!j.contains("symmetry_p")) return;
  const double p = j["symmetry_p"].get<double>();
  // Pass when p > 0.01: expressed as |p - 1| <= 0.99.
  Check c{prefix + "detuned_symmetry_p", p, 1.0, 0.99, std::isfinite(p) && p > 0.01};
  checks.push_back(c);
}

void print_theory(std::ostream& out, const json& t) {
  out << "theory: n_bar=" << t.value("n_bar", 0.0) << " s=" << t.value("s", 0.0)
      << " gamma_eff/2pi=" << t.value("gamma_eff", 0.0) / kTwoPi << " Hz"
      << " R=" << t.value("R", 0.0) << " R+=" << t.value("R_plus", 0.0) << " R-=" << t.value("R_minus", 0.0)
      << '\n';
}

} // namespace

ReportOutcome report(const fs::path& dir, std::ostream& out) {
  ReportOutcome outcome;
  const fs::path report_path = dir / "report.json";
  if (!fs::exists(report_path)) {
    outcome.complete = false;
    outcome.passed = false;
    outcome.gaps.push_back("report.json");
    out << "missing: report.json\n";
    return outcome;
  }
  const json r = json::parse(io::read_text(report_path));
  const std::string kind = r.value("kind", "");
  out << "run kind: " << kind << "\n";
  out << "config hash: " << r.value("config_hash", "") << "  seed: " << r.value("seed", std::uint64_t{0}) << '\n';
  if (fs::exists(dir / "config.cfg")) {
    out << "config:\n";
    std::istringstream lines(io::read_text(dir / "config.cfg"));
    std::string line;
    while (std::getline(lines, line)) out << "  " << line << '\n';
  }
  if (r.contains("theory")) print_theory(out, r["theory"]);
  if (r.contains("regime")) {
    const json& g = r["regime"];
    out << "regime: stable=" << g.value("stable", false) << " quantum_squeezed=" << g.value("quantum_squeezed", false)
        << " quantum_reachable=" << g.value("quantum_reachable", false) << '\n';
  }
  if (r.value("analytic_only", false)) out << "sideband path: analytic spectra only (negative component weight)\n";
  if (r.contains("lockin")) {
    const json& l = r["lockin"];
    out << "lock-in: cutoff=" << l.value("cutoff_hz", 0.0) << " Hz taps=" << l.value("taps", 0)
        << " decimation=" << l.value("decimation", 0) << " ripple=" << l.value("ripple_db", 0.0)
        << " dB attenuation=" << l.value("attenuation_db", 0.0) << " dB\n";
  }

  for (const auto& f : r.value("expected_files", std::vector<std::string>{})) {
    if (!fs::exists(dir / f)) outcome.gaps.push_back(f);
  }
  outcome.complete = outcome.gaps.empty();
  for (const auto& g : outcome.gaps) out << "missing: " << g << '\n';

  std::vector<Check> checks;
  if (kind == "single") {
    add_checks(checks, "", r.value("aggregate", json::object()), r["theory"]);
    add_symmetry(checks, "", r);
  } else {
    for (const auto& row : r.value("rows", json::array())) {
      const std::string prefix = "point_" + std::to_string(row.value("index", 0)) + ".";
      if (row.value("status", "") != "ok") {
        out << prefix << " failed: " << row.value("error", "") << '\n';
        outcome.gaps.push_back(prefix + "failed");
        continue;
      }
      add_checks(checks, prefix, row["aggregate"], row["theory"]);
      add_symmetry(checks, prefix, row);
    }
  }

  out << "check\tmeasured\texpected\tbound\tresult\n";
  out << std::setprecision(6);
  for (const auto& c : checks) {
    out << c.name << '\t' << c.measured << '\t' << c.expected << '\t' << c.bound << '\t'
        << (c.pass ? "PASS" : "FAIL") << '\n';
    if (!c.pass) outcome.passed = false;
  }
  if (!outcome.gaps.empty()) outcome.passed = false;
  return outcome;
}

} // namespace omsq
