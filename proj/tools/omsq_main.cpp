#include "omsq/config.hpp"
#include "omsq/errors.hpp"
#include "omsq/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  bool keep_raw = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "configuration file")->required();
  cmd->add_option("--seed", c.seed, "master seed override");
  cmd->add_option("--out", c.out, "output directory override");
  cmd->add_option("--workers", c.workers, "sweep points run in parallel");
  cmd->add_flag("--keep-raw", c.keep_raw, "dump raw records next to the spectra");
}

omsq::RunConfig load(const Common& c) {
  omsq::RunConfig cfg = omsq::load_config(c.config);
  if (c.seed) cfg.grid.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.workers) cfg.workers = *c.workers;
  if (c.keep_raw) cfg.keep_raw = true;
  cfg.resolve();
  return cfg;
}

int code_for(omsq::ErrorKind k) { return k == omsq::ErrorKind::config ? 2 : 3; }

int finish(const std::filesystem::path& dir) {
  const omsq::ReportOutcome r = omsq::report(dir, std::cout);
  std::cout << "artifacts: " << dir.string() << '\n';
  return r.complete ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametrically squeezed optomechanics simulator"};
  app.require_subcommand(1);

  Common sim, ratios, variances, validate;
  std::string report_dir;
  CLI::App* c_sim = app.add_subcommand("simulate", "run one configuration with repetitions");
  add_common(c_sim, sim);
  CLI::App* c_ratios = app.add_subcommand("sweep-ratios", "sideband ratios versus gain (sweep_s)");
  add_common(c_ratios, ratios);
  CLI::App* c_var = app.add_subcommand("sweep-variances", "quadrature variances versus cooling fraction");
  add_common(c_var, variances);
  CLI::App* c_report = app.add_subcommand("report", "summarize a run directory and check it against theory");
  c_report->add_option("dir", report_dir, "run directory")->required();
  CLI::App* c_validate = app.add_subcommand("validate-config", "check a configuration and print its canonical form");
  add_common(c_validate, validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) {
      const omsq::RunConfig cfg = load(sim);
      omsq::run_single(cfg, cfg.output_dir);
      return finish(cfg.output_dir);
    }
    if (*c_ratios) {
      const omsq::RunConfig cfg = load(ratios);
      if (cfg.sweep_s.empty()) throw omsq::ConfigError("sweep_s is empty");
      omsq::run_sweep_ratio_vs_s(cfg, cfg.sweep_s, cfg.output_dir);
      return finish(cfg.output_dir);
    }
    if (*c_var) {
      const omsq::RunConfig cfg = load(variances);
      if (cfg.sweep_epsilon.empty()) throw omsq::ConfigError("sweep_epsilon and sweep_epsilon_for_s are empty");
      omsq::run_sweep_variance_vs_tone_ratio(cfg, cfg.sweep_epsilon, cfg.output_dir);
      return finish(cfg.output_dir);
    }
    if (*c_report) {
      const omsq::ReportOutcome r = omsq::report(report_dir, std::cout);
      return r.complete && r.passed ? 0 : 4;
    }
    if (*c_validate) {
      const omsq::RunConfig cfg = load(validate);
      cfg.validate();
      std::cout << cfg.canonical() << "config_hash = " << cfg.hash() << '\n';
      return 0;
    }
  } catch (const omsq::StageError& e) {
    std::cerr << "error in " << e.stage() << ": " << e.what() << '\n';
    return code_for(e.kind());
  } catch (const omsq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const omsq::RegimeError& e) {
    std::cerr << "regime error: " << e.what() << '\n';
    return 3;
  } catch (const omsq::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
