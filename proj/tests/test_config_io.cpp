#include "omsq/config.hpp"
#include "omsq/errors.hpp"
#include "omsq/io.hpp"
#include "omsq/units.hpp"

#include <doctest.h>

#include <filesystem>

using namespace omsq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("omsq_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

} // namespace

TEST_SUITE("config_io") {

TEST_CASE("quantities need units") {
  CHECK(parse_quantity("1.4MHz", Quantity::angular) == doctest::Approx(hz_to_rad(1.4e6)));
  CHECK(parse_quantity("100rad/s", Quantity::angular) == doctest::Approx(100.0));
  CHECK(parse_quantity("20kHz", Quantity::frequency) == doctest::Approx(20e3));
  CHECK(parse_quantity("250ms", Quantity::time) == doctest::Approx(0.25));
  CHECK(parse_quantity("7K", Quantity::temperature) == doctest::Approx(7.0));
  CHECK(parse_quantity("180deg", Quantity::phase) == doctest::Approx(kPi));
  CHECK(parse_quantity("3ng", Quantity::mass) == doctest::Approx(3e-12));
  CHECK_THROWS_AS(parse_quantity("1.4", Quantity::angular), ConfigError);
  CHECK_THROWS_AS(parse_quantity("abcHz", Quantity::frequency), ConfigError);
}

TEST_CASE("defaults describe the desk configuration") {
  RunConfig c = parse_config("");
  c.resolve();
  CHECK_NOTHROW(c.validate());
  const DerivedRates r = c.rates();
  CHECK(r.s == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.n_bar == 5.8);
  CHECK(rad_to_hz(r.gamma_eff) == doctest::Approx(36.9).epsilon(0.01));
  CHECK(c.repetitions == 5);
  CHECK(c.grid.duration == 100.0);
}

TEST_CASE("parsing errors") {
  CHECK_THROWS_AS(parse_config("bogus = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed"), ConfigError);
  CHECK_THROWS_AS(parse_config("epsilon_c = 0.9\ns_target = 0.3"), ConfigError);
  CHECK_THROWS_AS(parse_config("gamma_m = 1Hz\nquality_factor = 10"), ConfigError);
  CHECK_THROWS_AS(parse_config("masks = 5kHz"), ConfigError);
  CHECK_THROWS_AS(parse_config("paths = neither"), ConfigError);
  CHECK_THROWS_AS(parse_config("test_tone_frequency = 3kHz"), ConfigError);
  CHECK_THROWS_AS(parse_config("kappa = 1.4"), ConfigError);
}

TEST_CASE("validation catches cross-module problems") {
  RunConfig c = parse_config("schedule_period = 0.1s");
  c.resolve();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = parse_config("s_target = 0.99");
  c.resolve();
  CHECK_THROWS_AS(c.validate(), ConfigError); // settling guard too long
  c = parse_config("lowpass_cutoff = 11.5kHz");
  c.resolve();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("canonical form round-trips and drives the hash") {
  RunConfig a = parse_config("kappa = 1.4MHz\nmasks = 60.1kHz..60.2kHz\nseed = 9\nsweep_s = 0, 0.2");
  a.resolve();
  RunConfig b = parse_config(a.canonical());
  b.resolve();
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  RunConfig c = a;
  c.output_dir = "elsewhere";
  c.workers = 4;
  c.keep_raw = true;
  CHECK(c.hash() == a.hash());
  c.grid.seed = 10;
  CHECK(c.hash() != a.hash());
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("sweep gains resolve to tone ratios") {
  RunConfig c = parse_config("sweep_epsilon_for_s = 0, 0.515");
  c.resolve();
  REQUIRE(c.sweep_epsilon.size() == 2);
  CHECK(c.sweep_epsilon[0] == 1.0);
  RunConfig p = c;
  p.s_target.reset();
  p.pump.epsilon_c = c.sweep_epsilon[1];
  CHECK(p.rates().s == doctest::Approx(0.515).epsilon(1e-8));
}

TEST_CASE("raw dump round trip") {
  const fs::path dir = scratch("raw");
  const std::vector<double> a{1.0, -2.0, 3.5}, b{0.25, 0.5, 0.75};
  const std::vector<std::span<const double>> ch{a, b};
  io::write_raw(dir / "r.raw", 1234.5, ch);
  const io::RawData d = io::read_raw(dir / "r.raw");
  CHECK(d.sample_rate == 1234.5);
  REQUIRE(d.channels.size() == 2);
  CHECK(d.channels[0] == a);
  CHECK(d.channels[1] == b);
  io::write_text(dir / "bad.raw", "nope");
  CHECK_THROWS_AS(io::read_raw(dir / "bad.raw"), NumericalError);
}

TEST_CASE("PSD CSV round trip keeps values bit-exact") {
  const fs::path dir = scratch("psd");
  Psd p;
  p.freqs = {0.0, 0.1, 0.2};
  p.density = {1.0 / 3.0, 2e-17, 5.5};
  p.rbw = 0.1;
  p.n_averages = 12;
  p.window = WindowKind::blackman;
  io::write_psd_csv(dir / "p.csv", p, "abcd");
  const Psd q = io::read_psd_csv(dir / "p.csv");
  CHECK(q.freqs == p.freqs);
  CHECK(q.density == p.density);
  CHECK(q.rbw == p.rbw);
  CHECK(q.n_averages == 12);
  CHECK(q.window == WindowKind::blackman);
  CHECK(io::read_text(dir / "p.csv").find("config_hash=abcd") != std::string::npos);
}

TEST_CASE("CSV slices and tables") {
  const fs::path dir = scratch("csv");
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<std::span<const double>> ch{a};
  const std::vector<std::string> names{"x"};
  io::write_csv_slice(dir / "s.csv", 2.0, ch, names, 1, 2);
  CHECK(io::read_text(dir / "s.csv") == "time_s,x\n0.5,2\n1,3\n");
  CHECK_THROWS(io::write_csv_slice(dir / "t.csv", 2.0, ch, names, 3, 5));
  const std::vector<std::string> header{"a", "b"};
  const std::vector<std::vector<double>> cols{{1, 2}, {0.5, 0.25}};
  io::write_table_csv(dir / "t.csv", header, cols, "note");
  CHECK(io::read_text(dir / "t.csv") == "# note\na,b\n1,0.5\n2,0.25\n");
}

}
