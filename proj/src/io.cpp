#include "omsq/io.hpp"

#include "omsq/errors.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace omsq::io {

static_assert(std::endian::native == std::endian::little, "raw dumps assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'M', 'S', 'Q', 'R', 'A', 'W', '\0'};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw NumericalError("truncated raw file");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

} // namespace

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_raw(const std::filesystem::path& path, double sample_rate,
               std::span<const std::span<const double>> channels) {
  if (channels.empty()) throw std::invalid_argument("write_raw: no channels");
  const std::size_t n = channels[0].size();
  for (const auto& c : channels) {
    if (c.size() != n) throw std::invalid_argument("write_raw: channel lengths differ");
  }
  std::ofstream out = open_out(path, std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kRawVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(channels.size()));
  put<double>(out, sample_rate);
  put<std::uint64_t>(out, n);
  std::vector<double> row(channels.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels.size(); ++c) row[c] = channels[c][i];
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw NumericalError("failed writing " + path.string());
}

RawData read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw NumericalError("not a raw dump: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kRawVersion) throw NumericalError("unsupported raw dump version " + std::to_string(version));
  const auto channels = get<std::uint32_t>(in);
  RawData data;
  data.sample_rate = get<double>(in);
  const auto n = get<std::uint64_t>(in);
  data.channels.assign(channels, std::vector<double>(n));
  std::vector<double> row(channels);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw NumericalError("truncated raw file");
    for (std::uint32_t c = 0; c < channels; ++c) data.channels[c][i] = row[c];
  }
  return data;
}

void write_csv_slice(const std::filesystem::path& path, double sample_rate,
                     std::span<const std::span<const double>> channels,
                     std::span<const std::string> names, std::size_t first, std::size_t count) {
  if (names.size() != channels.size()) throw std::invalid_argument("write_csv_slice: one name per channel");
  std::ofstream out = open_out(path);
  out << "time_s";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = first; i < first + count; ++i) {
    out << format_number(static_cast<double>(i) / sample_rate);
    for (const auto& c : channels) {
      if (i >= c.size()) throw std::out_of_range("write_csv_slice: slice past the end");
      out << ',' << format_number(c[i]);
    }
    out << '\n';
  }
}

void write_psd_csv(const std::filesystem::path& path, const Psd& psd, const std::string& config_hash) {
  std::ofstream out = open_out(path);
  out << "# rbw_hz=" << format_number(psd.rbw) << ", window=" << to_string(psd.window)
      << ", n_averages=" << psd.n_averages << ", config_hash=" << config_hash << '\n';
  out << "freq_hz,psd\n";
  for (std::size_t i = 0; i < psd.size(); ++i) {
    out << format_number(psd.freqs[i]) << ',' << format_number(psd.density[i]) << '\n';
  }
}

Psd read_psd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  Psd psd;
  std::string line;
  std::getline(in, line);
  if (line.rfind("# ", 0) != 0) throw NumericalError("PSD CSV lacks its header comment");
  std::istringstream fields(line.substr(2));
  std::string field;
  while (std::getline(fields, field, ',')) {
    const auto start = field.find_first_not_of(' ');
    const auto eq = field.find('=');
    if (eq == std::string::npos || start == std::string::npos) continue;
    const std::string key = field.substr(start, eq - start);
    const std::string value = field.substr(eq + 1);
    if (key == "rbw_hz") psd.rbw = std::stod(value);
    else if (key == "window") psd.window = parse_window(value);
    else if (key == "n_averages") psd.n_averages = std::stoul(value);
  }
  std::getline(in, line);
  if (line != "freq_hz,psd") throw NumericalError("PSD CSV has an unexpected column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw NumericalError("malformed PSD row: " + line);
    psd.freqs.push_back(std::stod(line.substr(0, comma)));
    psd.density.push_back(std::stod(line.substr(comma + 1)));
  }
  return psd;
}

void write_table_csv(const std::filesystem::path& path, std::span<const std::string> header,
                     std::span<const std::vector<double>> columns, const std::string& comment) {
  if (header.size() != columns.size()) throw std::invalid_argument("write_table_csv: header/column mismatch");
  std::ofstream out = open_out(path);
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << format_number(columns[c][r]);
    out << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace omsq::io
