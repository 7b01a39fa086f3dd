#pragma once

#include "omsq/psd.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace omsq::io {

// Raw dump layout, little-endian:
//   char[8] magic "OMSQRAW\0", u32 version, u32 channels, f64 sample_rate,
//   u64 length, then length x channels f64 samples, channel-interleaved.
inline constexpr std::uint32_t kRawVersion = 1;

struct RawData {
  double sample_rate = 0.0;
  std::vector<std::vector<double>> channels;
};

void write_raw(const std::filesystem::path& path, double sample_rate,
               std::span<const std::span<const double>> channels);
RawData read_raw(const std::filesystem::path& path);

// CSV of samples [first, first + count) with a time column.
void write_csv_slice(const std::filesystem::path& path, double sample_rate,
                     std::span<const std::span<const double>> channels,
                     std::span<const std::string> names, std::size_t first, std::size_t count);

// "# rbw_hz=..., window=..., n_averages=..., config_hash=..." then freq_hz,psd.
void write_psd_csv(const std::filesystem::path& path, const Psd& psd, const std::string& config_hash);
Psd read_psd_csv(const std::filesystem::path& path);

// Two or more named columns of equal length.
void write_table_csv(const std::filesystem::path& path, std::span<const std::string> header,
                     std::span<const std::vector<double>> columns, const std::string& comment = {});

// Shortest round-trip text for a double.
std::string format_number(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace omsq::io
