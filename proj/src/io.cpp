#include "biphoton/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace biphoton {
namespace {

std::ofstream open_output(const std::string& path, std::ios::openmode mode) {
  std::ofstream stream(path, mode);
  if (!stream) throw IoError("cannot open '" + path + "' for writing");
  return stream;
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
  std::ifstream stream(path, mode);
  if (!stream) throw IoError("cannot open '" + path + "' for reading");
  return stream;
}

void finish(std::ofstream& stream, const std::string& path) {
  stream.flush();
  if (!stream) throw IoError("write to '" + path + "' failed");
}

// Merge the two channels into (timestamp, channel) rows ordered the way the
// binary format requires.
std::vector<std::pair<std::int64_t, std::uint8_t>> merged_records(
    const DetectionStreams& streams) {
  std::vector<std::pair<std::int64_t, std::uint8_t>> records;
  records.reserve(streams.channel_a.size() + streams.channel_b.size());
  for (const DetectionRecord& r : streams.channel_a)
    records.emplace_back(r.timestamp_ps, 0);
  for (const DetectionRecord& r : streams.channel_b)
    records.emplace_back(r.timestamp_ps, 1);
  std::sort(records.begin(), records.end());
  return records;
}

void append_le64(std::string& out, std::int64_t value) {
  auto bits = static_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

std::int64_t take_le64(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return static_cast<std::int64_t>(bits);
}

}  // namespace

std::string format_number(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void write_curve_csv(const std::string& path, const std::string& x_label,
                     const std::string& y_label, std::span<const double> x,
                     std::span<const double> y,
                     const std::vector<std::string>& comments) {
  if (x.size() != y.size())
    throw IoError("curve columns differ in length");
  std::ofstream stream = open_output(path, std::ios::out);
  for (const std::string& comment : comments) stream << "# " << comment << '\n';
  stream << x_label << ',' << y_label << '\n';
  for (std::size_t i = 0; i < x.size(); ++i)
    stream << format_number(x[i]) << ',' << format_number(y[i]) << '\n';
  finish(stream, path);
}

void write_timestamps_binary(const std::string& path,
                             const DetectionStreams& streams) {
  std::string bytes;
  const auto records = merged_records(streams);
  bytes.reserve(records.size() * 9);
  for (const auto& [timestamp, channel] : records) {
    append_le64(bytes, timestamp);
    bytes.push_back(static_cast<char>(channel));
  }
  std::ofstream stream = open_output(path, std::ios::out | std::ios::binary);
  stream.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(stream, path);
}

DetectionStreams read_timestamps_binary(const std::string& path,
                                        double duration) {
  std::ifstream stream = open_input(path, std::ios::in | std::ios::binary);
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  const std::string bytes = buffer.str();
  if (bytes.size() % 9 != 0)
    throw IoError("'" + path + "' is not a whole number of 9-byte records");

  DetectionStreams streams;
  streams.duration = duration;
  for (std::size_t offset = 0; offset < bytes.size(); offset += 9) {
    const auto* record =
        reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    DetectionRecord out;
    out.timestamp_ps = take_le64(record);
    const unsigned char channel = record[8];
    if (channel > 1)
      throw IoError("'" + path + "' contains an unknown channel byte");
    out.channel = channel == 0 ? Channel::A : Channel::B;
    out.origin = RecordOrigin::Pair;
    (channel == 0 ? streams.channel_a : streams.channel_b).push_back(out);
  }
  return streams;
}

void write_timestamps_csv(const std::string& path,
                          const DetectionStreams& streams) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "timestamp_ps,channel\n";
  for (const auto& [timestamp, channel] : merged_records(streams))
    stream << timestamp << ',' << (channel == 0 ? 'A' : 'B') << '\n';
  finish(stream, path);
}

void write_histogram_csv(const std::string& path,
                         const CoincidenceHistogram& histogram) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "# delay = channel A arrival minus channel B arrival\n";
  stream << "# bin_width_s = " << format_number(histogram.bin_width) << '\n';
  stream << "# acquisition_s = " << format_number(histogram.acquisition_time)
         << '\n';
  stream << "# rate_a_hz = " << format_number(histogram.rate_a) << '\n';
  stream << "# rate_b_hz = " << format_number(histogram.rate_b) << '\n';
  stream << "delay_s,counts\n";
  for (std::size_t i = 0; i < histogram.bins(); ++i)
    stream << format_number(histogram.bin_center(i)) << ','
           << histogram.counts[i] << '\n';
  finish(stream, path);
}

void write_histogram_plot_csv(const std::string& path,
                              const CoincidenceHistogram& histogram) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "# coincidence delay histogram; x in nanoseconds\n";
  stream << "delay_ns,counts\n";
  for (std::size_t i = 0; i < histogram.bins(); ++i)
    stream << format_number(histogram.bin_center(i) * 1e9) << ','
           << histogram.counts[i] << '\n';
  finish(stream, path);
}

void write_key_value_report(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& items) {
  std::ofstream stream = open_output(path, std::ios::out);
  for (const auto& [key, value] : items) stream << key << " = " << value << '\n';
  finish(stream, path);
}

void write_tomography_counts_csv(const std::string& path,
                                 const TomographyRecord& record) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "# counts_per_setting = " << format_number(record.counts_per_setting)
         << '\n';
  stream << "setting_label,raw_count,accidental_count\n";
  for (const auto& entry : record.entries)
    stream << entry.setting.label << ',' << format_number(entry.raw_count)
           << ',' << format_number(entry.accidental_estimate) << '\n';
  finish(stream, path);
}

TomographyRecord read_tomography_counts_csv(const std::string& path) {
  std::ifstream stream = open_input(path, std::ios::in);
  const std::vector<MeasurementSetting> settings = canonical_16_settings();

  TomographyRecord record;
  record.counts_per_setting = 0.0;
  std::string line;
  int line_number = 0;
  bool header_seen = false;
  while (std::getline(stream, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      // Optional "# counts_per_setting = X" metadata comment.
      const std::string tag = "# counts_per_setting =";
      if (line.rfind(tag, 0) == 0)
        record.counts_per_setting = std::stod(line.substr(tag.size()));
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    std::string label, raw, accidental;
    if (!std::getline(fields, label, ',') || !std::getline(fields, raw, ',') ||
        !std::getline(fields, accidental))
      throw IoError("'" + path + "' line " + std::to_string(line_number) +
                    ": expected setting_label,raw_count,accidental_count");
    const auto setting =
        std::find_if(settings.begin(), settings.end(),
                     [&](const MeasurementSetting& s) { return s.label == label; });
    if (setting == settings.end())
      throw IoError("'" + path + "' line " + std::to_string(line_number) +
                    ": unknown setting label '" + label + "'");
    TomographyRecord::Entry entry;
    entry.setting = *setting;
    try {
      entry.raw_count = std::stod(raw);
      entry.accidental_estimate = std::stod(accidental);
    } catch (const std::exception&) {
      throw IoError("'" + path + "' line " + std::to_string(line_number) +
                    ": malformed number");
    }
    record.entries.push_back(std::move(entry));
  }
  if (record.counts_per_setting <= 0.0) {
    for (const auto& entry : record.entries)
      record.counts_per_setting =
          std::max(record.counts_per_setting, entry.raw_count);
    record.counts_per_setting = std::max(record.counts_per_setting, 1.0);
  }
  record.validate();
  return record;
}

namespace {

void write_matrix_block(std::ofstream& stream, const Eigen::Matrix4d& block) {
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col)
      stream << (col ? "," : "") << format_number(block(row, col));
    stream << '\n';
  }
}

}  // namespace

void write_density_matrix_blocks_csv(const std::string& path,
                                     const DensityMatrix& state) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "# basis order: HH, HV, VH, VV\n";
  stream << "# real part\n";
  write_matrix_block(stream, state.rho.real());
  stream << "# imaginary part\n";
  write_matrix_block(stream, state.rho.imag());
  finish(stream, path);
}

void write_density_matrix_long_csv(const std::string& path,
                                   const DensityMatrix& state) {
  std::ofstream stream = open_output(path, std::ios::out);
  stream << "# basis order: HH, HV, VH, VV\n";
  stream << "row,col,re,im\n";
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col)
      stream << row << ',' << col << ','
             << format_number(state.rho(row, col).real()) << ','
             << format_number(state.rho(row, col).imag()) << '\n';
  finish(stream, path);
}

std::uint64_t fnv1a_hash(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed) {
  std::ostringstream hash_hex;
  hash_hex << std::hex << fnv1a_hash(config_text);
  nlohmann::json manifest = {
      {"config_fnv1a64", hash_hex.str()},
      {"seed", seed},
      {"tool_version", "1.0.0"},
      {"data_format_version", 1},
  };
  std::ofstream stream = open_output(path, std::ios::out);
  stream << manifest.dump(2) << '\n';
  finish(stream, path);
}

}  // namespace biphoton
