#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biphoton/correlator.hpp"
#include "biphoton/density_matrix.hpp"
#include "biphoton/simulation.hpp"
#include "biphoton/tomography.hpp"

namespace biphoton {

/// Shortest decimal form that parses back to the same double.
std::string format_number(double value);

/// @brief Thrown when a data file cannot be opened, written, or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// @brief Two-column CSV with '#'-prefixed comment lines, a header row
/// naming the columns, and '.'-decimal UTF-8 numbers. x and y must have
/// equal lengths; empty data gives a header-only file.
void write_curve_csv(const std::string& path, const std::string& x_label,
                     const std::string& y_label, std::span<const double> x,
                     std::span<const double> y,
                     const std::vector<std::string>& comments = {});

/// @brief Merged timestamp dump: both channels sorted by (timestamp,
/// channel), each record a little-endian signed 64-bit picosecond count
/// followed by one channel byte (0 = A, 1 = B). Click origin is not stored.
void write_timestamps_binary(const std::string& path,
                             const DetectionStreams& streams);

/// @brief Inverse of write_timestamps_binary. The acquisition duration is
/// not part of the format and must be supplied; origins come back as Pair.
DetectionStreams read_timestamps_binary(const std::string& path,
                                        double duration);

/// Same records as CSV (timestamp_ps, channel) for eyeballing.
void write_timestamps_csv(const std::string& path,
                          const DetectionStreams& streams);

/// Delay histogram as CSV (delay_s, counts) with metadata comments.
void write_histogram_csv(const std::string& path,
                         const CoincidenceHistogram& histogram);

/// Plot-ready histogram CSV (delay_ns, counts).
void write_histogram_plot_csv(const std::string& path,
                              const CoincidenceHistogram& histogram);

/// Structured-text report: one "key = value" line per item, in order.
void write_key_value_report(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& items);

/// Measured tomography counts as CSV
/// (setting_label, raw_count, accidental_count).
void write_tomography_counts_csv(const std::string& path,
                                 const TomographyRecord& record);

/// @brief Inverse of write_tomography_counts_csv: labels are matched against
/// the canonical 16-setting sequence to recover the projectors. Unknown
/// labels or malformed rows raise IoError naming the line.
TomographyRecord read_tomography_counts_csv(const std::string& path);

/// Density matrix as two labeled 4x4 CSV blocks (real part, imaginary part)
/// in the HH, HV, VH, VV basis.
void write_density_matrix_blocks_csv(const std::string& path,
                                     const DensityMatrix& state);

/// Density matrix in long form: one CSV row (row, col, re, im) per entry.
void write_density_matrix_long_csv(const std::string& path,
                                   const DensityMatrix& state);

/// 64-bit FNV-1a hash of a byte string (used for the manifest config hash).
std::uint64_t fnv1a_hash(std::string_view bytes);

/// @brief Machine-readable run manifest (JSON): configuration hash, root
/// seed, tool and data-format versions. Contains no timestamps, so the
/// manifest of a rerun is byte-identical.
void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed);

}  // namespace biphoton
