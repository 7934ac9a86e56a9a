#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace handfuse {

/// Parsed contents of one repetition's frames.csv: an N x 362 value
/// matrix plus the per-row timestamp strings. Raw values may be NaN.
struct FrameTable {
  Eigen::MatrixXd values;               // N x 362
  std::vector<std::string> timestamps;  // N entries
};

/// Shortest round-trip decimal rendering of a double ("NaN" for NaN).
std::string format_value(double v);

/// Parses a decimal field; the literal token "NaN" (any case) yields a
/// quiet NaN. Throws MalformedCsv on anything else unparseable.
double parse_value(const std::string& field);

/// Writes a frames.csv: header row naming every column, then one row per
/// frame as <index>,<362 values>,<timestamp>. Values render with
/// format_value so a write -> read cycle is lossless.
void write_frames_csv(const std::filesystem::path& path, const FrameTable& table);

/// Reads a frames.csv written by write_frames_csv (or a raw capture using
/// the same schema). Validates the header and column counts; throws
/// MalformedCsv naming the path on any violation.
FrameTable read_frames_csv(const std::filesystem::path& path);

}  // namespace handfuse
