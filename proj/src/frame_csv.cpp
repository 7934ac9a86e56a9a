#include "handfuse/frame_csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "handfuse/errors.hpp"
#include "handfuse/frame.hpp"

namespace handfuse {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    fields.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

std::string format_value(double v) {
  if (std::isnan(v)) {
    return "NaN";
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_value(const std::string& field) {
  if (field == "NaN" || field == "nan" || field == "NAN") {
    return std::nan("");
  }
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw MalformedCsv("unparseable numeric field '" + field + "'");
  }
  return v;
}

void write_frames_csv(const std::filesystem::path& path, const FrameTable& table) {
  if (table.values.cols() != kFrameValues) {
    throw WrongLength("frame table has " + std::to_string(table.values.cols()) +
                      " columns, expected " + std::to_string(kFrameValues));
  }
  if (static_cast<Eigen::Index>(table.timestamps.size()) != table.values.rows()) {
    throw LengthMismatch("timestamp count does not match frame count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << "frame_index";
  for (const auto& name : feature_column_names()) {
    out << ',' << name;
  }
  out << ",timestamp\n";
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < kFrameValues; ++c) {
      out << ',' << format_value(table.values(r, c));
    }
    out << ',' << table.timestamps[r] << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

FrameTable read_frames_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MalformedCsv("cannot open: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw MalformedCsv("empty file: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const std::size_t expected_cols = kFrameValues + 2;
  if (header.size() != expected_cols || header.front() != "frame_index" ||
      header.back() != "timestamp") {
    throw MalformedCsv("bad header in " + path.string());
  }
  const auto& names = feature_column_names();
  for (int i = 0; i < kFrameValues; ++i) {
    if (header[i + 1] != names[i]) {
      throw MalformedCsv("unexpected column '" + header[i + 1] + "' in " +
                         path.string());
    }
  }

  std::vector<std::array<double, kFrameValues>> rows;
  std::vector<std::string> timestamps;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected_cols) {
      throw MalformedCsv("row " + std::to_string(rows.size()) + " of " +
                         path.string() + " has " +
                         std::to_string(fields.size()) + " fields");
    }
    std::array<double, kFrameValues> row{};
    try {
      for (int c = 0; c < kFrameValues; ++c) {
        row[c] = parse_value(fields[c + 1]);
      }
    } catch (const MalformedCsv& e) {
      throw MalformedCsv(std::string(e.what()) + " in " + path.string());
    }
    rows.push_back(row);
    timestamps.push_back(fields.back());
  }

  FrameTable table;
  table.values.resize(static_cast<Eigen::Index>(rows.size()), kFrameValues);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < kFrameValues; ++c) {
      table.values(static_cast<Eigen::Index>(r), c) = rows[r][c];
    }
  }
  table.timestamps = std::move(timestamps);
  return table;
}

}  // namespace handfuse
