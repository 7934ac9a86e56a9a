#pragma once

#include <filesystem>

#include "handfuse/preprocessing.hpp"

namespace handfuse {

/// Writes an 8-bit RGB PNG. Throws IoError on failure.
void write_png(const std::filesystem::path& path, const RawImage& img);

/// Reads a PNG as 8-bit RGB (gray/palette/alpha inputs are expanded and
/// stripped). Throws MissingImage if the file cannot be opened, IoError
/// on decode failure.
RawImage read_png(const std::filesystem::path& path);

}  // namespace handfuse
