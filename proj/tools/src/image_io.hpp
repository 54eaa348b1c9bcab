#pragma once

#include <pathbench/tiler.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pathbench::io {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

/// Reads a PNG or TIFF as 8-bit grayscale. Missing or unreadable files raise
/// MissingFile / FormatError naming the path.
GrayImage read_gray(const std::filesystem::path& path);

/// Writes 8-bit grayscale PNG with fixed encoder settings.
void write_gray_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels);

ScanImage read_scan(const std::filesystem::path& path, std::string scan_id);

} // namespace pathbench::io
