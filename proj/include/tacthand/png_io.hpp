#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tacthand/image.hpp"

namespace tacthand {

/// 8-bit grayscale PNG; intensities are rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const TactileImage& image);
TactileImage read_png(const std::filesystem::path& path, Stage stage);

/// Packed 8-bit RGB, row-major, 3 bytes per pixel.
void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

/// Round-trips an image through the 8-bit representation used on disk.
TactileImage quantize_8bit(const TactileImage& image);

}  // namespace tacthand
