#include "tacthand/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tacthand/errors.hpp"

namespace tacthand {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_image(const std::filesystem::path& path, int width, int height,
                 png_uint_32 format, const void* data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
}

}  // namespace

void write_png(const std::filesystem::path& path, const TactileImage& image) {
  std::vector<std::uint8_t> bytes(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), bytes.begin(), to_byte);
  write_image(path, image.width(), image.height(), PNG_FORMAT_GRAY, bytes.data());
}

void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw DimensionError("RGB buffer does not match plot dimensions");
  write_image(path, width, height, PNG_FORMAT_RGB, rgb.data());
}

TactileImage read_png(const std::filesystem::path& path, Stage stage) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  std::vector<double> pixels(bytes.size());
  std::transform(bytes.begin(), bytes.end(), pixels.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return TactileImage(static_cast<int>(image.width), static_cast<int>(image.height), stage,
                      std::move(pixels));
}

TactileImage quantize_8bit(const TactileImage& image) {
  TactileImage out = image;
  for (double& v : out.pixels()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace tacthand
