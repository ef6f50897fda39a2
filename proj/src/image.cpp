#include "tacthand/image.hpp"

#include "tacthand/errors.hpp"

namespace tacthand {

std::string_view to_string(Stage stage) {
  return stage == Stage::raw ? "raw" : "processed";
}

TactileImage::TactileImage(int width, int height, Stage stage, double fill)
    : width_(width), height_(height), stage_(stage) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

TactileImage::TactileImage(int width, int height, Stage stage, std::vector<double> pixels)
    : width_(width), height_(height), stage_(stage), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DimensionError("pixel buffer does not match image dimensions");
}

}  // namespace tacthand
