#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace tacthand {

enum class Stage { raw, processed };

std::string_view to_string(Stage stage);

inline constexpr int kProcessedWidth = 240;
inline constexpr int kProcessedHeight = 135;

/// Row-major grayscale image with intensities in [0, 1].
class TactileImage {
 public:
  TactileImage() = default;
  TactileImage(int width, int height, Stage stage, double fill = 0.0);
  TactileImage(int width, int height, Stage stage, std::vector<double> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  Stage stage() const { return stage_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double at(int x, int y) const { return pixels_[index(x, y)]; }
  double& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  void set_stage(Stage stage) { stage_ = stage; }

  bool same_shape(const TactileImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const TactileImage&, const TactileImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  Stage stage_ = Stage::raw;
  std::vector<double> pixels_;
};

}  // namespace tacthand
