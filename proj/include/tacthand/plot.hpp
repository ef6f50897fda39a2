#pragma once

// Minimal raster line plots written as PNG: stacked panels sharing an x
// axis, each with one or more series. Gaps (NaN) break a line.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tacthand::plot {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kBlue{31, 119, 180};
inline constexpr Rgb kOrange{255, 127, 14};
inline constexpr Rgb kGreen{44, 160, 44};
inline constexpr Rgb kRed{214, 39, 40};
inline constexpr Rgb kPurple{148, 103, 189};
inline constexpr Rgb kGray{127, 127, 127};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  Rgb color = kBlue;
  bool markers = false;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  /// Horizontal reference lines (e.g. set points).
  std::vector<double> references;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::vector<Panel> panels;
  int width = 900;
  int panel_height = 220;
};

void write_figure(const std::filesystem::path& path, const Figure& figure);

}  // namespace tacthand::plot
