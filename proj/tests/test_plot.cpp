#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tacthand/plot.hpp"
#include <fstream>

using namespace tacthand;

TEST(Plot, WritesPngOfExpectedSize) {
  plot::Figure fig;
  fig.title = "test";
  fig.x_label = "t (s)";
  fig.width = 400;
  fig.panel_height = 100;
  plot::Series s;
  s.label = "sin";
  for (int i = 0; i < 50; ++i) {
    s.x.push_back(0.1 * i);
    s.y.push_back(i == 20 ? std::nan("") : std::sin(0.1 * i));
  }
  fig.panels.push_back({"a", {s}, {0.5}});
  fig.panels.push_back({"b", {}, {}});
  const auto path = std::filesystem::temp_directory_path() / "tacthand_plot.png";
  plot::write_figure(path, fig);
  // IHDR: big-endian width and height at byte 16, then bit depth 8, colour type 2 (RGB).
  std::ifstream in(path, std::ios::binary);
  unsigned char head[26] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  auto be32 = [&](int o) { return (head[o] << 24) | (head[o + 1] << 16) | (head[o + 2] << 8) | head[o + 3]; };
  EXPECT_EQ(head[1], 'P');
  EXPECT_EQ(be32(16), 400);
  EXPECT_EQ(be32(20), 28 + 2 * 100 + 30 + 40);
  EXPECT_EQ(head[24], 8);
  EXPECT_EQ(head[25], 2);
  std::filesystem::remove(path);
}
