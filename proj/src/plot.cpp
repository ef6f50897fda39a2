#include "tacthand/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tacthand/png_io.hpp"

namespace tacthand::plot {

namespace {

// 5x7 glyphs, one row per entry, bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'0', {14, 17, 19, 21, 25, 17, 14}}, {'1', {4, 12, 4, 4, 4, 4, 14}},
    {'2', {14, 17, 1, 2, 4, 8, 31}},     {'3', {31, 2, 4, 2, 1, 17, 14}},
    {'4', {2, 6, 10, 18, 31, 2, 2}},     {'5', {31, 16, 30, 1, 1, 17, 14}},
    {'6', {6, 8, 16, 30, 17, 17, 14}},   {'7', {31, 1, 2, 4, 8, 8, 8}},
    {'8', {14, 17, 17, 14, 17, 17, 14}}, {'9', {14, 17, 17, 15, 1, 2, 12}},
    {'A', {14, 17, 17, 31, 17, 17, 17}}, {'B', {30, 17, 17, 30, 17, 17, 30}},
    {'C', {14, 17, 16, 16, 16, 17, 14}}, {'D', {28, 18, 17, 17, 17, 18, 28}},
    {'E', {31, 16, 16, 30, 16, 16, 31}}, {'F', {31, 16, 16, 30, 16, 16, 16}},
    {'G', {14, 17, 16, 23, 17, 17, 15}}, {'H', {17, 17, 17, 31, 17, 17, 17}},
    {'I', {14, 4, 4, 4, 4, 4, 14}},      {'J', {7, 2, 2, 2, 2, 18, 12}},
    {'K', {17, 18, 20, 24, 20, 18, 17}}, {'L', {16, 16, 16, 16, 16, 16, 31}},
    {'M', {17, 27, 21, 21, 17, 17, 17}}, {'N', {17, 17, 25, 21, 19, 17, 17}},
    {'O', {14, 17, 17, 17, 17, 17, 14}}, {'P', {30, 17, 17, 30, 16, 16, 16}},
    {'Q', {14, 17, 17, 17, 21, 18, 13}}, {'R', {30, 17, 17, 30, 20, 18, 17}},
    {'S', {15, 16, 16, 14, 1, 1, 30}},   {'T', {31, 4, 4, 4, 4, 4, 4}},
    {'U', {17, 17, 17, 17, 17, 17, 14}}, {'V', {17, 17, 17, 17, 17, 10, 4}},
    {'W', {17, 17, 17, 21, 21, 21, 10}}, {'X', {17, 17, 10, 4, 10, 17, 17}},
    {'Y', {17, 17, 17, 10, 4, 4, 4}},    {'Z', {31, 1, 2, 4, 8, 16, 31}},
    {'.', {0, 0, 0, 0, 0, 12, 12}},      {'-', {0, 0, 0, 31, 0, 0, 0}},
    {'_', {0, 0, 0, 0, 0, 0, 31}},       {':', {0, 12, 12, 0, 12, 12, 0}},
    {'(', {2, 4, 8, 8, 8, 4, 2}},        {')', {8, 4, 2, 2, 2, 4, 8}},
    {'/', {0, 1, 2, 4, 8, 16, 0}},       {'=', {0, 0, 31, 0, 31, 0, 0}},
    {'+', {0, 4, 4, 31, 4, 4, 0}},       {',', {0, 0, 0, 0, 12, 4, 8}},
    {'%', {24, 25, 2, 4, 8, 19, 3}},     {'[', {14, 8, 8, 8, 8, 8, 14}},
    {']', {14, 2, 2, 2, 2, 2, 14}},      {'<', {2, 4, 8, 16, 8, 4, 2}},
    {'>', {8, 4, 2, 1, 2, 4, 8}},
};

const Glyph* find_glyph(char c) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const Glyph& g : kFont)
    if (g.c == u) return &g;
  return nullptr;
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), rgb_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::uint8_t* p = &rgb_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void line(double x0, double y0, double x1, double y1, const Rgb& c) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      set(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
          static_cast<int>(std::lround(y0 + t * (y1 - y0))), c);
    }
  }

  void rect(int x0, int y0, int x1, int y1, const Rgb& c) {
    line(x0, y0, x1, y0, c);
    line(x1, y0, x1, y1, c);
    line(x1, y1, x0, y1, c);
    line(x0, y1, x0, y0, c);
  }

  void text(int x, int y, const std::string& s, const Rgb& c) {
    for (char ch : s) {
      if (const Glyph* g = find_glyph(ch)) {
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (g->rows[r] & (16 >> col)) set(x + col, y + r, c);
      }
      x += 6;
    }
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 6; }

  const std::vector<std::uint8_t>& rgb() const { return rgb_; }

 private:
  int w_;
  int h_;
  std::vector<std::uint8_t> rgb_;
};

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

// Round step (1, 2, 5 x 10^k) giving about `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

void write_figure(const std::filesystem::path& path, const Figure& figure) {
  constexpr int kLeft = 70;
  constexpr int kRight = 20;
  constexpr int kTop = 28;
  constexpr int kGap = 30;
  constexpr int kBottom = 40;
  const int n = std::max<int>(1, static_cast<int>(figure.panels.size()));
  const int height = kTop + n * figure.panel_height + (n - 1) * kGap + kBottom;
  Canvas canvas(figure.width, height);
  const Rgb black{0, 0, 0};
  const Rgb grid{225, 225, 225};

  canvas.text((figure.width - Canvas::text_width(figure.title)) / 2, 8, figure.title, black);

  Range xr;
  for (const Panel& p : figure.panels)
    for (const Series& s : p.series)
      for (double v : s.x) xr.add(v);
  if (!std::isfinite(xr.lo)) xr = {0.0, 1.0};
  if (xr.hi - xr.lo < 1e-12) xr.hi = xr.lo + 1.0;

  const int x0 = kLeft;
  const int x1 = figure.width - kRight;
  auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
  const double xstep = nice_step(xr.hi - xr.lo, 8);

  for (int i = 0; i < static_cast<int>(figure.panels.size()); ++i) {
    const Panel& panel = figure.panels[i];
    const int y0 = kTop + i * (figure.panel_height + kGap);
    const int y1 = y0 + figure.panel_height;
    Range yr;
    for (const Series& s : panel.series)
      for (double v : s.y) yr.add(v);
    for (double r : panel.references) yr.add(r);
    yr.finish();
    auto py = [&](double v) { return y1 - (v - yr.lo) / (yr.hi - yr.lo) * (y1 - y0); };

    const double ystep = nice_step(yr.hi - yr.lo, 4);
    for (double v = std::ceil(yr.lo / ystep) * ystep; v <= yr.hi; v += ystep) {
      const double y = py(v);
      canvas.line(x0, y, x1, y, grid);
      const std::string label = tick_label(v);
      canvas.text(x0 - 6 - Canvas::text_width(label), static_cast<int>(y) - 3, label, black);
    }
    for (double v = std::ceil(xr.lo / xstep) * xstep; v <= xr.hi; v += xstep) {
      const double x = px(v);
      canvas.line(x, y0, x, y1, grid);
      if (i + 1 == static_cast<int>(figure.panels.size())) {
        const std::string label = tick_label(v);
        canvas.text(static_cast<int>(x) - Canvas::text_width(label) / 2, y1 + 6, label, black);
      }
    }
    for (double r : panel.references) {
      const double y = py(r);
      for (int x = x0; x < x1; x += 6) canvas.line(x, y, std::min(x + 3, x1), y, kGray);
    }
    for (const Series& s : panel.series) {
      const std::size_t m = std::min(s.x.size(), s.y.size());
      for (std::size_t k = 0; k < m; ++k) {
        if (!std::isfinite(s.y[k])) continue;
        if (s.markers) {
          const double cx = px(s.x[k]);
          const double cy = py(s.y[k]);
          canvas.line(cx - 1, cy, cx + 1, cy, s.color);
          canvas.line(cx, cy - 1, cx, cy + 1, s.color);
        }
        if (k + 1 < m && std::isfinite(s.y[k + 1]))
          canvas.line(px(s.x[k]), py(s.y[k]), px(s.x[k + 1]), py(s.y[k + 1]), s.color);
      }
    }
    canvas.rect(x0, y0, x1, y1, black);
    canvas.text(x0 + 6, y0 + 5, panel.title, black);
    int lx = x1 - 6;
    for (auto it = panel.series.rbegin(); it != panel.series.rend(); ++it) {
      if (it->label.empty()) continue;
      lx -= Canvas::text_width(it->label);
      canvas.text(lx, y0 + 5, it->label, it->color);
      lx -= 12;
    }
  }
  canvas.text((figure.width - Canvas::text_width(figure.x_label)) / 2, height - 14, figure.x_label,
              black);
  write_png_rgb(path, figure.width, height, canvas.rgb());
}

}  // namespace tacthand::plot
