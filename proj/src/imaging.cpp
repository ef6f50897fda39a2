#include "tacthand/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tacthand/errors.hpp"

namespace tacthand {

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> kernel(static_cast<std::size_t>(size));
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += kernel[i];
  }
  for (double& k : kernel) k /= sum;
  return kernel;
}

// Separable correlation with replicated borders; output has input size.
std::vector<double> blur_replicate(const TactileImage& image, const std::vector<double>& kernel) {
  const int w = image.width();
  const int h = image.height();
  const int half = static_cast<int>(kernel.size()) / 2;
  std::vector<double> tmp(image.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int xx = std::clamp(x + k, 0, w - 1);
        acc += kernel[k + half] * image.at(xx, y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(image.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        acc += kernel[k + half] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// Weighted window sums over every valid window position (separable
// weights). Output is (w - n + 1) x (h - n + 1), row-major.
std::vector<double> window_sums(std::span<const double> values, int w, int h,
                                const std::vector<double>& weights) {
  const int n = static_cast<int>(weights.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* src = values.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += weights[k] * src[x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += weights[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

// 1-D area weights mapping `in` samples onto `out` samples.
struct AreaTap {
  int first = 0;
  std::vector<double> weights;
};

std::vector<AreaTap> area_taps(int in, int out) {
  std::vector<AreaTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    taps[o].first = first;
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      taps[o].weights.push_back(overlap / scale);
    }
  }
  return taps;
}

}  // namespace

TactileImage adaptive_threshold(const TactileImage& image, int window, double offset) {
  if (image.stage() != Stage::raw)
    throw StageError("adaptive_threshold expects a raw-stage image");
  if (window < 3 || window % 2 == 0)
    throw ParameterError("threshold window must be odd and >= 3, got " + std::to_string(window));

  const std::vector<double> local_mean =
      blur_replicate(image, gaussian_kernel(window, window / 6.0));
  // A constant region's normalised mean can land one ulp above the value
  // itself; the margin keeps "exceeds" meaning strictly exceeds.
  constexpr double kMargin = 1e-12;
  TactileImage out(image.width(), image.height(), Stage::raw);
  const auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] > local_mean[i] - offset + kMargin ? 1.0 : 0.0;
  return out;
}

TactileImage subsample_crop(const TactileImage& image, int target_width, int target_height) {
  if (target_width <= 0 || target_height <= 0)
    throw ParameterError("subsample target must be positive");
  const int factor = std::min(image.width() / target_width, image.height() / target_height);
  if (factor < 1)
    throw DimensionError("image " + std::to_string(image.width()) + "x" +
                         std::to_string(image.height()) + " is smaller than " +
                         std::to_string(target_width) + "x" + std::to_string(target_height));

  const int x0 = (image.width() - factor * target_width) / 2;
  const int y0 = (image.height() - factor * target_height) / 2;
  const double inv = 1.0 / (factor * factor);
  TactileImage out(target_width, target_height, Stage::processed);
  for (int y = 0; y < target_height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          acc += image.at(x0 + x * factor + dx, y0 + y * factor + dy);
      out.at(x, y) = acc * inv;
    }
  }
  return out;
}

TactileImage resize_area(const TactileImage& image, int width, int height) {
  if (width <= 0 || height <= 0) throw ParameterError("resize target must be positive");
  if (width == image.width() && height == image.height()) return image;

  const auto xtaps = area_taps(image.width(), width);
  const auto ytaps = area_taps(image.height(), height);
  std::vector<double> rows(static_cast<std::size_t>(width) * image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const AreaTap& tap = xtaps[x];
      double acc = 0.0;
      for (std::size_t k = 0; k < tap.weights.size(); ++k)
        acc += tap.weights[k] * image.at(tap.first + static_cast<int>(k), y);
      rows[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  TactileImage out(width, height, image.stage());
  for (int y = 0; y < height; ++y) {
    const AreaTap& tap = ytaps[y];
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tap.weights.size(); ++k)
        acc += tap.weights[k] * rows[static_cast<std::size_t>(tap.first + k) * width + x];
      out.at(x, y) = acc;
    }
  }
  return out;
}

void SsimOptions::validate() const {
  if (window < 2) throw ParameterError("SSIM window must be >= 2");
  if (kind == SsimWindow::gaussian && !(gaussian_sigma > 0.0))
    throw ParameterError("SSIM gaussian_sigma must be > 0");
  if (!(data_range > 0.0)) throw ParameterError("SSIM data_range must be > 0");
}

double ssim(const TactileImage& a, const TactileImage& b, const SsimOptions& options) {
  options.validate();
  if (!a.same_shape(b))
    throw DimensionError("SSIM inputs differ in size: " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                         "x" + std::to_string(b.height()));
  if (a.stage() != b.stage()) throw StageError("SSIM inputs are at different pipeline stages");
  const int w = a.width();
  const int h = a.height();
  const int n = options.window;
  if (w < n || h < n) throw DimensionError("image is smaller than the SSIM window");

  std::vector<double> weights;
  if (options.kind == SsimWindow::uniform) {
    weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  } else {
    weights = gaussian_kernel(n, options.gaussian_sigma);
  }

  const auto pa = a.pixels();
  const auto pb = b.pixels();
  std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }
  const auto mean_a = window_sums(pa, w, h, weights);
  const auto mean_b = window_sums(pb, w, h, weights);
  const auto mean_aa = window_sums(aa, w, h, weights);
  const auto mean_bb = window_sums(bb, w, h, weights);
  const auto mean_ab = window_sums(ab, w, h, weights);

  const double np = static_cast<double>(n) * n;
  const double cov_norm = options.sample_covariance ? np / (np - 1.0) : 1.0;
  const double c1 = (options.k1 * options.data_range) * (options.k1 * options.data_range);
  const double c2 = (options.k2 * options.data_range) * (options.k2 * options.data_range);

  double total = 0.0;
  for (std::size_t i = 0; i < mean_a.size(); ++i) {
    const double ma = mean_a[i];
    const double mb = mean_b[i];
    const double va = cov_norm * (mean_aa[i] - ma * ma);
    const double vb = cov_norm * (mean_bb[i] - mb * mb);
    const double vab = cov_norm * (mean_ab[i] - ma * mb);
    const double num = (2.0 * ma * mb + c1) * (2.0 * vab + c2);
    const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mean_a.size());
}

DeformationMeasure deformation(const TactileImage& image, const TactileImage& reference,
                               const SsimOptions& options) {
  if (image.stage() != Stage::processed || reference.stage() != Stage::processed)
    throw StageError("deformation is measured on processed-stage images");
  if (!image.same_shape(reference))
    throw DimensionError("deformation inputs differ in size");
  const double value = 1.0 - ssim(image, reference, options);
  return {std::clamp(value, 0.0, 2.0)};
}

double rms_intensity_change(const TactileImage& image, const TactileImage& reference) {
  if (!image.same_shape(reference)) throw DimensionError("RMS inputs differ in size");
  const auto pa = image.pixels();
  const auto pb = reference.pixels();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pa.size()));
}

void ProcessingConfig::validate() const {
  if (threshold_window < 3 || threshold_window % 2 == 0)
    throw ParameterError("threshold_window must be odd and >= 3");
  ssim.validate();
}

ProcessedFrame process_frame(const TactileImage& raw, const ProcessingConfig& config) {
  config.validate();
  if (raw.stage() != Stage::raw) throw StageError("process_frame expects a raw-stage image");
  return {subsample_crop(raw),
          subsample_crop(adaptive_threshold(raw, config.threshold_window,
                                            config.threshold_offset))};
}

}  // namespace tacthand
