#pragma once

// Tactile image pipeline: adaptive thresholding, subsample/crop to the
// processed resolution, and the SSIM-based contact deformation measure.

#include "tacthand/image.hpp"

namespace tacthand {

/// Binarise a raw image against its Gaussian-weighted local mean
/// (kernel `window` pixels wide, std = window / 6, replicated borders).
/// A pixel becomes 1 when it exceeds (local mean - offset).
TactileImage adaptive_threshold(const TactileImage& image, int window = 39,
                                double offset = 0.0);

/// Centre-crop to the largest integer multiple of the target size, then
/// block-mean subsample to exactly target_width x target_height.
TactileImage subsample_crop(const TactileImage& image, int target_width = kProcessedWidth,
                            int target_height = kProcessedHeight);

/// Area-weighted resampling to an arbitrary size; keeps the stage.
TactileImage resize_area(const TactileImage& image, int width, int height);

enum class SsimWindow { uniform, gaussian };

struct SsimOptions {
  int window = 7;
  SsimWindow kind = SsimWindow::uniform;
  double gaussian_sigma = 1.5;
  /// Scale local (co)variances by N/(N-1) as scikit-image does.
  bool sample_covariance = true;
  double data_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;

  void validate() const;
};

/// Mean structural similarity over every window lying fully inside the
/// images. Result lies in [-1, 1].
double ssim(const TactileImage& a, const TactileImage& b, const SsimOptions& options = {});

/// 1 - SSIM(image, reference); 0 for identical images, within [0, 2].
struct DeformationMeasure {
  double value = 0.0;
};

DeformationMeasure deformation(const TactileImage& image, const TactileImage& reference,
                               const SsimOptions& options = {});

/// Root-mean-square pixel difference. Kept as a diagnostic: it saturates at
/// small deformations and is not used for control.
double rms_intensity_change(const TactileImage& image, const TactileImage& reference);

struct ProcessingConfig {
  int threshold_window = 39;
  double threshold_offset = -0.2;
  SsimOptions ssim;

  void validate() const;
};

/// Both processed representations of one camera frame: `gray` is what the
/// deformation measure compares, `binary` is the thresholded image that
/// feeds pose estimation.
struct ProcessedFrame {
  TactileImage gray;
  TactileImage binary;
};

ProcessedFrame process_frame(const TactileImage& raw, const ProcessingConfig& config);

}  // namespace tacthand
