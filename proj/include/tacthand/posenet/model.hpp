#pragma once

// Training, persistence, inference and evaluation of the pose regressor.

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tacthand/posenet/dataset.hpp"
#include "tacthand/posenet/labels.hpp"
#include "tacthand/posenet/network.hpp"

namespace tacthand::posenet {

struct Model {
  NetworkConfig config;
  PoseRanges ranges;
  /// Processed image size the model accepts (resampled to the network input).
  int image_width = kProcessedWidth;
  int image_height = kProcessedHeight;
  PoseNet net;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean data MSE over the epoch's batches (dropout on)
  double val_loss = 0.0;    // data MSE on the validation set (dropout off)
  double learning_rate = 0.0;
};

struct TrainingResult {
  Model model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // epoch whose weights were kept (0: initial weights)
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Network input columns for the given samples: each processed image is
/// area-resampled to the configured input size.
Eigen::MatrixXf encode_images(const std::vector<LabelledSample>& samples,
                              const std::vector<std::size_t>& indices,
                              const NetworkConfig& config);
Eigen::MatrixXf encode_image(const TactileImage& image, const NetworkConfig& config);

/// Normalised targets, 5 rows by one column per sample.
Eigen::MatrixXf encode_targets(const std::vector<LabelledSample>& samples,
                               const std::vector<std::size_t>& indices,
                               const PoseRanges& ranges);

/// Mini-batch training on samples[train] with per-epoch validation on
/// samples[validation]. Deterministic for a fixed config (including seed).
TrainingResult train(const std::vector<LabelledSample>& samples,
                     const std::vector<std::size_t>& train_indices,
                     const std::vector<std::size_t>& validation_indices,
                     const NetworkConfig& config, const PoseRanges& ranges,
                     const EpochCallback& on_epoch = {});

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

/// Physical-unit prediction (x, z, phi, psi, theta) for one processed image.
PoseVector predict(const Model& model, const TactileImage& image);
std::vector<PoseVector> predict(const Model& model, const std::vector<LabelledSample>& samples,
                                const std::vector<std::size_t>& indices);

struct EvalReport {
  std::array<double, kPoseOutputs> mae{};    // mm for x, z; deg for angles
  std::array<double, kPoseOutputs> range{};  // label range width per component
  std::size_t n_test = 0;
};

EvalReport evaluate_predictions(const std::vector<PoseVector>& predictions,
                                const std::vector<PoseVector>& labels, const PoseRanges& ranges);
EvalReport evaluate(const Model& model, const std::vector<LabelledSample>& samples,
                    const std::vector<std::size_t>& test_indices);

/// Component / MAE / range table, one row per pose component.
std::string format_report(const EvalReport& report);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

}  // namespace tacthand::posenet
