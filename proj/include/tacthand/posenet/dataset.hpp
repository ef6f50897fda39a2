#pragma once

// Labelled contact datasets: random edge poses with unlabelled shear,
// synthesised and processed into the thresholded images the network reads.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tacthand/image.hpp"
#include "tacthand/imaging.hpp"
#include "tacthand/posenet/labels.hpp"
#include "tacthand/tactile_sim.hpp"

namespace tacthand::posenet {

struct LabelledSample {
  TactileImage image;  // processed-stage binary image, 8-bit quantised
  EdgePose label;      // y is always 0 and never used
  std::string file;    // image file name relative to the dataset directory
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  PoseRanges ranges;
  ShearRanges shear;
  SensorConfig sensor;
  ProcessingConfig processing;
  /// Worker threads for synthesis; 0 picks the hardware concurrency.
  /// Output does not depend on this value.
  int threads = 0;

  void validate() const;
};

struct Dataset {
  DatasetConfig config;
  std::uint64_t seed = 0;
  std::vector<LabelledSample> samples;
};

/// The pose and shear drawn for sample `index` of a dataset seeded with
/// `seed`. Exposed so a single sample can be regenerated in isolation.
struct SampleDraw {
  EdgePose pose;
  ShearPerturbation shear;
  std::uint64_t noise_seed = 0;
};
SampleDraw draw_sample(const DatasetConfig& config, std::uint64_t seed, std::size_t index);

/// Synthesises `n` samples in memory.
Dataset collect_dataset(std::size_t n, const DatasetConfig& config, std::uint64_t seed);

/// Image file name for a sample, recording index, stage and dimensions.
std::string sample_file_name(std::size_t index, const TactileImage& image);

/// Writes images, `manifest.jsonl` (one record per sample) and
/// `dataset.json` (generation settings) into `dir`, creating it if needed.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Loads a dataset written by write_dataset. Throws StageError when the
/// manifest is missing and IoError on unreadable images.
Dataset load_dataset(const std::filesystem::path& dir);

/// Seeded shuffle of [0, n) cut into train/validation/test index sets.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};
DatasetSplit split_dataset(std::size_t n, std::uint64_t seed, double train_fraction = 0.8,
                           double validation_fraction = 0.1);

}  // namespace tacthand::posenet
