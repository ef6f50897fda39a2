#pragma once

// Convolutional pose regressor trained from scratch: conv(3x3, same) + ReLU +
// 2x2 max-pool blocks, fully connected ReLU layers with dropout, and a linear
// five-output head.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace tacthand::posenet {

enum class Optimizer { momentum, adam };

struct NetworkConfig {
  int n_conv_layers = 3;
  int n_filters = 32;
  int n_dense_layers = 1;
  int n_dense_units = 64;
  std::string activation = "relu";
  double dropout = 0.02;
  double l1 = 0.0001;
  double l2 = 0.0005;
  int batch_size = 16;
  double learning_rate = 0.01;
  int epochs = 24;
  std::uint64_t seed = 1;

  int kernel_size = 3;
  int input_width = 120;
  int input_height = 68;
  Optimizer optimizer = Optimizer::momentum;
  double momentum = 0.9;
  /// Cosine-anneal the learning rate to zero over the run.
  bool cosine_decay = true;
  /// Restore the weights of the epoch with the lowest validation loss.
  bool keep_best = true;

  /// Convolutional/dense hyperparameters as tabulated for the full-size network.
  static NetworkConfig full_profile();
  /// Laptop-scale network and run length.
  static NetworkConfig desk_profile();

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& config);
void from_json(const nlohmann::json& j, NetworkConfig& config);

/// Per-batch loss split into its data and penalty terms.
struct LossBreakdown {
  double data = 0.0;
  double penalty = 0.0;
  double total() const { return data + penalty; }
};

/// The network in a given floating-point type. Training runs in float;
/// the gradient check runs in double.
template <typename Scalar>
class BasicPoseNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Param {
    std::string name;
    Matrix value;
    bool penalized = true;  // weights carry L1/L2 penalties, biases do not
  };

  BasicPoseNet() = default;
  BasicPoseNet(const NetworkConfig& config, std::uint64_t init_seed);

  const NetworkConfig& config() const { return config_; }
  std::vector<Param>& parameters() { return params_; }
  const std::vector<Param>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Inference (no dropout). `inputs` is input_height*input_width rows by
  /// batch columns. Returns 5 x batch normalised predictions.
  Matrix predict(const Matrix& inputs) const;

  /// Mean-squared error over the batch and outputs plus L1/L2 weight
  /// penalties. Fills `gradients` (same layout as parameters()). Dropout
  /// masks are drawn from `dropout_seed`, so repeated calls with the same
  /// seed see the same masks.
  LossBreakdown loss_and_gradients(const Matrix& inputs, const Matrix& targets,
                                   std::vector<Matrix>& gradients, std::uint64_t dropout_seed,
                                   bool training = true) const;

  /// Loss only, same semantics as loss_and_gradients.
  LossBreakdown loss(const Matrix& inputs, const Matrix& targets, std::uint64_t dropout_seed,
                     bool training = true) const;

  double penalty() const;

 private:
  struct ConvCache;
  Matrix forward(const Matrix& inputs, bool training, std::uint64_t dropout_seed,
                 std::vector<ConvCache>* conv_cache, std::vector<Matrix>* dense_inputs,
                 std::vector<Matrix>* dense_masks) const;

  NetworkConfig config_;
  std::vector<Param> params_;
  std::vector<int> conv_in_channels_;
  std::vector<int> conv_widths_;
  std::vector<int> conv_heights_;
  int flat_features_ = 0;
};

extern template class BasicPoseNet<float>;
extern template class BasicPoseNet<double>;

using PoseNet = BasicPoseNet<float>;

/// Compares analytic parameter gradients with central finite differences
/// (step 1e-5) on a random batch for the network described by `config`.
/// Returns the maximum relative error over all parameters, with magnitudes
/// below 1e-6 treated as 1e-6 in the denominator.
double gradient_check(const NetworkConfig& config, std::uint64_t seed, int batch = 3);

/// Small network used by the gradient check: 8x8 input, 2 conv layers of
/// 4 filters, one dense layer of 6 units.
NetworkConfig gradient_check_config();

}  // namespace tacthand::posenet
