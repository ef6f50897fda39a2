#include "tacthand/posenet/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tacthand/config_json.hpp"
#include "tacthand/errors.hpp"
#include "tacthand/posenet/labels.hpp"
#include "tacthand/seeding.hpp"

namespace tacthand::posenet {

using Eigen::MatrixXd;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

NetworkConfig NetworkConfig::full_profile() {
  NetworkConfig c;
  c.n_conv_layers = 5;
  c.n_filters = 256;
  c.n_dense_layers = 1;
  c.n_dense_units = 256;
  c.dropout = 0.02;
  c.l1 = 0.0001;
  c.l2 = 0.0005;
  c.batch_size = 16;
  c.input_width = 240;
  c.input_height = 135;
  c.epochs = 100;
  return c;
}

NetworkConfig NetworkConfig::desk_profile() { return NetworkConfig{}; }

void NetworkConfig::validate() const {
  if (n_conv_layers < 1) throw ParameterError("n_conv_layers must be >= 1");
  if (n_filters < 1) throw ParameterError("n_filters must be >= 1");
  if (n_dense_layers < 0) throw ParameterError("n_dense_layers must be >= 0");
  if (n_dense_layers > 0 && n_dense_units < 1) throw ParameterError("n_dense_units must be >= 1");
  if (activation != "relu") throw ParameterError("only the relu activation is supported");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("dropout must lie in [0, 1)");
  if (l1 < 0.0 || l2 < 0.0) throw ParameterError("regularisation coefficients must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (epochs < 0) throw ParameterError("epochs must be >= 0");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ParameterError("kernel_size must be odd");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  int w = input_width;
  int h = input_height;
  for (int l = 0; l < n_conv_layers; ++l) {
    w /= 2;
    h /= 2;
  }
  if (w < 1 || h < 1)
    throw ParameterError("input " + std::to_string(input_width) + "x" +
                         std::to_string(input_height) + " is too small for " +
                         std::to_string(n_conv_layers) + " pooling stages");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"n_conv_layers", c.n_conv_layers},
                     {"n_filters", c.n_filters},
                     {"n_dense_layers", c.n_dense_layers},
                     {"n_dense_units", c.n_dense_units},
                     {"activation", c.activation},
                     {"dropout", c.dropout},
                     {"l1", c.l1},
                     {"l2", c.l2},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"kernel_size", c.kernel_size},
                     {"input_width", c.input_width},
                     {"input_height", c.input_height},
                     {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "momentum"},
                     {"momentum", c.momentum},
                     {"cosine_decay", c.cosine_decay},
                     {"keep_best", c.keep_best}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  reject_unknown_keys(j,
                      {"n_conv_layers", "n_filters", "n_dense_layers", "n_dense_units", "activation",
                       "dropout", "l1", "l2", "batch_size", "learning_rate", "epochs", "seed",
                       "kernel_size", "input_width", "input_height", "optimizer", "momentum",
                       "cosine_decay", "keep_best"},
                      "network");
  NetworkConfig d = c;
  d.n_conv_layers = j.value("n_conv_layers", d.n_conv_layers);
  d.n_filters = j.value("n_filters", d.n_filters);
  d.n_dense_layers = j.value("n_dense_layers", d.n_dense_layers);
  d.n_dense_units = j.value("n_dense_units", d.n_dense_units);
  d.activation = j.value("activation", d.activation);
  d.dropout = j.value("dropout", d.dropout);
  d.l1 = j.value("l1", d.l1);
  d.l2 = j.value("l2", d.l2);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.epochs = j.value("epochs", d.epochs);
  d.seed = j.value("seed", d.seed);
  d.kernel_size = j.value("kernel_size", d.kernel_size);
  d.input_width = j.value("input_width", d.input_width);
  d.input_height = j.value("input_height", d.input_height);
  if (j.contains("optimizer")) {
    const std::string name = j.at("optimizer").get<std::string>();
    if (name == "adam") {
      d.optimizer = Optimizer::adam;
    } else if (name == "momentum") {
      d.optimizer = Optimizer::momentum;
    } else {
      throw ParameterError("unknown optimizer '" + name + "'");
    }
  }
  d.momentum = j.value("momentum", d.momentum);
  d.cosine_decay = j.value("cosine_decay", d.cosine_decay);
  d.keep_best = j.value("keep_best", d.keep_best);
  c = d;
}

namespace {

// Columns of `cols` are output pixels (sample-major); rows are
// (tap, channel) pairs with channels contiguous.
template <typename Source, typename Scalar>
void im2col(const Source& x, int channels, int width, int height, int batch, int k,
            Mat<Scalar>& cols) {
  const int pad = k / 2;
  const int rows = channels * k * k;
  const std::size_t hw = static_cast<std::size_t>(width) * height;
  cols.resize(rows, static_cast<Eigen::Index>(hw * batch));
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < height; ++y) {
      for (int xo = 0; xo < width; ++xo) {
        Scalar* dst = cols.data() + (n * hw + static_cast<std::size_t>(y) * width + xo) * rows;
        for (int ky = 0; ky < k; ++ky) {
          const int yy = y + ky - pad;
          for (int kx = 0; kx < k; ++kx) {
            const int xx = xo + kx - pad;
            Scalar* tap = dst + (ky * k + kx) * channels;
            if (yy < 0 || yy >= height || xx < 0 || xx >= width) {
              std::fill(tap, tap + channels, Scalar(0));
              continue;
            }
            const Scalar* src =
                x.data() + (n * hw + static_cast<std::size_t>(yy) * width + xx) * channels;
            std::copy(src, src + channels, tap);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Mat<Scalar>& cols, int channels, int width, int height, int batch, int k,
            Mat<Scalar>& dx) {
  const int pad = k / 2;
  const int rows = channels * k * k;
  const std::size_t hw = static_cast<std::size_t>(width) * height;
  dx.setZero(channels, static_cast<Eigen::Index>(hw * batch));
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < height; ++y) {
      for (int xo = 0; xo < width; ++xo) {
        const Scalar* src =
            cols.data() + (n * hw + static_cast<std::size_t>(y) * width + xo) * rows;
        for (int ky = 0; ky < k; ++ky) {
          const int yy = y + ky - pad;
          if (yy < 0 || yy >= height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int xx = xo + kx - pad;
            if (xx < 0 || xx >= width) continue;
            Scalar* dst = dx.data() + (n * hw + static_cast<std::size_t>(yy) * width + xx) * channels;
            const Scalar* s = src + (ky * k + kx) * channels;
            for (int c = 0; c < channels; ++c) dst[c] += s[c];
          }
        }
      }
    }
  }
}

// ReLU followed by 2x2 stride-2 max pooling (floor), computed as
// relu(max(z)). `argmax` receives the source column of each pooled element,
// indexed like the output storage.
template <typename Scalar>
void relu_max_pool(const Mat<Scalar>& a, int channels, int width, int height, int batch,
                   Mat<Scalar>& out, std::vector<Eigen::Index>& argmax) {
  const int w2 = width / 2;
  const int h2 = height / 2;
  const Eigen::Index hw = static_cast<Eigen::Index>(width) * height;
  const Eigen::Index hw2 = static_cast<Eigen::Index>(w2) * h2;
  out.resize(channels, hw2 * batch);
  argmax.resize(static_cast<std::size_t>(out.size()));
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < h2; ++y) {
      for (int x = 0; x < w2; ++x) {
        const Eigen::Index oc = n * hw2 + static_cast<Eigen::Index>(y) * w2 + x;
        const Eigen::Index base = n * hw + static_cast<Eigen::Index>(2 * y) * width + 2 * x;
        const Eigen::Index taps[4] = {base, base + 1, base + width, base + width + 1};
        for (int c = 0; c < channels; ++c) {
          Eigen::Index best = taps[0];
          Scalar best_value = a(c, best);
          for (int t = 1; t < 4; ++t) {
            const Scalar v = a(c, taps[t]);
            if (v > best_value) {
              best_value = v;
              best = taps[t];
            }
          }
          out(c, oc) = best_value > Scalar(0) ? best_value : Scalar(0);
          argmax[static_cast<std::size_t>(oc * channels + c)] = best;
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
struct BasicPoseNet<Scalar>::ConvCache {
  Matrix cols;
  Matrix pre_activation;
  Matrix pooled;
  std::vector<Eigen::Index> argmax;
};

namespace {

// Per-thread scratch reused across batches; the large im2col buffers would
// otherwise be freshly mapped (and page-faulted) on every call.
template <typename Scalar>
struct Scratch {
  Mat<Scalar> d_act;
  Mat<Scalar> d_cols;
  Mat<Scalar> d_pooled;
};

}  // namespace

template <typename Scalar>
BasicPoseNet<Scalar>::BasicPoseNet(const NetworkConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  const int k = config_.kernel_size;

  int channels = 1;
  int w = config_.input_width;
  int h = config_.input_height;
  for (int l = 0; l < config_.n_conv_layers; ++l) {
    conv_in_channels_.push_back(channels);
    conv_widths_.push_back(w);
    conv_heights_.push_back(h);
    const int fan_in = channels * k * k;
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / fan_in));
    Matrix weight(config_.n_filters, fan_in);
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<Scalar>(he(rng));
    params_.push_back({"conv" + std::to_string(l) + ".weight", weight, true});
    params_.push_back({"conv" + std::to_string(l) + ".bias",
                       Matrix::Zero(config_.n_filters, 1), false});
    channels = config_.n_filters;
    w /= 2;
    h /= 2;
  }
  flat_features_ = channels * w * h;

  int fan_in = flat_features_;
  for (int d = 0; d < config_.n_dense_layers; ++d) {
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / fan_in));
    Matrix weight(config_.n_dense_units, fan_in);
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<Scalar>(he(rng));
    params_.push_back({"dense" + std::to_string(d) + ".weight", weight, true});
    params_.push_back({"dense" + std::to_string(d) + ".bias",
                       Matrix::Zero(config_.n_dense_units, 1), false});
    fan_in = config_.n_dense_units;
  }

  // Near-zero head: an untrained model predicts the centre of each range.
  std::normal_distribution<double> small(0.0, 0.01 / std::sqrt(static_cast<double>(fan_in)));
  Matrix head(kPoseOutputs, fan_in);
  for (Eigen::Index i = 0; i < head.size(); ++i) head.data()[i] = static_cast<Scalar>(small(rng));
  params_.push_back({"head.weight", head, true});
  params_.push_back({"head.bias", Matrix::Zero(kPoseOutputs, 1), false});
}

template <typename Scalar>
std::size_t BasicPoseNet<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename Scalar>
double BasicPoseNet<Scalar>::penalty() const {
  double l1 = 0.0;
  double l2 = 0.0;
  for (const Param& p : params_) {
    if (!p.penalized) continue;
    l1 += static_cast<double>(p.value.cwiseAbs().sum());
    l2 += static_cast<double>(p.value.squaredNorm());
  }
  return config_.l1 * l1 + config_.l2 * l2;
}

template <typename Scalar>
typename BasicPoseNet<Scalar>::Matrix BasicPoseNet<Scalar>::forward(const Matrix& inputs, bool training, std::uint64_t dropout_seed,
                          std::vector<ConvCache>* conv_cache,
                          std::vector<Matrix>* dense_inputs,
                          std::vector<Matrix>* dense_masks) const {
  const int pixels = config_.input_width * config_.input_height;
  if (inputs.rows() != pixels)
    throw DimensionError("network expects " + std::to_string(pixels) + " input rows, got " +
                         std::to_string(inputs.rows()));
  const int batch = static_cast<int>(inputs.cols());
  const int k = config_.kernel_size;

  thread_local std::vector<ConvCache> inference_cache;
  std::vector<ConvCache>& caches = conv_cache ? *conv_cache : inference_cache;
  caches.resize(static_cast<std::size_t>(config_.n_conv_layers));

  const Eigen::Map<const Matrix> input_map(inputs.data(), 1, inputs.size());
  std::size_t p = 0;
  for (int l = 0; l < config_.n_conv_layers; ++l) {
    ConvCache& cache = caches[static_cast<std::size_t>(l)];
    const Matrix& weight = params_[p++].value;
    const Matrix& bias = params_[p++].value;
    const int w = conv_widths_[l];
    const int h = conv_heights_[l];
    if (l == 0) {
      im2col(input_map, conv_in_channels_[l], w, h, batch, k, cache.cols);
    } else {
      im2col(caches[static_cast<std::size_t>(l - 1)].pooled, conv_in_channels_[l], w, h, batch,
             k, cache.cols);
    }
    cache.pre_activation.resize(weight.rows(), cache.cols.cols());
    cache.pre_activation.noalias() = weight * cache.cols;
    cache.pre_activation.colwise() += bias.col(0);
    relu_max_pool(cache.pre_activation, config_.n_filters, w, h, batch, cache.pooled,
                  cache.argmax);
  }
  const Matrix& x = caches.back().pooled;

  Matrix a = Eigen::Map<const Matrix>(x.data(), flat_features_, batch);
  for (int d = 0; d < config_.n_dense_layers; ++d) {
    const Matrix& weight = params_[p++].value;
    const Matrix& bias = params_[p++].value;
    if (dense_inputs) dense_inputs->push_back(a);
    Matrix z = weight * a;
    z.colwise() += bias.col(0);
    Matrix mask = (z.array() > Scalar(0)).template cast<Scalar>().matrix();
    if (training && config_.dropout > 0.0) {
      std::mt19937_64 rng(derive_seed(dropout_seed, static_cast<std::uint64_t>(d)));
      std::bernoulli_distribution keep(1.0 - config_.dropout);
      const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - config_.dropout));
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] *= keep(rng) ? scale : Scalar(0);
    }
    a = z.cwiseProduct(mask);
    if (dense_masks) dense_masks->push_back(std::move(mask));
  }

  const Matrix& head_w = params_[p++].value;
  const Matrix& head_b = params_[p++].value;
  if (dense_inputs) dense_inputs->push_back(a);
  Matrix out = head_w * a;
  out.colwise() += head_b.col(0);
  return out;
}

template <typename Scalar>
typename BasicPoseNet<Scalar>::Matrix BasicPoseNet<Scalar>::predict(const Matrix& inputs) const {
  return forward(inputs, false, 0, nullptr, nullptr, nullptr);
}

template <typename Scalar>
LossBreakdown BasicPoseNet<Scalar>::loss(const Matrix& inputs, const Matrix& targets,
                            std::uint64_t dropout_seed, bool training) const {
  const Matrix out = forward(inputs, training, dropout_seed, nullptr, nullptr, nullptr);
  if (targets.rows() != out.rows() || targets.cols() != out.cols())
    throw DimensionError("target matrix does not match network output");
  return {static_cast<double>((out - targets).squaredNorm()) / static_cast<double>(out.size()),
          penalty()};
}

template <typename Scalar>
LossBreakdown BasicPoseNet<Scalar>::loss_and_gradients(const Matrix& inputs, const Matrix& targets,
                                          std::vector<Matrix>& gradients,
                                          std::uint64_t dropout_seed, bool training) const {
  thread_local std::vector<ConvCache> conv_cache;
  thread_local Scratch<Scalar> scratch;
  std::vector<Matrix> dense_inputs;
  std::vector<Matrix> dense_masks;
  const Matrix out =
      forward(inputs, training, dropout_seed, &conv_cache, &dense_inputs, &dense_masks);
  if (targets.rows() != out.rows() || targets.cols() != out.cols())
    throw DimensionError("target matrix does not match network output");

  const int batch = static_cast<int>(inputs.cols());
  const int k = config_.kernel_size;
  gradients.resize(params_.size());

  LossBreakdown result{static_cast<double>((out - targets).squaredNorm()) / static_cast<double>(out.size()),
                       penalty()};

  std::size_t p = params_.size();
  Matrix delta = static_cast<Scalar>(2.0 / static_cast<double>(out.size())) * (out - targets);

  // Head.
  {
    const Matrix& a = dense_inputs.back();
    gradients[p - 2].noalias() = delta * a.transpose();
    gradients[p - 1] = delta.rowwise().sum();
    delta = params_[p - 2].value.transpose() * delta;
    p -= 2;
  }
  for (int d = config_.n_dense_layers - 1; d >= 0; --d) {
    delta = delta.cwiseProduct(dense_masks[static_cast<std::size_t>(d)]);
    const Matrix& a = dense_inputs[static_cast<std::size_t>(d)];
    gradients[p - 2].noalias() = delta * a.transpose();
    gradients[p - 1] = delta.rowwise().sum();
    delta = params_[p - 2].value.transpose() * delta;
    p -= 2;
  }

  // Back into the pooled feature map layout (channels x sample-pixels).
  Matrix& d_pooled = scratch.d_pooled;
  d_pooled = Eigen::Map<const Matrix>(delta.data(), config_.n_filters,
                                        delta.size() / config_.n_filters);
  Matrix& d_act = scratch.d_act;
  for (int l = config_.n_conv_layers - 1; l >= 0; --l) {
    const ConvCache& cache = conv_cache[static_cast<std::size_t>(l)];
    const int channels = config_.n_filters;

    // Unpool through the argmax; the ReLU passes gradient only where the
    // selected pre-activation was positive.
    d_act.setZero(channels, cache.pre_activation.cols());
    for (Eigen::Index oc = 0; oc < d_pooled.cols(); ++oc) {
      for (int c = 0; c < channels; ++c) {
        const Eigen::Index src = cache.argmax[static_cast<std::size_t>(oc * channels + c)];
        if (cache.pre_activation(c, src) > Scalar(0)) d_act(c, src) = d_pooled(c, oc);
      }
    }

    gradients[p - 2].noalias() = d_act * cache.cols.transpose();
    gradients[p - 1] = d_act.rowwise().sum();
    if (l > 0) {
      scratch.d_cols.resize(cache.cols.rows(), cache.cols.cols());
      scratch.d_cols.noalias() = params_[p - 2].value.transpose() * d_act;
      col2im(scratch.d_cols, conv_in_channels_[l], conv_widths_[l], conv_heights_[l], batch, k,
             d_pooled);
    }
    p -= 2;
  }

  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].penalized) continue;
    const Matrix& w = params_[i].value;
    const Scalar l1 = static_cast<Scalar>(config_.l1);
    const Scalar l2x2 = static_cast<Scalar>(2.0 * config_.l2);
    gradients[i] += l1 * w.unaryExpr([](Scalar v) {
      return static_cast<Scalar>((v > Scalar(0)) - (v < Scalar(0)));
    }) + l2x2 * w;
  }
  return result;
}

template class BasicPoseNet<float>;
template class BasicPoseNet<double>;

NetworkConfig gradient_check_config() {
  NetworkConfig c;
  c.n_conv_layers = 2;
  c.n_filters = 4;
  c.n_dense_layers = 1;
  c.n_dense_units = 6;
  c.input_width = 8;
  c.input_height = 8;
  c.dropout = 0.25;
  return c;
}

double gradient_check(const NetworkConfig& config, std::uint64_t seed, int batch) {
  BasicPoseNet<double> net(config, seed);
  // Give the head full-size weights so every path carries gradient.
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : net.parameters())
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      p.value.data()[i] += 0.1 * normal(rng);

  MatrixXd inputs(config.input_width * config.input_height, batch);
  for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = unit(rng);
  MatrixXd targets(kPoseOutputs, batch);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = 2.0 * unit(rng) - 1.0;

  const std::uint64_t dropout_seed = derive_seed(seed, 2);
  std::vector<MatrixXd> analytic;
  net.loss_and_gradients(inputs, targets, analytic, dropout_seed);

  constexpr double kStep = 1e-5;
  constexpr double kScaleFloor = 1e-6;
  double worst = 0.0;
  auto& params = net.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (Eigen::Index i = 0; i < params[pi].value.size(); ++i) {
      double& v = params[pi].value.data()[i];
      const double saved = v;
      v = saved + kStep;
      const double plus = net.loss(inputs, targets, dropout_seed).total();
      v = saved - kStep;
      const double minus = net.loss(inputs, targets, dropout_seed).total();
      v = saved;
      const double numeric = (plus - minus) / (2.0 * kStep);
      const double a = analytic[pi].data()[i];
      // Below the floor the comparison is effectively absolute: the
      // difference quotient carries ~1e-12 of rounding noise.
      const double scale = std::max({std::abs(a), std::abs(numeric), kScaleFloor});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace tacthand::posenet
