#include "tacthand/posenet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "tacthand/config_json.hpp"
#include "tacthand/errors.hpp"
#include "tacthand/imaging.hpp"
#include "tacthand/seeding.hpp"

namespace tacthand::posenet {

namespace {

using Matrix = PoseNet::Matrix;

constexpr const char* kModelFormat = "tacthand-posenet";
constexpr int kModelVersion = 1;
constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kDropoutStream = 12;
constexpr Eigen::Index kInferenceChunk = 64;

double data_mse(const PoseNet& net, const Matrix& inputs, const Matrix& targets) {
  if (inputs.cols() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index start = 0; start < inputs.cols(); start += kInferenceChunk) {
    const Eigen::Index n = std::min(kInferenceChunk, inputs.cols() - start);
    const Matrix out = net.predict(inputs.middleCols(start, n));
    sum += static_cast<double>((out - targets.middleCols(start, n)).squaredNorm());
  }
  return sum / static_cast<double>(targets.size());
}

void check_image(const Model& model, const TactileImage& image) {
  if (image.stage() != Stage::processed)
    throw StageError("pose prediction expects a processed-stage image");
  if (image.width() != model.image_width || image.height() != model.image_height)
    throw DimensionError("model expects " + std::to_string(model.image_width) + "x" +
                         std::to_string(model.image_height) + " images, got " +
                         std::to_string(image.width()) + "x" + std::to_string(image.height()));
}

}  // namespace

Eigen::MatrixXf encode_image(const TactileImage& image, const NetworkConfig& config) {
  const TactileImage resized = resize_area(image, config.input_width, config.input_height);
  Eigen::MatrixXf column(resized.size(), 1);
  const auto px = resized.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) column(static_cast<Eigen::Index>(i), 0) = static_cast<float>(px[i]);
  return column;
}

Eigen::MatrixXf encode_images(const std::vector<LabelledSample>& samples,
                              const std::vector<std::size_t>& indices,
                              const NetworkConfig& config) {
  Eigen::MatrixXf inputs(static_cast<Eigen::Index>(config.input_width) * config.input_height,
                         static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c)
    inputs.col(static_cast<Eigen::Index>(c)) = encode_image(samples.at(indices[c]).image, config);
  return inputs;
}

Eigen::MatrixXf encode_targets(const std::vector<LabelledSample>& samples,
                               const std::vector<std::size_t>& indices,
                               const PoseRanges& ranges) {
  Eigen::MatrixXf targets(kPoseOutputs, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const PoseVector t = normalize(label_of(samples.at(indices[c]).label), ranges);
    for (int i = 0; i < kPoseOutputs; ++i)
      targets(i, static_cast<Eigen::Index>(c)) = static_cast<float>(t[i]);
  }
  return targets;
}

TrainingResult train(const std::vector<LabelledSample>& samples,
                     const std::vector<std::size_t>& train_indices,
                     const std::vector<std::size_t>& validation_indices,
                     const NetworkConfig& config, const PoseRanges& ranges,
                     const EpochCallback& on_epoch) {
  config.validate();
  ranges.validate();
  if (train_indices.size() < static_cast<std::size_t>(config.batch_size))
    throw ParameterError("training set of " + std::to_string(train_indices.size()) +
                         " samples is smaller than one batch of " +
                         std::to_string(config.batch_size));
  const TactileImage& first = samples.at(train_indices.front()).image;
  for (const auto* set : {&train_indices, &validation_indices}) {
    for (std::size_t i : *set) {
      const TactileImage& image = samples.at(i).image;
      if (image.stage() != Stage::processed)
        throw StageError("training expects processed-stage images");
      if (!image.same_shape(first))
        throw DimensionError("training images differ in size (" + samples.at(i).file + ")");
    }
  }

  TrainingResult result;
  Model& model = result.model;
  model.config = config;
  model.ranges = ranges;
  model.image_width = first.width();
  model.image_height = first.height();
  model.net = PoseNet(config, derive_seed(config.seed, 0, kInitStream));

  const Matrix train_x = encode_images(samples, train_indices, config);
  const Matrix train_y = encode_targets(samples, train_indices, ranges);
  const Matrix val_x = encode_images(samples, validation_indices, config);
  const Matrix val_y = encode_targets(samples, validation_indices, ranges);
  const bool has_validation = !validation_indices.empty();

  auto& params = model.net.parameters();
  std::vector<Matrix> gradients;
  std::vector<Matrix> first_moment(params.size());
  std::vector<Matrix> second_moment(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment[i] = Matrix::Zero(params[i].value.rows(), params[i].value.cols());
    if (config.optimizer == Optimizer::adam) second_moment[i] = first_moment[i];
  }

  double best = has_validation ? data_mse(model.net, val_x, val_y) : INFINITY;
  std::vector<Matrix> best_params;
  if (config.keep_best)
    for (const auto& p : params) best_params.push_back(p.value);

  const std::size_t n = train_indices.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  Matrix batch_x(train_x.rows(), 0);
  Matrix batch_y(kPoseOutputs, 0);
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr =
        config.cosine_decay
            ? config.learning_rate * 0.5 *
                  (1.0 + std::cos(std::numbers::pi * (epoch - 1) / static_cast<double>(config.epochs)))
            : config.learning_rate;
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), kShuffleStream));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t m = std::min(batch, n - start);
      batch_x.resize(train_x.rows(), static_cast<Eigen::Index>(m));
      batch_y.resize(kPoseOutputs, static_cast<Eigen::Index>(m));
      for (std::size_t c = 0; c < m; ++c) {
        batch_x.col(static_cast<Eigen::Index>(c)) = train_x.col(static_cast<Eigen::Index>(order[start + c]));
        batch_y.col(static_cast<Eigen::Index>(c)) = train_y.col(static_cast<Eigen::Index>(order[start + c]));
      }
      ++step;
      const LossBreakdown loss = model.net.loss_and_gradients(
          batch_x, batch_y, gradients, derive_seed(config.seed, step, kDropoutStream));
      loss_sum += loss.data;
      ++batches;

      const float flr = static_cast<float>(lr);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (config.optimizer == Optimizer::momentum) {
          first_moment[i] = static_cast<float>(config.momentum) * first_moment[i] - flr * gradients[i];
          params[i].value += first_moment[i];
        } else {
          constexpr float kBeta1 = 0.9f;
          constexpr float kBeta2 = 0.999f;
          constexpr float kEps = 1e-8f;
          first_moment[i] = kBeta1 * first_moment[i] + (1.0f - kBeta1) * gradients[i];
          second_moment[i] =
              kBeta2 * second_moment[i] + (1.0f - kBeta2) * gradients[i].cwiseAbs2();
          const float c1 = 1.0f - std::pow(kBeta1, static_cast<float>(step));
          const float c2 = 1.0f - std::pow(kBeta2, static_cast<float>(step));
          params[i].value.array() -= flr * (first_moment[i].array() / c1) /
                                     ((second_moment[i].array() / c2).sqrt() + kEps);
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(batches);
    record.val_loss = has_validation ? data_mse(model.net, val_x, val_y) : record.train_loss;
    record.learning_rate = lr;
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);

    if (config.keep_best && record.val_loss < best) {
      best = record.val_loss;
      result.best_epoch = epoch;
      for (std::size_t i = 0; i < params.size(); ++i) best_params[i] = params[i].value;
    }
  }
  if (config.keep_best) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best_params[i];
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  nlohmann::json j{{"format", kModelFormat},
                   {"version", kModelVersion},
                   {"config", model.config},
                   {"ranges", model.ranges},
                   {"image", {{"width", model.image_width}, {"height", model.image_height}}}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.net.parameters()) {
    std::vector<float> values(p.value.data(), p.value.data() + p.value.size());
    params.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"values", values}});
  }
  j["parameters"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << j.dump() << '\n';
  if (!out.flush()) throw IoError("failed writing model file " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw StageError("missing model artifact " + path.string() + " (run train first)");
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse model file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kModelFormat || j.value("version", 0) != kModelVersion)
    throw IoError("unsupported model file " + path.string());
  Model model;
  j.at("config").get_to(model.config);
  j.at("ranges").get_to(model.ranges);
  model.image_width = j.at("image").at("width").get<int>();
  model.image_height = j.at("image").at("height").get<int>();
  model.net = PoseNet(model.config, 0);
  auto& params = model.net.parameters();
  const auto& stored = j.at("parameters");
  if (stored.size() != params.size())
    throw IoError("model file " + path.string() + " does not match its network config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& s = stored[i];
    if (s.at("name").get<std::string>() != params[i].name ||
        s.at("rows").get<Eigen::Index>() != params[i].value.rows() ||
        s.at("cols").get<Eigen::Index>() != params[i].value.cols())
      throw IoError("parameter " + params[i].name + " in " + path.string() + " has the wrong shape");
    const auto values = s.at("values").get<std::vector<float>>();
    if (values.size() != static_cast<std::size_t>(params[i].value.size()))
      throw IoError("parameter " + params[i].name + " in " + path.string() + " is truncated");
    std::copy(values.begin(), values.end(), params[i].value.data());
  }
  return model;
}

PoseVector predict(const Model& model, const TactileImage& image) {
  check_image(model, image);
  const Matrix out = model.net.predict(encode_image(image, model.config));
  PoseVector normalized{};
  for (int i = 0; i < kPoseOutputs; ++i) normalized[i] = static_cast<double>(out(i, 0));
  return denormalize(normalized, model.ranges);
}

std::vector<PoseVector> predict(const Model& model, const std::vector<LabelledSample>& samples,
                                const std::vector<std::size_t>& indices) {
  for (std::size_t i : indices) check_image(model, samples.at(i).image);
  std::vector<PoseVector> out;
  out.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += kInferenceChunk) {
    const std::size_t m = std::min<std::size_t>(kInferenceChunk, indices.size() - start);
    const std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                         indices.begin() + static_cast<std::ptrdiff_t>(start + m));
    const Matrix pred = model.net.predict(encode_images(samples, chunk, model.config));
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      PoseVector normalized{};
      for (int i = 0; i < kPoseOutputs; ++i) normalized[i] = static_cast<double>(pred(i, c));
      out.push_back(denormalize(normalized, model.ranges));
    }
  }
  return out;
}

EvalReport evaluate_predictions(const std::vector<PoseVector>& predictions,
                                const std::vector<PoseVector>& labels, const PoseRanges& ranges) {
  if (labels.empty()) throw ParameterError("evaluation needs a non-empty test set");
  if (predictions.size() != labels.size())
    throw DimensionError("prediction and label counts differ");
  EvalReport report;
  report.n_test = labels.size();
  for (std::size_t s = 0; s < labels.size(); ++s)
    for (int i = 0; i < kPoseOutputs; ++i)
      report.mae[i] += std::abs(predictions[s][i] - labels[s][i]);
  for (int i = 0; i < kPoseOutputs; ++i) {
    report.mae[i] /= static_cast<double>(labels.size());
    report.range[i] = ranges.bounds[i].width();
  }
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<LabelledSample>& samples,
                    const std::vector<std::size_t>& test_indices) {
  if (test_indices.empty()) throw ParameterError("evaluation needs a non-empty test set");
  std::vector<PoseVector> labels;
  for (std::size_t i : test_indices) labels.push_back(label_of(samples.at(i).label));
  return evaluate_predictions(predict(model, samples, test_indices), labels, model.ranges);
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s\n", "component", "MAE", "range");
  out << line;
  for (int i = 0; i < kPoseOutputs; ++i) {
    const std::string unit(kComponentUnits[i]);
    const std::string mae = [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%.3f %s", report.mae[i], unit.c_str());
      return std::string(b);
    }();
    const std::string range = [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%g %s", report.range[i], unit.c_str());
      return std::string(b);
    }();
    std::snprintf(line, sizeof line, "%-10s %10s %10s\n", std::string(kComponentNames[i]).c_str(),
                  mae.c_str(), range.c_str());
    out << line;
  }
  out << "n_test = " << report.n_test << '\n';
  return out.str();
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write training log " + path.string());
  out << "epoch,train_loss,val_loss\n";
  char line[96];
  for (const EpochRecord& r : log) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_loss);
    out << line;
  }
}

}  // namespace tacthand::posenet
