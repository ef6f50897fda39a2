#include "tacthand/posenet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "tacthand/config_json.hpp"
#include "tacthand/errors.hpp"
#include "tacthand/png_io.hpp"
#include "tacthand/seeding.hpp"

namespace tacthand::posenet {

namespace {

constexpr int kDatasetFormatVersion = 1;
constexpr std::uint64_t kPoseStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSplitStream = 3;

LabelledSample make_sample(const DatasetConfig& config, std::uint64_t seed, std::size_t index) {
  const SampleDraw draw = draw_sample(config, seed, index);
  const TactileImage raw = synthesize_contact(draw.pose, draw.shear, config.sensor, draw.noise_seed);
  ProcessedFrame frame = process_frame(raw, config.processing);
  LabelledSample sample;
  sample.image = quantize_8bit(frame.binary);
  sample.label = draw.pose;
  sample.file = sample_file_name(index, sample.image);
  sample.seed = draw.noise_seed;
  return sample;
}

}  // namespace

void DatasetConfig::validate() const {
  ranges.validate();
  shear.validate();
  sensor.validate();
  processing.validate();
  if (threads < 0) throw ParameterError("threads must be >= 0");
}

SampleDraw draw_sample(const DatasetConfig& config, std::uint64_t seed, std::size_t index) {
  std::mt19937_64 rng(derive_seed(seed, index, kPoseStream));
  // 53-bit uniform draw written out so labels match across standard libraries.
  auto uniform = [&rng](double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  };
  SampleDraw draw;
  PoseVector label{};
  for (int i = 0; i < kPoseOutputs; ++i)
    label[i] = uniform(config.ranges.bounds[i].lo, config.ranges.bounds[i].hi);
  draw.pose = pose_of(label);
  const ShearRanges& s = config.shear;
  draw.shear.dx = uniform(-s.translation, s.translation);
  draw.shear.dy = uniform(-s.translation, s.translation);
  draw.shear.dz = uniform(-s.normal, s.normal);
  draw.shear.dphi = uniform(-s.rotation, s.rotation);
  draw.shear.dpsi = uniform(-s.rotation, s.rotation);
  draw.shear.dtheta = uniform(-s.rotation, s.rotation);
  draw.noise_seed = derive_seed(seed, index, kNoiseStream);
  return draw;
}

Dataset collect_dataset(std::size_t n, const DatasetConfig& config, std::uint64_t seed) {
  if (n == 0) throw ParameterError("dataset size must be >= 1");
  config.validate();
  Dataset dataset{config, seed, std::vector<LabelledSample>(n)};

  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) dataset.samples[i] = make_sample(config, seed, i);
    return dataset;
  }
  // Each sample depends only on (seed, index), so interleaved work
  // assignment cannot change the result.
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers)
          dataset.samples[i] = make_sample(config, seed, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return dataset;
}

std::string sample_file_name(std::size_t index, const TactileImage& image) {
  char buffer[96];
  std::snprintf(buffer, sizeof buffer, "img_%06zu_%s_%dx%d.png", index,
                std::string(to_string(image.stage())).c_str(), image.width(), image.height());
  return buffer;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.jsonl").string());
  for (const LabelledSample& s : dataset.samples) {
    write_png(dir / s.file, s.image);
    const nlohmann::json record{{"file", s.file},   {"x", s.label.x},
                                {"z", s.label.z},   {"phi", s.label.phi},
                                {"psi", s.label.psi}, {"theta", s.label.theta},
                                {"seed", s.seed}};
    manifest << record.dump() << '\n';
  }
  if (!manifest.flush()) throw IoError("failed writing " + (dir / "manifest.jsonl").string());

  const nlohmann::json meta{{"format_version", kDatasetFormatVersion},
                            {"seed", dataset.seed},
                            {"count", dataset.samples.size()},
                            {"ranges", dataset.config.ranges},
                            {"shear", dataset.config.shear},
                            {"sensor", dataset.config.sensor},
                            {"imaging", dataset.config.processing}};
  std::ofstream out(dir / "dataset.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
  out << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  const auto meta_path = dir / "dataset.json";
  for (const auto& p : {manifest_path, meta_path})
    if (!std::filesystem::exists(p))
      throw StageError("missing dataset artifact " + p.string() + " (run collect first)");

  Dataset dataset;
  {
    std::ifstream in(meta_path);
    const nlohmann::json meta = nlohmann::json::parse(in);
    if (meta.value("format_version", 0) != kDatasetFormatVersion)
      throw IoError("unsupported dataset format in " + meta_path.string());
    dataset.seed = meta.at("seed").get<std::uint64_t>();
    meta.at("ranges").get_to(dataset.config.ranges);
    meta.at("shear").get_to(dataset.config.shear);
    meta.at("sensor").get_to(dataset.config.sensor);
    meta.at("imaging").get_to(dataset.config.processing);
  }

  std::ifstream in(manifest_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json record = nlohmann::json::parse(line);
    LabelledSample s;
    s.file = record.at("file").get<std::string>();
    s.label.x = record.at("x").get<double>();
    s.label.z = record.at("z").get<double>();
    s.label.phi = record.at("phi").get<double>();
    s.label.psi = record.at("psi").get<double>();
    s.label.theta = record.at("theta").get<double>();
    s.seed = record.at("seed").get<std::uint64_t>();
    s.image = read_png(dir / s.file, Stage::processed);
    dataset.samples.push_back(std::move(s));
  }
  if (dataset.samples.empty()) throw IoError("dataset manifest " + manifest_path.string() + " is empty");
  return dataset;
}

DatasetSplit split_dataset(std::size_t n, std::uint64_t seed, double train_fraction,
                           double validation_fraction) {
  if (!(train_fraction > 0.0) || validation_fraction < 0.0 ||
      train_fraction + validation_fraction > 1.0)
    throw ParameterError("invalid split fractions");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0, kSplitStream));
  // Fisher-Yates with an explicit draw so the permutation does not depend
  // on the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * n + 1e-9));
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

}  // namespace tacthand::posenet
