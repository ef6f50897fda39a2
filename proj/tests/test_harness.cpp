#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tacthand/errors.hpp"
#include "tacthand/harness.hpp"

using namespace tacthand;
using namespace tacthand::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tacthand_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small, fast pipeline configuration.
Config tiny_config(const fs::path& artifacts) {
  Config c = Config::for_profile(Profile::desk);
  c.dataset.n_samples = 40;
  c.dataset.threads = 1;
  c.network.input_width = 40;
  c.network.input_height = 24;
  c.network.n_conv_layers = 2;
  c.network.n_filters = 4;
  c.network.n_dense_units = 16;
  c.network.epochs = 1;
  c.artifacts = artifacts;
  return c;
}

LoopRow row(double t, double u, double e, double depth, std::optional<double> z = std::nullopt) {
  LoopRow r;
  r.t = t;
  r.u = u;
  r.e_ssim = e;
  r.depth = depth;
  if (z) r.pose = posenet::PoseVector{0.0, *z, 0.0, 0.0, 0.0};
  return r;
}

}  // namespace

TEST(Statistics, SpearmanMatchesHandComputedValues) {
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}), 1.0, 1e-12);
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {9, 7, 5, 3, 1}), -1.0, 1e-12);
  // Monotone but non-linear: rank correlation is still exact.
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 8, 27, 64}), 1.0, 1e-12);
  // d = (0, 0, 1, -1): rho = 1 - 6*2/(4*15) = 0.8.
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 2, 4, 3}), 0.8, 1e-12);
  // Ties take the mean rank: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  EXPECT_NEAR(spearman({5, 5, 7}, {1, 2, 3}), std::sqrt(3.0) / 2.0, 1e-12);
  EXPECT_THROW(spearman({1, 2}, {1}), DimensionError);
}

TEST(Statistics, LinearR2) {
  EXPECT_NEAR(linear_r2({0, 1, 2, 3}, {1, 3, 5, 7}), 1.0, 1e-12);
  // y = x^2 on symmetric x has no linear trend.
  EXPECT_NEAR(linear_r2({-2, -1, 0, 1, 2}, {4, 1, 0, 1, 4}), 0.0, 1e-12);
  // Hand-computed: x = (1,2,3), y = (1,3,2): r = 0.5.
  EXPECT_NEAR(linear_r2({1, 2, 3}, {1, 3, 2}), 0.25, 1e-12);
}

TEST(Config, JsonRoundTripAndOverrides) {
  Config c = Config::for_profile(Profile::full);
  c.seed = 17;
  c.exp3b.setpoints = {1.0, 2.0};
  c.objects[1].depth_gain = 0.004;
  const nlohmann::json j = to_json(c);
  Config back = Config::for_profile(Profile::desk);
  apply_json(nlohmann::json::parse(j.dump()), back);
  EXPECT_EQ(to_json(back), j);
  EXPECT_TRUE(back.network == [&] {
    posenet::NetworkConfig n = c.network;
    n.seed = c.seed;
    return n;
  }());

  Config partial = Config::for_profile(Profile::desk);
  apply_json(nlohmann::json::parse(R"({"controller": {"gain": 50}, "exp1": {"duration": 10}})"), partial);
  EXPECT_EQ(partial.controller.gain, 50.0);
  EXPECT_EQ(partial.controller.setpoint, 0.7);
  EXPECT_EQ(partial.exp1.duration, 10.0);

  EXPECT_THROW(apply_json(nlohmann::json::parse(R"({"colour": 1})"), partial), ParameterError);
  EXPECT_THROW(apply_json(nlohmann::json::parse(R"({"controller": {"gian": 1}})"), partial), ParameterError);
  EXPECT_THROW(apply_json(nlohmann::json::parse(R"({"objects": {"cube": {}}})"), partial), ParameterError);
  EXPECT_THROW(apply_json(nlohmann::json::parse(R"({"network": {"epoch": 3}})"), partial), ParameterError);
}

TEST(Config, ProfilesAndValidation) {
  EXPECT_EQ(profile_from_string("full"), Profile::full);
  EXPECT_THROW(profile_from_string("huge"), ParameterError);
  const Config full = Config::for_profile(Profile::full);
  EXPECT_EQ(full.network.n_filters, 256);
  EXPECT_EQ(full.dataset.n_samples, 10000u);
  EXPECT_NO_THROW(full.validate());
  Config bad = Config::for_profile(Profile::desk);
  bad.dataset.train_fraction = 0.95;
  EXPECT_THROW(bad.validate(), ParameterError);
  bad = Config::for_profile(Profile::desk);
  bad.exp3b.setpoints.clear();
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(Config, LoadFromFile) {
  const fs::path dir = fresh_dir("config");
  std::ofstream(dir / "c.json") << R"({"seed": 9, "dataset": {"n_samples": 123}})";
  const Config c = load_config(dir / "c.json", Config::for_profile(Profile::desk));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.dataset.n_samples, 123u);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "bad.json", Config{}), ParameterError);
  EXPECT_THROW(load_config(dir / "absent.json", Config{}), IoError);
}

TEST(RunDirectory, UniquePerCall) {
  const fs::path root = fresh_dir("runs");
  const fs::path a = make_run_directory(root, "exp1", 3);
  const fs::path b = make_run_directory(root, "exp1", 3);
  EXPECT_NE(a, b);
  EXPECT_TRUE(fs::is_directory(a));
  EXPECT_NE(a.filename().string().find("exp1-seed3"), std::string::npos);
}

TEST(Exp1, ZeroGainIsFlaggedNonConvergent) {
  Config c = Config::for_profile(Profile::desk);
  c.controller.gain = 0.0;
  c.exp1.duration = 3.0;
  const fs::path dir = fresh_dir("exp1_zero");
  const RunResult r = exp1(c, dir);
  EXPECT_FALSE(r.passed());
  for (const auto& o : r.summary["objects"]) EXPECT_FALSE(o["converged"].get<bool>());
  for (const char* f : {"config.json", "summary.json", "exp1.png", "exp1_prism40.csv", "exp1_soft.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Exp1, IdenticalSeedsGiveIdenticalSummaries) {
  Config c = Config::for_profile(Profile::desk);
  c.exp1.duration = 3.0;
  const fs::path a = fresh_dir("exp1_a");
  const fs::path b = fresh_dir("exp1_b");
  exp1(c, a);
  exp1(c, b);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "exp1_prism20.csv"), slurp(b / "exp1_prism20.csv"));
}

TEST(Exp3a, AnalysisOnSyntheticLog) {
  const PlantModel plant = PlantModel::for_object(ObjectId::prism40);
  TrajectoryLog log;
  log.rows.push_back(row(0.0, 0.0, 0.0, 0.0));
  log.rows.push_back(row(0.15, 10.0, 0.3, 0.0));
  // Ramp: deformation saturates (steps shrink) while z tracks depth.
  double e = 0.5;
  for (int i = 0; i < 10; ++i) {
    const double depth = 0.2 * (i + 1);
    e += 0.1 / (i + 1);
    log.rows.push_back(row(0.3 + 0.15 * i, 100.0 + 10 * i, e, depth, depth + 0.01 * (i % 2)));
  }
  const Exp3aAnalysis a = analyze_exp3a(log, 2, plant, 0.45);
  EXPECT_TRUE(a.gate_respected);
  EXPECT_TRUE(a.ramp_increasing);
  EXPECT_EQ(a.spearman_n, 9u);
  EXPECT_NEAR(a.spearman, -1.0, 1e-12);
  EXPECT_EQ(a.r2_n, 10u);
  EXPECT_GT(a.r2, 0.99);

  log.rows[1].pose = posenet::PoseVector{};  // pose below the gate
  log.rows[5].u = log.rows[4].u;             // ramp stalls
  const Exp3aAnalysis b = analyze_exp3a(log, 2, plant, 0.45);
  EXPECT_FALSE(b.gate_respected);
  EXPECT_FALSE(b.ramp_increasing);
}

TEST(Exp3b, PlateauAnalysisOnSyntheticLog) {
  Config c = Config::for_profile(Profile::desk);
  c.exp3b.closure = 1.5;
  c.exp3b.segment = 3.0;
  c.exp3b.setpoints = {1.0, 2.0};
  TrajectoryLog log;
  const std::size_t n = cycle_count(7.5, c.controller.cycle_time);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 0.15 * static_cast<double>(i);
    const double z = t < 4.5 ? 1.0 : 2.0;
    log.rows.push_back(row(t, 1000.0 * z, 0.7, z, z + 0.05));
  }
  const std::vector<Plateau> p = analyze_exp3b(log, c);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0].mean_z_hat, 1.05, 1e-12);
  EXPECT_NEAR(p[1].mean_z_hat, 2.05, 1e-12);
  EXPECT_NEAR(p[0].mean_u, 1000.0, 1e-9);
  EXPECT_EQ(p[0].samples, 10u);
}

TEST(Pipeline, StageOrderIsEnforced) {
  const fs::path root = fresh_dir("stages");
  const Config c = tiny_config(root / "artifacts");
  const ArtifactPaths paths = artifact_paths(c, root);
  const fs::path run = fresh_dir("stages_run");
  try {
    train(c, paths, run);
    FAIL() << "train without a dataset must fail";
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("manifest.jsonl"), std::string::npos) << e.what();
  }
  try {
    exp3a(c, paths, run);
    FAIL() << "exp3a without a model must fail";
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("model.json"), std::string::npos) << e.what();
  }
  EXPECT_THROW(exp3b(c, paths, run), StageError);
  EXPECT_THROW(eval(c, paths, run), StageError);
}

TEST(Pipeline, CollectTrainEvalOnTinyConfig) {
  const fs::path root = fresh_dir("pipeline");
  const Config c = tiny_config(root / "artifacts");
  const ArtifactPaths paths = artifact_paths(c, root);
  EXPECT_TRUE(collect(c, paths, fresh_dir("pipeline_collect")).passed());
  const RunResult t = train(c, paths, fresh_dir("pipeline_train"));
  EXPECT_TRUE(fs::exists(paths.model));
  EXPECT_TRUE(fs::exists(paths.split));
  EXPECT_TRUE(fs::exists(paths.training_log));
  EXPECT_EQ(t.summary["n_test"].get<std::size_t>(), 4u);

  const fs::path oracle_dir = fresh_dir("pipeline_oracle");
  const RunResult oracle = eval(c, paths, oracle_dir, true);
  EXPECT_TRUE(oracle.passed());
  for (const auto& r : oracle.summary["report"]) EXPECT_EQ(r["mae"].get<double>(), 0.0);
  EXPECT_EQ(oracle.summary["report"].size(), 5u);

  const fs::path e1 = fresh_dir("pipeline_eval1");
  const fs::path e2 = fresh_dir("pipeline_eval2");
  eval(c, paths, e1);
  eval(c, paths, e2);
  EXPECT_EQ(slurp(e1 / "eval_report.txt"), slurp(e2 / "eval_report.txt"));
  EXPECT_EQ(slurp(e1 / "summary.json"), slurp(e2 / "summary.json"));
  for (const char* f : {"config.json", "summary.json", "predictions.csv", "predictions.png"})
    EXPECT_TRUE(fs::exists(e1 / f)) << f;
}

TEST(ActuatorRange, DetectsViolations) {
  TrajectoryLog log;
  log.rows.push_back(row(0.0, 0.0, 0.0, 0.0));
  log.rows.push_back(row(0.15, kMotorMax, 0.0, 0.0));
  EXPECT_TRUE(within_actuator_range(log));
  log.rows.push_back(row(0.3, kMotorMax + 1.0, 0.0, 0.0));
  EXPECT_FALSE(within_actuator_range(log));
}
