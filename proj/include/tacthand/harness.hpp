#pragma once

// Experiment wiring: resolved configuration, artifact locations, run
// directories, and the exp1 / exp2 / exp3a / exp3b procedures with their
// in-run property checks.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tacthand/control.hpp"
#include "tacthand/posenet/dataset.hpp"
#include "tacthand/posenet/model.hpp"
#include "tacthand/posenet/network.hpp"

namespace tacthand::harness {

enum class Profile { desk, full };
std::string_view to_string(Profile p);
Profile profile_from_string(std::string_view name);

struct DatasetSettings {
  std::size_t n_samples = 9000;
  posenet::PoseRanges ranges;
  posenet::ShearRanges shear;
  int threads = 0;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
};

struct Exp1Settings {
  double duration = 40.0;         // s per object
  int convergence_budget = 200;   // cycles
  int hold_cycles = 50;           // cycles the error must stay inside the band
  double tolerance = 0.05;
  int final_window = 10;          // cycles checked for a settled command
  double final_max_du = 1.0;      // counts
};

struct Exp3aSettings {
  ObjectId object = ObjectId::prism40;
  double closure = 20.0;  // s of SSIM control before the ramp
  double ramp_rate = 0.01;
  double ramp_duration = 30.0;
  double min_r2 = 0.9;
};

struct Exp3bSettings {
  ObjectId object = ObjectId::prism40;
  double closure = 20.0;
  std::vector<double> setpoints{1.0, 1.5, 2.0, 2.5, 3.0};
  double segment = 20.0;           // s per set point
  double steady_fraction = 0.5;    // trailing part of each segment used as the plateau
  double tolerance = 0.25;         // mm
};

struct EvalSettings {
  /// MAE limits per component (x, z, phi, psi, theta).
  std::array<double, posenet::kPoseOutputs> max_mae{1.5, 0.3, 2.0, 3.2, 10.0};
};

struct Config {
  Profile profile = Profile::desk;
  std::uint64_t seed = 1;
  SensorConfig sensor;
  ProcessingConfig imaging;
  DatasetSettings dataset;
  posenet::NetworkConfig network;
  ControllerConfig controller;
  std::array<PlantModel, 4> objects{PlantModel::for_object(ObjectId::prism40),
                                    PlantModel::for_object(ObjectId::prism30),
                                    PlantModel::for_object(ObjectId::prism20),
                                    PlantModel::for_object(ObjectId::soft)};
  Exp1Settings exp1;
  Exp3aSettings exp3a;
  Exp3bSettings exp3b;
  EvalSettings eval;
  /// Artifact directory shared by collect/train/eval/exp3*; empty means
  /// <output root>/artifacts/<profile>.
  std::filesystem::path artifacts;

  static Config for_profile(Profile p);
  const PlantModel& object(ObjectId id) const;
  PlantContext plant_context() const { return {sensor, imaging}; }
  posenet::DatasetConfig dataset_config() const;
  void validate() const;
};

nlohmann::json to_json(const Config& config);
/// Applies the keys present in `j` on top of `config`.
void apply_json(const nlohmann::json& j, Config& config);
Config load_config(const std::filesystem::path& path, Config base);

/// Output root: $TACTHAND_OUT if set, else ./runs.
std::filesystem::path default_output_root();

/// Creates <root>/<timestamp>-<command>-seed<seed>[-n], unique per call.
std::filesystem::path make_run_directory(const std::filesystem::path& root,
                                         const std::string& command, std::uint64_t seed);

struct ArtifactPaths {
  std::filesystem::path dataset_dir;
  std::filesystem::path model;
  std::filesystem::path split;
  std::filesystem::path training_log;
};
ArtifactPaths artifact_paths(const Config& config, const std::filesystem::path& output_root);

/// Outcome of one property checked during a run.
struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  nlohmann::json summary;
  std::vector<Check> checks;
  bool passed() const;
};

/// Writes resolved config, summary (including checks) into `run_dir`.
void write_run_record(const std::filesystem::path& run_dir, const Config& config,
                      const RunResult& result);

struct Exp1Object {
  ObjectId object;
  TrajectoryLog log;
  std::optional<std::size_t> convergence_cycle;
  double final_e = 0.0;
  double final_u = 0.0;
  double final_max_du = 0.0;
  bool converged = false;
};

std::vector<Exp1Object> run_exp1(const Config& config);
RunResult exp1(const Config& config, const std::filesystem::path& run_dir);

RunResult collect(const Config& config, const ArtifactPaths& artifacts,
                  const std::filesystem::path& run_dir);
RunResult train(const Config& config, const ArtifactPaths& artifacts,
                const std::filesystem::path& run_dir);
/// With `oracle`, labels stand in for predictions (all MAE exactly zero).
RunResult eval(const Config& config, const ArtifactPaths& artifacts,
               const std::filesystem::path& run_dir, bool oracle = false);

struct Exp3aAnalysis {
  double spearman = 0.0;       // |delta e| vs depth over the contact part of the ramp
  std::size_t spearman_n = 0;
  double r2 = 0.0;             // z_hat vs true depth, linear fit
  std::size_t r2_n = 0;
  bool gate_respected = true;  // no pose whenever e <= gate threshold
  bool ramp_increasing = true;
  std::size_t ramp_start_row = 0;
};

TrajectoryLog run_exp3a(const Config& config, const posenet::Model& model,
                        std::size_t* ramp_start_row = nullptr);
Exp3aAnalysis analyze_exp3a(const TrajectoryLog& log, std::size_t ramp_start_row,
                            const PlantModel& plant, double gate_threshold);
RunResult exp3a(const Config& config, const ArtifactPaths& artifacts,
                const std::filesystem::path& run_dir);

struct Plateau {
  double setpoint = 0.0;
  double mean_z_hat = 0.0;
  double mean_u = 0.0;
  std::size_t samples = 0;
};

TrajectoryLog run_exp3b(const Config& config, const posenet::Model& model);
std::vector<Plateau> analyze_exp3b(const TrajectoryLog& log, const Config& config);
RunResult exp3b(const Config& config, const ArtifactPaths& artifacts,
                const std::filesystem::path& run_dir);

/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);
/// Coefficient of determination of the least-squares line y ~ x.
double linear_r2(const std::vector<double>& x, const std::vector<double>& y);

/// True if every logged command lies in [0, kMotorMax].
bool within_actuator_range(const TrajectoryLog& log);

}  // namespace tacthand::harness
