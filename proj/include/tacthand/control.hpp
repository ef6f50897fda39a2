#pragma once

// Single-actuator hand model: motor command -> contact depth on a held
// object -> tactile image, plus the two proportional set-point controllers
// and the fixed-cycle loop that connects them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tacthand/imaging.hpp"
#include "tacthand/posenet/labels.hpp"
#include "tacthand/tactile_sim.hpp"

namespace tacthand {

namespace posenet {
struct Model;
}

inline constexpr double kMotorMax = 19000.0;

/// Motor set point with increment-then-settle semantics: a new increment is
/// accepted only after the previous one has been reached.
class ActuatorState {
 public:
  explicit ActuatorState(double u = 0.0, double u_max = kMotorMax);

  double u() const { return u_; }
  double u_max() const { return u_max_; }
  double pending_setpoint() const { return pending_; }
  bool settled() const { return settled_; }

  /// Queues u + delta (clamped to [0, u_max]) as the next set point.
  /// Throws ContractViolation if the previous set point has not settled.
  void request(double delta);
  /// Moves the motor to the pending set point.
  void settle();

 private:
  double u_;
  double u_max_;
  double pending_;
  bool settled_ = true;
};

enum class ObjectId { prism40, prism30, prism20, soft };

inline constexpr std::array<ObjectId, 4> kAllObjects{ObjectId::prism40, ObjectId::prism30,
                                                     ObjectId::prism20, ObjectId::soft};

std::string_view to_string(ObjectId id);
/// Throws ParameterError for names other than prism40, prism30, prism20, soft.
ObjectId object_from_string(std::string_view name);

/// Depth law of one held object: no contact up to the onset command, then
/// depth grows linearly with the command until it clamps at max_depth.
struct PlantModel {
  ObjectId object_id = ObjectId::prism40;
  double contact_onset_u = 0.0;
  double depth_gain = 0.0;  // mm per count
  double max_depth = 3.0;
  /// Edge pose the object presents; z is replaced by the plant depth.
  EdgePose contact_pose;

  double depth(double u) const;
  void validate() const;

  static PlantModel for_object(ObjectId id);
};

/// Sensor and image-pipeline settings the plant renders with.
struct PlantContext {
  SensorConfig sensor;
  ProcessingConfig processing;
};

struct PlantObservation {
  double depth = 0.0;
  ProcessedFrame frame;
};

/// Settles the actuator, then renders and processes the contact at the
/// resulting depth.
PlantObservation plant_step(ActuatorState& state, const PlantModel& plant,
                            const PlantContext& context, std::uint64_t noise_seed);

struct ControllerConfig {
  double gain = 100.0;
  double setpoint = 0.7;    // r, for the SSIM controller
  double setpoint_z = 2.0;  // r_z in mm, for the pose controller
  /// -1 gives negative feedback when a larger command closes the hand.
  double feedback_sign = -1.0;
  double cycle_time = 0.15;      // s
  double gate_threshold = 0.45;  // pose estimates kept only when 1 - SSIM exceeds this

  void validate() const;
};

/// feedback_sign * gain * (e - r).
double ssim_controller_step(const DeformationMeasure& e, const ControllerConfig& config);
/// feedback_sign * gain * (z - r_z).
double pose_controller_step(double z, const ControllerConfig& config);

struct LoopRow {
  double t = 0.0;
  double u = 0.0;
  double e_ssim = 0.0;
  /// Present only when the reliability gate passed and a model was loaded.
  std::optional<posenet::PoseVector> pose;
  bool gated = false;  // true when an available estimate was withheld by the gate
  double depth = 0.0;  // true contact depth; not written to CSV
};

class TrajectoryLog {
 public:
  std::vector<LoopRow> rows;

  /// Columns t,u,e_ssim,z_hat,x_hat,phi_hat,psi_hat,theta_hat,gated; absent
  /// pose values are empty fields.
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

/// What a controller sees at the start of a cycle.
struct CycleInput {
  double t = 0.0;
  double u = 0.0;
  DeformationMeasure e;
  std::optional<posenet::PoseVector> pose;  // ungated estimate, if a model is loaded
};

/// Returns the set-point increment for this cycle.
using Policy = std::function<double(const CycleInput&)>;

/// Fixed-cycle loop: acquire image, compute feedback, request increment,
/// wait for it to settle, log. Time advances by cycle_time per call.
class ClosedLoop {
 public:
  ClosedLoop(const PlantModel& plant, const PlantContext& context, const ControllerConfig& config,
             const posenet::Model* model, std::uint64_t seed, double initial_u = 0.0);

  const LoopRow& cycle(const Policy& policy);
  /// Runs floor(duration / cycle_time) cycles.
  void run(const Policy& policy, double duration);

  double time() const { return static_cast<double>(cycles_) * config_.cycle_time; }
  std::size_t cycles() const { return cycles_; }
  ActuatorState& actuator() { return actuator_; }
  const ActuatorState& actuator() const { return actuator_; }
  const TrajectoryLog& log() const { return log_; }
  const TactileImage& reference() const { return reference_; }
  const ControllerConfig& config() const { return config_; }
  void set_config(const ControllerConfig& config);

 private:
  PlantModel plant_;
  PlantContext context_;
  ControllerConfig config_;
  const posenet::Model* model_;
  std::uint64_t seed_;
  ActuatorState actuator_;
  TactileImage reference_;
  TrajectoryLog log_;
  std::size_t cycles_ = 0;
};

std::size_t cycle_count(double duration, double cycle_time);

Policy ssim_policy(const ControllerConfig& config);
/// Needs a model; throws StageError at the first cycle without a pose estimate.
Policy pose_policy(const ControllerConfig& config);
/// Open-loop ramp u(t) = u_start + rate * u_max * (t - t_start), sampled at
/// the cycle boundaries.
Policy ramp_policy(double u_start, double rate, double t_start, double cycle_time,
                   double u_max = kMotorMax);

enum class ControllerKind { ssim, pose };

/// Closed loop from u = initial_u for `duration` seconds.
TrajectoryLog run_closed_loop(ControllerKind kind, const PlantModel& plant, double duration,
                              const ControllerConfig& config, const PlantContext& context,
                              const posenet::Model* model, std::uint64_t seed,
                              double initial_u = 0.0);

/// Open-loop ramp of `rate` (fraction of u_max per second) from u_start.
/// The actuator ends at u(duration).
TrajectoryLog ramp_motor(double rate, double duration, const PlantModel& plant,
                         const ControllerConfig& config, const PlantContext& context,
                         const posenet::Model* model, std::uint64_t seed, double u_start = 0.0,
                         double* final_u = nullptr);

}  // namespace tacthand
