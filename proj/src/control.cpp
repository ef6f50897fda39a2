#include "tacthand/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "tacthand/errors.hpp"
#include "tacthand/posenet/model.hpp"
#include "tacthand/seeding.hpp"

namespace tacthand {

namespace {

constexpr std::uint64_t kReferenceStream = 20;
constexpr std::uint64_t kFrameStream = 21;

}  // namespace

ActuatorState::ActuatorState(double u, double u_max) : u_max_(u_max) {
  if (!(u_max > 0.0)) throw ParameterError("u_max must be > 0");
  u_ = std::clamp(u, 0.0, u_max);
  pending_ = u_;
}

void ActuatorState::request(double delta) {
  if (!settled_)
    throw ContractViolation("actuator increment requested before the previous set point settled");
  if (!std::isfinite(delta)) throw ParameterError("actuator increment must be finite");
  pending_ = std::clamp(u_ + delta, 0.0, u_max_);
  settled_ = false;
}

void ActuatorState::settle() {
  u_ = pending_;
  settled_ = true;
}

std::string_view to_string(ObjectId id) {
  switch (id) {
    case ObjectId::prism40: return "prism40";
    case ObjectId::prism30: return "prism30";
    case ObjectId::prism20: return "prism20";
    case ObjectId::soft: return "soft";
  }
  return "unknown";
}

ObjectId object_from_string(std::string_view name) {
  for (ObjectId id : kAllObjects)
    if (to_string(id) == name) return id;
  throw ParameterError("unknown object_id '" + std::string(name) + "'");
}

double PlantModel::depth(double u) const {
  return std::clamp(depth_gain * (u - contact_onset_u), 0.0, max_depth);
}

void PlantModel::validate() const {
  if (!(contact_onset_u >= 0.0 && contact_onset_u < kMotorMax))
    throw ParameterError("contact_onset_u must lie in [0, u_max)");
  if (!(depth_gain > 0.0)) throw ParameterError("depth_gain must be > 0");
  if (!(max_depth > 0.0)) throw ParameterError("max_depth must be > 0");
}

PlantModel PlantModel::for_object(ObjectId id) {
  PlantModel p;
  p.object_id = id;
  // Larger prisms meet the fingertip earlier in the closure; the soft object
  // yields, so its depth grows slowly with the command.
  switch (id) {
    case ObjectId::prism40:
      p.contact_onset_u = 2500.0;
      p.depth_gain = 0.003;
      p.contact_pose = {1.0, 0.0, 0.0, 0.0, 0.0, 10.0};
      break;
    case ObjectId::prism30:
      p.contact_onset_u = 3500.0;
      p.depth_gain = 0.0025;
      p.contact_pose = {-1.5, 0.0, 0.0, 0.0, 0.0, -20.0};
      break;
    case ObjectId::prism20:
      p.contact_onset_u = 4500.0;
      p.depth_gain = 0.002;
      p.contact_pose = {2.0, 0.0, 0.0, 0.0, 0.0, 30.0};
      break;
    case ObjectId::soft:
      p.contact_onset_u = 3000.0;
      p.depth_gain = 0.0015;
      p.contact_pose = {0.5, 0.0, 0.0, 1.0, -2.0, -5.0};
      break;
  }
  return p;
}

PlantObservation plant_step(ActuatorState& state, const PlantModel& plant,
                            const PlantContext& context, std::uint64_t noise_seed) {
  plant.validate();
  state.settle();
  PlantObservation obs;
  obs.depth = plant.depth(state.u());
  EdgePose pose = plant.contact_pose;
  pose.z = obs.depth;
  obs.frame = process_frame(synthesize_contact(pose, {}, context.sensor, noise_seed),
                            context.processing);
  return obs;
}

void ControllerConfig::validate() const {
  if (!(gain >= 0.0)) throw ParameterError("controller gain must be >= 0");
  if (!(setpoint > 0.0 && setpoint < 2.0)) throw ParameterError("SSIM set point must lie in (0, 2)");
  if (!(setpoint_z >= 0.0 && setpoint_z <= 3.0))
    throw ParameterError("pose set point must lie in [0, 3] mm");
  if (feedback_sign != 1.0 && feedback_sign != -1.0)
    throw ParameterError("feedback_sign must be +1 or -1");
  if (!(cycle_time > 0.0)) throw ParameterError("cycle_time must be > 0");
  if (!(gate_threshold >= 0.0 && gate_threshold < 2.0))
    throw ParameterError("gate_threshold must lie in [0, 2)");
}

double ssim_controller_step(const DeformationMeasure& e, const ControllerConfig& config) {
  if (!(e.value >= 0.0 && e.value <= 2.0))
    throw ParameterError("deformation measure must lie in [0, 2]");
  return config.feedback_sign * config.gain * (e.value - config.setpoint);
}

double pose_controller_step(double z, const ControllerConfig& config) {
  if (!std::isfinite(z)) throw ParameterError("pose estimate must be finite");
  return config.feedback_sign * config.gain * (z - config.setpoint_z);
}

std::string TrajectoryLog::to_csv() const {
  std::string out = "t,u,e_ssim,z_hat,x_hat,phi_hat,psi_hat,theta_hat,gated\n";
  char line[256];
  for (const LoopRow& r : rows) {
    std::snprintf(line, sizeof line, "%.2f,%.6f,%.6f,", r.t, r.u, r.e_ssim);
    out += line;
    if (r.pose) {
      const auto& p = *r.pose;
      std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f,%.6f,", p[1], p[0], p[2], p[3], p[4]);
      out += line;
    } else {
      out += ",,,,,";
    }
    out += r.gated ? "1\n" : "0\n";
  }
  return out;
}

void TrajectoryLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trajectory log " + path.string());
  out << to_csv();
  if (!out.flush()) throw IoError("failed writing trajectory log " + path.string());
}

std::size_t cycle_count(double duration, double cycle_time) {
  if (!(duration > 0.0)) throw ParameterError("duration must be > 0");
  return static_cast<std::size_t>(std::floor(duration / cycle_time + 1e-9));
}

ClosedLoop::ClosedLoop(const PlantModel& plant, const PlantContext& context,
                       const ControllerConfig& config, const posenet::Model* model,
                       std::uint64_t seed, double initial_u)
    : plant_(plant),
      context_(context),
      config_(config),
      model_(model),
      seed_(seed),
      actuator_(initial_u) {
  plant_.validate();
  config_.validate();
  // Reference frame: the unloaded pad, captured once before the run.
  reference_ = process_frame(
      synthesize_contact({}, {}, context_.sensor, derive_seed(seed_, 0, kReferenceStream)),
      context_.processing).gray;
}

void ClosedLoop::set_config(const ControllerConfig& config) {
  config.validate();
  if (config.cycle_time != config_.cycle_time)
    throw ParameterError("cycle_time cannot change during a run");
  config_ = config;
}

const LoopRow& ClosedLoop::cycle(const Policy& policy) {
  LoopRow row;
  row.t = time();
  row.u = actuator_.u();
  const PlantObservation obs =
      plant_step(actuator_, plant_, context_, derive_seed(seed_, cycles_, kFrameStream));
  row.depth = obs.depth;
  const DeformationMeasure e = deformation(obs.frame.gray, reference_, context_.processing.ssim);
  row.e_ssim = e.value;

  CycleInput input{row.t, row.u, e, std::nullopt};
  if (model_ != nullptr) input.pose = posenet::predict(*model_, obs.frame.binary);
  if (input.pose) {
    if (e.value > config_.gate_threshold) {
      row.pose = input.pose;
    } else {
      row.gated = true;
    }
  }

  actuator_.request(policy(input));
  actuator_.settle();
  log_.rows.push_back(row);
  ++cycles_;
  return log_.rows.back();
}

void ClosedLoop::run(const Policy& policy, double duration) {
  const std::size_t n = cycle_count(duration, config_.cycle_time);
  for (std::size_t i = 0; i < n; ++i) cycle(policy);
}

Policy ssim_policy(const ControllerConfig& config) {
  return [config](const CycleInput& in) { return ssim_controller_step(in.e, config); };
}

Policy pose_policy(const ControllerConfig& config) {
  return [config](const CycleInput& in) {
    if (!in.pose) throw StageError("pose control needs a trained model");
    return pose_controller_step((*in.pose)[static_cast<int>(posenet::PoseComponent::z)], config);
  };
}

Policy ramp_policy(double u_start, double rate, double t_start, double cycle_time,
                   double u_max) {
  if (!(rate > 0.0)) throw ParameterError("ramp rate must be > 0");
  return [=](const CycleInput& in) {
    // Increment to the ramp value at the start of the next cycle.
    return u_start + rate * u_max * (in.t + cycle_time - t_start) - in.u;
  };
}

TrajectoryLog run_closed_loop(ControllerKind kind, const PlantModel& plant, double duration,
                              const ControllerConfig& config, const PlantContext& context,
                              const posenet::Model* model, std::uint64_t seed, double initial_u) {
  ClosedLoop loop(plant, context, config, model, seed, initial_u);
  loop.run(kind == ControllerKind::ssim ? ssim_policy(config) : pose_policy(config), duration);
  return loop.log();
}

TrajectoryLog ramp_motor(double rate, double duration, const PlantModel& plant,
                         const ControllerConfig& config, const PlantContext& context,
                         const posenet::Model* model, std::uint64_t seed, double u_start,
                         double* final_u) {
  ClosedLoop loop(plant, context, config, model, seed, u_start);
  loop.run(ramp_policy(u_start, rate, 0.0, config.cycle_time), duration);
  const double end = std::clamp(u_start + rate * kMotorMax * duration, 0.0, kMotorMax);
  loop.actuator().request(end - loop.actuator().u());
  loop.actuator().settle();
  if (final_u) *final_u = loop.actuator().u();
  return loop.log();
}

}  // namespace tacthand
