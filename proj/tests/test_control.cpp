#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tacthand/control.hpp"
#include "tacthand/errors.hpp"

using namespace tacthand;

namespace {

PlantContext quiet_context() {
  PlantContext ctx;
  ctx.sensor.noise_sigma = 0.0;
  return ctx;
}

}  // namespace

TEST(Actuator, ClampsToRange) {
  ActuatorState a(100.0);
  a.request(-500.0);
  a.settle();
  EXPECT_EQ(a.u(), 0.0);
  a.request(25000.0);
  EXPECT_EQ(a.pending_setpoint(), kMotorMax);
  a.settle();
  EXPECT_EQ(a.u(), kMotorMax);
  EXPECT_EQ(ActuatorState(-4.0).u(), 0.0);
}

TEST(Actuator, IncrementBeforeSettleIsContractViolation) {
  ActuatorState a;
  a.request(10.0);
  EXPECT_FALSE(a.settled());
  EXPECT_THROW(a.request(10.0), ContractViolation);
  a.settle();
  EXPECT_TRUE(a.settled());
  EXPECT_NO_THROW(a.request(10.0));
}

TEST(Plant, DepthMatchesClosedFormAt100Commands) {
  const PlantModel p = PlantModel::for_object(ObjectId::prism20);
  for (int i = 0; i < 100; ++i) {
    const double u = kMotorMax * i / 99.0;
    const double expected =
        u <= p.contact_onset_u ? 0.0
                               : std::min(p.max_depth, p.depth_gain * (u - p.contact_onset_u));
    EXPECT_NEAR(p.depth(u), expected, 1e-12) << "u=" << u;
  }
  EXPECT_EQ(p.depth(kMotorMax), p.max_depth);
}

TEST(Plant, EveryObjectIsValidAndStrictlyIncreasingAboveOnset) {
  for (ObjectId id : kAllObjects) {
    const PlantModel p = PlantModel::for_object(id);
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.object_id, id);
    EXPECT_EQ(p.depth(0.0), 0.0);
    EXPECT_EQ(p.depth(p.contact_onset_u), 0.0);
    EXPECT_GT(p.depth(p.contact_onset_u + 1.0), 0.0);
    EXPECT_EQ(p.depth(kMotorMax), p.max_depth);
    EXPECT_EQ(object_from_string(to_string(id)), id);
  }
  EXPECT_THROW(object_from_string("cube"), ParameterError);
}

TEST(Plant, OnsetImageEqualsRest) {
  const PlantContext ctx = quiet_context();
  const PlantModel p = PlantModel::for_object(ObjectId::prism40);
  ActuatorState a(p.contact_onset_u);
  const PlantObservation obs = plant_step(a, p, ctx, 1);
  EXPECT_EQ(obs.depth, 0.0);
  EXPECT_TRUE(obs.frame.gray == process_frame(render_rest(ctx.sensor), ctx.processing).gray);
}

TEST(Plant, StepSettlesPendingIncrement) {
  const PlantModel p = PlantModel::for_object(ObjectId::soft);
  ActuatorState a(0.0);
  a.request(kMotorMax * 2);
  const PlantObservation obs = plant_step(a, p, quiet_context(), 1);
  EXPECT_TRUE(a.settled());
  EXPECT_EQ(a.u(), kMotorMax);
  EXPECT_EQ(obs.depth, p.max_depth);
}

TEST(Controllers, SsimArithmetic) {
  ControllerConfig c;
  EXPECT_EQ(ssim_controller_step({0.7}, c), 0.0);
  c.feedback_sign = 1.0;
  EXPECT_NEAR(ssim_controller_step({0.2}, c), -50.0, 1e-12);
  c.feedback_sign = -1.0;
  EXPECT_NEAR(ssim_controller_step({0.2}, c), 50.0, 1e-12);
  EXPECT_THROW(ssim_controller_step({2.5}, c), ParameterError);
}

TEST(Controllers, PoseArithmetic) {
  ControllerConfig c;
  c.setpoint_z = 3.0;
  EXPECT_EQ(pose_controller_step(3.0, c), 0.0);
  EXPECT_NEAR(pose_controller_step(1.0, c), 200.0, 1e-12);
  EXPECT_THROW(pose_controller_step(std::nan(""), c), ParameterError);
}

TEST(Controllers, ConfigValidation) {
  ControllerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gain = 0.0;
  EXPECT_NO_THROW(c.validate());  // zero gain is allowed as a degenerate loop
  c = {};
  c.setpoint_z = 3.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.feedback_sign = 0.5;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(ClosedLoop, RowCountIsFloorOfDurationOverCycle) {
  const PlantContext ctx = quiet_context();
  const PlantModel p = PlantModel::for_object(ObjectId::prism40);
  ControllerConfig c;
  for (double duration : {1.0, 1.5, 3.0}) {
    const TrajectoryLog log = run_closed_loop(ControllerKind::ssim, p, duration, c, ctx, nullptr, 2);
    EXPECT_EQ(log.rows.size(), cycle_count(duration, c.cycle_time));
    EXPECT_EQ(log.rows.size(), static_cast<std::size_t>(std::floor(duration / c.cycle_time + 1e-9)));
  }
  EXPECT_EQ(cycle_count(120.0, 0.15), 800u);
}

TEST(ClosedLoop, ZeroGainKeepsCommandConstant) {
  ControllerConfig c;
  c.gain = 0.0;
  const TrajectoryLog log = run_closed_loop(ControllerKind::ssim, PlantModel::for_object(ObjectId::prism30),
                                            3.0, c, quiet_context(), nullptr, 1, 1234.0);
  for (const LoopRow& r : log.rows) EXPECT_EQ(r.u, 1234.0);
}

TEST(ClosedLoop, PoseControllerNeedsModel) {
  EXPECT_THROW(run_closed_loop(ControllerKind::pose, PlantModel::for_object(ObjectId::prism40), 1.0,
                               ControllerConfig{}, quiet_context(), nullptr, 1),
               StageError);
}

TEST(ClosedLoop, DeterministicForSeed) {
  const PlantModel p = PlantModel::for_object(ObjectId::prism20);
  const PlantContext ctx;
  const ControllerConfig c;
  const std::string a = run_closed_loop(ControllerKind::ssim, p, 6.0, c, ctx, nullptr, 5).to_csv();
  const std::string b = run_closed_loop(ControllerKind::ssim, p, 6.0, c, ctx, nullptr, 5).to_csv();
  const std::string d = run_closed_loop(ControllerKind::ssim, p, 6.0, c, ctx, nullptr, 6).to_csv();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
}

TEST(Ramp, TenSecondsAtOnePercentEndsAt1900) {
  double final_u = -1.0;
  const TrajectoryLog log = ramp_motor(0.01, 10.0, PlantModel::for_object(ObjectId::prism40),
                                       ControllerConfig{}, quiet_context(), nullptr, 1, 0.0, &final_u);
  EXPECT_NEAR(final_u, 1900.0, 1e-6);
  EXPECT_EQ(log.rows.size(), cycle_count(10.0, 0.15));
  for (std::size_t i = 0; i < log.rows.size(); ++i)
    EXPECT_NEAR(log.rows[i].u, 0.01 * kMotorMax * log.rows[i].t, 1e-6);
}

TEST(Ramp, DeformationNonDecreasingOnceInContact) {
  const PlantModel p = PlantModel::for_object(ObjectId::prism40);
  const TrajectoryLog log =
      ramp_motor(0.01, 30.0, p, ControllerConfig{}, quiet_context(), nullptr, 1, 1500.0);
  bool contact = false;
  double prev = 0.0;
  for (const LoopRow& r : log.rows) {
    if (r.depth > 0.0) {
      if (contact) EXPECT_GE(r.e_ssim, prev - 1e-12) << "t=" << r.t;
      contact = true;
    }
    prev = r.e_ssim;
  }
  EXPECT_TRUE(contact);
  EXPECT_EQ(log.rows.back().depth, p.max_depth);
}

TEST(Ramp, ClampsAtMotorMaximum) {
  double final_u = 0.0;
  const TrajectoryLog log = ramp_motor(0.05, 10.0, PlantModel::for_object(ObjectId::soft),
                                       ControllerConfig{}, quiet_context(), nullptr, 1, 15000.0, &final_u);
  EXPECT_EQ(final_u, kMotorMax);
  for (const LoopRow& r : log.rows) {
    EXPECT_GE(r.u, 0.0);
    EXPECT_LE(r.u, kMotorMax);
  }
}

TEST(TrajectoryLog, CsvFormat) {
  TrajectoryLog log;
  LoopRow a;
  a.t = 0.0;
  a.u = 12.5;
  a.e_ssim = 0.25;
  log.rows.push_back(a);
  LoopRow b;
  b.t = 0.15;
  b.u = 20.0;
  b.e_ssim = 0.5;
  b.pose = posenet::PoseVector{1.0, 2.0, 3.0, 4.0, 5.0};
  log.rows.push_back(b);
  LoopRow c = a;
  c.t = 0.3;
  c.gated = true;
  log.rows.push_back(c);
  EXPECT_EQ(log.to_csv(),
            "t,u,e_ssim,z_hat,x_hat,phi_hat,psi_hat,theta_hat,gated\n"
            "0.00,12.500000,0.250000,,,,,,0\n"
            "0.15,20.000000,0.500000,2.000000,1.000000,3.000000,4.000000,5.000000,0\n"
            "0.30,12.500000,0.250000,,,,,,1\n");
  const auto path = std::filesystem::temp_directory_path() / "tacthand_test_log.csv";
  log.write_csv(path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), log.to_csv());
  std::filesystem::remove(path);
}
