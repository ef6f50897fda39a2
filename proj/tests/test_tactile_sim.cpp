#include <gtest/gtest.h>

#include <cmath>

#include "tacthand/errors.hpp"
#include "tacthand/posenet/dataset.hpp"
#include "tacthand/tactile_sim.hpp"

using namespace tacthand;

namespace {

double magnitude(const Vec2& v) { return std::hypot(v.x, v.y); }

// Intensity-weighted centroid of everything brighter than the background.
Vec2 bright_centroid(const TactileImage& img, double background) {
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double w = img.at(x, y) - background;
      if (w <= 1e-12) continue;
      sx += w * (x + 0.5);
      sy += w * (y + 0.5);
      sw += w;
    }
  return {sx / sw, sy / sw};
}

}  // namespace

TEST(RestPinField, DefaultGeometry) {
  const PinField f = rest_pin_field(2.0, 0.375);
  EXPECT_EQ(PinField::kCount, 45);
  EXPECT_DOUBLE_EQ(2.0 * f.pin_radius, 0.75);
  for (int r = 0; r + 1 < PinField::kRows; ++r)
    EXPECT_NEAR(f.rest[PinField::index(r + 1, 0)].y - f.rest[PinField::index(r, 0)].y, 2.0, 1e-12);
  for (int i = 0; i < PinField::kCount; ++i) EXPECT_EQ(f.rest[i], f.displaced[i]);
}

TEST(RestPinField, UnitPitchBoundingBox) {
  const PinField f = rest_pin_field(1.0, 0.2);
  double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
  for (const Vec2& p : f.rest) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  EXPECT_NEAR(xmax - xmin, 8.0, 1e-12);
  EXPECT_NEAR(ymax - ymin, 4.0, 1e-12);
  EXPECT_NEAR(xmax + xmin, 0.0, 1e-12);
  EXPECT_NEAR(ymax + ymin, 0.0, 1e-12);
}

TEST(RestPinField, RejectsNonPositive) {
  EXPECT_THROW(rest_pin_field(0.0, 0.3), ParameterError);
  EXPECT_THROW(rest_pin_field(2.0, -1.0), ParameterError);
}

TEST(DeformPins, NoContactIsIdentity) {
  const PinField f = rest_pin_field(2.0, 0.375);
  EdgePose pose;
  pose.x = 2.0;
  pose.theta = 30.0;
  const PinField out = deform_pins(f, pose, {}, MembraneParams{});
  for (int i = 0; i < PinField::kCount; ++i) EXPECT_EQ(out.displaced[i], f.rest[i]);
  EXPECT_FALSE(out.depth_clamped);
}

TEST(DeformPins, MirrorSymmetryInX) {
  const PinField f = rest_pin_field(2.0, 0.375);
  const MembraneParams params;
  for (double x : {0.5, 1.5, 3.0}) {
    EdgePose p;
    p.x = x;
    p.z = 2.0;
    p.phi = 1.5;
    p.psi = -4.0;
    // Reflecting x also reverses the roll, which tilts across the edge.
    EdgePose q = p;
    q.x = -x;
    q.phi = -p.phi;
    const PinField a = deform_pins(f, p, {}, params);
    const PinField b = deform_pins(f, q, {}, params);
    for (int r = 0; r < PinField::kRows; ++r)
      for (int c = 0; c < PinField::kCols; ++c) {
        const Vec2 da = a.displacement(PinField::index(r, c));
        const Vec2 db = b.displacement(PinField::index(r, PinField::kCols - 1 - c));
        EXPECT_NEAR(da.x, -db.x, 1e-9);
        EXPECT_NEAR(da.y, db.y, 1e-9);
      }
  }
}

TEST(DeformPins, DisplacementMonotoneInDepth) {
  const PinField f = rest_pin_field(2.0, 0.375);
  const MembraneParams params;
  for (double theta : {-40.0, 0.0, 25.0}) {
    EdgePose pose;
    pose.x = 1.2;
    pose.theta = theta;
    pose.phi = -3.0;
    pose.psi = 6.0;
    PinField prev = f;
    for (int k = 1; k <= 6; ++k) {
      pose.z = 0.5 * k;
      const PinField cur = deform_pins(f, pose, {}, params);
      for (int i = 0; i < PinField::kCount; ++i)
        EXPECT_GE(magnitude(cur.displacement(i)) + 1e-12, magnitude(prev.displacement(i)))
            << "pin " << i << " z " << pose.z;
      prev = cur;
    }
  }
}

TEST(DeformPins, ClampsDepthAndFlags) {
  const PinField f = rest_pin_field(2.0, 0.375);
  EdgePose deep;
  deep.z = 4.0;
  EdgePose max = deep;
  max.z = 3.0;
  const PinField a = deform_pins(f, deep, {}, MembraneParams{});
  const PinField b = deform_pins(f, max, {}, MembraneParams{});
  EXPECT_TRUE(a.depth_clamped);
  EXPECT_FALSE(b.depth_clamped);
  for (int i = 0; i < PinField::kCount; ++i) EXPECT_EQ(a.displaced[i], b.displaced[i]);
}

TEST(DeformPins, ShearMovesPinsTangentially) {
  const PinField f = rest_pin_field(2.0, 0.375);
  EdgePose pose;
  pose.z = 1.0;
  ShearPerturbation s;
  s.dy = 1.5;
  const PinField plain = deform_pins(f, pose, {}, MembraneParams{});
  const PinField sheared = deform_pins(f, pose, s, MembraneParams{});
  // Pin at the centre of the contact strip carries shear_coupling * dy.
  const int centre = PinField::index(2, 4);
  EXPECT_NEAR(sheared.displaced[centre].y - plain.displaced[centre].y,
              MembraneParams{}.shear_coupling * 1.5, 1e-9);
}

TEST(RenderImage, DeterministicAndSized) {
  const SensorConfig cfg;
  const PinField f = rest_pin_field(cfg.pitch, cfg.pin_radius);
  const TactileImage a = render_image(f, cfg.camera, cfg.membrane.pad_depth);
  const TactileImage b = render_image(f, cfg.camera, cfg.membrane.pad_depth);
  EXPECT_EQ(a.width(), 480);
  EXPECT_EQ(a.height(), 270);
  EXPECT_EQ(a.stage(), Stage::raw);
  EXPECT_TRUE(a == b);
  for (double v : a.pixels()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(RenderImage, CentroidShiftMatchesProjection) {
  SensorConfig cfg;
  cfg.camera.texture_amplitude = 0.0;
  const PinField rest = rest_pin_field(cfg.pitch, cfg.pin_radius);
  // Keep one pin in view and park the rest far outside the frame.
  PinField one = rest;
  const int keep = PinField::index(2, 3);
  for (int i = 0; i < PinField::kCount; ++i)
    if (i != keep) one.displaced[i] = {1000.0, 1000.0};
  PinField moved = one;
  moved.displaced[keep].x += 2.0;

  const double ppm = cfg.camera.pixels_per_mm(cfg.membrane.pad_depth);
  const Vec2 c0 = bright_centroid(render_image(one, cfg.camera, cfg.membrane.pad_depth),
                                  cfg.camera.background);
  const Vec2 c1 = bright_centroid(render_image(moved, cfg.camera, cfg.membrane.pad_depth),
                                  cfg.camera.background);
  EXPECT_NEAR(c1.x - c0.x, 2.0 * ppm, 0.05);
  EXPECT_NEAR(c1.y - c0.y, 0.0, 0.05);
}

TEST(SynthesizeContact, SeedDeterminism) {
  const SensorConfig cfg;
  EdgePose pose;
  pose.x = -1.0;
  pose.z = 1.7;
  pose.theta = 12.0;
  ShearPerturbation s;
  s.dx = 0.4;
  const TactileImage a = synthesize_contact(pose, s, cfg, 99);
  const TactileImage b = synthesize_contact(pose, s, cfg, 99);
  const TactileImage c = synthesize_contact(pose, s, cfg, 100);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(SynthesizeContact, NoContactNoNoiseEqualsRest) {
  SensorConfig cfg;
  cfg.noise_sigma = 0.0;
  EdgePose pose;
  pose.theta = 20.0;
  pose.x = 3.0;
  EXPECT_TRUE(synthesize_contact(pose, {}, cfg, 5) == render_rest(cfg));
}

TEST(SynthesizeContact, DrawsStayInsideLabelRanges) {
  const posenet::DatasetConfig cfg;
  std::array<double, posenet::kPoseOutputs> lo, hi;
  lo.fill(1e9);
  hi.fill(-1e9);
  for (std::size_t i = 0; i < 10000; ++i) {
    const posenet::SampleDraw d = posenet::draw_sample(cfg, 1234, i);
    const posenet::PoseVector v = posenet::label_of(d.pose);
    EXPECT_EQ(d.pose.y, 0.0);
    EXPECT_TRUE(d.shear.within_limits());
    for (int k = 0; k < posenet::kPoseOutputs; ++k) {
      lo[k] = std::min(lo[k], v[k]);
      hi[k] = std::max(hi[k], v[k]);
    }
  }
  for (int k = 0; k < posenet::kPoseOutputs; ++k) {
    const posenet::Interval& r = cfg.ranges.bounds[k];
    EXPECT_GE(lo[k], r.lo);
    EXPECT_LE(hi[k], r.hi);
    // 10000 uniform draws reach within 0.2% of each end.
    EXPECT_LT(lo[k] - r.lo, 0.002 * (r.hi - r.lo));
    EXPECT_LT(r.hi - hi[k], 0.002 * (r.hi - r.lo));
  }
}

TEST(SensorConfig, ValidationRejectsBadValues) {
  MembraneParams m;
  m.falloff_radius = 0.0;
  EXPECT_THROW(m.validate(), ParameterError);
  m = {};
  m.pad_depth = 9.0;
  EXPECT_THROW(m.validate(), ParameterError);
  m = {};
  m.shear_coupling = 1.5;
  EXPECT_THROW(m.validate(), ParameterError);
  EXPECT_NO_THROW(MembraneParams{}.validate());
}
