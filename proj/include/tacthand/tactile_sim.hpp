#pragma once

// Marker-pin membrane simulation for the fingertip sensor: a 5x9 pin lattice
// deformed by a straight-edge stimulus and rendered through a pinhole camera.

#include <array>
#include <cstdint>

#include "tacthand/image.hpp"

namespace tacthand {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Pose of an edge stimulus relative to the fingertip. Lengths in mm,
/// angles in degrees. `y` runs along the edge and is never used as a label.
struct EdgePose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double phi = 0.0;
  double psi = 0.0;
  double theta = 0.0;

  friend bool operator==(const EdgePose&, const EdgePose&) = default;
};

/// Unlabelled motion applied to the stimulus before it settles at the
/// labelled pose. The skin under contact retains part of the tangential
/// component of that motion.
struct ShearPerturbation {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dphi = 0.0;
  double dpsi = 0.0;
  double dtheta = 0.0;

  bool is_zero() const {
    return dx == 0.0 && dy == 0.0 && dz == 0.0 && dphi == 0.0 && dpsi == 0.0 &&
           dtheta == 0.0;
  }
  /// True when every component lies inside the perturbation ranges
  /// (dx, dy in [-2, 2] mm; dz in [-1, 1] mm; angles in [-2, 2] deg).
  bool within_limits() const;
};

struct MembraneParams {
  double falloff_radius = 8.0;     // mm, cosine taper width beyond the contact strip
  double contact_halfwidth = 1.0;  // mm, half-width of the full-weight strip
  double max_depth = 3.0;          // mm, deeper indentation is clamped
  double shear_coupling = 0.25;    // fraction of tangential motion retained
  double pad_depth = 10.0;         // mm, camera to pin-tip distance
  double displacement_gain = 0.5;  // mm of pin travel per mm of indentation
  double tilt_lever = 1.0;         // mm, distance over which a unit slope doubles depth
  double sign_softening = 0.5;     // mm, smooths the splay direction across the edge line

  void validate() const;
};

/// Rest and displaced marker positions of the 5x9 pin array in the sensor
/// plane (mm, origin at the lattice centre, x along the 9 columns).
struct PinField {
  static constexpr int kRows = 5;
  static constexpr int kCols = 9;
  static constexpr int kCount = kRows * kCols;

  std::array<Vec2, kCount> rest{};
  std::array<Vec2, kCount> displaced{};
  double pin_radius = 0.0;
  double pitch = 0.0;
  /// Set by deform_pins when the requested depth exceeded max_depth.
  bool depth_clamped = false;

  static constexpr int index(int row, int col) { return row * kCols + col; }
  Vec2 displacement(int i) const {
    return {displaced[i].x - rest[i].x, displaced[i].y - rest[i].y};
  }
};

PinField rest_pin_field(double pitch, double pin_radius);

/// Contact weight of a point at perpendicular distance `distance` from the
/// edge line: 1 inside the contact strip, cosine taper to 0 over the falloff.
double contact_weight(double distance, const MembraneParams& params);

PinField deform_pins(const PinField& field, const EdgePose& pose,
                     const ShearPerturbation& shear,
                     const MembraneParams& params);

/// Pinhole camera behind the pad looking along the pad normal. The pin plane
/// sits `pad_depth` mm in front of the lens, so the sensor-plane scale is
/// focal_px / pad_depth pixels per mm.
struct CameraModel {
  int width = 480;
  int height = 270;
  double focal_px = 266.6666666666667;
  double background = 0.14;
  double marker = 0.92;
  int supersample = 4;  // per-axis samples for disc anti-aliasing
  // Fixed pseudo-random skin texture carried by the membrane between pins.
  double texture_amplitude = 0.12;
  double texture_wavelength_mm = 0.6;
  int texture_components = 16;
  std::uint64_t texture_seed = 7;

  double pixels_per_mm(double pad_depth) const { return focal_px / pad_depth; }
  void validate() const;
};

TactileImage render_image(const PinField& field, const CameraModel& camera,
                          double pad_depth);

struct SensorConfig {
  double pitch = 2.0;
  double pin_radius = 0.375;
  MembraneParams membrane;
  CameraModel camera;
  double noise_sigma = 2.0 / 255.0;

  void validate() const;
};

/// deform_pins followed by render_image plus seeded Gaussian pixel noise
/// (clamped to [0, 1]). Returns a raw-stage image.
TactileImage synthesize_contact(const EdgePose& pose,
                                const ShearPerturbation& shear,
                                const SensorConfig& config,
                                std::uint64_t noise_seed);

/// Noise-free render of the undeformed pad.
TactileImage render_rest(const SensorConfig& config);

}  // namespace tacthand
