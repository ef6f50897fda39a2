#pragma once

#include <array>
#include <string_view>

#include "tacthand/tactile_sim.hpp"

namespace tacthand::posenet {

inline constexpr int kPoseOutputs = 5;

/// Labelled pose components, in network output order.
enum class PoseComponent { x = 0, z = 1, phi = 2, psi = 3, theta = 4 };

inline constexpr std::array<std::string_view, kPoseOutputs> kComponentNames{"x", "z", "phi",
                                                                            "psi", "theta"};
inline constexpr std::array<std::string_view, kPoseOutputs> kComponentUnits{"mm", "mm", "deg",
                                                                            "deg", "deg"};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double mid() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Label ranges used to draw training poses and to scale targets to [-1, 1].
struct PoseRanges {
  std::array<Interval, kPoseOutputs> bounds{
      Interval{-6.0, 6.0}, Interval{0.0, 3.0}, Interval{-5.0, 5.0}, Interval{-10.0, 10.0},
      Interval{-45.0, 45.0}};

  const Interval& operator[](PoseComponent c) const { return bounds[static_cast<int>(c)]; }
  void validate() const;
  friend bool operator==(const PoseRanges&, const PoseRanges&) = default;
};

/// Uniform draw ranges for the unlabelled shear perturbation.
struct ShearRanges {
  double translation = 2.0;  // dx, dy in [-t, t] mm
  double normal = 1.0;       // dz in [-n, n] mm
  double rotation = 2.0;     // dphi, dpsi, dtheta in [-r, r] deg

  void validate() const;
};

/// Five-component pose estimate (no along-edge y).
using PoseVector = std::array<double, kPoseOutputs>;

PoseVector label_of(const EdgePose& pose);
EdgePose pose_of(const PoseVector& label);

PoseVector normalize(const PoseVector& label, const PoseRanges& ranges);
PoseVector denormalize(const PoseVector& normalized, const PoseRanges& ranges);

}  // namespace tacthand::posenet
