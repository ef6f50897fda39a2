#include "tacthand/posenet/labels.hpp"

#include "tacthand/errors.hpp"

namespace tacthand::posenet {

void PoseRanges::validate() const {
  for (int i = 0; i < kPoseOutputs; ++i)
    if (!(bounds[i].hi > bounds[i].lo))
      throw ParameterError("empty label range for " + std::string(kComponentNames[i]));
}

void ShearRanges::validate() const {
  if (translation < 0.0 || normal < 0.0 || rotation < 0.0)
    throw ParameterError("shear ranges must be non-negative");
}

PoseVector label_of(const EdgePose& pose) {
  return {pose.x, pose.z, pose.phi, pose.psi, pose.theta};
}

EdgePose pose_of(const PoseVector& label) {
  EdgePose pose;
  pose.x = label[0];
  pose.z = label[1];
  pose.phi = label[2];
  pose.psi = label[3];
  pose.theta = label[4];
  return pose;
}

PoseVector normalize(const PoseVector& label, const PoseRanges& ranges) {
  PoseVector out{};
  for (int i = 0; i < kPoseOutputs; ++i)
    out[i] = (label[i] - ranges.bounds[i].mid()) / ranges.bounds[i].half_width();
  return out;
}

PoseVector denormalize(const PoseVector& normalized, const PoseRanges& ranges) {
  PoseVector out{};
  for (int i = 0; i < kPoseOutputs; ++i)
    out[i] = normalized[i] * ranges.bounds[i].half_width() + ranges.bounds[i].mid();
  return out;
}

}  // namespace tacthand::posenet
