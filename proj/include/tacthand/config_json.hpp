#pragma once

// JSON mapping for the simulation and image-pipeline settings. Readers start
// from the current value, so a partial object overrides only the keys it
// names; unknown keys are rejected.

#include "json.hpp"

#include "tacthand/imaging.hpp"
#include "tacthand/posenet/labels.hpp"
#include "tacthand/tactile_sim.hpp"

namespace tacthand {

void to_json(nlohmann::json& j, const MembraneParams& p);
void from_json(const nlohmann::json& j, MembraneParams& p);
void to_json(nlohmann::json& j, const CameraModel& c);
void from_json(const nlohmann::json& j, CameraModel& c);
void to_json(nlohmann::json& j, const SensorConfig& c);
void from_json(const nlohmann::json& j, SensorConfig& c);
void to_json(nlohmann::json& j, const SsimOptions& o);
void from_json(const nlohmann::json& j, SsimOptions& o);
void to_json(nlohmann::json& j, const ProcessingConfig& c);
void from_json(const nlohmann::json& j, ProcessingConfig& c);

/// Throws ParameterError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* section);

namespace posenet {
void to_json(nlohmann::json& j, const PoseRanges& r);
void from_json(const nlohmann::json& j, PoseRanges& r);
void to_json(nlohmann::json& j, const ShearRanges& r);
void from_json(const nlohmann::json& j, ShearRanges& r);
}  // namespace posenet

}  // namespace tacthand
