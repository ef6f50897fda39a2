#include "tacthand/config_json.hpp"

#include <string>

#include "tacthand/errors.hpp"

namespace tacthand {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* section) {
  if (!j.is_object()) throw ParameterError(std::string(section) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known)
      throw ParameterError("unknown key '" + item.key() + "' in " + section + " config");
  }
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& value) {
  if (j.contains(key)) j.at(key).get_to(value);
}

}  // namespace

void to_json(nlohmann::json& j, const MembraneParams& p) {
  j = {{"falloff_radius", p.falloff_radius},
       {"contact_halfwidth", p.contact_halfwidth},
       {"max_depth", p.max_depth},
       {"shear_coupling", p.shear_coupling},
       {"pad_depth", p.pad_depth},
       {"displacement_gain", p.displacement_gain},
       {"tilt_lever", p.tilt_lever},
       {"sign_softening", p.sign_softening}};
}

void from_json(const nlohmann::json& j, MembraneParams& p) {
  reject_unknown_keys(j,
                      {"falloff_radius", "contact_halfwidth", "max_depth", "shear_coupling",
                       "pad_depth", "displacement_gain", "tilt_lever", "sign_softening"},
                      "membrane");
  read(j, "falloff_radius", p.falloff_radius);
  read(j, "contact_halfwidth", p.contact_halfwidth);
  read(j, "max_depth", p.max_depth);
  read(j, "shear_coupling", p.shear_coupling);
  read(j, "pad_depth", p.pad_depth);
  read(j, "displacement_gain", p.displacement_gain);
  read(j, "tilt_lever", p.tilt_lever);
  read(j, "sign_softening", p.sign_softening);
}

void to_json(nlohmann::json& j, const CameraModel& c) {
  j = {{"width", c.width},
       {"height", c.height},
       {"focal_px", c.focal_px},
       {"background", c.background},
       {"marker", c.marker},
       {"supersample", c.supersample},
       {"texture_amplitude", c.texture_amplitude},
       {"texture_wavelength_mm", c.texture_wavelength_mm},
       {"texture_components", c.texture_components},
       {"texture_seed", c.texture_seed}};
}

void from_json(const nlohmann::json& j, CameraModel& c) {
  reject_unknown_keys(j,
                      {"width", "height", "focal_px", "background", "marker", "supersample",
                       "texture_amplitude", "texture_wavelength_mm", "texture_components",
                       "texture_seed"},
                      "camera");
  read(j, "width", c.width);
  read(j, "height", c.height);
  read(j, "focal_px", c.focal_px);
  read(j, "background", c.background);
  read(j, "marker", c.marker);
  read(j, "supersample", c.supersample);
  read(j, "texture_amplitude", c.texture_amplitude);
  read(j, "texture_wavelength_mm", c.texture_wavelength_mm);
  read(j, "texture_components", c.texture_components);
  read(j, "texture_seed", c.texture_seed);
}

void to_json(nlohmann::json& j, const SensorConfig& c) {
  j = {{"pitch", c.pitch},
       {"pin_radius", c.pin_radius},
       {"noise_sigma", c.noise_sigma},
       {"membrane", c.membrane},
       {"camera", c.camera}};
}

void from_json(const nlohmann::json& j, SensorConfig& c) {
  reject_unknown_keys(j, {"pitch", "pin_radius", "noise_sigma", "membrane", "camera"}, "sensor");
  read(j, "pitch", c.pitch);
  read(j, "pin_radius", c.pin_radius);
  read(j, "noise_sigma", c.noise_sigma);
  if (j.contains("membrane")) from_json(j.at("membrane"), c.membrane);
  if (j.contains("camera")) from_json(j.at("camera"), c.camera);
}

void to_json(nlohmann::json& j, const SsimOptions& o) {
  j = {{"window", o.window},
       {"kind", o.kind == SsimWindow::gaussian ? "gaussian" : "uniform"},
       {"gaussian_sigma", o.gaussian_sigma},
       {"sample_covariance", o.sample_covariance},
       {"data_range", o.data_range},
       {"k1", o.k1},
       {"k2", o.k2}};
}

void from_json(const nlohmann::json& j, SsimOptions& o) {
  reject_unknown_keys(
      j, {"window", "kind", "gaussian_sigma", "sample_covariance", "data_range", "k1", "k2"},
      "ssim");
  read(j, "window", o.window);
  if (j.contains("kind")) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
      o.kind = SsimWindow::uniform;
    } else if (kind == "gaussian") {
      o.kind = SsimWindow::gaussian;
    } else {
      throw ParameterError("unknown SSIM window kind '" + kind + "'");
    }
  }
  read(j, "gaussian_sigma", o.gaussian_sigma);
  read(j, "sample_covariance", o.sample_covariance);
  read(j, "data_range", o.data_range);
  read(j, "k1", o.k1);
  read(j, "k2", o.k2);
}

void to_json(nlohmann::json& j, const ProcessingConfig& c) {
  j = {{"threshold_window", c.threshold_window},
       {"threshold_offset", c.threshold_offset},
       {"ssim", c.ssim}};
}

void from_json(const nlohmann::json& j, ProcessingConfig& c) {
  reject_unknown_keys(j, {"threshold_window", "threshold_offset", "ssim"}, "imaging");
  read(j, "threshold_window", c.threshold_window);
  read(j, "threshold_offset", c.threshold_offset);
  if (j.contains("ssim")) from_json(j.at("ssim"), c.ssim);
}

namespace posenet {

void to_json(nlohmann::json& j, const PoseRanges& r) {
  j = nlohmann::json::object();
  for (int i = 0; i < kPoseOutputs; ++i)
    j[std::string(kComponentNames[i])] = {r.bounds[i].lo, r.bounds[i].hi};
}

void from_json(const nlohmann::json& j, PoseRanges& r) {
  reject_unknown_keys(j, {"x", "z", "phi", "psi", "theta"}, "ranges");
  for (int i = 0; i < kPoseOutputs; ++i) {
    const std::string key(kComponentNames[i]);
    if (!j.contains(key)) continue;
    const auto& pair = j.at(key);
    if (!pair.is_array() || pair.size() != 2)
      throw ParameterError("range '" + key + "' must be a [lo, hi] pair");
    r.bounds[i] = {pair[0].get<double>(), pair[1].get<double>()};
  }
}

void to_json(nlohmann::json& j, const ShearRanges& r) {
  j = {{"translation", r.translation}, {"normal", r.normal}, {"rotation", r.rotation}};
}

void from_json(const nlohmann::json& j, ShearRanges& r) {
  reject_unknown_keys(j, {"translation", "normal", "rotation"}, "shear");
  read(j, "translation", r.translation);
  read(j, "normal", r.normal);
  read(j, "rotation", r.rotation);
}

}  // namespace posenet

}  // namespace tacthand
