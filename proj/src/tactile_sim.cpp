#include "tacthand/tactile_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <numbers>
#include <random>

#include "tacthand/errors.hpp"

namespace tacthand {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Membrane displacement at an arbitrary sensor-plane point, bilinearly
// interpolated from the pin displacements over the rest lattice (held
// constant beyond the outermost pins).
Vec2 interpolate_displacement(const PinField& field, double x, double y) {
  const double fc = std::clamp(x / field.pitch + (PinField::kCols - 1) / 2.0, 0.0,
                               PinField::kCols - 1.0);
  const double fr = std::clamp(y / field.pitch + (PinField::kRows - 1) / 2.0, 0.0,
                               PinField::kRows - 1.0);
  const int c0 = std::min(static_cast<int>(fc), PinField::kCols - 2);
  const int r0 = std::min(static_cast<int>(fr), PinField::kRows - 2);
  const double tc = fc - c0;
  const double tr = fr - r0;
  const Vec2 d00 = field.displacement(PinField::index(r0, c0));
  const Vec2 d01 = field.displacement(PinField::index(r0, c0 + 1));
  const Vec2 d10 = field.displacement(PinField::index(r0 + 1, c0));
  const Vec2 d11 = field.displacement(PinField::index(r0 + 1, c0 + 1));
  auto mix = [&](double a, double b, double c, double d) {
    return (1 - tr) * ((1 - tc) * a + tc * b) + tr * ((1 - tc) * c + tc * d);
  };
  return {mix(d00.x, d01.x, d10.x, d11.x), mix(d00.y, d01.y, d10.y, d11.y)};
}

struct TextureWave {
  double kx, ky, phase;
};

// Rest-state skin texture tabulated on a grid twice as fine as the raw
// pixels, with a margin for membrane travel. Built once per camera setup.
class TextureTable {
 public:
  TextureTable(const CameraModel& camera, double scale);
  double sample(double x_mm, double y_mm) const;

 private:
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double step_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<float> values_;
};

std::vector<TextureWave> texture_waves(const CameraModel& camera);

std::shared_ptr<const TextureTable> skin_texture(const CameraModel& camera, double scale) {
  using Key = std::tuple<int, int, double, double, int, std::uint64_t, double>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const TextureTable>> cache;
  const Key key{camera.width, camera.height, scale, camera.texture_wavelength_mm,
                camera.texture_components, camera.texture_seed, camera.texture_amplitude};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<TextureTable>(camera, scale)).first;
  return it->second;
}

TextureTable::TextureTable(const CameraModel& camera, double scale) {
  constexpr double kMarginMm = 6.0;
  step_ = 0.5 / scale;
  origin_x_ = -0.5 * camera.width / scale - kMarginMm;
  origin_y_ = -0.5 * camera.height / scale - kMarginMm;
  nx_ = static_cast<int>(std::ceil(-2.0 * origin_x_ / step_)) + 2;
  ny_ = static_cast<int>(std::ceil(-2.0 * origin_y_ / step_)) + 2;
  const auto waves = texture_waves(camera);
  const double norm = std::sqrt(2.0 / static_cast<double>(waves.size()));
  values_.resize(static_cast<std::size_t>(nx_) * ny_);
  for (int j = 0; j < ny_; ++j) {
    const double v = origin_y_ + j * step_;
    for (int i = 0; i < nx_; ++i) {
      const double u = origin_x_ + i * step_;
      double g = 0.0;
      for (const TextureWave& wave : waves) g += std::cos(wave.kx * u + wave.ky * v + wave.phase);
      values_[static_cast<std::size_t>(j) * nx_ + i] =
          static_cast<float>(camera.texture_amplitude * std::tanh(norm * g));
    }
  }
}

double TextureTable::sample(double x_mm, double y_mm) const {
  const double fx = std::clamp((x_mm - origin_x_) / step_, 0.0, nx_ - 1.000001);
  const double fy = std::clamp((y_mm - origin_y_) / step_, 0.0, ny_ - 1.000001);
  const int i = static_cast<int>(fx);
  const int j = static_cast<int>(fy);
  const double tx = fx - i;
  const double ty = fy - j;
  const float* row0 = values_.data() + static_cast<std::size_t>(j) * nx_ + i;
  const float* row1 = row0 + nx_;
  return (1 - ty) * ((1 - tx) * row0[0] + tx * row0[1]) + ty * ((1 - tx) * row1[0] + tx * row1[1]);
}

std::vector<TextureWave> texture_waves(const CameraModel& camera) {
  std::mt19937_64 rng(camera.texture_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TextureWave> waves;
  for (int i = 0; i < camera.texture_components; ++i) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double wavelength = camera.texture_wavelength_mm * (0.7 + 0.6 * unit(rng));
    const double k = 2.0 * std::numbers::pi / wavelength;
    waves.push_back({k * std::cos(angle), k * std::sin(angle),
                     2.0 * std::numbers::pi * unit(rng)});
  }
  return waves;
}

}  // namespace

bool ShearPerturbation::within_limits() const {
  auto inside = [](double v, double limit) { return v >= -limit && v <= limit; };
  return inside(dx, 2.0) && inside(dy, 2.0) && inside(dz, 1.0) &&
         inside(dphi, 2.0) && inside(dpsi, 2.0) && inside(dtheta, 2.0);
}

void MembraneParams::validate() const {
  if (!(falloff_radius > 0.0)) throw ParameterError("falloff_radius must be > 0");
  if (!(contact_halfwidth >= 0.0)) throw ParameterError("contact_halfwidth must be >= 0");
  if (!(max_depth > 0.0)) throw ParameterError("max_depth must be > 0");
  if (!(shear_coupling >= 0.0 && shear_coupling <= 1.0))
    throw ParameterError("shear_coupling must lie in [0, 1]");
  if (!(pad_depth >= 10.0))
    throw ParameterError("pad_depth must be >= 10 mm for every pin to stay in view");
  if (!(displacement_gain > 0.0)) throw ParameterError("displacement_gain must be > 0");
  if (!(tilt_lever > 0.0)) throw ParameterError("tilt_lever must be > 0");
  if (!(sign_softening > 0.0)) throw ParameterError("sign_softening must be > 0");
}

PinField rest_pin_field(double pitch, double pin_radius) {
  if (!(pitch > 0.0)) throw ParameterError("pin pitch must be > 0");
  if (!(pin_radius > 0.0)) throw ParameterError("pin radius must be > 0");

  PinField field;
  field.pitch = pitch;
  field.pin_radius = pin_radius;
  constexpr double kColCentre = (PinField::kCols - 1) / 2.0;
  constexpr double kRowCentre = (PinField::kRows - 1) / 2.0;
  for (int row = 0; row < PinField::kRows; ++row) {
    for (int col = 0; col < PinField::kCols; ++col) {
      const Vec2 p{(col - kColCentre) * pitch, (row - kRowCentre) * pitch};
      field.rest[PinField::index(row, col)] = p;
    }
  }
  field.displaced = field.rest;
  return field;
}

double contact_weight(double distance, const MembraneParams& params) {
  const double d = std::abs(distance);
  if (d <= params.contact_halfwidth) return 1.0;
  const double u = (d - params.contact_halfwidth) / params.falloff_radius;
  if (u >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

PinField deform_pins(const PinField& field, const EdgePose& pose,
                     const ShearPerturbation& shear,
                     const MembraneParams& params) {
  params.validate();
  if (!(pose.z >= 0.0)) throw ParameterError("indentation depth z must be >= 0");

  PinField out = field;
  out.depth_clamped = pose.z > params.max_depth;
  const double depth = std::min(pose.z, params.max_depth);
  if (depth == 0.0 && shear.is_zero()) {
    out.displaced = field.displaced;
    return out;
  }

  const double yaw = pose.theta * kDegToRad;
  const Vec2 normal{std::cos(yaw), std::sin(yaw)};
  const Vec2 along{-std::sin(yaw), std::cos(yaw)};
  const double roll_slope = std::tan(pose.phi * kDegToRad);
  const double pitch_slope = std::tan(pose.psi * kDegToRad);

  const double twist = shear.dtheta * kDegToRad;
  const double twist_cos = std::cos(twist);
  const double twist_sin = std::sin(twist);
  const double drag_normal = std::tan(shear.dphi * kDegToRad);
  const double drag_along = std::tan(shear.dpsi * kDegToRad);
  const double eps2 = params.sign_softening * params.sign_softening;

  for (int i = 0; i < PinField::kCount; ++i) {
    const Vec2 p = field.displaced[i];
    const Vec2 r{p.x - pose.x, p.y - pose.y};
    const double s = r.x * normal.x + r.y * normal.y;
    const double a = r.x * along.x + r.y * along.y;
    const double w = contact_weight(s, params);
    if (w == 0.0) continue;

    // Tilted stimulus: local depth varies linearly across (roll) and along
    // (pitch) the edge, scaled by the nominal depth so z = 0 stays contact-free.
    const double tilt = 1.0 + (s * roll_slope + a * pitch_slope) / params.tilt_lever;
    const double local_depth = depth * std::max(0.0, tilt);

    // Skin splays away from the edge line.
    const double side = s / std::sqrt(s * s + eps2);
    const double splay = params.displacement_gain * local_depth * w * side;
    double dx = splay * normal.x;
    double dy = splay * normal.y;

    // Retained tangential part of the perturbation motion. dz is a pure
    // normal motion and leaves no tangential trace.
    const double k = params.shear_coupling * w;
    if (k != 0.0) {
      dx += k * shear.dx;
      dy += k * shear.dy;
      dx += k * ((twist_cos - 1.0) * r.x - twist_sin * r.y);
      dy += k * (twist_sin * r.x + (twist_cos - 1.0) * r.y);
      dx += k * local_depth * (drag_normal * normal.x + drag_along * along.x);
      dy += k * local_depth * (drag_normal * normal.y + drag_along * along.y);
    }
    out.displaced[i] = {p.x + dx, p.y + dy};
  }
  return out;
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw ParameterError("camera resolution must be positive");
  if (!(focal_px > 0.0)) throw ParameterError("focal_px must be > 0");
  if (supersample < 1) throw ParameterError("supersample must be >= 1");
  if (!(background >= 0.0 && background <= 1.0 && marker >= 0.0 && marker <= 1.0))
    throw ParameterError("camera intensities must lie in [0, 1]");
  if (!(texture_amplitude >= 0.0)) throw ParameterError("texture_amplitude must be >= 0");
  if (!(texture_wavelength_mm > 0.0)) throw ParameterError("texture_wavelength_mm must be > 0");
  if (texture_components < 0) throw ParameterError("texture_components must be >= 0");
}

TactileImage render_image(const PinField& field, const CameraModel& camera,
                          double pad_depth) {
  camera.validate();
  if (!(pad_depth > 0.0)) throw ParameterError("pad_depth must be > 0");

  const int w = camera.width;
  const int h = camera.height;
  const double scale = camera.pixels_per_mm(pad_depth);
  const double radius_px = field.pin_radius * scale;
  const double r2 = radius_px * radius_px;
  const int ss = camera.supersample;
  const double inv_samples = 1.0 / (ss * ss);

  std::vector<double> coverage(static_cast<std::size_t>(w) * h, 0.0);
  for (const Vec2& pin : field.displaced) {
    const double cx = 0.5 * w + scale * pin.x;
    const double cy = 0.5 * h + scale * pin.y;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius_px)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(cx + radius_px)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius_px)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(cy + radius_px)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        int inside = 0;
        for (int sy = 0; sy < ss; ++sy) {
          const double py = y + (sy + 0.5) / ss - cy;
          for (int sx = 0; sx < ss; ++sx) {
            const double px = x + (sx + 0.5) / ss - cx;
            if (px * px + py * py <= r2) ++inside;
          }
        }
        double& c = coverage[static_cast<std::size_t>(y) * w + x];
        c = std::max(c, inside * inv_samples);
      }
    }
  }

  std::vector<double> texture(coverage.size(), 0.0);
  if (camera.texture_amplitude > 0.0 && camera.texture_components > 0) {
    const auto table = skin_texture(camera, scale);
    for (int y = 0; y < h; ++y) {
      const double ym = (y + 0.5 - 0.5 * h) / scale;
      for (int x = 0; x < w; ++x) {
        const double xm = (x + 0.5 - 0.5 * w) / scale;
        // Backward warp: sample the rest texture where this skin point came from.
        const Vec2 d = interpolate_displacement(field, xm, ym);
        texture[static_cast<std::size_t>(y) * w + x] = table->sample(xm - d.x, ym - d.y);
      }
    }
  }

  std::vector<double> pixels(coverage.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double base = std::clamp(
        camera.background + texture[i], 0.0, camera.marker);
    pixels[i] = base + (camera.marker - base) * coverage[i];
  }
  return TactileImage(w, h, Stage::raw, std::move(pixels));
}

void SensorConfig::validate() const {
  if (!(pitch > 0.0)) throw ParameterError("pin pitch must be > 0");
  if (!(pin_radius > 0.0)) throw ParameterError("pin radius must be > 0");
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be >= 0");
  membrane.validate();
  camera.validate();
}

TactileImage synthesize_contact(const EdgePose& pose,
                                const ShearPerturbation& shear,
                                const SensorConfig& config,
                                std::uint64_t noise_seed) {
  config.validate();
  const PinField rest = rest_pin_field(config.pitch, config.pin_radius);
  const PinField field = deform_pins(rest, pose, shear, config.membrane);
  TactileImage image = render_image(field, config.camera, config.membrane.pad_depth);
  if (config.noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (double& v : image.pixels()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  return image;
}

TactileImage render_rest(const SensorConfig& config) {
  config.validate();
  return render_image(rest_pin_field(config.pitch, config.pin_radius), config.camera,
                      config.membrane.pad_depth);
}

}  // namespace tacthand
