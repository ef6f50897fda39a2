#include "tacthand/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tacthand/config_json.hpp"
#include "tacthand/errors.hpp"
#include "tacthand/plot.hpp"
#include "tacthand/seeding.hpp"

namespace tacthand::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kExp1Stream = 30;
constexpr std::uint64_t kExp3aStream = 31;
constexpr std::uint64_t kExp3bStream = 32;

const std::array<plot::Rgb, 5> kPalette{plot::kBlue, plot::kOrange, plot::kGreen, plot::kRed,
                                        plot::kPurple};

json pose_json(const EdgePose& p) {
  return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"phi", p.phi}, {"psi", p.psi}, {"theta", p.theta}};
}

void apply_pose(const json& j, EdgePose& p) {
  reject_unknown_keys(j, {"x", "y", "z", "phi", "psi", "theta"}, "contact_pose");
  if (j.contains("x")) p.x = j.at("x").get<double>();
  if (j.contains("y")) p.y = j.at("y").get<double>();
  if (j.contains("z")) p.z = j.at("z").get<double>();
  if (j.contains("phi")) p.phi = j.at("phi").get<double>();
  if (j.contains("psi")) p.psi = j.at("psi").get<double>();
  if (j.contains("theta")) p.theta = j.at("theta").get<double>();
}

template <typename T>
void read_if(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

json check_json(const Check& c) {
  return {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}};
}

std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw StageError(std::string(what) + " not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<double> column(const TrajectoryLog& log, double (*get)(const LoopRow&)) {
  std::vector<double> out;
  out.reserve(log.rows.size());
  for (const LoopRow& r : log.rows) out.push_back(get(r));
  return out;
}

double pose_component(const LoopRow& r, posenet::PoseComponent c) {
  return r.pose ? (*r.pose)[static_cast<int>(c)] : std::numeric_limits<double>::quiet_NaN();
}

// Runs cycles until the loop clock reaches `t_end`, so consecutive segments
// add up to floor(total / cycle_time) rows.
void run_until(ClosedLoop& loop, const Policy& policy, double t_end) {
  const std::size_t target = cycle_count(t_end, loop.config().cycle_time);
  while (loop.cycles() < target) loop.cycle(policy);
}

// Average ranks, ties sharing the mean of their positions.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void require_same_size(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("series lengths differ");
  if (a.size() < 2) throw ParameterError("at least two points are needed");
}

posenet::Model load_trained_model(const ArtifactPaths& artifacts) {
  return posenet::load_model(artifacts.model);
}

plot::Series series(std::string label, std::vector<double> x, std::vector<double> y, plot::Rgb c) {
  plot::Series s;
  s.label = std::move(label);
  s.x = std::move(x);
  s.y = std::move(y);
  s.color = c;
  return s;
}

// u, e_SSIM and predicted pose panels for one closed-loop log.
plot::Figure loop_figure(const std::string& title, const TrajectoryLog& log, bool with_pose,
                         const std::vector<double>& z_references, bool with_depth,
                         double gate_threshold) {
  const auto t = column(log, [](const LoopRow& r) { return r.t; });
  plot::Figure fig;
  fig.title = title;
  fig.x_label = "t (s)";
  fig.panels.push_back({"u (counts)", {series("u", t, column(log, [](const LoopRow& r) { return r.u; }),
                                              plot::kBlue)}, {}});
  fig.panels.push_back(
      {"e_ssim", {series("e_ssim", t, column(log, [](const LoopRow& r) { return r.e_ssim; }),
                         plot::kOrange)},
       {gate_threshold}});
  if (with_pose) {
    plot::Panel z{"z (mm)", {}, z_references};
    z.series.push_back(series("z_hat", t, column(log, [](const LoopRow& r) {
                                return pose_component(r, posenet::PoseComponent::z);
                              }),
                              plot::kGreen));
    if (with_depth)
      z.series.push_back(
          series("depth", t, column(log, [](const LoopRow& r) { return r.depth; }), plot::kGray));
    fig.panels.push_back(std::move(z));
    plot::Panel angles{"angles (deg)", {}, {}};
    angles.series.push_back(series("phi_hat", t, column(log, [](const LoopRow& r) {
                                     return pose_component(r, posenet::PoseComponent::phi);
                                   }),
                                   plot::kRed));
    angles.series.push_back(series("psi_hat", t, column(log, [](const LoopRow& r) {
                                     return pose_component(r, posenet::PoseComponent::psi);
                                   }),
                                   plot::kPurple));
    angles.series.push_back(series("theta_hat", t, column(log, [](const LoopRow& r) {
                                     return pose_component(r, posenet::PoseComponent::theta);
                                   }),
                                   plot::kBlue));
    fig.panels.push_back(std::move(angles));
    fig.panels.push_back({"x (mm)", {series("x_hat", t, column(log, [](const LoopRow& r) {
                                              return pose_component(
                                                  r, posenet::PoseComponent::x);
                                            }),
                                            plot::kOrange)},
                          {}});
  }
  return fig;
}

}  // namespace

std::string_view to_string(Profile p) { return p == Profile::desk ? "desk" : "full"; }

Profile profile_from_string(std::string_view name) {
  if (name == "desk") return Profile::desk;
  if (name == "full") return Profile::full;
  throw ParameterError("unknown profile '" + std::string(name) + "' (expected desk or full)");
}

Config Config::for_profile(Profile p) {
  Config c;
  c.profile = p;
  if (p == Profile::full) {
    c.network = posenet::NetworkConfig::full_profile();
    c.dataset.n_samples = 10000;
  } else {
    c.network = posenet::NetworkConfig::desk_profile();
  }
  return c;
}

const PlantModel& Config::object(ObjectId id) const {
  for (const PlantModel& m : objects)
    if (m.object_id == id) return m;
  throw ParameterError("no plant model for object " + std::string(tacthand::to_string(id)));
}

posenet::DatasetConfig Config::dataset_config() const {
  posenet::DatasetConfig d;
  d.ranges = dataset.ranges;
  d.shear = dataset.shear;
  d.sensor = sensor;
  d.processing = imaging;
  d.threads = dataset.threads;
  return d;
}

void Config::validate() const {
  dataset_config().validate();
  network.validate();
  controller.validate();
  for (const PlantModel& m : objects) m.validate();
  if (dataset.n_samples < 10) throw ParameterError("dataset.n_samples must be >= 10");
  if (!(dataset.train_fraction > 0.0) || !(dataset.validation_fraction >= 0.0) ||
      dataset.train_fraction + dataset.validation_fraction >= 1.0)
    throw ParameterError("dataset fractions must be positive and leave room for a test set");
  if (!(exp1.duration > 0.0) || exp1.convergence_budget <= 0 || exp1.hold_cycles <= 0 ||
      !(exp1.tolerance > 0.0) || exp1.final_window <= 0 || !(exp1.final_max_du >= 0.0))
    throw ParameterError("exp1 settings must be positive");
  if (!(exp3a.closure >= 0.0) || !(exp3a.ramp_rate > 0.0) || !(exp3a.ramp_duration > 0.0))
    throw ParameterError("exp3a closure must be >= 0 and the ramp rate and duration > 0");
  if (!(exp3a.min_r2 >= 0.0 && exp3a.min_r2 <= 1.0))
    throw ParameterError("exp3a.min_r2 must lie in [0, 1]");
  if (exp3b.setpoints.empty()) throw ParameterError("exp3b.setpoints must not be empty");
  if (!(exp3b.closure >= 0.0) || !(exp3b.segment > 0.0) || !(exp3b.tolerance > 0.0) ||
      !(exp3b.steady_fraction > 0.0 && exp3b.steady_fraction <= 1.0))
    throw ParameterError("exp3b segment, tolerance and steady_fraction must be positive");
  for (double m : eval.max_mae)
    if (!(m > 0.0)) throw ParameterError("eval.max_mae entries must be > 0");
}

json to_json(const Config& c) {
  json j;
  j["profile"] = std::string(to_string(c.profile));
  j["seed"] = c.seed;
  j["sensor"] = c.sensor;
  j["imaging"] = c.imaging;
  j["dataset"] = {{"n_samples", c.dataset.n_samples},
                  {"ranges", c.dataset.ranges},
                  {"shear", c.dataset.shear},
                  {"threads", c.dataset.threads},
                  {"train_fraction", c.dataset.train_fraction},
                  {"validation_fraction", c.dataset.validation_fraction}};
  posenet::NetworkConfig net = c.network;
  net.seed = c.seed;
  j["network"] = net;
  j["controller"] = {{"gain", c.controller.gain},
                     {"setpoint", c.controller.setpoint},
                     {"setpoint_z", c.controller.setpoint_z},
                     {"feedback_sign", c.controller.feedback_sign},
                     {"cycle_time", c.controller.cycle_time},
                     {"gate_threshold", c.controller.gate_threshold}};
  json objects = json::object();
  for (const PlantModel& m : c.objects)
    objects[std::string(tacthand::to_string(m.object_id))] = {
        {"contact_onset_u", m.contact_onset_u},
        {"depth_gain", m.depth_gain},
        {"max_depth", m.max_depth},
        {"contact_pose", pose_json(m.contact_pose)}};
  j["objects"] = objects;
  j["exp1"] = {{"duration", c.exp1.duration},
               {"convergence_budget", c.exp1.convergence_budget},
               {"hold_cycles", c.exp1.hold_cycles},
               {"tolerance", c.exp1.tolerance},
               {"final_window", c.exp1.final_window},
               {"final_max_du", c.exp1.final_max_du}};
  j["exp3a"] = {{"object", std::string(tacthand::to_string(c.exp3a.object))},
                {"closure", c.exp3a.closure},
                {"ramp_rate", c.exp3a.ramp_rate},
                {"ramp_duration", c.exp3a.ramp_duration},
                {"min_r2", c.exp3a.min_r2}};
  j["exp3b"] = {{"object", std::string(tacthand::to_string(c.exp3b.object))},
                {"closure", c.exp3b.closure},
                {"setpoints", c.exp3b.setpoints},
                {"segment", c.exp3b.segment},
                {"steady_fraction", c.exp3b.steady_fraction},
                {"tolerance", c.exp3b.tolerance}};
  json mae = json::object();
  for (int k = 0; k < posenet::kPoseOutputs; ++k)
    mae[std::string(posenet::kComponentNames[k])] = c.eval.max_mae[k];
  j["eval"] = {{"max_mae", mae}};
  j["artifacts"] = c.artifacts.generic_string();
  return j;
}

void apply_json(const json& j, Config& c) {
  if (!j.is_object()) throw ParameterError("configuration must be a JSON object");
  reject_unknown_keys(j,
                      {"profile", "seed", "sensor", "imaging", "dataset", "network", "controller",
                       "objects", "exp1", "exp3a", "exp3b", "eval", "artifacts"},
                      "config");
  try {
    if (j.contains("profile")) c.profile = profile_from_string(j.at("profile").get<std::string>());
    read_if(j, "seed", c.seed);
    if (j.contains("sensor")) from_json(j.at("sensor"), c.sensor);
    if (j.contains("imaging")) from_json(j.at("imaging"), c.imaging);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown_keys(d,
                          {"n_samples", "ranges", "shear", "threads", "train_fraction",
                           "validation_fraction"},
                          "dataset");
      read_if(d, "n_samples", c.dataset.n_samples);
      if (d.contains("ranges")) posenet::from_json(d.at("ranges"), c.dataset.ranges);
      if (d.contains("shear")) posenet::from_json(d.at("shear"), c.dataset.shear);
      read_if(d, "threads", c.dataset.threads);
      read_if(d, "train_fraction", c.dataset.train_fraction);
      read_if(d, "validation_fraction", c.dataset.validation_fraction);
    }
    if (j.contains("network")) posenet::from_json(j.at("network"), c.network);
    if (j.contains("controller")) {
      const json& k = j.at("controller");
      reject_unknown_keys(k,
                          {"gain", "setpoint", "setpoint_z", "feedback_sign", "cycle_time",
                           "gate_threshold"},
                          "controller");
      read_if(k, "gain", c.controller.gain);
      read_if(k, "setpoint", c.controller.setpoint);
      read_if(k, "setpoint_z", c.controller.setpoint_z);
      read_if(k, "feedback_sign", c.controller.feedback_sign);
      read_if(k, "cycle_time", c.controller.cycle_time);
      read_if(k, "gate_threshold", c.controller.gate_threshold);
    }
    if (j.contains("objects")) {
      for (const auto& [name, o] : j.at("objects").items()) {
        const ObjectId id = object_from_string(name);
        PlantModel* m = nullptr;
        for (PlantModel& candidate : c.objects)
          if (candidate.object_id == id) m = &candidate;
        reject_unknown_keys(o, {"contact_onset_u", "depth_gain", "max_depth", "contact_pose"},
                            "objects");
        read_if(o, "contact_onset_u", m->contact_onset_u);
        read_if(o, "depth_gain", m->depth_gain);
        read_if(o, "max_depth", m->max_depth);
        if (o.contains("contact_pose")) apply_pose(o.at("contact_pose"), m->contact_pose);
      }
    }
    if (j.contains("exp1")) {
      const json& e = j.at("exp1");
      reject_unknown_keys(e,
                          {"duration", "convergence_budget", "hold_cycles", "tolerance",
                           "final_window", "final_max_du"},
                          "exp1");
      read_if(e, "duration", c.exp1.duration);
      read_if(e, "convergence_budget", c.exp1.convergence_budget);
      read_if(e, "hold_cycles", c.exp1.hold_cycles);
      read_if(e, "tolerance", c.exp1.tolerance);
      read_if(e, "final_window", c.exp1.final_window);
      read_if(e, "final_max_du", c.exp1.final_max_du);
    }
    if (j.contains("exp3a")) {
      const json& e = j.at("exp3a");
      reject_unknown_keys(e, {"object", "closure", "ramp_rate", "ramp_duration", "min_r2"},
                          "exp3a");
      if (e.contains("object")) c.exp3a.object = object_from_string(e.at("object").get<std::string>());
      read_if(e, "closure", c.exp3a.closure);
      read_if(e, "ramp_rate", c.exp3a.ramp_rate);
      read_if(e, "ramp_duration", c.exp3a.ramp_duration);
      read_if(e, "min_r2", c.exp3a.min_r2);
    }
    if (j.contains("exp3b")) {
      const json& e = j.at("exp3b");
      reject_unknown_keys(e,
                          {"object", "closure", "setpoints", "segment", "steady_fraction",
                           "tolerance"},
                          "exp3b");
      if (e.contains("object")) c.exp3b.object = object_from_string(e.at("object").get<std::string>());
      read_if(e, "closure", c.exp3b.closure);
      read_if(e, "setpoints", c.exp3b.setpoints);
      read_if(e, "segment", c.exp3b.segment);
      read_if(e, "steady_fraction", c.exp3b.steady_fraction);
      read_if(e, "tolerance", c.exp3b.tolerance);
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      reject_unknown_keys(e, {"max_mae"}, "eval");
      if (e.contains("max_mae")) {
        const json& m = e.at("max_mae");
        reject_unknown_keys(m, {"x", "z", "phi", "psi", "theta"}, "eval.max_mae");
        for (int k = 0; k < posenet::kPoseOutputs; ++k)
          read_if(m, std::string(posenet::kComponentNames[k]).c_str(), c.eval.max_mae[k]);
      }
    }
    if (j.contains("artifacts")) c.artifacts = j.at("artifacts").get<std::string>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("invalid configuration value: ") + e.what());
  }
}

Config load_config(const fs::path& path, Config base) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("malformed config " + path.string() + ": " + e.what());
  }
  apply_json(j, base);
  return base;
}

fs::path default_output_root() {
  if (const char* env = std::getenv("TACTHAND_OUT"); env && *env) return env;
  return "runs";
}

fs::path make_run_directory(const fs::path& root, const std::string& command, std::uint64_t seed) {
  fs::create_directories(root);
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = std::string(stamp) + "-" + command + "-seed" + std::to_string(seed);
  for (int n = 0;; ++n) {
    const fs::path dir = root / (n == 0 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(dir)) return dir;
  }
}

ArtifactPaths artifact_paths(const Config& config, const fs::path& output_root) {
  const fs::path dir = config.artifacts.empty()
                           ? output_root / "artifacts" /
                                 (std::string(to_string(config.profile)) + "-seed" +
                                  std::to_string(config.seed))
                           : config.artifacts;
  return {dir / "dataset", dir / "model.json", dir / "split.json", dir / "training_log.csv"};
}

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

void write_run_record(const fs::path& run_dir, const Config& config, const RunResult& result) {
  fs::create_directories(run_dir);
  write_text(run_dir / "config.json", to_json(config).dump(2) + "\n");
  json summary = result.summary;
  summary["seed"] = config.seed;
  summary["profile"] = std::string(to_string(config.profile));
  json checks = json::array();
  for (const Check& c : result.checks) checks.push_back(check_json(c));
  summary["checks"] = checks;
  summary["passed"] = result.passed();
  write_text(run_dir / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------- exp1

std::vector<Exp1Object> run_exp1(const Config& config) {
  config.validate();
  std::vector<Exp1Object> out;
  const PlantContext ctx = config.plant_context();
  const double r = config.controller.setpoint;
  for (std::size_t i = 0; i < kAllObjects.size(); ++i) {
    Exp1Object o;
    o.object = kAllObjects[i];
    o.log = run_closed_loop(ControllerKind::ssim, config.object(o.object), config.exp1.duration,
                            config.controller, ctx, nullptr, derive_seed(config.seed, i, kExp1Stream));
    const auto& rows = o.log.rows;
    const std::size_t n = rows.size();
    auto inside = [&](std::size_t k) { return std::abs(rows[k].e_ssim - r) < config.exp1.tolerance; };
    const std::size_t hold = static_cast<std::size_t>(config.exp1.hold_cycles);
    for (std::size_t k = 0; k < n; ++k) {
      bool held = true;
      for (std::size_t m = k; m < std::min(n, k + hold) && held; ++m) held = inside(m);
      if (held) {
        o.convergence_cycle = k;
        break;
      }
    }
    if (n > 0) {
      o.final_e = rows.back().e_ssim;
      o.final_u = rows.back().u;
    }
    const std::size_t window = std::min<std::size_t>(config.exp1.final_window, n > 0 ? n - 1 : 0);
    for (std::size_t k = n - window; k < n; ++k)
      o.final_max_du = std::max(o.final_max_du, std::abs(rows[k].u - rows[k - 1].u));
    o.converged = n > hold && o.convergence_cycle &&
                  *o.convergence_cycle <= static_cast<std::size_t>(config.exp1.convergence_budget) &&
                  inside(n - 1) && window == static_cast<std::size_t>(config.exp1.final_window) &&
                  o.final_max_du < config.exp1.final_max_du;
    out.push_back(std::move(o));
  }
  return out;
}

RunResult exp1(const Config& config, const fs::path& run_dir) {
  const std::vector<Exp1Object> objects = run_exp1(config);
  RunResult result;
  result.summary["experiment"] = "exp1";
  json per_object = json::array();
  plot::Figure fig;
  fig.title = "exp1: SSIM set-point control";
  fig.x_label = "t (s)";
  plot::Panel e_panel{"e_ssim", {}, {config.controller.setpoint}};
  plot::Panel u_panel{"u (counts)", {}, {}};
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Exp1Object& o = objects[i];
    const std::string name(tacthand::to_string(o.object));
    o.log.write_csv(run_dir / ("exp1_" + name + ".csv"));
    per_object.push_back({{"object", name},
                          {"convergence_cycle", o.convergence_cycle ? json(*o.convergence_cycle) : json()},
                          {"final_e_ssim", o.final_e},
                          {"final_u", o.final_u},
                          {"final_max_du", o.final_max_du},
                          {"converged", o.converged}});
    std::string detail =
        o.convergence_cycle ? "settled at cycle " + std::to_string(*o.convergence_cycle)
                            : std::string("never settled");
    detail += fmt(", final e=%.4f, final max|du|=%.3f", o.final_e, o.final_max_du);
    result.checks.push_back({"converged_" + name, o.converged, detail});
    result.checks.push_back({"actuator_range_" + name, within_actuator_range(o.log), ""});
    const auto t = column(o.log, [](const LoopRow& r) { return r.t; });
    e_panel.series.push_back(
        series(name, t, column(o.log, [](const LoopRow& r) { return r.e_ssim; }), kPalette[i]));
    u_panel.series.push_back(
        series(name, t, column(o.log, [](const LoopRow& r) { return r.u; }), kPalette[i]));
  }
  fig.panels = {e_panel, u_panel};
  plot::write_figure(run_dir / "exp1.png", fig);
  result.summary["objects"] = per_object;
  write_run_record(run_dir, config, result);
  return result;
}

// ---------------------------------------------------------------- exp2

RunResult collect(const Config& config, const ArtifactPaths& artifacts, const fs::path& run_dir) {
  config.validate();
  const posenet::Dataset dataset =
      posenet::collect_dataset(config.dataset.n_samples, config.dataset_config(), config.seed);
  posenet::write_dataset(artifacts.dataset_dir, dataset);

  RunResult result;
  result.summary["experiment"] = "collect";
  result.summary["n_samples"] = dataset.samples.size();
  std::array<double, posenet::kPoseOutputs> mean{};
  for (const auto& s : dataset.samples) {
    const posenet::PoseVector v = posenet::label_of(s.label);
    for (int k = 0; k < posenet::kPoseOutputs; ++k) mean[k] += v[k];
  }
  json means = json::object();
  for (int k = 0; k < posenet::kPoseOutputs; ++k)
    means[std::string(posenet::kComponentNames[k])] =
        mean[k] / static_cast<double>(dataset.samples.size());
  result.summary["label_means"] = means;
  result.checks.push_back({"sample_count", dataset.samples.size() == config.dataset.n_samples,
                           std::to_string(dataset.samples.size()) + " samples"});
  // A few processed images alongside the run for inspection.
  for (std::size_t i = 0; i < std::min<std::size_t>(4, dataset.samples.size()); ++i)
    fs::copy_file(artifacts.dataset_dir / dataset.samples[i].file,
                  run_dir / ("sample_" + dataset.samples[i].file),
                  fs::copy_options::overwrite_existing);
  write_run_record(run_dir, config, result);
  return result;
}

RunResult train(const Config& config, const ArtifactPaths& artifacts, const fs::path& run_dir) {
  config.validate();
  const posenet::Dataset dataset = posenet::load_dataset(artifacts.dataset_dir);
  const posenet::DatasetSplit split =
      posenet::split_dataset(dataset.samples.size(), dataset.seed, config.dataset.train_fraction,
                             config.dataset.validation_fraction);
  const json split_json = {{"seed", dataset.seed},
                           {"train", split.train},
                           {"validation", split.validation},
                           {"test", split.test}};
  write_text(artifacts.split, split_json.dump() + "\n");

  posenet::NetworkConfig net = config.network;
  net.seed = config.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const posenet::TrainingResult trained = posenet::train(
      dataset.samples, split.train, split.validation, net, dataset.config.ranges,
      [&](const posenet::EpochRecord& r) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %d/%d  train %.5f  val %.5f  lr %.5f  %.0fs\n", r.epoch,
                     net.epochs, r.train_loss, r.val_loss, r.learning_rate, elapsed);
      });
  posenet::save_model(artifacts.model, trained.model);
  posenet::write_training_log(artifacts.training_log, trained.log);
  posenet::write_training_log(run_dir / "training_log.csv", trained.log);

  RunResult result;
  result.summary["experiment"] = "train";
  result.summary["n_train"] = split.train.size();
  result.summary["n_validation"] = split.validation.size();
  result.summary["n_test"] = split.test.size();
  result.summary["epochs"] = trained.log.size();
  result.summary["best_epoch"] = trained.best_epoch;
  bool finite = true;
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& r : trained.log) {
    finite = finite && std::isfinite(r.train_loss) && std::isfinite(r.val_loss);
    best_val = std::min(best_val, r.val_loss);
  }
  if (!trained.log.empty()) {
    result.summary["final_train_loss"] = trained.log.back().train_loss;
    result.summary["best_val_loss"] = best_val;
    result.checks.push_back({"finite_losses", finite, ""});
    result.checks.push_back({"validation_improved", best_val <= trained.log.front().val_loss,
                             fmt("first %.5f, best %.5f", trained.log.front().val_loss, best_val)});

    std::vector<double> epochs, tl, vl;
    for (const auto& r : trained.log) {
      epochs.push_back(r.epoch);
      tl.push_back(r.train_loss);
      vl.push_back(r.val_loss);
    }
    plot::Figure fig;
    fig.title = "training loss (normalised MSE)";
    fig.x_label = "epoch";
    fig.panels.push_back(
        {"loss", {series("train", epochs, tl, plot::kBlue), series("validation", epochs, vl, plot::kOrange)}, {}});
    plot::write_figure(run_dir / "training_loss.png", fig);
  }
  write_run_record(run_dir, config, result);
  return result;
}

RunResult eval(const Config& config, const ArtifactPaths& artifacts, const fs::path& run_dir,
               bool oracle) {
  config.validate();
  std::optional<posenet::Model> model;
  if (!oracle) model = load_trained_model(artifacts);
  const json split_json = read_json(artifacts.split, "dataset split (run train first)");
  const posenet::Dataset dataset = posenet::load_dataset(artifacts.dataset_dir);
  const auto test = split_json.at("test").get<std::vector<std::size_t>>();
  for (std::size_t i : test)
    if (i >= dataset.samples.size())
      throw StageError("split.json does not match the dataset in " + artifacts.dataset_dir.string());

  std::vector<posenet::PoseVector> labels;
  for (std::size_t i : test) labels.push_back(posenet::label_of(dataset.samples[i].label));
  const std::vector<posenet::PoseVector> predictions =
      oracle ? labels : posenet::predict(*model, dataset.samples, test);
  const posenet::EvalReport report =
      posenet::evaluate_predictions(predictions, labels, dataset.config.ranges);
  const std::string table = posenet::format_report(report);
  write_text(run_dir / "eval_report.txt", table);
  std::fputs(table.c_str(), stdout);

  std::string csv = "index,x,z,phi,psi,theta,x_hat,z_hat,phi_hat,psi_hat,theta_hat\n";
  char buf[64];
  for (std::size_t k = 0; k < test.size(); ++k) {
    csv += std::to_string(test[k]);
    for (double v : labels[k]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      csv += buf;
    }
    for (double v : predictions[k]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      csv += buf;
    }
    csv += "\n";
  }
  write_text(run_dir / "predictions.csv", csv);

  plot::Figure fig;
  fig.title = oracle ? "test predictions (oracle)" : "test predictions";
  fig.x_label = "test sample (sorted by label)";
  for (int k = 0; k < posenet::kPoseOutputs; ++k) {
    std::vector<std::size_t> order(test.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return labels[a][k] < labels[b][k]; });
    std::vector<double> xs, truth, pred;
    for (std::size_t m = 0; m < order.size(); ++m) {
      xs.push_back(static_cast<double>(m));
      truth.push_back(labels[order[m]][k]);
      pred.push_back(predictions[order[m]][k]);
    }
    plot::Series p = series("predicted", xs, pred, plot::kOrange);
    p.markers = true;
    fig.panels.push_back({std::string(posenet::kComponentNames[k]) + " (" +
                              std::string(posenet::kComponentUnits[k]) + ")",
                          {series("label", xs, truth, plot::kBlue), p},
                          {}});
  }
  plot::write_figure(run_dir / "predictions.png", fig);

  RunResult result;
  result.summary["experiment"] = "eval";
  result.summary["oracle"] = oracle;
  result.summary["n_test"] = report.n_test;
  json rows = json::array();
  for (int k = 0; k < posenet::kPoseOutputs; ++k) {
    const std::string name(posenet::kComponentNames[k]);
    rows.push_back({{"component", name},
                    {"mae", report.mae[k]},
                    {"range", report.range[k]},
                    {"unit", std::string(posenet::kComponentUnits[k])}});
    result.checks.push_back({"mae_" + name, report.mae[k] <= config.eval.max_mae[k],
                             fmt("%.4f (limit %.4g)", report.mae[k], config.eval.max_mae[k])});
  }
  result.summary["report"] = rows;
  write_run_record(run_dir, config, result);
  return result;
}

// ---------------------------------------------------------------- exp3

TrajectoryLog run_exp3a(const Config& config, const posenet::Model& model,
                        std::size_t* ramp_start_row) {
  config.validate();
  const Exp3aSettings& s = config.exp3a;
  ClosedLoop loop(config.object(s.object), config.plant_context(), config.controller, &model,
                  derive_seed(config.seed, 0, kExp3aStream));
  run_until(loop, ssim_policy(config.controller), s.closure);
  if (ramp_start_row) *ramp_start_row = loop.log().rows.size();
  const Policy ramp = ramp_policy(loop.actuator().u(), s.ramp_rate, loop.time(),
                                  config.controller.cycle_time, loop.actuator().u_max());
  run_until(loop, ramp, s.closure + s.ramp_duration);
  return loop.log();
}

Exp3aAnalysis analyze_exp3a(const TrajectoryLog& log, std::size_t ramp_start_row,
                            const PlantModel& plant, double gate_threshold) {
  Exp3aAnalysis a;
  a.ramp_start_row = ramp_start_row;
  const auto& rows = log.rows;
  for (const LoopRow& r : rows)
    if (r.e_ssim <= gate_threshold && r.pose) a.gate_respected = false;

  std::vector<double> step, step_depth, z_hat, z_true;
  for (std::size_t i = ramp_start_row; i < rows.size(); ++i) {
    if (i > ramp_start_row && rows[i].u <= rows[i - 1].u && rows[i - 1].u < kMotorMax)
      a.ramp_increasing = false;
    const bool contact = rows[i].depth > 0.0 && rows[i].depth < plant.max_depth;
    if (!contact) continue;
    if (i > ramp_start_row) {
      step.push_back(std::abs(rows[i].e_ssim - rows[i - 1].e_ssim));
      step_depth.push_back(rows[i].depth);
    }
    if (rows[i].pose) {
      z_hat.push_back((*rows[i].pose)[static_cast<int>(posenet::PoseComponent::z)]);
      z_true.push_back(rows[i].depth);
    }
  }
  a.spearman_n = step.size();
  if (step.size() >= 2) a.spearman = spearman(step_depth, step);
  a.r2_n = z_hat.size();
  if (z_hat.size() >= 2) a.r2 = linear_r2(z_true, z_hat);
  return a;
}

RunResult exp3a(const Config& config, const ArtifactPaths& artifacts, const fs::path& run_dir) {
  const posenet::Model model = load_trained_model(artifacts);
  std::size_t ramp_start = 0;
  const TrajectoryLog log = run_exp3a(config, model, &ramp_start);
  const Exp3aAnalysis a = analyze_exp3a(log, ramp_start, config.object(config.exp3a.object),
                                        config.controller.gate_threshold);
  log.write_csv(run_dir / "exp3a.csv");
  plot::write_figure(run_dir / "exp3a.png",
                     loop_figure("exp3a: SSIM closure then motor ramp", log, true, {}, true,
                                 config.controller.gate_threshold));

  RunResult result;
  result.summary["experiment"] = "exp3a";
  result.summary["object"] = std::string(tacthand::to_string(config.exp3a.object));
  result.summary["rows"] = log.rows.size();
  result.summary["ramp_start_row"] = a.ramp_start_row;
  result.summary["spearman_step_vs_depth"] = a.spearman;
  result.summary["spearman_n"] = a.spearman_n;
  result.summary["z_r2"] = a.r2;
  result.summary["z_r2_n"] = a.r2_n;
  result.checks.push_back({"ssim_saturation", a.spearman_n >= 3 && a.spearman < 0.0,
                           fmt("spearman %.4f over %.0f steps", a.spearman,
                               static_cast<double>(a.spearman_n))});
  result.checks.push_back({"z_linear_fit", a.r2_n >= 3 && a.r2 >= config.exp3a.min_r2,
                           fmt("R^2 %.4f over %.0f rows", a.r2, static_cast<double>(a.r2_n))});
  result.checks.push_back({"gate_respected", a.gate_respected, ""});
  result.checks.push_back({"ramp_increasing", a.ramp_increasing, ""});
  result.checks.push_back({"actuator_range", within_actuator_range(log), ""});
  write_run_record(run_dir, config, result);
  return result;
}

TrajectoryLog run_exp3b(const Config& config, const posenet::Model& model) {
  config.validate();
  const Exp3bSettings& s = config.exp3b;
  ClosedLoop loop(config.object(s.object), config.plant_context(), config.controller, &model,
                  derive_seed(config.seed, 0, kExp3bStream));
  run_until(loop, ssim_policy(config.controller), s.closure);
  ControllerConfig pose_cfg = config.controller;
  for (std::size_t k = 0; k < s.setpoints.size(); ++k) {
    pose_cfg.setpoint_z = s.setpoints[k];
    loop.set_config(pose_cfg);
    run_until(loop, pose_policy(pose_cfg), s.closure + static_cast<double>(k + 1) * s.segment);
  }
  return loop.log();
}

std::vector<Plateau> analyze_exp3b(const TrajectoryLog& log, const Config& config) {
  const Exp3bSettings& s = config.exp3b;
  const double ct = config.controller.cycle_time;
  std::vector<Plateau> out;
  for (std::size_t k = 0; k < s.setpoints.size(); ++k) {
    const double start = s.closure + static_cast<double>(k) * s.segment;
    const std::size_t first = cycle_count(start + (1.0 - s.steady_fraction) * s.segment, ct);
    const std::size_t last = cycle_count(start + s.segment, ct);
    Plateau p;
    p.setpoint = s.setpoints[k];
    double z_sum = 0.0, u_sum = 0.0;
    std::size_t u_n = 0;
    for (std::size_t i = first; i < std::min(last, log.rows.size()); ++i) {
      const LoopRow& r = log.rows[i];
      u_sum += r.u;
      ++u_n;
      if (r.pose) {
        z_sum += (*r.pose)[static_cast<int>(posenet::PoseComponent::z)];
        ++p.samples;
      }
    }
    p.mean_z_hat = p.samples ? z_sum / static_cast<double>(p.samples)
                             : std::numeric_limits<double>::quiet_NaN();
    p.mean_u = u_n ? u_sum / static_cast<double>(u_n) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(p);
  }
  return out;
}

RunResult exp3b(const Config& config, const ArtifactPaths& artifacts, const fs::path& run_dir) {
  const posenet::Model model = load_trained_model(artifacts);
  const TrajectoryLog log = run_exp3b(config, model);
  const std::vector<Plateau> plateaus = analyze_exp3b(log, config);
  log.write_csv(run_dir / "exp3b.csv");
  plot::write_figure(run_dir / "exp3b.png",
                     loop_figure("exp3b: z-pose set-point schedule", log, true,
                                 config.exp3b.setpoints, true, config.controller.gate_threshold));

  RunResult result;
  result.summary["experiment"] = "exp3b";
  result.summary["object"] = std::string(tacthand::to_string(config.exp3b.object));
  result.summary["rows"] = log.rows.size();
  json ps = json::array();
  bool increasing = true;
  for (std::size_t k = 0; k < plateaus.size(); ++k) {
    const Plateau& p = plateaus[k];
    ps.push_back({{"setpoint", p.setpoint},
                  {"mean_z_hat", p.samples ? json(p.mean_z_hat) : json()},
                  {"mean_u", p.mean_u},
                  {"samples", p.samples}});
    const bool ok = p.samples > 0 && std::abs(p.mean_z_hat - p.setpoint) < config.exp3b.tolerance;
    result.checks.push_back({fmt("plateau_z_%.2f", p.setpoint), ok,
                             p.samples ? fmt("mean z_hat %.4f vs %.4f", p.mean_z_hat, p.setpoint)
                                       : std::string("no ungated pose rows")});
    if (k > 0 && !(p.mean_u > plateaus[k - 1].mean_u)) increasing = false;
  }
  result.summary["plateaus"] = ps;
  result.checks.push_back({"plateau_u_increasing", increasing, ""});
  const std::size_t expected = cycle_count(
      config.exp3b.closure + static_cast<double>(config.exp3b.setpoints.size()) * config.exp3b.segment,
      config.controller.cycle_time);
  result.checks.push_back({"row_count", log.rows.size() == expected,
                           std::to_string(log.rows.size()) + " of " + std::to_string(expected)});
  result.checks.push_back({"actuator_range", within_actuator_range(log), ""});
  write_run_record(run_dir, config, result);
  return result;
}

// ---------------------------------------------------------------- statistics

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  require_same_size(a, b);
  return pearson(ranks(a), ranks(b));
}

double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  require_same_size(x, y);
  const double r = pearson(x, y);
  return r * r;
}

bool within_actuator_range(const TrajectoryLog& log) {
  return std::all_of(log.rows.begin(), log.rows.end(),
                     [](const LoopRow& r) { return r.u >= 0.0 && r.u <= kMotorMax; });
}

}  // namespace tacthand::harness
