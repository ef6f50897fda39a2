// Command-line entry point: collect, train, eval, exp1, exp3a, exp3b.
// Exit status: 0 when every in-run check passes, 1 when a check fails,
// 2 on configuration, stage or I/O errors.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tacthand/errors.hpp"
#include "tacthand/harness.hpp"

namespace fs = std::filesystem;
using namespace tacthand;

int main(int argc, char** argv) {
  CLI::App app{"Tactile fingertip hand simulator: pose estimation and grasp control experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string profile_name;
  bool oracle = false;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides the config file)");
  app.add_option("--out", out_dir, "Output root (default: $TACTHAND_OUT or ./runs)");
  app.add_option("--profile", profile_name, "Parameter profile")
      ->check(CLI::IsMember({"desk", "full"}));

  app.add_subcommand("collect", "Synthesise the labelled tactile dataset");
  app.add_subcommand("train", "Train the pose network on the collected dataset");
  app.add_subcommand("eval", "Report test-set MAE of the trained network")
      ->add_flag("--oracle", oracle, "Use labels as predictions");
  app.add_subcommand("exp1", "SSIM set-point control on all four objects");
  app.add_subcommand("exp3a", "SSIM closure followed by a motor ramp with pose logging");
  app.add_subcommand("exp3b", "SSIM closure followed by z-pose set-point steps");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      file = nlohmann::json::parse(in);
    }
    harness::Profile profile = harness::Profile::desk;
    if (!profile_name.empty())
      profile = harness::profile_from_string(profile_name);
    else if (file.is_object() && file.contains("profile"))
      profile = harness::profile_from_string(file.at("profile").get<std::string>());

    harness::Config config = harness::Config::for_profile(profile);
    if (!config_path.empty()) harness::apply_json(file, config);
    config.profile = profile;
    if (seed) config.seed = *seed;
    config.validate();

    const fs::path root = out_dir.empty() ? harness::default_output_root() : fs::path(out_dir);
    const harness::ArtifactPaths artifacts = harness::artifact_paths(config, root);
    fs::create_directories(artifacts.model.parent_path());
    const fs::path run_dir = harness::make_run_directory(root, command, config.seed);

    harness::RunResult result;
    if (command == "collect") result = harness::collect(config, artifacts, run_dir);
    else if (command == "train") result = harness::train(config, artifacts, run_dir);
    else if (command == "eval") result = harness::eval(config, artifacts, run_dir, oracle);
    else if (command == "exp1") result = harness::exp1(config, run_dir);
    else if (command == "exp3a") result = harness::exp3a(config, artifacts, run_dir);
    else result = harness::exp3b(config, artifacts, run_dir);

    for (const harness::Check& c : result.checks)
      std::printf("%s  %-24s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    std::printf("run directory: %s\n", run_dir.string().c_str());
    return result.passed() ? 0 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed configuration: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 2;
}
