// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Usage: acceptance [output_root]
//
// The trained desk model is left at <output_root>/artifacts/desk-seed1 for
// the trained-model property tests.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tacthand/harness.hpp"
#include "tacthand/imaging.hpp"
#include "tacthand/posenet/network.hpp"

using namespace tacthand;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  g_lines.push_back({id, name, passed, detail});
  std::printf("criterion %d %s  %s: %s\n", id, passed ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

std::string failed_checks(const harness::RunResult& r) {
  std::string out;
  for (const auto& c : r.checks)
    if (!c.passed) out += " [" + c.name + (c.detail.empty() ? "" : ": " + c.detail) + "]";
  return out;
}

// Direct per-window SSIM with sample covariance and a 7x7 uniform window.
double naive_ssim(const TactileImage& a, const TactileImage& b) {
  const int n = 7;
  const double np = n * n, c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + n <= a.height(); ++y0)
    for (int x0 = 0; x0 + n <= a.width(); ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + n; ++y)
        for (int x = x0; x < x0 + n; ++x) {
          ma += a.at(x, y);
          mb += b.at(x, y);
        }
      ma /= np;
      mb /= np;
      double va = 0, vb = 0, cab = 0;
      for (int y = y0; y < y0 + n; ++y)
        for (int x = x0; x < x0 + n; ++x) {
          va += (a.at(x, y) - ma) * (a.at(x, y) - ma);
          vb += (b.at(x, y) - mb) * (b.at(x, y) - mb);
          cab += (a.at(x, y) - ma) * (b.at(x, y) - mb);
        }
      va /= np - 1;
      vb /= np - 1;
      cab /= np - 1;
      total += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double max_oracle = 0.0, max_identity = 0.0, max_symmetry = 0.0;
  for (int i = 0; i < 100; ++i) {
    TactileImage a(16, 16, Stage::processed), b(16, 16, Stage::processed);
    for (double& v : a.pixels()) v = u(rng);
    for (std::size_t k = 0; k < b.size(); ++k)
      b.pixels()[k] = i % 2 ? u(rng) : 0.6 * a.pixels()[k] + 0.4 * u(rng);
    const double s = ssim(a, b);
    max_oracle = std::max(max_oracle, std::abs(s - naive_ssim(a, b)));
    max_identity = std::max(max_identity, std::abs(ssim(a, a) - 1.0));
    max_symmetry = std::max(max_symmetry, std::abs(s - ssim(b, a)));
  }
  const double t = seconds_since(t0);
  report(1, "SSIM oracle equivalence",
         max_oracle < 1e-9 && max_identity < 1e-12 && max_symmetry < 1e-12 && t < 5.0,
         printf_string("max |ssim - oracle| %.2e (< 1e-9), |ssim(I,I) - 1| %.2e, asymmetry %.2e "
                       "(< 1e-12), %.2f s (< 5 s)",
                       max_oracle, max_identity, max_symmetry, t));
}

void criterion2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    worst = std::max(worst, posenet::gradient_check(posenet::gradient_check_config(), seed));
  const double t = seconds_since(t0);
  report(2, "gradient check", worst < 1e-6 && t < 30.0,
         printf_string("max relative error %.3e over 5 seeds (< 1e-6), %.2f s (< 30 s)", worst, t));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::remove_all(root);
  fs::create_directories(root);
  const harness::Config config = harness::Config::for_profile(harness::Profile::desk);
  const harness::ArtifactPaths artifacts = harness::artifact_paths(config, root);
  fs::create_directories(artifacts.model.parent_path());
  auto read_log_u = [](const fs::path& csv) {
    // u column of a logged CSV, parsed back from disk.
    TrajectoryLog log;
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      LoopRow r;
      std::sscanf(line.c_str(), "%lf,%lf,%lf", &r.t, &r.u, &r.e_ssim);
      log.rows.push_back(r);
    }
    return log;
  };

  criterion1();
  criterion2();

  std::vector<fs::path> csv_logs;

  // 3: exp1
  const fs::path exp1_dir = harness::make_run_directory(root, "exp1", config.seed);
  {
    const auto t0 = Clock::now();
    const harness::RunResult r = harness::exp1(config, exp1_dir);
    const double t = seconds_since(t0);
    std::string detail;
    for (const auto& o : r.summary["objects"])
      detail += printf_string("%s: cycle %s, e %.4f, max|du| %.3f; ",
                              o["object"].get<std::string>().c_str(),
                              o["convergence_cycle"].is_null()
                                  ? "none"
                                  : std::to_string(o["convergence_cycle"].get<int>()).c_str(),
                              o["final_e_ssim"].get<double>(), o["final_max_du"].get<double>());
    detail += printf_string("%.1f s (< 60 s)", t) + failed_checks(r);
    report(3, "exp1 SSIM set-point regulation", r.passed() && t < 60.0, detail);
    for (ObjectId id : kAllObjects)
      csv_logs.push_back(exp1_dir / ("exp1_" + std::string(to_string(id)) + ".csv"));
  }

  // 4: collect, train, eval on the desk profile
  bool have_model = false;
  {
    const auto t0 = Clock::now();
    const harness::RunResult c =
        harness::collect(config, artifacts, harness::make_run_directory(root, "collect", config.seed));
    const double t_collect = seconds_since(t0);
    const harness::RunResult tr =
        harness::train(config, artifacts, harness::make_run_directory(root, "train", config.seed));
    const double t_train = seconds_since(t0) - t_collect;
    have_model = fs::exists(artifacts.model);
    const harness::RunResult ev =
        harness::eval(config, artifacts, harness::make_run_directory(root, "eval", config.seed));
    const double t = seconds_since(t0);
    std::string detail = printf_string("n=%zu, ", config.dataset.n_samples);
    for (const auto& row : ev.summary["report"])
      detail += printf_string("%s %.3f %s; ", row["component"].get<std::string>().c_str(),
                              row["mae"].get<double>(), row["unit"].get<std::string>().c_str());
    detail += printf_string("limits x 1.5, z 0.3, phi 2.0, psi 3.2, theta 10; collect %.0f s, "
                            "train %.0f s, total %.0f s (<= 1800 s)",
                            t_collect, t_train, t);
    detail += failed_checks(c) + failed_checks(tr) + failed_checks(ev);
    report(4, "exp2 pose estimation MAE",
           config.dataset.n_samples >= 2000 && ev.passed() && c.passed() && t <= 1800.0, detail);
  }

  // 5: exp3a
  fs::path exp3a_dir, exp3b_dir;
  if (have_model) {
    exp3a_dir = harness::make_run_directory(root, "exp3a", config.seed);
    const auto t0 = Clock::now();
    const harness::RunResult r = harness::exp3a(config, artifacts, exp3a_dir);
    const double t = seconds_since(t0);
    report(5, "exp3a saturation and z tracking", r.passed() && t < 120.0,
           printf_string("spearman %.3f over %d steps (< 0), R^2 %.4f over %d rows (>= 0.9), "
                         "%.1f s (< 120 s)",
                         r.summary["spearman_step_vs_depth"].get<double>(),
                         r.summary["spearman_n"].get<int>(), r.summary["z_r2"].get<double>(),
                         r.summary["z_r2_n"].get<int>(), t) +
               failed_checks(r));
    csv_logs.push_back(exp3a_dir / "exp3a.csv");

    // 6: exp3b
    exp3b_dir = harness::make_run_directory(root, "exp3b", config.seed);
    const auto t1 = Clock::now();
    const harness::RunResult b = harness::exp3b(config, artifacts, exp3b_dir);
    const double t6 = seconds_since(t1);
    std::string detail;
    for (const auto& p : b.summary["plateaus"])
      detail += printf_string("r_z %.1f: z_hat %s, u %.0f; ", p["setpoint"].get<double>(),
                              p["mean_z_hat"].is_null()
                                  ? "none"
                                  : printf_string("%.3f", p["mean_z_hat"].get<double>()).c_str(),
                              p["mean_u"].get<double>());
    report(6, "exp3b z set-point schedule", b.passed() && t6 < 120.0,
           detail + printf_string("%.1f s (< 120 s)", t6) + failed_checks(b));
    csv_logs.push_back(exp3b_dir / "exp3b.csv");
  } else {
    report(5, "exp3a saturation and z tracking", false, "no trained model");
    report(6, "exp3b z set-point schedule", false, "no trained model");
  }

  // 7: determinism. Control experiments are rerun at full size; the data and
  // training chain is rerun twice at reduced size.
  {
    std::vector<std::string> mismatches;
    const fs::path again = harness::make_run_directory(root, "exp1-repeat", config.seed);
    harness::exp1(config, again);
    for (ObjectId id : kAllObjects) {
      const std::string f = "exp1_" + std::string(to_string(id)) + ".csv";
      if (slurp(exp1_dir / f) != slurp(again / f)) mismatches.push_back(f);
      csv_logs.push_back(again / f);
    }
    if (have_model) {
      const fs::path a3 = harness::make_run_directory(root, "exp3a-repeat", config.seed);
      harness::exp3a(config, artifacts, a3);
      if (slurp(exp3a_dir / "exp3a.csv") != slurp(a3 / "exp3a.csv")) mismatches.push_back("exp3a.csv");
      const fs::path b3 = harness::make_run_directory(root, "exp3b-repeat", config.seed);
      harness::exp3b(config, artifacts, b3);
      if (slurp(exp3b_dir / "exp3b.csv") != slurp(b3 / "exp3b.csv")) mismatches.push_back("exp3b.csv");
      csv_logs.push_back(a3 / "exp3a.csv");
      csv_logs.push_back(b3 / "exp3b.csv");
    } else {
      mismatches.push_back("exp3 (no model)");
    }

    harness::Config small = config;
    small.dataset.n_samples = 80;
    small.network.input_width = 60;
    small.network.input_height = 34;
    small.network.n_conv_layers = 2;
    small.network.n_filters = 8;
    small.network.n_dense_units = 16;
    small.network.epochs = 3;
    std::vector<fs::path> chains;
    for (int rep = 0; rep < 2; ++rep) {
      small.artifacts = root / ("exp2-repeat-" + std::to_string(rep));
      const harness::ArtifactPaths p = harness::artifact_paths(small, root);
      fs::create_directories(small.artifacts);
      harness::collect(small, p, harness::make_run_directory(root, "collect-repeat", small.seed));
      harness::train(small, p, harness::make_run_directory(root, "train-repeat", small.seed));
      const fs::path ev = harness::make_run_directory(root, "eval-repeat", small.seed);
      harness::eval(small, p, ev);
      fs::copy_file(ev / "predictions.csv", small.artifacts / "predictions.csv");
      chains.push_back(small.artifacts);
    }
    for (const char* f : {"dataset/manifest.jsonl", "split.json", "training_log.csv",
                          "predictions.csv", "model.json"})
      if (slurp(chains[0] / f) != slurp(chains[1] / f) || slurp(chains[0] / f).empty())
        mismatches.push_back(f);

    std::string detail = "exp1 x4, exp3a, exp3b CSVs and the reduced collect/train/eval chain";
    for (const auto& m : mismatches) detail += " [differs: " + m + "]";
    report(7, "determinism", mismatches.empty(), detail);
  }

  // 8: actuator range over every logged step of the runs above.
  {
    std::size_t rows = 0, bad = 0;
    double lo = 1e300, hi = -1e300;
    for (const fs::path& csv : csv_logs) {
      const TrajectoryLog log = read_log_u(csv);
      for (const LoopRow& r : log.rows) {
        ++rows;
        lo = std::min(lo, r.u);
        hi = std::max(hi, r.u);
        if (!(r.u >= 0.0 && r.u <= kMotorMax)) ++bad;
      }
    }
    report(8, "actuator safety", bad == 0 && rows > 0,
           printf_string("%zu rows from %zu logs, u in [%.1f, %.1f], %zu outside [0, 19000]", rows,
                         csv_logs.size(), lo, hi, bad));
  }

  std::ofstream summary(root / "acceptance.txt");
  bool all = true;
  for (const Line& l : g_lines) {
    summary << "criterion " << l.id << (l.passed ? " PASS  " : " FAIL  ") << l.name << ": "
            << l.detail << "\n";
    all = all && l.passed;
  }
  std::printf("acceptance %s\n", all ? "PASS" : "FAIL");
  return all ? 0 : 1;
}
