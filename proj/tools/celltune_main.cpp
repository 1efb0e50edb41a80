#include <celltune/errors.hpp>
#include <celltune/experiments.hpp>

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace celltune;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ExperimentConfig preset_config(const std::string& name) {
  if (name != "baseline-3gpp") throw ConfigError("unknown preset " + name);
  ExperimentConfig cfg;
  cfg.scenario = ScenarioSpec::baseline_3gpp();
  cfg.mode = "evaluate";  // scores the built-in -12 deg / 10 deg decision
  return cfg;
}

std::string hex16(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path pick_out_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv("CELLTUNE_OUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path(".");
  return base / (cfg.mode + "-" + hex16(config_hash(cfg)) + "-s" +
                 std::to_string(cfg.seed));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"antenna tuning experiments for ground and aerial users"};
  std::string config_path, preset, out_flag;
  std::uint64_t seed = 0;
  int threads = 0;
  bool resume = false;
  app.add_option("--config", config_path, "experiment config JSON file");
  app.add_option("--preset", preset,
                 "built-in config (baseline-3gpp: score the all-downtilt "
                 "baseline on the reference scenario)");
  auto* seed_opt =
      app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", threads, "cap worker threads (0 = default)");
  app.add_option("--out", out_flag,
                 "output directory (default: config output_dir, then "
                 "$CELLTUNE_OUT_ROOT/<mode>-<hash>-s<seed>)");
  app.add_flag("--resume", resume, "resume from an existing evaluation log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (config_path.empty() == preset.empty())
      throw ConfigError("exactly one of --config or --preset is required");
    ExperimentConfig cfg = preset.empty()
                               ? experiment_from_json_string(read_file(config_path))
                               : preset_config(preset);
    if (seed_opt->count() > 0) cfg.seed = seed;
    cfg.validate();
    if (threads > 0) Eigen::setNbThreads(threads);

    const fs::path out = pick_out_dir(out_flag, cfg);
    const ExperimentResult res = run_experiment(cfg, out, resume);

    std::cout << "mode=" << cfg.mode << " seed=" << cfg.seed
              << " config_hash=" << hex16(res.hash) << " out=" << out.string()
              << "\n";
    std::cout << "baseline objective=" << res.baseline.objective_value
              << " geo_mean_bps=" << res.baseline.geo_mean_rate_bps
              << " uav_outage=" << res.baseline.uav_outage << "\n";
    std::cout << "result best_value=" << res.best_value << " files=";
    for (std::size_t i = 0; i < res.files.size(); ++i)
      std::cout << (i ? "," : "") << res.files[i];
    std::cout << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
