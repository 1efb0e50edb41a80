#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <celltune/experiments.hpp>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace celltune;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

CliResult run_cli(const std::string& args) {
  const char* bin = std::getenv("CELLTUNE_BIN");
  REQUIRE(bin != nullptr);
  static int run_id = 0;
  const fs::path cap =
      fs::temp_directory_path() / ("celltune_cli_cap_" + std::to_string(run_id++));
  fs::create_directories(cap);
  const std::string cmd = std::string(bin) + " " + args + " >" +
                          (cap / "out.txt").string() + " 2>" +
                          (cap / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(cap / "out.txt");
  r.err = slurp(cap / "err.txt");
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("celltune_cli_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_cfg(const std::string& mode) {
  ExperimentConfig cfg;
  cfg.scenario.n_rings = 0;
  cfg.scenario.gues_per_sector = 3;
  cfg.scenario.uavs_per_corridor = 2;
  cfg.scenario.corridors = {CorridorSpec{-100.0, 100.0, -50.0, 50.0, 150.0}};
  cfg.eval.n_fading_draws = 3;
  cfg.mode = mode;
  cfg.seed = 7;
  cfg.turbo.n_regions = 2;
  cfg.turbo.batch_q = 2;
  cfg.turbo.n_candidates = 60;
  cfg.turbo.n_init_per_region = 3;
  cfg.turbo.max_evals = 12;
  cfg.turbo.fit = FitOptions{2, 20, std::nullopt};
  return cfg;
}

fs::path write_cfg(const ExperimentConfig& cfg, const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("celltune_cli_" + name);
  std::ofstream(p) << experiment_to_json_string(cfg);
  return p;
}

}  // namespace

TEST_CASE("missing or conflicting inputs exit with a config error") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("--config /nonexistent/path.json").code == 2);
  CHECK(run_cli("--preset no-such-preset").code == 2);

  const fs::path cfg = write_cfg(small_cfg("evaluate"), "both.json");
  CHECK(run_cli("--config " + cfg.string() + " --preset baseline-3gpp").code ==
        2);

  const fs::path garbled = fs::temp_directory_path() / "celltune_cli_bad.json";
  std::ofstream(garbled) << "{ not json";
  CHECK(run_cli("--config " + garbled.string()).code == 2);

  const fs::path bad_mode = fs::temp_directory_path() / "celltune_cli_mode.json";
  std::ofstream(bad_mode) << "{\"mode\": \"tune\"}";
  const CliResult r = run_cli("--config " + bad_mode.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("config error") != std::string::npos);
}

TEST_CASE("evaluate runs, reruns byte-identically, and honors --seed") {
  const fs::path cfg = write_cfg(small_cfg("evaluate"), "eval.json");
  const fs::path a = fresh_dir("eval_a");
  const CliResult r = run_cli("--config " + cfg.string() + " --out " +
                              a.string() + " --threads 2");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mode=evaluate") != std::string::npos);
  REQUIRE(fs::exists(a / "summary.json"));
  const auto ja = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(ja.at("seed") == 7);

  const fs::path b = fresh_dir("eval_b");
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + b.string()).code ==
          0);
  CHECK(slurp(a / "ue_report.csv") == slurp(b / "ue_report.csv"));
  CHECK(slurp(a / "sinr_cdf.csv") == slurp(b / "sinr_cdf.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));

  const fs::path c = fresh_dir("eval_c");
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + c.string() +
                  " --seed 9")
              .code == 0);
  const auto jc = nlohmann::json::parse(slurp(c / "summary.json"));
  CHECK(jc.at("seed") == 9);
  CHECK(jc.at("config_hash") != ja.at("config_hash"));
}

TEST_CASE("optimize writes a trace and resumes from a cut log") {
  const fs::path cfg = write_cfg(small_cfg("optimize"), "opt.json");
  const fs::path full = fresh_dir("opt_full");
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + full.string())
              .code == 0);
  REQUIRE(fs::exists(full / "trace.csv"));
  const std::string full_trace = slurp(full / "trace.csv");
  const std::string full_log = slurp(full / "evals.jsonl");

  std::istringstream is(full_log);
  std::string line, cut;
  for (int i = 0; i < 6 && std::getline(is, line); ++i) cut += line + "\n";
  const fs::path part = fresh_dir("opt_part");
  fs::create_directories(part);
  std::ofstream(part / "evals.jsonl") << cut;
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + part.string() +
                  " --resume")
              .code == 0);
  CHECK(slurp(part / "trace.csv") == full_trace);
  CHECK(slurp(part / "evals.jsonl") == full_log);

  // A different seed is a different run; its log must be refused.
  const CliResult bad = run_cli("--config " + cfg.string() + " --out " +
                                part.string() + " --resume --seed 5");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("mismatch") != std::string::npos);
}

TEST_CASE("the env var supplies the default output root") {
  const fs::path root = fresh_dir("env_root");
  fs::create_directories(root);
  setenv("CELLTUNE_OUT_ROOT", root.c_str(), 1);
  const fs::path cfg = write_cfg(small_cfg("evaluate"), "env.json");
  const CliResult r = run_cli("--config " + cfg.string());
  unsetenv("CELLTUNE_OUT_ROOT");
  REQUIRE(r.code == 0);

  const auto pos = r.out.find("out=");
  REQUIRE(pos != std::string::npos);
  const std::string out_dir =
      r.out.substr(pos + 4, r.out.find('\n', pos) - pos - 4);
  CHECK(out_dir.rfind(root.string(), 0) == 0);
  CHECK(fs::exists(fs::path(out_dir) / "summary.json"));
}

TEST_CASE("the baseline preset reports full UAV outage") {
  const fs::path p = fresh_dir("preset");
  const CliResult r =
      run_cli("--preset baseline-3gpp --out " + p.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mode=evaluate") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(p / "summary.json"));
  CHECK(j.at("report").at("uav_outage").get<double>() >= 0.99);
  CHECK(j.at("n_gue") == 570);
  CHECK(j.at("n_uav") == 280);
}
