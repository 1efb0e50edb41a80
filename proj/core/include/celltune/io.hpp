#pragma once

#include <celltune/bo.hpp>
#include <celltune/morbo.hpp>
#include <celltune/netsim.hpp>
#include <celltune/scenario.hpp>
#include <celltune/transfer.hpp>
#include <celltune/turbo.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace celltune {

// Build identifier baked in at configure time (git describe).
std::string build_id();

// One experiment as the CLI runs it. The top-level seed is authoritative:
// the per-optimizer seeds are overwritten with it at run time.
struct ExperimentConfig {
  ScenarioSpec scenario;
  EvalSettings eval;
  std::string mode = "optimize";    // evaluate | optimize | pareto | transfer
  std::string optimizer = "turbo";  // vanilla | iterative | turbo
  bool joint_hpbw = false;
  std::uint64_t seed = 1;
  BoConfig bo;
  TurboConfig turbo;
  MorboConfig morbo;  // ref (0,0) means: derive from the baseline at run time
  std::vector<double> transfer_mixes{1.0, 0.5, 0.0};
  std::optional<ScenarioSpec> source_scenario;  // transfer source; default target
  std::optional<DecisionVector> decision;       // evaluate mode; default baseline
  std::string output_dir;

  void validate() const;  // throws ConfigError
};

ExperimentConfig experiment_from_json_string(const std::string& text);
std::string experiment_to_json_string(const ExperimentConfig& cfg);

// FNV-1a of the canonical JSON serialization (sorted keys, full defaults),
// so equivalent configs hash equally regardless of input key order.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// "# config_hash=<16 hex> seed=<dec> build=<id>\n"; first line of every CSV.
std::string csv_header(std::uint64_t hash, std::uint64_t seed);

// Per-UE rows plus a trailing "# summary ..." comment row.
void write_ue_report_csv(std::ostream& os, const std::string& header,
                         const std::vector<Ue>& ues, const EvalReport& rep);

// Empirical CDF per UE kind: rows (kind, value, cdf), values ascending and
// cdf = rank / kind count.
void write_cdf_csv(std::ostream& os, const std::string& header,
                   const std::string& value_name,
                   const std::vector<UeKind>& kinds,
                   const Eigen::VectorXd& values);

// Objective-to-rate mapping for convergence output: the objective is a
// lambda-weighted sum of log rates, so exp(f / (lambda n_uav +
// (1 - lambda) n_gue)) is the matching weighted geometric mean.
struct GeomeanMap {
  double lambda_uav = 0.5;
  int n_gue = 0;
  int n_uav = 0;
  double to_geomean(double objective) const;
};

void write_trace_csv(std::ostream& os, const std::string& header,
                     const RunTrace& trace, const GeomeanMap& map);

void write_regions_csv(std::ostream& os, const std::string& header,
                       const std::vector<RegionDiag>& diag);

// Archive rows in evaluation order: objective 0 converted to a GUE geo-mean
// in Mbps, objective 1 reported as coverage, plus the decision hash, the
// pooled hypervolume after the row, and a final-front membership flag.
void write_archive_csv(std::ostream& os, const std::string& header,
                       const MoRunTrace& trace,
                       const std::vector<std::uint64_t>& decision_hashes,
                       int n_gue);

// Side-by-side best-so-far columns, one per arm, indexed by evaluation count
// (injected source rows spend none); shorter arms repeat their last best.
void write_transfer_csv(std::ostream& os, const std::string& header,
                        const std::vector<TransferArm>& arms);

std::string decision_json(const DecisionVector& dv, std::uint64_t hash,
                          std::uint64_t seed);
DecisionVector decision_from_json_string(const std::string& text);

// Append-only evaluation log (JSON lines) used to resume interrupted runs:
// a header line, then one row per objective evaluation.
struct CheckpointHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string build;   // filled with build_id() when empty
  std::string mode;
};

struct EvalLog {
  struct Row {
    Eigen::VectorXd x;  // raw coordinates
    Eigen::VectorXd y;  // one entry per objective
  };
  CheckpointHeader header;
  std::vector<Row> evals;
};

void write_eval_log_header(std::ostream& os, const CheckpointHeader& hdr);
void append_eval(std::ostream& os, int index, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y);
EvalLog read_eval_log(std::istream& is);  // throws ConfigError when malformed

}  // namespace celltune
