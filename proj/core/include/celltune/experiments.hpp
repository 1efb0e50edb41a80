#pragma once

#include <celltune/io.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace celltune {

// Optimizer coordinates -> decision -> scalar objective on ev. Decodes
// against the baseline decision, so tilt-only runs keep baseline beamwidths.
// Redrop mode advances the evaluation round on every call.
ObjectiveFn make_objective(Evaluator& ev, bool joint);

// (GUE sum of log rates, UAV coverage) for Pareto runs.
BiObjectiveFn make_biobjective(Evaluator& ev, bool joint);

BoxBounds decision_box(const ScenarioSpec& spec, int n_cells, bool joint);

struct ExperimentResult {
  std::uint64_t hash = 0;
  EvalReport baseline;           // baseline decision on the target scenario
  DecisionVector best_decision;  // pareto: front point with the best GUE rate
  double best_value = 0.0;       // pareto: final pooled hypervolume
  std::vector<std::string> files;  // names written under out_dir
};

// Runs one experiment and writes its report files under out_dir (created on
// demand). Optimize, pareto, and transfer runs keep an append-only
// evaluation log; with resume the logged prefix is replayed instead of
// re-evaluated, and a log from a different config, seed, or mode is refused.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir,
                                bool resume);

}  // namespace celltune
