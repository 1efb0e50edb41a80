#pragma once

#include <celltune/bo.hpp>
#include <celltune/gp.hpp>
#include <celltune/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace celltune {

struct TurboConfig {
  int n_regions = 5;   // m
  int batch_q = 5;     // evaluations per step, ranked across the region union
  int tau_succ = 3;
  int tau_fail = 15;
  double l_init = 0.8;
  double l_min = 0.0078125;  // 2^-7
  double l_max = 1.6;
  int n_candidates = 500;    // per region per step
  int n_init_per_region = 0; // 0 -> 2 * dim
  int max_evals = 200;       // budget of objective evaluations
  std::uint64_t seed = 1;
  FitOptions fit;
  int full_refit_every = 25;
};
void validate_config(const TurboConfig& cfg);  // throws ConfigError

struct TrustRegionState {
  Eigen::VectorXd center;  // best local point, unit cube
  double length = 0.8;     // base side length L
  int succ_count = 0;
  int fail_count = 0;
  ObservationSet local_obs;
  bool alive = true;
  double best = -std::numeric_limits<double>::infinity();
};

// Per-dimension sides lambda_i * L / (prod lambda)^(1/d); volume stays L^d.
Eigen::VectorXd tr_side_lengths(double length, const Eigen::VectorXd& lengthscales);

// Streak bookkeeping: tau_succ straight successes double L (capped at l_max),
// tau_fail straight failures halve it; dropping below l_min kills the region.
void update_region(TrustRegionState& tr, bool batch_improved,
                   const TurboConfig& cfg);

// Coordinate-sparse perturbations of the center (probability min(20/d, 1),
// at least one coordinate), uniform inside the region box clipped to [0,1]^d.
Eigen::MatrixXd gen_candidates(const TrustRegionState& tr,
                               const Eigen::VectorXd& side_lengths, int n,
                               Rng& rng);

// The initial design a cold run evaluates, in slot order (slot i -> region
// i mod m). Exposed so seeded runs can reproduce cold starts exactly.
Eigen::MatrixXd turbo_initial_design(int dim, const TurboConfig& cfg);

// Optional replacement for the initial design: rows in slot order; entries
// with a value are injected as observations without spending evaluations.
struct TurboSeed {
  Eigen::MatrixXd x;  // unit-cube coordinates
  std::vector<std::optional<double>> value;
};

struct RegionDiag {
  int step = 0;
  int region = 0;
  double length = 0.0;
  double best = 0.0;
};

RunTrace run_turbo(const ObjectiveFn& f, const BoxBounds& box,
                   const TurboConfig& cfg, const TurboSeed* seed = nullptr,
                   std::vector<RegionDiag>* diag = nullptr);

}  // namespace celltune
