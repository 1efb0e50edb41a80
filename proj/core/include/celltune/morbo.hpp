#pragma once

#include <celltune/bo.hpp>
#include <celltune/gp.hpp>
#include <celltune/turbo.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace celltune {

// Both objectives are maximized. a dominates b when it is no worse in both
// coordinates and strictly better in at least one; equal points do not.
bool dominates(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

// Row indices of the nondominated points, first objective descending, ties
// keeping the lower row index first (ties on the front are exact duplicates).
std::vector<int> pareto_front(const Eigen::MatrixX2d& y);

// Area dominated by the set above the reference point. Points at or below
// the reference in either coordinate contribute nothing.
double hypervolume_2d(const Eigen::MatrixX2d& y, const Eigen::Vector2d& ref);

// Exclusive contribution of each row: pooled volume minus the volume without
// that row. Dominated rows and exact duplicates get zero.
Eigen::VectorXd hv_contributions(const Eigen::MatrixX2d& y,
                                 const Eigen::Vector2d& ref);

struct MorboConfig {
  int n_regions = 5;
  int batch_q = 5;        // evaluations per step, greedy hypervolume picks
  int tau_succ = 3;
  int tau_fail = 15;
  double l_init = 0.8;
  double l_min = 0.01;
  double l_max = 1.6;
  int n_candidates = 500;    // per region per step
  int n_init_per_region = 0; // 0 -> 2 * dim
  int max_evals = 200;
  Eigen::Vector2d ref = Eigen::Vector2d::Zero();  // hypervolume reference
  std::uint64_t seed = 1;
  FitOptions fit;
  int full_refit_every = 25;
};
void validate_config(const MorboConfig& cfg);  // throws ConfigError

using BiObjectiveFn = std::function<Eigen::Vector2d(const Eigen::VectorXd&)>;

struct MoTracePoint {
  int iteration = 0;
  Eigen::VectorXd x;       // raw coordinates
  Eigen::Vector2d value;
  double hypervolume = 0.0;  // pooled archive volume after this evaluation
  int region = -1;
};

struct MoRunTrace {
  std::vector<MoTracePoint> points;
  bool aborted = false;
  std::string error;
  std::vector<int> front_indices() const;  // into points, see pareto_front
};

// Multi-objective trust-region search: two global models (one per objective)
// over the shared archive, per-region Thompson draws, and a greedy batch that
// maximizes sampled hypervolume improvement. Region centers follow the local
// point with the largest exclusive contribution; stalled regions shrink, die
// below l_min, and respawn at l_init around fresh points.
MoRunTrace run_morbo(const BiObjectiveFn& f, const BoxBounds& box,
                     const MorboConfig& cfg,
                     std::vector<RegionDiag>* diag = nullptr);

}  // namespace celltune
