#pragma once

#include <celltune/gp.hpp>
#include <celltune/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace celltune {

enum class EiForm { std_dev, variance };  // variance = published sigma^2 form
enum class Incumbent { observed, surrogate_max };

struct AcqOptions {
  EiForm form = EiForm::std_dev;
  Incumbent incumbent = Incumbent::observed;
};

// Improvement score; sigma = 0 collapses to max(mu - f_star - xi, 0).
double expected_improvement(double mu, double sigma, double f_star, double xi,
                            EiForm form = EiForm::std_dev);

struct BoxBounds {
  Eigen::VectorXd lo, hi;
  static BoxBounds unit(int d);
  int dim() const { return static_cast<int>(lo.size()); }
};

struct BoConfig {
  int n_init = 0;  // 0 -> 2 * dim
  int n_candidates = 500;
  int n_batches = 10;
  int batch_size = 50;
  double xi = 0.01;
  int max_iters = 100;
  int ell_max = 3;  // coordinate-cycling loops without improvement before stop
  std::uint64_t seed = 1;
  AcqOptions acq;
  FitOptions fit;            // used for full refits
  int full_refit_every = 25; // warm-started lean refits in between
};
void validate_config(const BoConfig& cfg);  // throws ConfigError

struct TracePoint {
  int iteration = 0;  // global evaluation index, initial design included
  Eigen::VectorXd x;  // raw box coordinates
  double value = 0.0;
  double best_value = 0.0;  // best evaluated value so far; injections excluded
  Eigen::VectorXd best_x;
  int coordinate = -1;      // active coordinate (coordinate-cycling runs)
  int region = -1;          // proposing trust region (trust-region runs)
  bool from_source = false; // observation injected from a source run
};

struct RunTrace {
  std::vector<TracePoint> points;
  bool aborted = false;
  std::string error;

  double best_value() const { return points.back().best_value; }
  Eigen::VectorXd best_x() const { return points.back().best_x; }
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

Eigen::MatrixXd uniform_in_box(const BoxBounds& box, int n, Rng& rng);

struct Proposal {
  Eigen::VectorXd x;
  double score = 0.0;
  int index = 0;
};

// Scores a fixed candidate set batch by batch; ties break to the lowest index.
Proposal propose_by_ei(const GpModel& model, const Eigen::MatrixXd& candidates,
                       double f_star, const BoConfig& cfg);
// Draws cfg.n_candidates uniform candidates in the box, then scores them.
Proposal propose_by_ei(const GpModel& model, const BoxBounds& box,
                       double f_star, const BoConfig& cfg, Rng& rng);

// Full fit when k == 0 or k is a multiple of full_every (or without a previous
// model); otherwise a short warm-started refit from prev's hyperparameters.
struct RefitSchedule {
  FitOptions full;
  int full_every = 25;
};
GpModel scheduled_fit(const ObservationSet& obs, std::uint64_t seed, int k,
                      const GpModel* prev, const RefitSchedule& schedule);

// Standard global BO: n_init uniform points, then fit -> propose -> evaluate.
RunTrace run_vanilla_bo(const ObjectiveFn& f, const BoxBounds& box,
                        const BoConfig& cfg);

// Coordinate-cycling BO: keeps a current vector (zero vector clamped into the
// box), and at iteration n proposes a new value for coordinate (n-1) mod d
// only, always adopting the proposal. Stops after ell_max full loops without
// improving the best observed value.
RunTrace run_iterative_bo(const ObjectiveFn& f, const BoxBounds& box,
                          const BoConfig& cfg);

}  // namespace celltune
