#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include <celltune/channel.hpp>
#include <celltune/scenario.hpp>

namespace celltune {

struct EvalSettings {
  int n_fading_draws = 50;
  double rate_floor_bps = 1.0;
  double outage_threshold_db = -5.0;
  double lambda_uav = 0.5;  // objective weight on UAV log rates
  bool redrop_per_eval = false;
};

double noise_power_dbm(double bandwidth_hz, double noise_figure_db);

// Serving cell per UE: strongest gain, ties to the lowest cell id. Transmit
// power is uniform across cells so it cancels in the argmax.
Eigen::VectorXi associate(const Eigen::MatrixXd& gain_db);

// SINR with unit fading on every link.
Eigen::VectorXd sinr_linear(const Eigen::MatrixXd& gain_db,
                            const Eigen::VectorXi& assoc, double tx_power_dbm,
                            double noise_dbm);

// Round-robin rate per UE: (band share) * bandwidth * E[log2(1 + SINR)],
// with the expectation estimated over n_draws fading realizations. GUE links
// fade as Rayleigh power on both serving and interfering links; UAV links do
// not fade, so their rates are independent of n_draws.
Eigen::VectorXd rates_bps(const Eigen::MatrixXd& gain_db,
                          const std::vector<UeKind>& kinds,
                          const Eigen::VectorXi& assoc, double tx_power_dbm,
                          double noise_dbm, double bandwidth_hz, int n_draws,
                          std::uint64_t seed, int round);

// lambda * sum_uav log(rate) + (1 - lambda) * sum_gue log(rate), with rates
// clamped at floor_bps before the log.
double objective(const Eigen::VectorXd& rates_bps,
                 const std::vector<UeKind>& kinds, double lambda_uav,
                 double floor_bps);

double geo_mean(const Eigen::VectorXd& rates_bps);

// exp(f / n_ues); for lambda = 0.5 pass 2f to undo the half weights.
double map_objective_to_geomean(double f, int n_ues);

// Fraction of UAVs at or above the SINR threshold; throws std::domain_error
// when the deployment has no UAVs.
double uav_coverage(const Eigen::VectorXd& sinr_db,
                    const std::vector<UeKind>& kinds, double threshold_db);

struct EvalReport {
  Eigen::VectorXi assoc;
  Eigen::VectorXd sinr_db;  // unit-fading SINR used for coverage reporting
  Eigen::VectorXd rate_bps;
  double objective_value = 0.0;
  double geo_mean_rate_bps = 0.0;
  double gue_geo_mean_rate_bps = 0.0;
  double uav_geo_mean_rate_bps = 0.0;
  double gue_sum_log_rate = 0.0;
  double uav_sum_log_rate = 0.0;
  double uav_coverage = 0.0;
  double uav_outage = 0.0;
  bool rate_floor_hit = false;
};

// Owns the deployment and frozen channel draws for one experiment. In the
// default mode every evaluation reuses them, so evaluate() is pure; redrop
// mode redraws drop and channel per call through evaluate_next().
class Evaluator {
 public:
  Evaluator(ScenarioSpec spec, EvalSettings settings, std::uint64_t seed);

  const ScenarioSpec& spec() const { return spec_; }
  const EvalSettings& settings() const { return settings_; }
  const Deployment& deployment() const { return *base_.dep; }
  std::uint64_t seed() const { return seed_; }
  int n_cells() const { return static_cast<int>(deployment().layout.cells.size()); }

  EvalReport evaluate(const DecisionVector& decision) const;
  EvalReport evaluate_next(const DecisionVector& decision);
  int round() const { return round_; }
  void set_round(int round) { round_ = round; }  // for checkpoint resume

 private:
  struct RoundCtx {
    std::shared_ptr<const Deployment> dep;
    std::shared_ptr<const LinkCache> cache;
    std::vector<UeKind> kinds;
  };
  RoundCtx make_ctx(int round) const;
  EvalReport run(const RoundCtx& ctx, const DecisionVector& decision,
                 int round) const;

  ScenarioSpec spec_;
  EvalSettings settings_;
  std::uint64_t seed_ = 0;
  int round_ = 0;
  RoundCtx base_;
};

}  // namespace celltune
