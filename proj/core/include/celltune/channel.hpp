#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include <celltune/rng.hpp>
#include <celltune/scenario.hpp>

namespace celltune {

struct AntennaPattern {
  double bearing_deg = 0.0;
  double tilt_deg = 0.0;  // positive tilts the boresight above the horizon
  double vhpbw_deg = 10.0;
  double hhpbw_deg = 65.0;
};

// -min(12 (offset/hpbw)^2, 25), even in the offset.
double plane_attenuation_db(double offset_deg, double hpbw_deg);

// 8 dBi at 65x65 degrees, growing as either beam narrows.
double max_gain_dbi(double vhpbw_deg, double hhpbw_deg);

// Max gain plus the combined pattern, floored 25 dB below peak.
double antenna_gain_dbi(const AntennaPattern& p, double az_deg, double el_deg);

enum class LinkKind { gue, uav };

double breakpoint_distance_m(double h_bs_m, double h_ut_m, double fc_ghz);
double path_loss_db(LinkKind kind, bool los, double d2d_m, double d3d_m,
                    double h_bs_m, double h_ut_m, double fc_ghz);
double los_probability(LinkKind kind, double d2d_m, double h_ut_m);
double sf_sigma_db(LinkKind kind, bool los, double h_ut_m);

// Squared small-scale envelope: Rayleigh power for GUEs, 1 for UAVs.
double small_scale_power(UeKind kind, Rng& rng);

// One materialized fading realization, aligned with what the rate estimator
// consumes for (seed, draw_idx, round).
struct FadingDraw {
  Eigen::MatrixXd h2;  // cells x ues
  static FadingDraw sample(const Deployment& dep, std::uint64_t seed,
                           int draw_idx, int round);
};

// Decision-independent channel state, frozen per (deployment, seed): chosen
// wrap copy geometry, path loss, LoS flag, and shadow fading per link.
struct LinkCache {
  Eigen::MatrixXd az_deg;  // cells x ues, all for the min-path-loss wrap copy
  Eigen::MatrixXd el_deg;
  Eigen::MatrixXd pl_db;
  Eigen::MatrixXd sf_db;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> los;

  static LinkCache build(const ScenarioSpec& spec, const Deployment& dep,
                         std::uint64_t seed);
};

struct GainTable {
  Eigen::MatrixXd gain_db;  // cells x ues, equals -PL + SF + antenna gain
  std::shared_ptr<const LinkCache> cache;
};

// Recomposes antenna gains for a new decision over a fixed link cache.
GainTable compose_gain_table(const ScenarioSpec& spec, const Deployment& dep,
                             std::shared_ptr<const LinkCache> cache,
                             const DecisionVector& decision);

GainTable build_gain_table(const ScenarioSpec& spec, const Deployment& dep,
                           const DecisionVector& decision, std::uint64_t seed);

// Every adopted propagation constant in one table; shipped as JSON so a run
// can be audited without reading the source.
struct ChannelConstants {
  double speed_of_light_mps = 3.0e8;
  double thermal_noise_dbm_per_hz = -174.0;
  double quad_coeff = 12.0;
  double plane_limit_db = 25.0;
  double combined_limit_db = 25.0;
  double ref_hpbw_deg = 65.0;
  double ref_gain_dbi = 8.0;
  double gue_los_sigma_db = 4.0;
  double gue_nlos_sigma_db = 6.0;
  double effective_env_height_m = 1.0;
  double gue_los_near_m = 18.0;
  double gue_los_decay_m = 63.0;
  double uav_band_min_m = 22.5;
  double uav_full_los_height_m = 100.0;
  double uav_los_sigma_db = 0.0;
  double uav_nlos_sigma_db = 6.0;
};

const ChannelConstants& channel_constants();
std::string channel_constants_json();

}  // namespace celltune
