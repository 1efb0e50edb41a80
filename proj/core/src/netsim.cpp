#include <celltune/netsim.hpp>

#include <cmath>
#include <stdexcept>

#include <celltune/mathu.hpp>
#include <celltune/rng.hpp>

namespace celltune {

namespace {

constexpr std::uint64_t tag(std::string_view s) { return fnv1a64(s); }

}  // namespace

double noise_power_dbm(double bandwidth_hz, double noise_figure_db) {
  return channel_constants().thermal_noise_dbm_per_hz +
         10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

Eigen::VectorXi associate(const Eigen::MatrixXd& gain_db) {
  const Eigen::Index n_cells = gain_db.rows(), n_ues = gain_db.cols();
  Eigen::VectorXi assoc(n_ues);
  for (Eigen::Index k = 0; k < n_ues; ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index b = 1; b < n_cells; ++b)
      if (gain_db(b, k) > gain_db(best, k)) best = b;
    assoc[k] = static_cast<int>(best);
  }
  return assoc;
}

Eigen::VectorXd sinr_linear(const Eigen::MatrixXd& gain_db,
                            const Eigen::VectorXi& assoc, double tx_power_dbm,
                            double noise_dbm) {
  const Eigen::Index n_cells = gain_db.rows(), n_ues = gain_db.cols();
  const double noise = db_to_lin(noise_dbm);
  Eigen::VectorXd out(n_ues);
  for (Eigen::Index k = 0; k < n_ues; ++k) {
    double sig = 0.0, tot = 0.0;
    for (Eigen::Index b = 0; b < n_cells; ++b) {
      const double rx = db_to_lin(tx_power_dbm + gain_db(b, k));
      tot += rx;
      if (b == assoc[k]) sig = rx;
    }
    out[k] = sig / (tot - sig + noise);
  }
  return out;
}

Eigen::VectorXd rates_bps(const Eigen::MatrixXd& gain_db,
                          const std::vector<UeKind>& kinds,
                          const Eigen::VectorXi& assoc, double tx_power_dbm,
                          double noise_dbm, double bandwidth_hz, int n_draws,
                          std::uint64_t seed, int round) {
  const Eigen::Index n_cells = gain_db.rows(), n_ues = gain_db.cols();
  if (static_cast<Eigen::Index>(kinds.size()) != n_ues || assoc.size() != n_ues)
    throw std::invalid_argument("rates_bps: mismatched shapes");
  if (n_draws < 1) throw std::invalid_argument("rates_bps: n_draws must be >= 1");

  const double noise = db_to_lin(noise_dbm);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_cells);
  for (Eigen::Index k = 0; k < n_ues; ++k) counts[assoc[k]] += 1.0;

  Eigen::MatrixXd rx(n_cells, n_ues);
  for (Eigen::Index k = 0; k < n_ues; ++k)
    for (Eigen::Index b = 0; b < n_cells; ++b)
      rx(b, k) = db_to_lin(tx_power_dbm + gain_db(b, k));

  constexpr double kInvLn2 = 1.4426950408889634074;
  Eigen::VectorXd rates(n_ues);
  for (Eigen::Index k = 0; k < n_ues; ++k) {
    const double share = 1.0 / counts[assoc[k]];
    double mean_se = 0.0;
    if (kinds[static_cast<std::size_t>(k)] == UeKind::uav) {
      // Pure LoS: every draw is identical.
      double sig = 0.0, tot = 0.0;
      for (Eigen::Index b = 0; b < n_cells; ++b) {
        tot += rx(b, k);
        if (b == assoc[k]) sig = rx(b, k);
      }
      mean_se = std::log(1.0 + sig / (tot - sig + noise)) * kInvLn2;
    } else {
      for (int d = 0; d < n_draws; ++d) {
        Rng rng = Rng::stream(seed, {tag("fading"), static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(d),
                                     static_cast<std::uint64_t>(round)});
        double sig = 0.0, tot = 0.0;
        for (Eigen::Index b = 0; b < n_cells; ++b) {
          const double p = rx(b, k) * rng.exponential();
          tot += p;
          if (b == assoc[k]) sig = p;
        }
        mean_se += std::log(1.0 + sig / (tot - sig + noise)) * kInvLn2;
      }
      mean_se /= n_draws;
    }
    rates[k] = share * bandwidth_hz * mean_se;
  }
  return rates;
}

double objective(const Eigen::VectorXd& rates_bps,
                 const std::vector<UeKind>& kinds, double lambda_uav,
                 double floor_bps) {
  if (static_cast<Eigen::Index>(kinds.size()) != rates_bps.size())
    throw std::invalid_argument("objective: mismatched shapes");
  double sum_uav = 0.0, sum_gue = 0.0;
  for (Eigen::Index k = 0; k < rates_bps.size(); ++k) {
    const double lr = std::log(std::max(rates_bps[k], floor_bps));
    if (kinds[static_cast<std::size_t>(k)] == UeKind::uav)
      sum_uav += lr;
    else
      sum_gue += lr;
  }
  return lambda_uav * sum_uav + (1.0 - lambda_uav) * sum_gue;
}

double geo_mean(const Eigen::VectorXd& rates_bps) {
  if (rates_bps.size() == 0) return 0.0;
  double s = 0.0;
  for (Eigen::Index k = 0; k < rates_bps.size(); ++k) s += std::log(rates_bps[k]);
  return std::exp(s / static_cast<double>(rates_bps.size()));
}

double map_objective_to_geomean(double f, int n_ues) {
  return std::exp(f / static_cast<double>(n_ues));
}

double uav_coverage(const Eigen::VectorXd& sinr_db,
                    const std::vector<UeKind>& kinds, double threshold_db) {
  int n_uav = 0, covered = 0;
  for (Eigen::Index k = 0; k < sinr_db.size(); ++k) {
    if (kinds[static_cast<std::size_t>(k)] != UeKind::uav) continue;
    ++n_uav;
    if (sinr_db[k] >= threshold_db) ++covered;
  }
  if (n_uav == 0) throw std::domain_error("uav_coverage: deployment has no UAVs");
  return static_cast<double>(covered) / static_cast<double>(n_uav);
}

Evaluator::Evaluator(ScenarioSpec spec, EvalSettings settings, std::uint64_t seed)
    : spec_(std::move(spec)), settings_(settings), seed_(seed) {
  if (settings_.n_fading_draws < 1)
    throw ConfigError("n_fading_draws must be >= 1");
  base_ = make_ctx(0);
}

Evaluator::RoundCtx Evaluator::make_ctx(int round) const {
  std::uint64_t s = seed_;
  if (round != 0) {
    s ^= splitmix64(s) + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(round);
    (void)splitmix64(s);
  }
  RoundCtx ctx;
  ctx.dep = std::make_shared<const Deployment>(drop_ues(spec_, s));
  ctx.cache = std::make_shared<const LinkCache>(LinkCache::build(spec_, *ctx.dep, s));
  ctx.kinds.reserve(ctx.dep->ues.size());
  for (const Ue& ue : ctx.dep->ues) ctx.kinds.push_back(ue.kind);
  return ctx;
}

EvalReport Evaluator::run(const RoundCtx& ctx, const DecisionVector& decision,
                          int round) const {
  const GainTable gt = compose_gain_table(spec_, *ctx.dep, ctx.cache, decision);
  const double noise = noise_power_dbm(spec_.bandwidth_hz, spec_.noise_figure_db);

  EvalReport rep;
  rep.assoc = associate(gt.gain_db);
  const Eigen::VectorXd s = sinr_linear(gt.gain_db, rep.assoc, spec_.tx_power_dbm, noise);
  rep.sinr_db = s.array().log10() * 10.0;
  rep.rate_bps = rates_bps(gt.gain_db, ctx.kinds, rep.assoc, spec_.tx_power_dbm,
                           noise, spec_.bandwidth_hz, settings_.n_fading_draws,
                           seed_, round);

  rep.objective_value = objective(rep.rate_bps, ctx.kinds, settings_.lambda_uav,
                                  settings_.rate_floor_bps);
  rep.geo_mean_rate_bps = geo_mean(rep.rate_bps);
  double sum_gue = 0.0, sum_uav = 0.0;
  int n_gue = 0, n_uav = 0;
  for (Eigen::Index k = 0; k < rep.rate_bps.size(); ++k) {
    const double lr = std::log(std::max(rep.rate_bps[k], settings_.rate_floor_bps));
    rep.rate_floor_hit |= rep.rate_bps[k] < settings_.rate_floor_bps;
    if (ctx.kinds[static_cast<std::size_t>(k)] == UeKind::uav) {
      sum_uav += lr;
      ++n_uav;
    } else {
      sum_gue += lr;
      ++n_gue;
    }
  }
  rep.gue_sum_log_rate = sum_gue;
  rep.uav_sum_log_rate = sum_uav;
  rep.gue_geo_mean_rate_bps = n_gue > 0 ? std::exp(sum_gue / n_gue) : 0.0;
  rep.uav_geo_mean_rate_bps = n_uav > 0 ? std::exp(sum_uav / n_uav) : 0.0;
  if (n_uav > 0) {
    rep.uav_coverage = uav_coverage(rep.sinr_db, ctx.kinds, settings_.outage_threshold_db);
    rep.uav_outage = 1.0 - rep.uav_coverage;
  }
  return rep;
}

EvalReport Evaluator::evaluate(const DecisionVector& decision) const {
  return run(base_, decision, 0);
}

EvalReport Evaluator::evaluate_next(const DecisionVector& decision) {
  if (!settings_.redrop_per_eval) return evaluate(decision);
  const int r = round_++;
  if (r == 0) return run(base_, decision, r);
  return run(make_ctx(r), decision, r);
}

}  // namespace celltune
