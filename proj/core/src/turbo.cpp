#include <celltune/turbo.hpp>

#include <celltune/errors.hpp>

#include "trace_runner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace celltune {

void validate_config(const TurboConfig& cfg) {
  if (cfg.n_regions <= 0) throw ConfigError("n_regions must be positive");
  if (cfg.batch_q <= 0) throw ConfigError("batch_q must be positive");
  if (cfg.tau_succ <= 0 || cfg.tau_fail <= 0)
    throw ConfigError("success/failure thresholds must be positive");
  if (!(cfg.l_min > 0.0 && cfg.l_min < cfg.l_init && cfg.l_init <= cfg.l_max))
    throw ConfigError("trust-region lengths must satisfy 0 < l_min < l_init <= l_max");
  if (cfg.n_candidates <= 0) throw ConfigError("n_candidates must be positive");
  if (cfg.n_init_per_region < 0)
    throw ConfigError("n_init_per_region must be nonnegative");
  if (cfg.max_evals < 0) throw ConfigError("max_evals must be nonnegative");
  if (cfg.full_refit_every <= 0)
    throw ConfigError("full_refit_every must be positive");
}

Eigen::VectorXd tr_side_lengths(double length,
                                const Eigen::VectorXd& lengthscales) {
  const double log_geo_mean = lengthscales.array().log().mean();
  return length * (lengthscales.array().log() - log_geo_mean).exp();
}

void update_region(TrustRegionState& tr, bool batch_improved,
                   const TurboConfig& cfg) {
  if (batch_improved) {
    ++tr.succ_count;
    tr.fail_count = 0;
    if (tr.succ_count >= cfg.tau_succ) {
      tr.length = std::min(cfg.l_max, 2.0 * tr.length);
      tr.succ_count = 0;
    }
  } else {
    ++tr.fail_count;
    tr.succ_count = 0;
    if (tr.fail_count >= cfg.tau_fail) {
      tr.length /= 2.0;
      tr.fail_count = 0;
    }
  }
  if (tr.length < cfg.l_min) tr.alive = false;
}

Eigen::MatrixXd gen_candidates(const TrustRegionState& tr,
                               const Eigen::VectorXd& side_lengths, int n,
                               Rng& rng) {
  const int d = static_cast<int>(tr.center.size());
  const double p = std::min(20.0 / d, 1.0);
  Eigen::MatrixXd out(n, d);
  std::vector<int> mask(d);
  for (int i = 0; i < n; ++i) {
    int n_masked = 0;
    for (int j = 0; j < d; ++j) {
      mask[j] = rng.uniform() < p ? 1 : 0;
      n_masked += mask[j];
    }
    if (n_masked == 0) mask[rng.index(d)] = 1;
    for (int j = 0; j < d; ++j) {
      if (!mask[j]) {
        out(i, j) = tr.center[j];
        continue;
      }
      const double lo = std::max(0.0, tr.center[j] - side_lengths[j] / 2.0);
      const double hi = std::min(1.0, tr.center[j] + side_lengths[j] / 2.0);
      out(i, j) = rng.uniform(lo, hi);
    }
  }
  return out;
}

Eigen::MatrixXd turbo_initial_design(int dim, const TurboConfig& cfg) {
  const int m = cfg.n_regions;
  const int per_region = cfg.n_init_per_region > 0 ? cfg.n_init_per_region
                                                   : 2 * dim;
  Eigen::MatrixXd design(m * per_region, dim);
  for (int r = 0; r < m; ++r) {
    Rng rng = Rng::stream(cfg.seed,
                          {fnv1a64("tr-init"), static_cast<std::uint64_t>(r)});
    for (int k = 0; k < per_region; ++k)
      for (int j = 0; j < dim; ++j) design(k * m + r, j) = rng.uniform();
  }
  return design;
}

namespace {

struct Region {
  TrustRegionState tr;
  GpModel model = GpModel::with_hyperparams({}, GpHyperparams{});
  int fit_count = 0;
};

}  // namespace

RunTrace run_turbo(const ObjectiveFn& f, const BoxBounds& box,
                   const TurboConfig& cfg, const TurboSeed* seed,
                   std::vector<RegionDiag>* diag) {
  validate_config(cfg);
  const int d = box.dim();
  const int m = cfg.n_regions;
  const int per_region = cfg.n_init_per_region > 0 ? cfg.n_init_per_region
                                                   : 2 * d;
  detail::TraceRunner run(f, box);
  std::vector<Region> regions(m);
  for (auto& reg : regions) {
    reg.tr.length = cfg.l_init;
    reg.tr.local_obs.x.resize(0, d);
    reg.tr.local_obs.y.resize(0);
  }

  auto absorb = [&](Region& reg, const Eigen::VectorXd& u, double y) {
    reg.tr.local_obs.add(u, y);
    if (y > reg.tr.best) {
      reg.tr.best = y;
      reg.tr.center = u;
    }
  };

  if (seed) {
    if (seed->x.cols() != d)
      throw ConfigError("seed dimension does not match the search box");
    if (seed->value.size() != static_cast<std::size_t>(seed->x.rows()))
      throw ConfigError("seed values must match seed points one to one");
    for (Eigen::Index i = 0; i < seed->x.rows(); ++i) {
      const int r = static_cast<int>(i) % m;
      const Eigen::VectorXd u = seed->x.row(i).transpose();
      if (seed->value[i]) {
        run.inject(u, *seed->value[i], r);
        absorb(regions[r], u, *seed->value[i]);
      } else if (run.evals < cfg.max_evals) {
        const auto y = run.evaluate(u, -1, r);
        if (!y) return run.trace;
        absorb(regions[r], u, *y);
      }
    }
  } else {
    const Eigen::MatrixXd design = turbo_initial_design(d, cfg);
    for (Eigen::Index i = 0; i < design.rows() && run.evals < cfg.max_evals;
         ++i) {
      const int r = static_cast<int>(i) % m;
      const Eigen::VectorXd u = design.row(i).transpose();
      const auto y = run.evaluate(u, -1, r);
      if (!y) return run.trace;
      absorb(regions[r], u, *y);
    }
  }

  const RefitSchedule schedule{cfg.fit, cfg.full_refit_every};
  struct PoolEntry {
    double value;
    int region;
    Eigen::VectorXd x;
  };

  for (int step = 1; run.evals < cfg.max_evals; ++step) {
    std::vector<PoolEntry> pool;
    pool.reserve(static_cast<std::size_t>(m) * cfg.n_candidates);
    for (int r = 0; r < m; ++r) {
      Region& reg = regions[r];
      if (reg.tr.local_obs.size() == 0) continue;
      const std::uint64_t fit_seed =
          Rng::stream(cfg.seed,
                      {fnv1a64("tr-fit"), static_cast<std::uint64_t>(r)})
              .u64();
      reg.model = scheduled_fit(reg.tr.local_obs, fit_seed, reg.fit_count,
                                reg.fit_count ? &reg.model : nullptr, schedule);
      ++reg.fit_count;
      const Eigen::VectorXd ls =
          reg.model.hyperparams().log_lengthscale.array().exp();
      const Eigen::VectorXd side = tr_side_lengths(reg.tr.length, ls);
      Rng crng = Rng::stream(cfg.seed, {fnv1a64("tr-cand"),
                                        static_cast<std::uint64_t>(step),
                                        static_cast<std::uint64_t>(r)});
      const Eigen::MatrixXd cands =
          gen_candidates(reg.tr, side, cfg.n_candidates, crng);
      Rng srng = Rng::stream(cfg.seed, {fnv1a64("tr-ts"),
                                        static_cast<std::uint64_t>(step),
                                        static_cast<std::uint64_t>(r)});
      const Eigen::VectorXd ts = reg.model.sample_joint(cands, srng);
      for (int i = 0; i < cands.rows(); ++i)
        pool.push_back({ts[i], r, cands.row(i).transpose()});
    }
    if (pool.empty()) break;

    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (pool[a].value != pool[b].value) return pool[a].value > pool[b].value;
      return a < b;
    });

    const int q = std::min(cfg.batch_q, cfg.max_evals - run.evals);
    std::vector<double> pre_best(m);
    std::vector<char> touched(m, 0);
    std::vector<double> batch_best(m,
                                   -std::numeric_limits<double>::infinity());
    for (int r = 0; r < m; ++r) pre_best[r] = regions[r].tr.best;
    for (int k = 0; k < q; ++k) {
      const PoolEntry& e = pool[order[k]];
      const auto y = run.evaluate(e.x, -1, e.region);
      if (!y) return run.trace;
      absorb(regions[e.region], e.x, *y);
      touched[e.region] = 1;
      batch_best[e.region] = std::max(batch_best[e.region], *y);
    }

    for (int r = 0; r < m; ++r) {
      Region& reg = regions[r];
      if (touched[r])
        update_region(reg.tr, batch_best[r] > pre_best[r], cfg);
      if (!reg.tr.alive) {
        // Respawn: fresh random center, initial length, new local dataset.
        Rng rrng = Rng::stream(cfg.seed, {fnv1a64("tr-respawn"),
                                          static_cast<std::uint64_t>(step),
                                          static_cast<std::uint64_t>(r)});
        reg.tr = TrustRegionState{};
        reg.tr.length = cfg.l_init;
        reg.tr.center.resize(d);
        for (int j = 0; j < d; ++j) reg.tr.center[j] = rrng.uniform();
        reg.tr.local_obs.x.resize(0, d);
        reg.tr.local_obs.y.resize(0);
        reg.fit_count = 0;
        for (int k = 0; k < per_region && run.evals < cfg.max_evals; ++k) {
          Eigen::VectorXd u(d);
          for (int j = 0; j < d; ++j) u[j] = rrng.uniform();
          const auto y = run.evaluate(u, -1, r);
          if (!y) return run.trace;
          absorb(reg, u, *y);
        }
      }
      if (diag)
        diag->push_back({step, r, reg.tr.length, reg.tr.best});
    }
  }
  return run.trace;
}

}  // namespace celltune
