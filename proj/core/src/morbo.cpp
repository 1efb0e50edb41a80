#include <celltune/morbo.hpp>

#include <celltune/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace celltune {

bool dominates(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1]);
}

std::vector<int> pareto_front(const Eigen::MatrixX2d& y) {
  const int n = static_cast<int>(y.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (y(a, 0) != y(b, 0)) return y(a, 0) > y(b, 0);
    return a < b;
  });

  // Walk groups of equal first objective in descending order. A point is on
  // the front iff it carries its group's best second objective and beats
  // everything with a strictly larger first objective.
  std::vector<int> front;
  double best1 = -std::numeric_limits<double>::infinity();
  int g = 0;
  while (g < n) {
    int h = g;
    double group1 = -std::numeric_limits<double>::infinity();
    while (h < n && y(order[h], 0) == y(order[g], 0)) {
      group1 = std::max(group1, y(order[h], 1));
      ++h;
    }
    if (group1 > best1)
      for (int k = g; k < h; ++k)
        if (y(order[k], 1) == group1) front.push_back(order[k]);
    best1 = std::max(best1, group1);
    g = h;
  }
  return front;
}

namespace {

// Sweep over front rows ordered by first objective descending; the second
// objective then ascends, so each row adds one rectangle slab.
double hv_of_sorted(const std::vector<Eigen::Vector2d>& front,
                    const Eigen::Vector2d& ref) {
  double hv = 0.0;
  double prev1 = ref[1];
  for (const auto& p : front) {
    const double w = p[0] - ref[0];
    const double h = p[1] - prev1;
    if (w > 0.0 && h > 0.0) hv += w * h;
    prev1 = std::max(prev1, p[1]);
  }
  return hv;
}

std::vector<Eigen::Vector2d> sorted_front(const Eigen::MatrixX2d& y) {
  std::vector<Eigen::Vector2d> rows;
  for (int i : pareto_front(y)) rows.emplace_back(y(i, 0), y(i, 1));
  return rows;
}

}  // namespace

double hypervolume_2d(const Eigen::MatrixX2d& y, const Eigen::Vector2d& ref) {
  return hv_of_sorted(sorted_front(y), ref);
}

Eigen::VectorXd hv_contributions(const Eigen::MatrixX2d& y,
                                 const Eigen::Vector2d& ref) {
  const int n = static_cast<int>(y.rows());
  const double hv_all = hypervolume_2d(y, ref);
  Eigen::VectorXd c(n);
  Eigen::MatrixX2d rest(n - 1, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0, k = 0; j < n; ++j)
      if (j != i) rest.row(k++) = y.row(j);
    c[i] = std::max(0.0, hv_all - hypervolume_2d(rest, ref));
  }
  return c;
}

void validate_config(const MorboConfig& cfg) {
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

std::vector<int> MoRunTrace::front_indices() const {
  Eigen::MatrixX2d y(points.size(), 2);
  for (std::size_t i = 0; i < points.size(); ++i)
    y.row(i) = points[i].value.transpose();
  return pareto_front(y);
}

namespace {

struct MoRegion {
  TrustRegionState tr;
  std::vector<int> local;  // archive indices this region collected
};

}  // namespace

MoRunTrace run_morbo(const BiObjectiveFn& f, const BoxBounds& box,
                     const MorboConfig& cfg, std::vector<RegionDiag>* diag) {
  validate_config(cfg);
  const int d = box.dim();
  const int m = cfg.n_regions;
  const int per_region = cfg.n_init_per_region > 0 ? cfg.n_init_per_region
                                                   : 2 * d;

  MoRunTrace trace;
  ObservationSet obs0, obs1;  // shared inputs, one output column each
  obs0.x.resize(0, d);
  obs0.y.resize(0);
  obs1.x.resize(0, d);
  obs1.y.resize(0);
  Eigen::MatrixX2d archive(0, 2);
  int evals = 0;

  auto to_raw = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return box.lo.array() + u.array() * (box.hi - box.lo).array();
  };

  // Evaluates in raw coordinates and appends to the shared archive; returns
  // the archive row or -1 after an objective failure.
  auto evaluate = [&](const Eigen::VectorXd& u, int region) -> int {
    Eigen::Vector2d y;
    try {
      y = f(to_raw(u));
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.error = e.what();
      return -1;
    }
    ++evals;
    obs0.add(u, y[0]);
    obs1.add(u, y[1]);
    archive.conservativeResize(archive.rows() + 1, 2);
    archive.row(archive.rows() - 1) = y.transpose();
    MoTracePoint p;
    p.iteration = static_cast<int>(trace.points.size());
    p.x = to_raw(u);
    p.value = y;
    p.hypervolume = hypervolume_2d(archive, cfg.ref);
    p.region = region;
    trace.points.push_back(std::move(p));
    return static_cast<int>(archive.rows()) - 1;
  };

  std::vector<MoRegion> regions(m);
  for (auto& reg : regions) reg.tr.length = cfg.l_init;

  for (int i = 0; i < m * per_region && evals < cfg.max_evals; ++i) {
    const int r = i % m;
    Rng rng = Rng::stream(cfg.seed, {fnv1a64("mo-init"),
                                     static_cast<std::uint64_t>(r),
                                     static_cast<std::uint64_t>(i / m)});
    Eigen::VectorXd u(d);
    for (int j = 0; j < d; ++j) u[j] = rng.uniform();
    const int row = evaluate(u, r);
    if (row < 0) return trace;
    regions[r].local.push_back(row);
  }

  // Streak knobs shared with the scalar trust-region update.
  TurboConfig knobs;
  knobs.tau_succ = cfg.tau_succ;
  knobs.tau_fail = cfg.tau_fail;
  knobs.l_init = cfg.l_init;
  knobs.l_min = cfg.l_min;
  knobs.l_max = cfg.l_max;

  const RefitSchedule schedule{cfg.fit, cfg.full_refit_every};
  GpModel gp0 = GpModel::with_hyperparams({}, GpHyperparams{});
  GpModel gp1 = GpModel::with_hyperparams({}, GpHyperparams{});
  int kfit = 0;

  struct PoolEntry {
    Eigen::Vector2d value;
    int region;
    Eigen::VectorXd x;
  };

  for (int step = 1; evals < cfg.max_evals; ++step) {
    const std::uint64_t s0 =
        Rng::stream(cfg.seed, {fnv1a64("mo-fit0")}).u64();
    const std::uint64_t s1 =
        Rng::stream(cfg.seed, {fnv1a64("mo-fit1")}).u64();
    gp0 = scheduled_fit(obs0, s0, kfit, kfit ? &gp0 : nullptr, schedule);
    gp1 = scheduled_fit(obs1, s1, kfit, kfit ? &gp1 : nullptr, schedule);
    ++kfit;

    const Eigen::VectorXd ls_mix =
        (0.5 * (gp0.hyperparams().log_lengthscale +
                gp1.hyperparams().log_lengthscale))
            .array()
            .exp();
    const Eigen::VectorXd hvc = hv_contributions(archive, cfg.ref);

    std::vector<PoolEntry> pool;
    pool.reserve(static_cast<std::size_t>(m) * cfg.n_candidates);
    for (int r = 0; r < m; ++r) {
      MoRegion& reg = regions[r];
      if (reg.local.empty()) continue;
      // Center on the local point with the largest exclusive contribution;
      // ties fall back to objective sum, then to collection order.
      int center = reg.local.front();
      for (int idx : reg.local) {
        const double best_key = hvc[center], key = hvc[idx];
        if (key > best_key ||
            (key == best_key && archive.row(idx).sum() > archive.row(center).sum()))
          center = idx;
      }
      reg.tr.center = obs0.x.row(center).transpose();

      const Eigen::VectorXd side = tr_side_lengths(reg.tr.length, ls_mix);
      Rng crng = Rng::stream(cfg.seed, {fnv1a64("mo-cand"),
                                        static_cast<std::uint64_t>(step),
                                        static_cast<std::uint64_t>(r)});
      const Eigen::MatrixXd cands =
          gen_candidates(reg.tr, side, cfg.n_candidates, crng);
      Rng t0 = Rng::stream(cfg.seed, {fnv1a64("mo-ts0"),
                                      static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(r)});
      Rng t1 = Rng::stream(cfg.seed, {fnv1a64("mo-ts1"),
                                      static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(r)});
      const Eigen::VectorXd ts0 = gp0.sample_joint(cands, t0);
      const Eigen::VectorXd ts1 = gp1.sample_joint(cands, t1);
      for (int i = 0; i < cands.rows(); ++i)
        pool.push_back({Eigen::Vector2d(ts0[i], ts1[i]), r,
                        cands.row(i).transpose()});
    }
    if (pool.empty()) break;

    // Greedy batch: each pick maximizes the hypervolume its sampled pair adds
    // over the archive plus the picks already taken; ties keep pool order.
    const int q = std::min(cfg.batch_q, cfg.max_evals - evals);
    Eigen::MatrixX2d basis = archive;
    std::vector<char> used(pool.size(), 0);
    std::vector<int> picks;
    for (int k = 0; k < q; ++k) {
      const std::vector<Eigen::Vector2d> front = sorted_front(basis);
      const double base_hv = hv_of_sorted(front, cfg.ref);
      int best = -1;
      double best_gain = -1.0;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        std::vector<Eigen::Vector2d> merged;
        merged.reserve(front.size() + 1);
        bool inserted = false;
        for (const auto& p : front) {
          if (!inserted && pool[i].value[0] > p[0]) {
            merged.push_back(pool[i].value);
            inserted = true;
          }
          merged.push_back(p);
        }
        if (!inserted) merged.push_back(pool[i].value);
        const double gain = hv_of_sorted(merged, cfg.ref) - base_hv;
        if (gain > best_gain) {
          best_gain = gain;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) break;
      used[best] = 1;
      picks.push_back(best);
      basis.conservativeResize(basis.rows() + 1, 2);
      basis.row(basis.rows() - 1) = pool[best].value.transpose();
    }

    std::vector<char> touched(m, 0), improved(m, 0);
    for (int idx : picks) {
      const PoolEntry& e = pool[idx];
      const double hv_before =
          trace.points.empty() ? 0.0 : trace.points.back().hypervolume;
      const int row = evaluate(e.x, e.region);
      if (row < 0) return trace;
      regions[e.region].local.push_back(row);
      touched[e.region] = 1;
      if (trace.points.back().hypervolume > hv_before) improved[e.region] = 1;
    }

    for (int r = 0; r < m; ++r) {
      MoRegion& reg = regions[r];
      if (touched[r]) update_region(reg.tr, improved[r] != 0, knobs);
      if (!reg.tr.alive) {
        Rng rrng = Rng::stream(cfg.seed, {fnv1a64("mo-respawn"),
                                          static_cast<std::uint64_t>(step),
                                          static_cast<std::uint64_t>(r)});
        reg.tr = TrustRegionState{};
        reg.tr.length = cfg.l_init;
        reg.tr.center.resize(d);
        for (int j = 0; j < d; ++j) reg.tr.center[j] = rrng.uniform();
        reg.local.clear();
        for (int k = 0; k < per_region && evals < cfg.max_evals; ++k) {
          Eigen::VectorXd u(d);
          for (int j = 0; j < d; ++j) u[j] = rrng.uniform();
          const int row = evaluate(u, r);
          if (row < 0) return trace;
          reg.local.push_back(row);
        }
      }
      if (diag) {
        const double pooled =
            trace.points.empty() ? 0.0 : trace.points.back().hypervolume;
        diag->push_back({step, r, reg.tr.length, pooled});
      }
    }
  }
  return trace;
}

}  // namespace celltune
