#include <celltune/bo.hpp>

#include <celltune/errors.hpp>
#include <celltune/mathu.hpp>

#include "trace_runner.hpp"

#include <algorithm>
#include <cmath>

namespace celltune {

double expected_improvement(double mu, double sigma, double f_star, double xi,
                            EiForm form) {
  const double delta = mu - f_star - xi;
  if (sigma <= 0.0) return std::max(delta, 0.0);
  const double spread = form == EiForm::std_dev ? sigma : sigma * sigma;
  const double z = delta / spread;
  return std::max(0.0, delta * norm_cdf(z) + spread * norm_pdf(z));
}

BoxBounds BoxBounds::unit(int d) {
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
}

void validate_config(const BoConfig& cfg) {
  if (cfg.n_candidates <= 0 || cfg.n_batches <= 0 || cfg.batch_size <= 0)
    throw ConfigError("candidate counts must be positive");
  if (cfg.n_batches * cfg.batch_size != cfg.n_candidates)
    throw ConfigError("n_batches * batch_size must equal n_candidates");
  if (!(cfg.xi >= 0.0 && cfg.xi < 1.0)) throw ConfigError("xi must lie in [0, 1)");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (cfg.ell_max <= 0) throw ConfigError("ell_max must be positive");
  if (cfg.full_refit_every <= 0)
    throw ConfigError("full_refit_every must be positive");
}

Eigen::MatrixXd uniform_in_box(const BoxBounds& box, int n, Rng& rng) {
  const int d = box.dim();
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out(i, j) = box.lo[j] + (box.hi[j] - box.lo[j]) * rng.uniform();
  return out;
}

Proposal propose_by_ei(const GpModel& model, const Eigen::MatrixXd& candidates,
                       double f_star, const BoConfig& cfg) {
  const int n = static_cast<int>(candidates.rows());
  Eigen::VectorXd mu(n), var(n);
  for (int start = 0; start < n; start += cfg.batch_size) {
    const int len = std::min(cfg.batch_size, n - start);
    Eigen::VectorXd bmu, bvar;
    model.posterior(candidates.middleRows(start, len), bmu, bvar);
    mu.segment(start, len) = bmu;
    var.segment(start, len) = bvar;
  }
  const double incumbent =
      cfg.acq.incumbent == Incumbent::surrogate_max ? mu.maxCoeff() : f_star;
  Proposal best;
  best.score = -1.0;
  for (int i = 0; i < n; ++i) {
    const double ei = expected_improvement(mu[i], std::sqrt(std::max(var[i], 0.0)),
                                           incumbent, cfg.xi, cfg.acq.form);
    if (ei > best.score) {
      best.score = ei;
      best.index = i;
    }
  }
  best.x = candidates.row(best.index).transpose();
  return best;
}

Proposal propose_by_ei(const GpModel& model, const BoxBounds& box,
                       double f_star, const BoConfig& cfg, Rng& rng) {
  return propose_by_ei(model, uniform_in_box(box, cfg.n_candidates, rng),
                       f_star, cfg);
}

GpModel scheduled_fit(const ObservationSet& obs, std::uint64_t seed, int k,
                      const GpModel* prev, const RefitSchedule& schedule) {
  if (k == 0 || prev == nullptr || k % schedule.full_every == 0)
    return GpModel::fit(obs, seed, schedule.full);
  FitOptions lean;
  lean.restarts = 2;
  lean.max_iter = 30;
  lean.warm_start = prev->hyperparams();
  return GpModel::fit(obs, seed, lean);
}

RunTrace run_vanilla_bo(const ObjectiveFn& f, const BoxBounds& box,
                        const BoConfig& cfg) {
  validate_config(cfg);
  const int d = box.dim();
  const int n_init = cfg.n_init > 0 ? cfg.n_init : 2 * d;
  detail::TraceRunner run(f, box);
  ObservationSet obs;
  obs.x.resize(0, d);
  obs.y.resize(0);
  const BoxBounds unit = BoxBounds::unit(d);

  Rng init_rng = Rng::stream(cfg.seed, {fnv1a64("bo-init")});
  const Eigen::MatrixXd init = uniform_in_box(unit, n_init, init_rng);
  for (int i = 0; i < n_init; ++i) {
    const Eigen::VectorXd u = init.row(i).transpose();
    const auto y = run.evaluate(u, -1, -1);
    if (!y) return run.trace;
    obs.add(u, *y);
  }

  GpModel model = GpModel::with_hyperparams({}, GpHyperparams{});
  const RefitSchedule schedule{cfg.fit, cfg.full_refit_every};
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    model = scheduled_fit(obs, cfg.seed, iter, iter ? &model : nullptr,
                          schedule);
    Rng rng = Rng::stream(cfg.seed,
                          {fnv1a64("bo-cand"), static_cast<std::uint64_t>(iter)});
    const Proposal prop = propose_by_ei(model, unit, run.best_y, cfg, rng);
    const auto y = run.evaluate(prop.x, -1, -1);
    if (!y) break;
    obs.add(prop.x, *y);
  }
  return run.trace;
}

RunTrace run_iterative_bo(const ObjectiveFn& f, const BoxBounds& box,
                          const BoConfig& cfg) {
  validate_config(cfg);
  const int d = box.dim();
  detail::TraceRunner run(f, box);
  ObservationSet obs;
  obs.x.resize(0, d);
  obs.y.resize(0);

  // Current vector: raw zero clamped into the box, expressed in unit coords.
  Eigen::VectorXd cur(d);
  for (int j = 0; j < d; ++j) {
    const double zero_u = (0.0 - box.lo[j]) / (box.hi[j] - box.lo[j]);
    cur[j] = std::clamp(zero_u, 0.0, 1.0);
  }
  {
    const auto y = run.evaluate(cur, -1, -1);
    if (!y) return run.trace;
    obs.add(cur, *y);
  }
  int last_improve = 0;

  GpModel model = GpModel::with_hyperparams({}, GpHyperparams{});
  const RefitSchedule schedule{cfg.fit, cfg.full_refit_every};
  for (int n = 1; n <= cfg.max_iters; ++n) {
    if (n - 1 - last_improve >= cfg.ell_max * d) break;
    const int coord = (n - 1) % d;
    model = scheduled_fit(obs, cfg.seed, n - 1, n > 1 ? &model : nullptr,
                          schedule);
    BoxBounds slice{cur, cur};
    slice.lo[coord] = 0.0;
    slice.hi[coord] = 1.0;
    Rng rng = Rng::stream(cfg.seed,
                          {fnv1a64("ibo-cand"), static_cast<std::uint64_t>(n)});
    const Proposal prop = propose_by_ei(model, slice, run.best_y, cfg, rng);
    cur = prop.x;  // the proposal is always adopted
    const double before = run.best_y;
    const auto y = run.evaluate(cur, coord, -1);
    if (!y) break;
    obs.add(cur, *y);
    if (run.best_y > before) last_improve = n;
  }
  return run.trace;
}

}  // namespace celltune
