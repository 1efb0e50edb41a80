// Microbenchmarks for the hot paths: antenna pattern math, path loss, the
// full network evaluation that every optimizer iteration pays for, GP fits
// and posteriors at trust-region sizes, and the 2-d hypervolume sweep.

#include <benchmark/benchmark.h>

#include <celltune/channel.hpp>
#include <celltune/gp.hpp>
#include <celltune/morbo.hpp>
#include <celltune/netsim.hpp>
#include <celltune/rng.hpp>
#include <celltune/scenario.hpp>

#include <cmath>

using namespace celltune;

namespace {

void bm_antenna_gain(benchmark::State& state) {
  AntennaPattern pattern;
  pattern.tilt_deg = -12.0;
  pattern.vhpbw_deg = 10.0;
  double az = -180.0, el = -90.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(antenna_gain_dbi(pattern, az, el));
    az += 0.37;
    if (az > 180.0) az -= 360.0;
    el += 0.11;
    if (el > 90.0) el -= 180.0;
  }
}
BENCHMARK(bm_antenna_gain);

void bm_path_loss_uav(benchmark::State& state) {
  double d2d = 35.0;
  for (auto _ : state) {
    const double d3d = std::hypot(d2d, 150.0 - 25.0);
    benchmark::DoNotOptimize(
        path_loss_db(LinkKind::uav, true, d2d, d3d, 25.0, 150.0, 2.0));
    d2d = d2d < 2000.0 ? d2d + 1.7 : 35.0;
  }
}
BENCHMARK(bm_path_loss_uav);

void bm_evaluate_full_scale(benchmark::State& state) {
  EvalSettings settings;
  settings.n_fading_draws = static_cast<int>(state.range(0));
  Evaluator ev(ScenarioSpec::baseline_3gpp(), settings, 1);
  DecisionVector dv = DecisionVector::baseline(ev.n_cells());
  double tilt = -12.0;
  for (auto _ : state) {
    dv.tilt_deg[0] = tilt;  // defeat any cross-iteration caching
    benchmark::DoNotOptimize(ev.evaluate(dv).objective_value);
    tilt = tilt < 40.0 ? tilt + 0.25 : -12.0;
  }
  state.SetLabel("850 ues x 57 cells");
}
BENCHMARK(bm_evaluate_full_scale)->Arg(1)->Arg(50)->Unit(benchmark::kMillisecond);

ObservationSet synthetic_obs(int n, int d, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0x6265'6e63'68u});
  ObservationSet obs;
  obs.x.resize(n, d);
  obs.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) obs.x(i, j) = rng.uniform();
    obs.y[i] = std::sin(6.0 * obs.x(i, 0)) + 0.3 * obs.x.row(i).sum() +
               0.01 * rng.normal();
  }
  return obs;
}

void bm_gp_fit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const ObservationSet obs = synthetic_obs(n, d, 7);
  FitOptions opts;
  opts.restarts = 2;  // the warm refit schedule used inside optimizer loops
  opts.max_iter = 30;
  for (auto _ : state)
    benchmark::DoNotOptimize(GpModel::fit(obs, 1, opts).hyperparams());
}
BENCHMARK(bm_gp_fit)->Args({40, 10})->Args({120, 57})
    ->Unit(benchmark::kMillisecond);

void bm_gp_posterior(benchmark::State& state) {
  const int d = 57;
  const ObservationSet obs = synthetic_obs(128, d, 7);
  GpHyperparams hp;
  hp.log_lengthscale = Eigen::VectorXd::Constant(d, std::log(0.4));
  hp.log_signal_var = 0.0;
  hp.mean_const = obs.y.mean();
  const GpModel model = GpModel::with_hyperparams(obs, hp);
  Rng rng = Rng::stream(3, {0x7175'6572'79u});
  Eigen::MatrixXd xq(500, d);
  for (int i = 0; i < xq.rows(); ++i)
    for (int j = 0; j < d; ++j) xq(i, j) = rng.uniform();
  Eigen::VectorXd mu, var;
  for (auto _ : state) {
    model.posterior(xq, mu, var);
    benchmark::DoNotOptimize(mu.sum() + var.sum());
  }
  state.SetLabel("n=128 d=57 q=500");
}
BENCHMARK(bm_gp_posterior)->Unit(benchmark::kMicrosecond);

void bm_hypervolume_2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng = Rng::stream(5, {0x6876u});
  Eigen::MatrixX2d y(n, 2);
  for (int i = 0; i < n; ++i) {
    y(i, 0) = rng.uniform();
    y(i, 1) = rng.uniform();
  }
  const Eigen::Vector2d ref(-0.1, -0.1);
  for (auto _ : state) benchmark::DoNotOptimize(hypervolume_2d(y, ref));
}
BENCHMARK(bm_hypervolume_2d)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
