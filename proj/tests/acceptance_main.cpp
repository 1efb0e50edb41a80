// Desk-scale acceptance gates for the full tuning pipeline. Each criterion
// prints one PASS/FAIL line with the measured values and the thresholds
// pinned here; the process exits nonzero when any gate fails.

#include <celltune/experiments.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

using namespace celltune;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Weighted geometric mean in Mbps matching the lambda-weighted objective.
double geo_mbps(const Evaluator& ev, double objective) {
  const GeomeanMap map{ev.settings().lambda_uav, ev.deployment().n_gue,
                       ev.deployment().n_uav};
  return map.to_geomean(objective) / 1.0e6;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double median_sinr(const Evaluator& ev, const EvalReport& rep, UeKind kind) {
  std::vector<double> v;
  for (std::size_t i = 0; i < ev.deployment().ues.size(); ++i)
    if (ev.deployment().ues[i].kind == kind)
      v.push_back(rep.sinr_db[static_cast<Eigen::Index>(i)]);
  return median(std::move(v));
}

// Cells whose up-tilt the optimum actually uses: positive tilt, and putting
// that one cell back to the -12 deg baseline costs at least 0.1% of the
// run's objective gain. Raw sign counts are dominated by cells the objective
// barely depends on, whose tilts wander anywhere in the box.
int up_tilted_cells(const Evaluator& ev, const DecisionVector& dv,
                    double baseline_objective) {
  const double f = ev.evaluate(dv).objective_value;
  const double thresh = 0.001 * (f - baseline_objective);
  int n = 0;
  for (Eigen::Index i = 0; i < dv.tilt_deg.size(); ++i) {
    if (dv.tilt_deg[i] <= 0.0) continue;
    DecisionVector alt = dv;
    alt.tilt_deg[i] = -12.0;
    if (f - ev.evaluate(alt).objective_value >= thresh) ++n;
  }
  return n;
}

TurboConfig turbo_cfg(int max_evals, std::uint64_t seed, int regions = 5,
                      int init = 10, int cands = 500, int q = 5) {
  TurboConfig cfg;
  cfg.n_regions = regions;
  cfg.batch_q = q;
  cfg.n_candidates = cands;
  cfg.n_init_per_region = init;
  cfg.max_evals = max_evals;
  cfg.seed = seed;
  return cfg;
}

struct Gate {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// C1: the all-downtilt baseline leaves at least 99% of the 150 m UAVs below
// -5 dB SINR, inside one minute.
Gate c1_baseline_outage() {
  const auto t0 = Clock::now();
  Evaluator ev(ScenarioSpec::baseline_3gpp(), EvalSettings{}, 1);
  const EvalReport rep =
      ev.evaluate(DecisionVector::baseline(ev.n_cells()));
  const double dt = seconds_since(t0);
  const bool pass = rep.uav_outage >= 0.99 && dt <= 60.0;
  return {pass, fmt("baseline uav outage %.4f (need >= 0.99), runtime %.1f s "
                    "(limit 60)",
                    rep.uav_outage, dt)};
}

// C2: coordinate-cycling BO on corridor tilts, <= 250 evaluations, reaches
// at least 1.4x the baseline weighted geometric mean inside 45 minutes.
Gate c2_iterative_gain(double& iter_geo_out) {
  const auto t0 = Clock::now();
  Evaluator ev(ScenarioSpec::baseline_3gpp(), EvalSettings{}, 1);
  const double base_geo =
      geo_mbps(ev, ev.evaluate(DecisionVector::baseline(ev.n_cells()))
                       .objective_value);
  BoConfig cfg;
  cfg.max_iters = 249;  // plus the starting point: 250 evaluations
  cfg.seed = 1;
  const BoxBounds box = decision_box(ev.spec(), ev.n_cells(), false);
  const ObjectiveFn f = make_objective(ev, false);
  const RunTrace trace = run_iterative_bo(f, box, cfg);
  if (trace.aborted) return {false, "aborted: " + trace.error};
  iter_geo_out = geo_mbps(ev, trace.best_value());
  const double ratio = iter_geo_out / base_geo;
  const double dt = seconds_since(t0);
  const bool pass = trace.points.size() <= 250 && ratio >= 1.4 && dt <= 2700.0;
  return {pass, fmt("best %.3f Mbps vs baseline %.3f Mbps = %.2fx (need >= "
                    "1.4x) in %zu evals, runtime %.0f s (limit 2700)",
                    iter_geo_out, base_geo, ratio, trace.points.size(), dt)};
}

// C3: trust-region BO over joint tilts and beamwidths (114-d), <= 550
// optimizer iterations where one iteration proposes and evaluates a batch of
// q candidates: within 3% of the cycling optimizer, >= 1.5x baseline, median
// UAV SINR up by >= 15 dB, median GUE SINR down by <= 2 dB.
Gate c3_turbo_joint(double iter_geo) {
  Evaluator ev(ScenarioSpec::baseline_3gpp(), EvalSettings{}, 1);
  const EvalReport base_rep =
      ev.evaluate(DecisionVector::baseline(ev.n_cells()));
  const double base_geo = geo_mbps(ev, base_rep.objective_value);
  const BoxBounds box = decision_box(ev.spec(), ev.n_cells(), true);
  const ObjectiveFn f = make_objective(ev, true);
  const TurboConfig cfg = turbo_cfg(1200, 1, 2, 15, 1000, 10);
  const RunTrace trace = run_turbo(f, box, cfg);
  if (trace.aborted) return {false, "aborted: " + trace.error};
  const int n_init = cfg.n_regions * cfg.n_init_per_region;
  const std::size_t iters =
      (trace.points.size() - static_cast<std::size_t>(n_init) +
       static_cast<std::size_t>(cfg.batch_q) - 1) /
      static_cast<std::size_t>(cfg.batch_q);
  const double geo = geo_mbps(ev, trace.best_value());
  const DecisionVector dv = DecisionVector::from_raw(
      trace.best_x(), ev.n_cells(), true, DecisionVector::baseline(ev.n_cells()));
  const EvalReport opt_rep = ev.evaluate(dv);
  const double uav_gain = median_sinr(ev, opt_rep, UeKind::uav) -
                          median_sinr(ev, base_rep, UeKind::uav);
  const double gue_drop = median_sinr(ev, base_rep, UeKind::gue) -
                          median_sinr(ev, opt_rep, UeKind::gue);
  const bool pass = iters <= 550 && std::isfinite(iter_geo) &&
                    geo >= 0.97 * iter_geo && geo >= 1.5 * base_geo &&
                    uav_gain >= 15.0 && gue_drop <= 2.0;
  return {pass,
          fmt("best %.3f Mbps (need >= 0.97x iterative %.3f and >= 1.5x "
              "baseline %.3f), median uav sinr %+.1f dB (need >= +15), median "
              "gue sinr %+.1f dB (drop limit 2) in %zu iterations of q=%d "
              "(%zu evals, limit 550 iterations)",
              geo, iter_geo, base_geo, uav_gain, -gue_drop, iters, cfg.batch_q,
              trace.points.size())};
}

// C4: across seeds 1-3, jointly optimizing tilts and beamwidths for each
// deployment, the corridor network up-tilts strictly fewer cells than the
// uniform network, and optimized UAV outage stays <= 5% in both.
Gate c4_structure() {
  ScenarioSpec corridor = ScenarioSpec::baseline_3gpp();
  ScenarioSpec uniform = corridor;
  uniform.uav_mode = "uniform";
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    int counts[2] = {0, 0};
    double outages[2] = {1.0, 1.0};
    const ScenarioSpec* specs[2] = {&corridor, &uniform};
    for (int m = 0; m < 2; ++m) {
      Evaluator ev(*specs[m], EvalSettings{}, seed);
      const EvalReport base =
          ev.evaluate(DecisionVector::baseline(ev.n_cells()));
      const BoxBounds box = decision_box(ev.spec(), ev.n_cells(), true);
      const ObjectiveFn f = make_objective(ev, true);
      const RunTrace trace =
          run_turbo(f, box, turbo_cfg(550, seed, 2, 15, 1000, 10));
      if (trace.aborted) return {false, "aborted: " + trace.error};
      const DecisionVector dv =
          DecisionVector::from_raw(trace.best_x(), ev.n_cells(), true,
                                   DecisionVector::baseline(ev.n_cells()));
      counts[m] = up_tilted_cells(ev, dv, base.objective_value);
      outages[m] = ev.evaluate(dv).uav_outage;
    }
    pass = pass && counts[0] < counts[1] && outages[0] <= 0.05 &&
           outages[1] <= 0.05;
    detail += fmt("%sseed %llu: up-tilts %d vs %d, outage %.3f vs %.3f",
                  seed == 1 ? "" : "; ",
                  static_cast<unsigned long long>(seed), counts[0], counts[1],
                  outages[0], outages[1]);
  }
  return {pass, detail + " (need fewer corridor up-tilts, outage <= 0.05)"};
}

// Cold source run -> unit-cube observations for seeding.
SourceData collect_source(const RunTrace& trace, const BoxBounds& box) {
  SourceData source;
  source.x.resize(static_cast<Eigen::Index>(trace.points.size()), box.dim());
  source.y.resize(static_cast<Eigen::Index>(trace.points.size()));
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    source.x.row(static_cast<Eigen::Index>(i)) =
        (trace.points[i].x - box.lo).cwiseQuotient(box.hi - box.lo).transpose();
    source.y[static_cast<Eigen::Index>(i)] = trace.points[i].value;
  }
  return source;
}

// Best observed value after the first proposal batch (the curve's start).
double initial_best(const RunTrace& trace, int batch_q) {
  int seen = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (const TracePoint& p : trace.points) {
    if (p.from_source) continue;
    best = p.best_value;
    if (++seen >= batch_q) break;
  }
  return best;
}

// C5: seeding from an identical scenario never degrades the result (mix 0
// within 2% below mix 1); a 150 m corridor source transfers to a 50 m
// target (within 5% below a cold run); a source optimized without UAVs
// misleads the seeded run, whose best barely moves over the whole budget.
// The floors are one-sided: at desk budgets the searches are still far from
// converged, so a seeded arm (source knowledge plus its own budget) often
// lands well above the cold arm, which is the intended benefit and not a
// defect worth gating on.
Gate c5_transfer() {
  const ScenarioSpec target_spec = ScenarioSpec::baseline_3gpp();
  EvalSettings settings;
  const TurboConfig cfg = turbo_cfg(400, 1, 5, 10, 500, 10);

  // (a) identity: source run on the target scenario itself. A mix-1 arm is
  // bitwise the cold run (pinned by the unit suites), so the source run
  // doubles as the mix-1 arm.
  Evaluator tgt(target_spec, settings, 1);
  const BoxBounds box = decision_box(tgt.spec(), tgt.n_cells(), false);
  const ObjectiveFn tgt_f = make_objective(tgt, false);
  const RunTrace id_src = run_turbo(tgt_f, box, cfg);
  if (id_src.aborted) return {false, "aborted: " + id_src.error};
  const SourceData src_data = collect_source(id_src, box);
  const auto id_arms =
      run_transfer_experiment(tgt_f, box, cfg, src_data, {0.0});
  const double id_geo1 = geo_mbps(tgt, id_src.best_value());
  const double id_geo0 = geo_mbps(tgt, id_arms[0].trace.best_value());
  const double id_ratio = id_geo0 / id_geo1;

  // (b) corridor height transfer: source at 150 m, target at 50 m.
  ScenarioSpec low_spec = target_spec;
  for (CorridorSpec& c : low_spec.corridors) c.height_m = 50.0;
  Evaluator low(low_spec, settings, 1);
  const ObjectiveFn low_f = make_objective(low, false);
  const auto low_arms =
      run_transfer_experiment(low_f, box, cfg, src_data, {1.0, 0.0});
  const double low_geo1 = geo_mbps(low, low_arms[0].trace.best_value());
  const double low_geo0 = geo_mbps(low, low_arms[1].trace.best_value());
  const double low_ratio = low_geo0 / low_geo1;

  // (c) negative-transfer failure mode.
  ScenarioSpec gue_spec = target_spec;
  gue_spec.uavs_per_corridor = 0;
  Evaluator gue(gue_spec, settings, 1);
  const ObjectiveFn gue_f = make_objective(gue, false);
  const RunTrace gue_src = run_turbo(gue_f, box, cfg);
  if (gue_src.aborted) return {false, "aborted: " + gue_src.error};
  const auto flat_arms = run_transfer_experiment(
      tgt_f, box, cfg, collect_source(gue_src, box), {0.0});
  const RunTrace& flat = flat_arms[0].trace;
  const double flat_start = geo_mbps(tgt, initial_best(flat, cfg.batch_q));
  const double flat_final = geo_mbps(tgt, flat.best_value());
  const double flat_gain = flat_final / flat_start - 1.0;

  const bool pass =
      id_ratio >= 0.98 && low_ratio >= 0.95 && flat_gain < 0.05;
  return {pass,
          fmt("identity mix0/mix1 %.3f (floor 0.98), 150->50 m mix0/mix1 "
              "%.3f (floor 0.95), no-uav-source self-gain %.1f%% (limit 5%%)",
              id_ratio, low_ratio, 100.0 * flat_gain)};
}

struct FrontPoint {
  double geo_mbps = 0.0;
  double coverage = 0.0;
};

struct FrontRun {
  std::vector<FrontPoint> front;
  bool hv_ok = true;
};

FrontRun pareto_run(const ScenarioSpec& spec) {
  Evaluator ev(spec, EvalSettings{}, 1);
  const EvalReport base = ev.evaluate(DecisionVector::baseline(ev.n_cells()));
  MorboConfig cfg;
  cfg.n_regions = 5;
  cfg.batch_q = 5;
  cfg.n_candidates = 500;
  cfg.n_init_per_region = 10;
  cfg.max_evals = 300;
  cfg.seed = 1;
  cfg.ref = Eigen::Vector2d(
      base.gue_sum_log_rate - 0.1 * std::abs(base.gue_sum_log_rate), 0.0);
  const BoxBounds box = decision_box(ev.spec(), ev.n_cells(), false);
  const MoRunTrace trace = run_morbo(make_biobjective(ev, false), box, cfg);
  if (trace.aborted) throw std::runtime_error("aborted: " + trace.error);

  FrontRun run;
  double prev = 0.0;
  for (const MoTracePoint& p : trace.points) {
    run.hv_ok = run.hv_ok && p.hypervolume >= prev;
    prev = p.hypervolume;
  }
  for (int i : trace.front_indices())
    run.front.push_back(
        {std::exp(trace.points[i].value[0] / ev.deployment().n_gue) / 1.0e6,
         trace.points[i].value[1]});
  return run;
}

double best_geo_at(const std::vector<FrontPoint>& front, double anchor) {
  double best = -std::numeric_limits<double>::infinity();
  for (const FrontPoint& p : front)
    if (p.coverage >= anchor) best = std::max(best, p.geo_mbps);
  return best;
}

double best_cov_from(const std::vector<FrontPoint>& front, double geo_floor) {
  double best = -std::numeric_limits<double>::infinity();
  for (const FrontPoint& p : front)
    if (p.geo_mbps >= geo_floor) best = std::max(best, p.coverage);
  return best;
}

// C6: archive hypervolume never decreases; the corridor front weakly
// dominates the uniform front at the 0.99 / 0.999 coverage anchors; at the
// uniform front's best-coverage point the corridor offers more coverage for
// the same GUE rate (or, with both saturated at 280/280 covered, a strictly
// better GUE rate at full coverage).
Gate c6_pareto_fronts() {
  const ScenarioSpec corridor = ScenarioSpec::baseline_3gpp();
  ScenarioSpec uniform = corridor;
  uniform.uav_mode = "uniform";
  const FrontRun cr = pareto_run(corridor);
  const FrontRun un = pareto_run(uniform);

  bool anchors_ok = true;
  std::string detail;
  for (double anchor : {0.99, 0.999}) {
    const double cg = best_geo_at(cr.front, anchor);
    const double ug = best_geo_at(un.front, anchor);
    anchors_ok = anchors_ok && std::isfinite(cg) && cg >= ug;
    detail += fmt("cov>=%.3f: corridor %.3f vs uniform %.3f Mbps; ", anchor,
                  cg, ug);
  }

  double u_cov = -1.0, u_geo = 0.0;
  for (const FrontPoint& p : un.front)
    if (p.coverage > u_cov || (p.coverage == u_cov && p.geo_mbps > u_geo)) {
      u_cov = p.coverage;
      u_geo = p.geo_mbps;
    }
  const double c_cov = best_cov_from(cr.front, u_geo);
  const bool matched_ok =
      c_cov > u_cov ||
      (c_cov == 1.0 && u_cov == 1.0 &&
       best_geo_at(cr.front, 1.0) > best_geo_at(un.front, 1.0));
  detail += fmt("matched at %.3f Mbps: corridor coverage %.4f vs uniform "
                "%.4f; hv nondecreasing %s/%s",
                u_geo, c_cov, u_cov, cr.hv_ok ? "yes" : "no",
                un.hv_ok ? "yes" : "no");
  return {cr.hv_ok && un.hv_ok && anchors_ok && matched_ok, detail};
}

// C7: every property suite finishes green in at most 10 seconds.
Gate c7_property_suites() {
  const char* unit = std::getenv("CELLTUNE_UNIT");
  if (!unit) return {false, "CELLTUNE_UNIT is not set"};
  const std::vector<std::string> suites = {
      "scenario", "channel", "netsim", "gp",          "bo",
      "turbo",    "morbo",   "transfer", "io", "experiments"};
  bool pass = true;
  double slowest = 0.0;
  std::string slowest_name = "none";
  std::string failures;
  for (const std::string& s : suites) {
    const auto t0 = Clock::now();
    const int status = std::system(
        (std::string(unit) + " -ts=" + s + " >/dev/null 2>&1").c_str());
    const double dt = seconds_since(t0);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) failures += " " + s;
    pass = pass && code == 0 && dt <= 10.0;
    if (dt > slowest) {
      slowest = dt;
      slowest_name = s;
    }
  }
  return {pass, fmt("%zu suites, slowest %s %.1f s (limit 10)%s%s",
                    suites.size(), slowest_name.c_str(), slowest,
                    failures.empty() ? "" : ", failing:", failures.c_str())};
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&](const char* id, const std::function<Gate()>& fn) {
    const auto t0 = Clock::now();
    Gate g;
    try {
      g = fn();
    } catch (const std::exception& e) {
      g = {false, std::string("exception: ") + e.what()};
    }
    failed += !g.pass;
    std::printf("%s %s  %s [%.0f s]\n", id, g.pass ? "PASS" : "FAIL",
                g.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  double iter_geo = std::numeric_limits<double>::quiet_NaN();
  report("C1", c1_baseline_outage);
  report("C2", [&] { return c2_iterative_gain(iter_geo); });
  report("C3", [&] { return c3_turbo_joint(iter_geo); });
  report("C4", c4_structure);
  report("C5", c5_transfer);
  report("C6", c6_pareto_fronts);
  report("C7", c7_property_suites);

  std::printf("ACCEPTANCE: %d/7 criteria pass\n", 7 - failed);
  return failed == 0 ? 0 : 1;
}
