#include <celltune/experiments.hpp>

#include <celltune/errors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace celltune {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hex16(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json rep_json(const EvalReport& r) {
  return json{{"objective", r.objective_value},
              {"geo_mean_bps", r.geo_mean_rate_bps},
              {"gue_geo_mean_bps", r.gue_geo_mean_rate_bps},
              {"uav_geo_mean_bps", r.uav_geo_mean_rate_bps},
              {"gue_sum_log_rate", r.gue_sum_log_rate},
              {"uav_sum_log_rate", r.uav_sum_log_rate},
              {"uav_coverage", r.uav_coverage},
              {"uav_outage", r.uav_outage},
              {"rate_floor_hit", r.rate_floor_hit}};
}

// Append-only evaluation log with prefix replay. The constructor rewrites
// the file (header plus replayed rows), which also heals a torn final line
// left by an interrupted run.
class EvalLogger {
 public:
  EvalLogger(const fs::path& path, const CheckpointHeader& hdr,
             std::vector<EvalLog::Row> replay)
      : replay_(std::move(replay)),
        os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_)
      throw std::runtime_error("cannot open eval log " + path.string());
    write_eval_log_header(os_, hdr);
    for (std::size_t i = 0; i < replay_.size(); ++i)
      append_eval(os_, static_cast<int>(i), replay_[i].x, replay_[i].y);
  }

  bool mismatched() const { return !mismatch_.empty(); }
  const std::string& mismatch() const { return mismatch_; }

  // Replays the logged prefix (calling on_replay instead of the objective),
  // then evaluates and appends.
  Eigen::VectorXd next(
      const Eigen::VectorXd& x,
      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
      const std::function<void()>& on_replay) {
    if (k_ < static_cast<int>(replay_.size())) {
      const EvalLog::Row& row = replay_[k_];
      if (row.x.size() != x.size() || !row.x.cwiseEqual(x).all()) {
        mismatch_ = "checkpoint mismatch: evaluation " + std::to_string(k_) +
                    " diverged from the logged run";
        throw ConfigError(mismatch_);
      }
      if (on_replay) on_replay();
      ++k_;
      return row.y;
    }
    const Eigen::VectorXd y = f(x);
    append_eval(os_, k_, x, y);
    ++k_;
    return y;
  }

 private:
  std::vector<EvalLog::Row> replay_;
  std::ofstream os_;
  std::string mismatch_;
  int k_ = 0;
};

std::vector<EvalLog::Row> load_replay(const fs::path& path,
                                      std::uint64_t hash,
                                      const ExperimentConfig& cfg) {
  std::error_code ec;
  if (!fs::exists(path, ec) || fs::file_size(path, ec) == 0) return {};
  std::ifstream is(path, std::ios::binary);
  EvalLog log = read_eval_log(is);
  if (log.header.config_hash != hash)
    throw ConfigError("checkpoint mismatch: eval log config hash " +
                      hex16(log.header.config_hash) + " differs from " +
                      hex16(hash));
  if (log.header.seed != cfg.seed)
    throw ConfigError("checkpoint mismatch: eval log seed " +
                      std::to_string(log.header.seed) + " differs from " +
                      std::to_string(cfg.seed));
  if (log.header.mode != cfg.mode)
    throw ConfigError("checkpoint mismatch: eval log mode \"" +
                      log.header.mode + "\" differs from \"" + cfg.mode +
                      "\"");
  return std::move(log.evals);
}

// In redrop mode replayed evaluations must still advance the round counter
// so fresh evaluations continue from the logged run's state.
std::function<void()> replay_hook(Evaluator& ev, bool redrop) {
  if (!redrop) return {};
  return [&ev] { ev.set_round(ev.round() + 1); };
}

ObjectiveFn logged_objective(EvalLogger& log, ObjectiveFn inner,
                             std::function<void()> on_replay) {
  return [&log, inner = std::move(inner),
          on_replay = std::move(on_replay)](const Eigen::VectorXd& x) {
    return log.next(
        x,
        [&inner](const Eigen::VectorXd& xx) {
          return Eigen::VectorXd::Constant(1, inner(xx));
        },
        on_replay)[0];
  };
}

BiObjectiveFn logged_biobjective(EvalLogger& log, BiObjectiveFn inner,
                                 std::function<void()> on_replay) {
  return [&log, inner = std::move(inner),
          on_replay =
              std::move(on_replay)](const Eigen::VectorXd& x) -> Eigen::Vector2d {
    return log.next(
        x,
        [&inner](const Eigen::VectorXd& xx) -> Eigen::VectorXd {
          return inner(xx);
        },
        on_replay);
  };
}

template <class Fn>
void write_file(const fs::path& dir, const char* name,
                std::vector<std::string>& files, Fn&& fn) {
  std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
  if (!os)
    throw std::runtime_error("cannot write " + (dir / name).string());
  fn(os);
  files.push_back(name);
}

std::vector<UeKind> ue_kinds(const Deployment& dep) {
  std::vector<UeKind> kinds;
  kinds.reserve(dep.ues.size());
  for (const Ue& ue : dep.ues) kinds.push_back(ue.kind);
  return kinds;
}

// An aborted trace either carries a checkpoint mismatch (a config error) or
// an objective failure (a runtime failure).
void rethrow_abort(const EvalLogger& log, const std::string& error) {
  if (log.mismatched()) throw ConfigError(log.mismatch());
  throw std::runtime_error("optimization aborted: " + error);
}

}  // namespace

ObjectiveFn make_objective(Evaluator& ev, bool joint) {
  const int n_cells = ev.n_cells();
  const DecisionVector base = DecisionVector::baseline(n_cells);
  const bool redrop = ev.settings().redrop_per_eval;
  return [&ev, n_cells, joint, base, redrop](const Eigen::VectorXd& raw) {
    const DecisionVector dv = DecisionVector::from_raw(raw, n_cells, joint, base);
    return (redrop ? ev.evaluate_next(dv) : ev.evaluate(dv)).objective_value;
  };
}

BiObjectiveFn make_biobjective(Evaluator& ev, bool joint) {
  const int n_cells = ev.n_cells();
  const DecisionVector base = DecisionVector::baseline(n_cells);
  const bool redrop = ev.settings().redrop_per_eval;
  return [&ev, n_cells, joint, base,
          redrop](const Eigen::VectorXd& raw) -> Eigen::Vector2d {
    const DecisionVector dv = DecisionVector::from_raw(raw, n_cells, joint, base);
    const EvalReport rep = redrop ? ev.evaluate_next(dv) : ev.evaluate(dv);
    return {rep.gue_sum_log_rate, rep.uav_coverage};
  };
}

BoxBounds decision_box(const ScenarioSpec& spec, int n_cells, bool joint) {
  auto [lo, hi] = decision_bounds(spec, n_cells, joint);
  return BoxBounds{std::move(lo), std::move(hi)};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in,
                                const std::filesystem::path& out_dir,
                                bool resume) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate();
  // The top-level seed drives every stage; per-optimizer seeds are not part
  // of the serialized config.
  cfg.bo.seed = cfg.turbo.seed = cfg.morbo.seed = cfg.seed;
  const std::uint64_t hash = config_hash(cfg);
  fs::create_directories(out_dir);

  Evaluator ev(cfg.scenario, cfg.eval, cfg.seed);
  const int n_cells = ev.n_cells();
  const DecisionVector base = DecisionVector::baseline(n_cells);

  ExperimentResult res;
  res.hash = hash;
  res.baseline = ev.evaluate(base);

  const std::string header = csv_header(hash, cfg.seed);
  const GeomeanMap map{cfg.eval.lambda_uav, ev.deployment().n_gue,
                       ev.deployment().n_uav};

  json summary;
  summary["config_hash"] = hex16(hash);
  summary["seed"] = cfg.seed;
  summary["build"] = build_id();
  summary["mode"] = cfg.mode;
  summary["lambda_uav"] = cfg.eval.lambda_uav;
  summary["n_gue"] = ev.deployment().n_gue;
  summary["n_uav"] = ev.deployment().n_uav;
  summary["baseline"] = rep_json(res.baseline);

  if (cfg.mode == "evaluate") {
    DecisionVector dv = cfg.decision.value_or(base);
    if (dv.tilt_deg.size() != n_cells || dv.vhpbw_deg.size() != n_cells)
      throw ConfigError("decision size does not match the cell count");
    const EvalReport rep = ev.evaluate(dv);
    res.best_decision = dv;
    res.best_value = rep.objective_value;
    summary["decision_hash"] = hex16(dv.hash());
    summary["report"] = rep_json(rep);
    const std::vector<UeKind> kinds = ue_kinds(ev.deployment());
    write_file(out_dir, "ue_report.csv", res.files, [&](std::ostream& os) {
      write_ue_report_csv(os, header, ev.deployment().ues, rep);
    });
    write_file(out_dir, "sinr_cdf.csv", res.files, [&](std::ostream& os) {
      write_cdf_csv(os, header, "sinr_db", kinds, rep.sinr_db);
    });
    write_file(out_dir, "rate_cdf.csv", res.files, [&](std::ostream& os) {
      write_cdf_csv(os, header, "rate_bps", kinds, rep.rate_bps);
    });
  } else {
    const BoxBounds box = decision_box(cfg.scenario, n_cells, cfg.joint_hpbw);
    CheckpointHeader hdr;
    hdr.config_hash = hash;
    hdr.seed = cfg.seed;
    hdr.mode = cfg.mode;
    const fs::path log_path = out_dir / "evals.jsonl";
    std::vector<EvalLog::Row> replay =
        resume ? load_replay(log_path, hash, cfg) : std::vector<EvalLog::Row>{};
    EvalLogger log(log_path, hdr, std::move(replay));
    res.files.push_back("evals.jsonl");

    if (cfg.mode == "optimize") {
      const ObjectiveFn f =
          logged_objective(log, make_objective(ev, cfg.joint_hpbw),
                           replay_hook(ev, cfg.eval.redrop_per_eval));
      RunTrace trace;
      std::vector<RegionDiag> diag;
      if (cfg.optimizer == "turbo")
        trace = run_turbo(f, box, cfg.turbo, nullptr, &diag);
      else if (cfg.optimizer == "iterative")
        trace = run_iterative_bo(f, box, cfg.bo);
      else
        trace = run_vanilla_bo(f, box, cfg.bo);
      if (trace.aborted) rethrow_abort(log, trace.error);

      res.best_value = trace.best_value();
      res.best_decision =
          DecisionVector::from_raw(trace.best_x(), n_cells, cfg.joint_hpbw, base);
      const EvalReport best_rep = ev.evaluate(res.best_decision);

      write_file(out_dir, "trace.csv", res.files, [&](std::ostream& os) {
        write_trace_csv(os, header, trace, map);
      });
      if (cfg.optimizer == "turbo")
        write_file(out_dir, "regions.csv", res.files, [&](std::ostream& os) {
          write_regions_csv(os, header, diag);
        });
      write_file(out_dir, "decision.json", res.files, [&](std::ostream& os) {
        os << decision_json(res.best_decision, hash, cfg.seed);
      });
      write_file(out_dir, "ue_report.csv", res.files, [&](std::ostream& os) {
        write_ue_report_csv(os, header, ev.deployment().ues, best_rep);
      });

      summary["optimizer"] = cfg.optimizer;
      summary["n_evals"] = trace.points.size();
      summary["best"] = {
          {"value", res.best_value},
          {"geo_mean_bps", map.to_geomean(res.best_value)},
          {"gain_vs_baseline_geomean",
           map.to_geomean(res.best_value) /
               map.to_geomean(res.baseline.objective_value)},
          {"decision_hash", hex16(res.best_decision.hash())},
          {"report", rep_json(best_rep)}};
    } else if (cfg.mode == "pareto") {
      MorboConfig mcfg = cfg.morbo;
      if (mcfg.ref[0] == 0.0 && mcfg.ref[1] == 0.0)
        mcfg.ref = Eigen::Vector2d(
            res.baseline.gue_sum_log_rate -
                0.1 * std::abs(res.baseline.gue_sum_log_rate),
            0.0);
      const BiObjectiveFn f =
          logged_biobjective(log, make_biobjective(ev, cfg.joint_hpbw),
                             replay_hook(ev, cfg.eval.redrop_per_eval));
      const MoRunTrace trace = run_morbo(f, box, mcfg);
      if (trace.aborted) rethrow_abort(log, trace.error);

      std::vector<std::uint64_t> hashes;
      hashes.reserve(trace.points.size());
      for (const MoTracePoint& p : trace.points)
        hashes.push_back(
            DecisionVector::from_raw(p.x, n_cells, cfg.joint_hpbw, base).hash());
      write_file(out_dir, "archive.csv", res.files, [&](std::ostream& os) {
        write_archive_csv(os, header, trace, hashes, ev.deployment().n_gue);
      });

      const std::vector<int> front = trace.front_indices();
      int best_gue = front.front();
      for (int i : front)
        if (trace.points[i].value[0] > trace.points[best_gue].value[0])
          best_gue = i;
      res.best_value = trace.points.back().hypervolume;
      res.best_decision = DecisionVector::from_raw(trace.points[best_gue].x,
                                                   n_cells, cfg.joint_hpbw, base);
      summary["n_evals"] = trace.points.size();
      summary["final_hypervolume"] = res.best_value;
      summary["front_size"] = front.size();
      summary["ref"] = {mcfg.ref[0], mcfg.ref[1]};
      summary["best_gue_point"] = {
          {"gue_geo_mean_mbps",
           std::exp(trace.points[best_gue].value[0] / ev.deployment().n_gue) /
               1.0e6},
          {"uav_coverage", trace.points[best_gue].value[1]}};
    } else {  // transfer
      const ScenarioSpec src_spec = cfg.source_scenario.value_or(cfg.scenario);
      Evaluator src_ev(src_spec, cfg.eval, cfg.seed);
      if (src_ev.n_cells() != n_cells)
        throw ConfigError("transfer source cell count differs from target");
      const BoxBounds src_box =
          decision_box(src_spec, n_cells, cfg.joint_hpbw);
      if (!src_box.lo.cwiseEqual(box.lo).all() ||
          !src_box.hi.cwiseEqual(box.hi).all())
        throw ConfigError("transfer source decision bounds differ from target");

      const ObjectiveFn src_f =
          logged_objective(log, make_objective(src_ev, cfg.joint_hpbw),
                           replay_hook(src_ev, cfg.eval.redrop_per_eval));
      const RunTrace src_trace = run_turbo(src_f, box, cfg.turbo);
      if (src_trace.aborted) rethrow_abort(log, src_trace.error);

      SourceData source;
      source.x.resize(static_cast<Eigen::Index>(src_trace.points.size()),
                      box.dim());
      source.y.resize(static_cast<Eigen::Index>(src_trace.points.size()));
      for (std::size_t i = 0; i < src_trace.points.size(); ++i) {
        source.x.row(static_cast<Eigen::Index>(i)) =
            (src_trace.points[i].x - box.lo)
                .cwiseQuotient(box.hi - box.lo)
                .transpose();
        source.y[static_cast<Eigen::Index>(i)] = src_trace.points[i].value;
      }

      const ObjectiveFn tgt_f =
          logged_objective(log, make_objective(ev, cfg.joint_hpbw),
                           replay_hook(ev, cfg.eval.redrop_per_eval));
      const std::vector<TransferArm> arms = run_transfer_experiment(
          tgt_f, box, cfg.turbo, source, cfg.transfer_mixes);
      for (const TransferArm& arm : arms)
        if (arm.trace.aborted) rethrow_abort(log, arm.trace.error);

      write_file(out_dir, "transfer.csv", res.files, [&](std::ostream& os) {
        write_transfer_csv(os, header, arms);
      });

      json arm_rows = json::array();
      res.best_value = -std::numeric_limits<double>::infinity();
      for (const TransferArm& arm : arms) {
        int evaluated = 0;
        for (const TracePoint& p : arm.trace.points)
          evaluated += !p.from_source;
        const double best = arm.trace.best_value();
        arm_rows.push_back({{"mix", arm.mix},
                            {"n_evals", evaluated},
                            {"best_value", best},
                            {"best_geo_mean_bps", map.to_geomean(best)}});
        if (best > res.best_value) {
          res.best_value = best;
          res.best_decision = DecisionVector::from_raw(
              arm.trace.best_x(), n_cells, cfg.joint_hpbw, base);
        }
      }
      summary["optimizer"] = "turbo";
      summary["source_n_evals"] = src_trace.points.size();
      summary["source_best_value"] = src_trace.best_value();
      summary["arms"] = arm_rows;
    }
  }

  write_file(out_dir, "summary.json", res.files,
             [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  return res;
}

}  // namespace celltune
