#include <celltune/io.hpp>

#include <celltune/errors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

namespace celltune {

namespace {

using nlohmann::json;

// Fixed-format doubles keep reruns byte-identical and files plot-friendly.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json fit_to_json(const FitOptions& f) {
  return json{{"restarts", f.restarts}, {"max_iter", f.max_iter}};
}

FitOptions fit_from_json(const json& j) {
  FitOptions f;
  f.restarts = j.value("restarts", f.restarts);
  f.max_iter = j.value("max_iter", f.max_iter);
  return f;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  Eigen::Index i = 0;
  for (const auto& e : a) v[i++] = e.get<double>();
  return v;
}

}  // namespace

std::string build_id() { return CELLTUNE_BUILD_ID; }

void ExperimentConfig::validate() const {
  if (mode != "evaluate" && mode != "optimize" && mode != "pareto" &&
      mode != "transfer")
    throw ConfigError("mode must be evaluate, optimize, pareto, or transfer");
  if (optimizer != "vanilla" && optimizer != "iterative" && optimizer != "turbo")
    throw ConfigError("optimizer must be vanilla, iterative, or turbo");
  if (transfer_mixes.empty())
    throw ConfigError("transfer_mixes must not be empty");
  for (double m : transfer_mixes)
    if (!(m >= 0.0 && m <= 1.0))
      throw ConfigError("transfer_mixes entries must lie in [0, 1]");
  if (eval.n_fading_draws <= 0)
    throw ConfigError("n_fading_draws must be positive");
  if (!(eval.lambda_uav >= 0.0 && eval.lambda_uav <= 1.0))
    throw ConfigError("lambda_uav must lie in [0, 1]");
}

std::string experiment_to_json_string(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = json::parse(scenario_to_json_string(cfg.scenario));
  j["eval"] = {{"n_fading_draws", cfg.eval.n_fading_draws},
               {"rate_floor_bps", cfg.eval.rate_floor_bps},
               {"outage_threshold_db", cfg.eval.outage_threshold_db},
               {"lambda_uav", cfg.eval.lambda_uav},
               {"redrop_per_eval", cfg.eval.redrop_per_eval}};
  j["mode"] = cfg.mode;
  j["optimizer"] = cfg.optimizer;
  j["joint_hpbw"] = cfg.joint_hpbw;
  j["seed"] = cfg.seed;
  j["bo"] = {{"n_init", cfg.bo.n_init},
             {"n_candidates", cfg.bo.n_candidates},
             {"n_batches", cfg.bo.n_batches},
             {"batch_size", cfg.bo.batch_size},
             {"xi", cfg.bo.xi},
             {"max_iters", cfg.bo.max_iters},
             {"ell_max", cfg.bo.ell_max},
             {"ei_form", cfg.bo.acq.form == EiForm::variance ? "variance"
                                                             : "std_dev"},
             {"incumbent", cfg.bo.acq.incumbent == Incumbent::surrogate_max
                               ? "surrogate_max"
                               : "observed"},
             {"fit", fit_to_json(cfg.bo.fit)},
             {"full_refit_every", cfg.bo.full_refit_every}};
  j["turbo"] = {{"n_regions", cfg.turbo.n_regions},
                {"batch_q", cfg.turbo.batch_q},
                {"tau_succ", cfg.turbo.tau_succ},
                {"tau_fail", cfg.turbo.tau_fail},
                {"l_init", cfg.turbo.l_init},
                {"l_min", cfg.turbo.l_min},
                {"l_max", cfg.turbo.l_max},
                {"n_candidates", cfg.turbo.n_candidates},
                {"n_init_per_region", cfg.turbo.n_init_per_region},
                {"max_evals", cfg.turbo.max_evals},
                {"fit", fit_to_json(cfg.turbo.fit)},
                {"full_refit_every", cfg.turbo.full_refit_every}};
  j["morbo"] = {{"n_regions", cfg.morbo.n_regions},
                {"batch_q", cfg.morbo.batch_q},
                {"tau_succ", cfg.morbo.tau_succ},
                {"tau_fail", cfg.morbo.tau_fail},
                {"l_init", cfg.morbo.l_init},
                {"l_min", cfg.morbo.l_min},
                {"l_max", cfg.morbo.l_max},
                {"n_candidates", cfg.morbo.n_candidates},
                {"n_init_per_region", cfg.morbo.n_init_per_region},
                {"max_evals", cfg.morbo.max_evals},
                {"ref", {cfg.morbo.ref[0], cfg.morbo.ref[1]}},
                {"fit", fit_to_json(cfg.morbo.fit)},
                {"full_refit_every", cfg.morbo.full_refit_every}};
  j["transfer_mixes"] = cfg.transfer_mixes;
  if (cfg.source_scenario)
    j["source_scenario"] =
        json::parse(scenario_to_json_string(*cfg.source_scenario));
  if (cfg.decision)
    j["decision"] = {{"tilt_deg", vec_to_json(cfg.decision->tilt_deg)},
                     {"vhpbw_deg", vec_to_json(cfg.decision->vhpbw_deg)},
                     {"joint", cfg.decision->joint}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("experiment JSON parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("scenario"))
      cfg.scenario = scenario_from_json_string(j.at("scenario").dump());
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      cfg.eval.n_fading_draws = e.value("n_fading_draws", cfg.eval.n_fading_draws);
      cfg.eval.rate_floor_bps = e.value("rate_floor_bps", cfg.eval.rate_floor_bps);
      cfg.eval.outage_threshold_db =
          e.value("outage_threshold_db", cfg.eval.outage_threshold_db);
      cfg.eval.lambda_uav = e.value("lambda_uav", cfg.eval.lambda_uav);
      cfg.eval.redrop_per_eval =
          e.value("redrop_per_eval", cfg.eval.redrop_per_eval);
    }
    cfg.mode = j.value("mode", cfg.mode);
    cfg.optimizer = j.value("optimizer", cfg.optimizer);
    cfg.joint_hpbw = j.value("joint_hpbw", cfg.joint_hpbw);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("bo")) {
      const json& b = j.at("bo");
      cfg.bo.n_init = b.value("n_init", cfg.bo.n_init);
      cfg.bo.n_candidates = b.value("n_candidates", cfg.bo.n_candidates);
      cfg.bo.n_batches = b.value("n_batches", cfg.bo.n_batches);
      cfg.bo.batch_size = b.value("batch_size", cfg.bo.batch_size);
      cfg.bo.xi = b.value("xi", cfg.bo.xi);
      cfg.bo.max_iters = b.value("max_iters", cfg.bo.max_iters);
      cfg.bo.ell_max = b.value("ell_max", cfg.bo.ell_max);
      const std::string form = b.value("ei_form", std::string("std_dev"));
      if (form != "std_dev" && form != "variance")
        throw ConfigError("ei_form must be std_dev or variance");
      cfg.bo.acq.form = form == "variance" ? EiForm::variance : EiForm::std_dev;
      const std::string inc = b.value("incumbent", std::string("observed"));
      if (inc != "observed" && inc != "surrogate_max")
        throw ConfigError("incumbent must be observed or surrogate_max");
      cfg.bo.acq.incumbent = inc == "surrogate_max" ? Incumbent::surrogate_max
                                                    : Incumbent::observed;
      if (b.contains("fit")) cfg.bo.fit = fit_from_json(b.at("fit"));
      cfg.bo.full_refit_every =
          b.value("full_refit_every", cfg.bo.full_refit_every);
    }
    if (j.contains("turbo")) {
      const json& t = j.at("turbo");
      cfg.turbo.n_regions = t.value("n_regions", cfg.turbo.n_regions);
      cfg.turbo.batch_q = t.value("batch_q", cfg.turbo.batch_q);
      cfg.turbo.tau_succ = t.value("tau_succ", cfg.turbo.tau_succ);
      cfg.turbo.tau_fail = t.value("tau_fail", cfg.turbo.tau_fail);
      cfg.turbo.l_init = t.value("l_init", cfg.turbo.l_init);
      cfg.turbo.l_min = t.value("l_min", cfg.turbo.l_min);
      cfg.turbo.l_max = t.value("l_max", cfg.turbo.l_max);
      cfg.turbo.n_candidates = t.value("n_candidates", cfg.turbo.n_candidates);
      cfg.turbo.n_init_per_region =
          t.value("n_init_per_region", cfg.turbo.n_init_per_region);
      cfg.turbo.max_evals = t.value("max_evals", cfg.turbo.max_evals);
      if (t.contains("fit")) cfg.turbo.fit = fit_from_json(t.at("fit"));
      cfg.turbo.full_refit_every =
          t.value("full_refit_every", cfg.turbo.full_refit_every);
    }
    if (j.contains("morbo")) {
      const json& m = j.at("morbo");
      cfg.morbo.n_regions = m.value("n_regions", cfg.morbo.n_regions);
      cfg.morbo.batch_q = m.value("batch_q", cfg.morbo.batch_q);
      cfg.morbo.tau_succ = m.value("tau_succ", cfg.morbo.tau_succ);
      cfg.morbo.tau_fail = m.value("tau_fail", cfg.morbo.tau_fail);
      cfg.morbo.l_init = m.value("l_init", cfg.morbo.l_init);
      cfg.morbo.l_min = m.value("l_min", cfg.morbo.l_min);
      cfg.morbo.l_max = m.value("l_max", cfg.morbo.l_max);
      cfg.morbo.n_candidates = m.value("n_candidates", cfg.morbo.n_candidates);
      cfg.morbo.n_init_per_region =
          m.value("n_init_per_region", cfg.morbo.n_init_per_region);
      cfg.morbo.max_evals = m.value("max_evals", cfg.morbo.max_evals);
      if (m.contains("ref")) {
        const auto& r = m.at("ref");
        if (r.size() != 2) throw ConfigError("morbo ref must have two entries");
        cfg.morbo.ref = Eigen::Vector2d(r.at(0).get<double>(),
                                        r.at(1).get<double>());
      }
      if (m.contains("fit")) cfg.morbo.fit = fit_from_json(m.at("fit"));
      cfg.morbo.full_refit_every =
          m.value("full_refit_every", cfg.morbo.full_refit_every);
    }
    if (j.contains("transfer_mixes"))
      cfg.transfer_mixes = j.at("transfer_mixes").get<std::vector<double>>();
    if (j.contains("source_scenario"))
      cfg.source_scenario =
          scenario_from_json_string(j.at("source_scenario").dump());
    if (j.contains("decision")) {
      const json& d = j.at("decision");
      DecisionVector dv;
      dv.tilt_deg = vec_from_json(d.at("tilt_deg"));
      dv.vhpbw_deg = vec_from_json(d.at("vhpbw_deg"));
      dv.joint = d.value("joint", false);
      cfg.decision = dv;
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("experiment config error: ") + e.what());
  }
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(experiment_to_json_string(cfg));
}

std::string csv_header(std::uint64_t hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# config_hash=" << hex16(hash) << " seed=" << seed
     << " build=" << build_id() << "\n";
  return os.str();
}

void write_ue_report_csv(std::ostream& os, const std::string& header,
                         const std::vector<Ue>& ues, const EvalReport& rep) {
  os << header << "ue_id,kind,serving_cell,sinr_db,rate_bps\n";
  for (std::size_t i = 0; i < ues.size(); ++i)
    os << ues[i].id << ',' << (ues[i].kind == UeKind::uav ? "uav" : "gue")
       << ',' << rep.assoc[static_cast<Eigen::Index>(i)] << ','
       << num(rep.sinr_db[static_cast<Eigen::Index>(i)]) << ','
       << num(rep.rate_bps[static_cast<Eigen::Index>(i)]) << '\n';
  os << "# summary objective=" << num(rep.objective_value)
     << " geo_mean_bps=" << num(rep.geo_mean_rate_bps)
     << " gue_geo_mean_bps=" << num(rep.gue_geo_mean_rate_bps)
     << " uav_geo_mean_bps=" << num(rep.uav_geo_mean_rate_bps)
     << " uav_coverage=" << num(rep.uav_coverage)
     << " uav_outage=" << num(rep.uav_outage) << '\n';
}

void write_cdf_csv(std::ostream& os, const std::string& header,
                   const std::string& value_name,
                   const std::vector<UeKind>& kinds,
                   const Eigen::VectorXd& values) {
  os << header << "kind," << value_name << ",cdf\n";
  for (UeKind kind : {UeKind::gue, UeKind::uav}) {
    std::vector<double> v;
    for (std::size_t i = 0; i < kinds.size(); ++i)
      if (kinds[i] == kind) v.push_back(values[static_cast<Eigen::Index>(i)]);
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i)
      os << (kind == UeKind::uav ? "uav" : "gue") << ',' << num(v[i]) << ','
         << num(static_cast<double>(i + 1) / static_cast<double>(v.size()))
         << '\n';
  }
}

double GeomeanMap::to_geomean(double objective) const {
  const double w = lambda_uav * n_uav + (1.0 - lambda_uav) * n_gue;
  return std::exp(objective / w);
}

void write_trace_csv(std::ostream& os, const std::string& header,
                     const RunTrace& trace, const GeomeanMap& map) {
  os << header
     << "iteration,value,best_value,best_geomean_bps,proposal_norm,"
        "coordinate,region,from_source\n";
  for (const auto& p : trace.points)
    os << p.iteration << ',' << num(p.value) << ',' << num(p.best_value) << ','
       << num(map.to_geomean(p.best_value)) << ',' << num(p.x.norm()) << ','
       << p.coordinate << ',' << p.region << ',' << (p.from_source ? 1 : 0)
       << '\n';
}

void write_regions_csv(std::ostream& os, const std::string& header,
                       const std::vector<RegionDiag>& diag) {
  os << header << "step,region,length,best\n";
  for (const auto& row : diag)
    os << row.step << ',' << row.region << ',' << num(row.length) << ','
       << num(row.best) << '\n';
}

void write_archive_csv(std::ostream& os, const std::string& header,
                       const MoRunTrace& trace,
                       const std::vector<std::uint64_t>& decision_hashes,
                       int n_gue) {
  std::vector<char> on_front(trace.points.size(), 0);
  for (int i : trace.front_indices()) on_front[i] = 1;
  os << header
     << "iteration,gue_geo_mean_mbps,uav_coverage,decision_hash,hypervolume,"
        "on_front\n";
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    const MoTracePoint& p = trace.points[i];
    os << p.iteration << ','
       << num(std::exp(p.value[0] / n_gue) / 1.0e6) << ','
       << num(p.value[1]) << ',' << hex16(decision_hashes.at(i)) << ','
       << num(p.hypervolume) << ',' << static_cast<int>(on_front[i]) << '\n';
  }
}

void write_transfer_csv(std::ostream& os, const std::string& header,
                        const std::vector<TransferArm>& arms) {
  os << header << "iteration";
  for (const auto& arm : arms)
    os << ",best_mix" << std::llround(arm.mix * 100.0);
  os << '\n';
  std::vector<std::vector<double>> best(arms.size());
  std::size_t rows = 0;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (const auto& p : arms[a].trace.points)
      if (!p.from_source) best[a].push_back(p.best_value);
    rows = std::max(rows, best[a].size());
  }
  for (std::size_t i = 0; i < rows; ++i) {
    os << i;
    for (const auto& col : best)
      os << ',' << num(col.empty() ? 0.0
                                   : col[std::min(i, col.size() - 1)]);
    os << '\n';
  }
}

std::string decision_json(const DecisionVector& dv, std::uint64_t hash,
                          std::uint64_t seed) {
  json j;
  j["config_hash"] = hex16(hash);
  j["seed"] = seed;
  j["build"] = build_id();
  j["joint"] = dv.joint;
  j["tilt_deg"] = vec_to_json(dv.tilt_deg);
  j["vhpbw_deg"] = vec_to_json(dv.vhpbw_deg);
  j["decision_hash"] = hex16(dv.hash());
  return j.dump(2) + "\n";
}

DecisionVector decision_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("decision JSON parse error: ") + e.what());
  }
  DecisionVector dv;
  try {
    dv.tilt_deg = vec_from_json(j.at("tilt_deg"));
    dv.vhpbw_deg = vec_from_json(j.at("vhpbw_deg"));
    dv.joint = j.value("joint", false);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("decision JSON error: ") + e.what());
  }
  return dv;
}

void write_eval_log_header(std::ostream& os, const CheckpointHeader& hdr) {
  json j;
  j["config_hash"] = hex16(hdr.config_hash);
  j["seed"] = hdr.seed;
  j["build"] = hdr.build.empty() ? build_id() : hdr.build;
  j["mode"] = hdr.mode;
  os << j.dump() << '\n';
  os.flush();
}

void append_eval(std::ostream& os, int index, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) {
  json j;
  j["i"] = index;
  j["x"] = vec_to_json(x);
  j["y"] = vec_to_json(y);
  os << j.dump() << '\n';
  os.flush();
}

EvalLog read_eval_log(std::istream& is) {
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();

  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // trailing fragment: torn write
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw ConfigError("eval log is empty");

  EvalLog log;
  try {
    const json h = json::parse(lines.front());
    log.header.config_hash =
        std::stoull(h.at("config_hash").get<std::string>(), nullptr, 16);
    log.header.seed = h.at("seed").get<std::uint64_t>();
    log.header.build = h.at("build").get<std::string>();
    log.header.mode = h.at("mode").get<std::string>();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const json r = json::parse(lines[i]);
      if (r.at("i").get<int>() != static_cast<int>(log.evals.size()))
        throw ConfigError("eval log rows are out of order");
      log.evals.push_back(
          {vec_from_json(r.at("x")), vec_from_json(r.at("y"))});
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("eval log is corrupted: ") + e.what());
  }
  return log;
}

}  // namespace celltune
