#include <celltune/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include <celltune/mathu.hpp>
#include <celltune/rng.hpp>

namespace celltune {

namespace {

constexpr std::uint64_t tag(std::string_view s) { return fnv1a64(s); }

Eigen::Vector2d rot_deg(const Eigen::Vector2d& v, double deg) {
  const double c = std::cos(deg2rad(deg));
  const double s = std::sin(deg2rad(deg));
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

int hex_dist(int q, int r) {
  return std::max({std::abs(q), std::abs(r), std::abs(q + r)});
}

}  // namespace

HexLayout build_hex_layout(double isd_m, int n_rings) {
  if (isd_m <= 0.0 || n_rings < 0) throw ConfigError("invalid hex layout parameters");
  HexLayout lay;
  lay.isd_m = isd_m;
  lay.n_rings = n_rings;

  const Eigen::Vector2d a1(isd_m, 0.0);
  const Eigen::Vector2d a2(isd_m * 0.5, isd_m * std::sqrt(3.0) / 2.0);

  struct Ax {
    int q, r;
    Eigen::Vector2d p;
  };
  std::vector<Ax> axs;
  for (int q = -n_rings; q <= n_rings; ++q)
    for (int r = -n_rings; r <= n_rings; ++r)
      if (hex_dist(q, r) <= n_rings)
        axs.push_back({q, r, static_cast<double>(q) * a1 + static_cast<double>(r) * a2});
  std::sort(axs.begin(), axs.end(), [](const Ax& a, const Ax& b) {
    const int da = hex_dist(a.q, a.r), db = hex_dist(b.q, b.r);
    if (da != db) return da < db;
    const double ta = std::atan2(a.p.y(), a.p.x()), tb = std::atan2(b.p.y(), b.p.x());
    if (ta != tb) return ta < tb;
    return a.q < b.q;
  });

  for (const Ax& ax : axs) lay.sites.push_back(ax.p);

  for (int s = 0; s < static_cast<int>(lay.sites.size()); ++s)
    for (int k = 0; k < 3; ++k) {
      Cell c;
      c.id = s * 3 + k;
      c.site = s;
      c.site_xy = lay.sites[static_cast<std::size_t>(s)];
      c.bearing_deg = 30.0 + 120.0 * k;
      lay.cells.push_back(c);
    }

  lay.wrap_offsets.push_back(Eigen::Vector2d::Zero());
  if (n_rings == 2) {
    // The 19-site cluster tiles the plane when translated by 3*a1 + 2*a2 and
    // its 60-degree rotations.
    const Eigen::Vector2d t1 = 3.0 * a1 + 2.0 * a2;
    for (int k = 0; k < 6; ++k) lay.wrap_offsets.push_back(rot_deg(t1, 60.0 * k));
  }
  return lay;
}

bool in_footprint(const HexLayout& lay, const Eigen::Vector2d& p) {
  // Voronoi hexagon of the triangular site lattice: three slabs of half-width
  // ISD/2 whose normals point at the nearest-neighbor directions.
  static const double s3 = std::sqrt(3.0) / 2.0;
  const Eigen::Vector2d n0(1.0, 0.0), n1(0.5, s3), n2(-0.5, s3);
  const double half = lay.isd_m * 0.5 * (1.0 + 1e-12);
  for (const auto& s : lay.sites) {
    const Eigen::Vector2d d = p - s;
    if (std::abs(d.dot(n0)) <= half && std::abs(d.dot(n1)) <= half &&
        std::abs(d.dot(n2)) <= half)
      return true;
  }
  return false;
}

ScenarioSpec ScenarioSpec::baseline_3gpp() {
  ScenarioSpec s;
  s.corridors = {
      {-650.0, -610.0, -780.0, 780.0, 150.0},
      {-780.0, 780.0, -650.0, -610.0, 150.0},
      {-780.0, 780.0, 610.0, 650.0, 150.0},
      {610.0, 650.0, -780.0, 780.0, 150.0},
  };
  return s;
}

namespace {

void validate_ranges(const ScenarioSpec& s) {
  if (s.isd_m <= 0.0) throw ConfigError("isd_m must be positive");
  if (s.n_rings < 0) throw ConfigError("n_rings must be nonnegative");
  if (s.bs_height_m <= 0.0) throw ConfigError("bs_height_m must be positive");
  if (s.carrier_ghz <= 0.0) throw ConfigError("carrier_ghz must be positive");
  if (s.bandwidth_hz <= 0.0) throw ConfigError("bandwidth_hz must be positive");
  if (s.gues_per_sector < 0) throw ConfigError("gues_per_sector must be nonnegative");
  if (s.gue_height_m <= 0.0) throw ConfigError("gue_height_m must be positive");
  if (s.uav_mode != "corridors" && s.uav_mode != "uniform")
    throw ConfigError("uav_mode must be \"corridors\" or \"uniform\"");
  if (s.uavs_per_corridor < 0) throw ConfigError("uavs_per_corridor must be nonnegative");
  if (s.uniform_uav_height_m <= 0.0) throw ConfigError("uniform_uav_height_m must be positive");
  if (!(s.tilt_min_deg < s.tilt_max_deg)) throw ConfigError("tilt bounds are inverted");
  if (!(0.0 < s.vhpbw_min_deg && s.vhpbw_min_deg < s.vhpbw_max_deg))
    throw ConfigError("vhpbw bounds are invalid");
  if (s.hhpbw_deg <= 0.0) throw ConfigError("hhpbw_deg must be positive");
  for (const CorridorSpec& c : s.corridors) {
    if (!(c.x0 < c.x1 && c.y0 < c.y1)) throw ConfigError("corridor box is degenerate");
    if (c.height_m <= 0.0) throw ConfigError("corridor height must be positive");
  }
  if (s.uav_mode == "corridors" && s.uavs_per_corridor > 0 && s.corridors.empty())
    throw ConfigError("corridors mode requires at least one corridor");
}

}  // namespace

void ScenarioSpec::validate(const HexLayout& lay) const {
  validate_ranges(*this);
  for (const CorridorSpec& c : corridors) {
    const Eigen::Vector2d corners[4] = {
        {c.x0, c.y0}, {c.x0, c.y1}, {c.x1, c.y0}, {c.x1, c.y1}};
    for (const auto& p : corners)
      if (!in_footprint(lay, p))
        throw ConfigError("corridor extends outside the layout footprint");
  }
}

namespace {

Eigen::Vector2d sample_footprint(const HexLayout& lay, Rng& rng) {
  double xlo = 1e18, xhi = -1e18, ylo = 1e18, yhi = -1e18;
  const double r = lay.isd_m / std::sqrt(3.0);
  for (const auto& s : lay.sites) {
    xlo = std::min(xlo, s.x() - r);
    xhi = std::max(xhi, s.x() + r);
    ylo = std::min(ylo, s.y() - r);
    yhi = std::max(yhi, s.y() + r);
  }
  for (;;) {
    const Eigen::Vector2d p(rng.uniform(xlo, xhi), rng.uniform(ylo, yhi));
    if (in_footprint(lay, p)) return p;
  }
}

}  // namespace

Deployment drop_ues(const ScenarioSpec& spec, std::uint64_t seed) {
  Deployment dep;
  dep.layout = build_hex_layout(spec.isd_m, spec.n_rings);
  spec.validate(dep.layout);

  int next_id = 0;
  const int n_gue = spec.gues_per_sector * static_cast<int>(dep.layout.cells.size());
  {
    Rng rng = Rng::stream(seed, {tag("drop.gue")});
    for (int i = 0; i < n_gue; ++i) {
      Ue ue;
      ue.id = next_id++;
      ue.kind = UeKind::gue;
      const Eigen::Vector2d p = sample_footprint(dep.layout, rng);
      ue.pos = {p.x(), p.y(), spec.gue_height_m};
      dep.ues.push_back(ue);
    }
  }
  dep.n_gue = n_gue;

  if (spec.uav_mode == "corridors") {
    for (std::size_t c = 0; c < spec.corridors.size(); ++c) {
      const CorridorSpec& box = spec.corridors[c];
      Rng rng = Rng::stream(seed, {tag("drop.uav"), c});
      for (int i = 0; i < spec.uavs_per_corridor; ++i) {
        Ue ue;
        ue.id = next_id++;
        ue.kind = UeKind::uav;
        ue.corridor = static_cast<int>(c);
        ue.pos = {rng.uniform(box.x0, box.x1), rng.uniform(box.y0, box.y1),
                  box.height_m};
        dep.ues.push_back(ue);
        ++dep.n_uav;
      }
    }
  } else {
    // Uniform mode keeps the corridor headcount so scenarios stay comparable.
    const std::size_t groups = std::max<std::size_t>(1, spec.corridors.size());
    const int n_uav = spec.uavs_per_corridor * static_cast<int>(groups);
    Rng rng = Rng::stream(seed, {tag("drop.uav.uniform")});
    for (int i = 0; i < n_uav; ++i) {
      Ue ue;
      ue.id = next_id++;
      ue.kind = UeKind::uav;
      const Eigen::Vector2d p = sample_footprint(dep.layout, rng);
      ue.pos = {p.x(), p.y(), spec.uniform_uav_height_m};
      dep.ues.push_back(ue);
      ++dep.n_uav;
    }
  }
  return dep;
}

ScenarioSpec scenario_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario JSON parse error: ") + e.what());
  }
  ScenarioSpec s;
  try {
    s.isd_m = j.value("isd_m", s.isd_m);
    s.n_rings = j.value("n_rings", s.n_rings);
    s.bs_height_m = j.value("bs_height_m", s.bs_height_m);
    s.carrier_ghz = j.value("carrier_ghz", s.carrier_ghz);
    s.bandwidth_hz = j.value("bandwidth_hz", s.bandwidth_hz);
    s.tx_power_dbm = j.value("tx_power_dbm", s.tx_power_dbm);
    s.noise_figure_db = j.value("noise_figure_db", s.noise_figure_db);
    s.gues_per_sector = j.value("gues_per_sector", s.gues_per_sector);
    s.gue_height_m = j.value("gue_height_m", s.gue_height_m);
    s.uav_mode = j.value("uav_mode", s.uav_mode);
    s.uavs_per_corridor = j.value("uavs_per_corridor", s.uavs_per_corridor);
    s.uniform_uav_height_m = j.value("uniform_uav_height_m", s.uniform_uav_height_m);
    s.tilt_min_deg = j.value("tilt_min_deg", s.tilt_min_deg);
    s.tilt_max_deg = j.value("tilt_max_deg", s.tilt_max_deg);
    s.vhpbw_min_deg = j.value("vhpbw_min_deg", s.vhpbw_min_deg);
    s.vhpbw_max_deg = j.value("vhpbw_max_deg", s.vhpbw_max_deg);
    s.hhpbw_deg = j.value("hhpbw_deg", s.hhpbw_deg);
    if (j.contains("corridors")) {
      s.corridors.clear();
      for (const auto& cj : j.at("corridors")) {
        CorridorSpec c;
        c.x0 = cj.at("x0").get<double>();
        c.x1 = cj.at("x1").get<double>();
        c.y0 = cj.at("y0").get<double>();
        c.y1 = cj.at("y1").get<double>();
        c.height_m = cj.at("height_m").get<double>();
        s.corridors.push_back(c);
      }
    } else {
      s.corridors = ScenarioSpec::baseline_3gpp().corridors;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario JSON field error: ") + e.what());
  }
  validate_ranges(s);
  return s;
}

std::string scenario_to_json_string(const ScenarioSpec& s) {
  nlohmann::json j;
  j["isd_m"] = s.isd_m;
  j["n_rings"] = s.n_rings;
  j["bs_height_m"] = s.bs_height_m;
  j["carrier_ghz"] = s.carrier_ghz;
  j["bandwidth_hz"] = s.bandwidth_hz;
  j["tx_power_dbm"] = s.tx_power_dbm;
  j["noise_figure_db"] = s.noise_figure_db;
  j["gues_per_sector"] = s.gues_per_sector;
  j["gue_height_m"] = s.gue_height_m;
  j["uav_mode"] = s.uav_mode;
  j["uavs_per_corridor"] = s.uavs_per_corridor;
  j["uniform_uav_height_m"] = s.uniform_uav_height_m;
  j["tilt_min_deg"] = s.tilt_min_deg;
  j["tilt_max_deg"] = s.tilt_max_deg;
  j["vhpbw_min_deg"] = s.vhpbw_min_deg;
  j["vhpbw_max_deg"] = s.vhpbw_max_deg;
  j["hhpbw_deg"] = s.hhpbw_deg;
  j["corridors"] = nlohmann::json::array();
  for (const CorridorSpec& c : s.corridors)
    j["corridors"].push_back({{"x0", c.x0},
                              {"x1", c.x1},
                              {"y0", c.y0},
                              {"y1", c.y1},
                              {"height_m", c.height_m}});
  return j.dump(2);
}

DecisionVector DecisionVector::baseline(int n_cells) {
  DecisionVector d;
  d.tilt_deg = Eigen::VectorXd::Constant(n_cells, -12.0);
  d.vhpbw_deg = Eigen::VectorXd::Constant(n_cells, 10.0);
  d.joint = false;
  return d;
}

Eigen::VectorXd DecisionVector::to_raw() const {
  if (!joint) return tilt_deg;
  Eigen::VectorXd raw(tilt_deg.size() + vhpbw_deg.size());
  raw << tilt_deg, vhpbw_deg;
  return raw;
}

DecisionVector DecisionVector::from_raw(const Eigen::VectorXd& raw, int n_cells,
                                        bool joint, const DecisionVector& base) {
  if (raw.size() != (joint ? 2 * n_cells : n_cells))
    throw ConfigError("raw decision has wrong dimension");
  DecisionVector d;
  d.joint = joint;
  d.tilt_deg = raw.head(n_cells);
  d.vhpbw_deg = joint ? Eigen::VectorXd(raw.tail(n_cells)) : base.vhpbw_deg;
  return d;
}

std::uint64_t DecisionVector::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    h = fnv1a64(std::string_view(bytes, sizeof(double)), h);
  };
  for (Eigen::Index i = 0; i < tilt_deg.size(); ++i) mix(tilt_deg[i]);
  for (Eigen::Index i = 0; i < vhpbw_deg.size(); ++i) mix(vhpbw_deg[i]);
  h = fnv1a64(joint ? "j" : "t", h);
  return h;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> decision_bounds(
    const ScenarioSpec& spec, int n_cells, bool joint) {
  const int d = joint ? 2 * n_cells : n_cells;
  Eigen::VectorXd lo(d), hi(d);
  lo.head(n_cells).setConstant(spec.tilt_min_deg);
  hi.head(n_cells).setConstant(spec.tilt_max_deg);
  if (joint) {
    lo.tail(n_cells).setConstant(spec.vhpbw_min_deg);
    hi.tail(n_cells).setConstant(spec.vhpbw_max_deg);
  }
  return {lo, hi};
}

}  // namespace celltune
