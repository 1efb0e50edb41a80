#include <celltune/channel.hpp>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include <celltune/mathu.hpp>

namespace celltune {

namespace {

constexpr std::uint64_t tag(std::string_view s) { return fnv1a64(s); }

LinkKind to_link_kind(UeKind k) {
  return k == UeKind::uav ? LinkKind::uav : LinkKind::gue;
}

}  // namespace

const ChannelConstants& channel_constants() {
  static const ChannelConstants table{};
  return table;
}

double plane_attenuation_db(double offset_deg, double hpbw_deg) {
  const auto& C = channel_constants();
  const double x = offset_deg / hpbw_deg;
  return -std::min(C.quad_coeff * x * x, C.plane_limit_db);
}

double max_gain_dbi(double vhpbw_deg, double hhpbw_deg) {
  const auto& C = channel_constants();
  return C.ref_gain_dbi +
         10.0 * std::log10(C.ref_hpbw_deg * C.ref_hpbw_deg / (vhpbw_deg * hhpbw_deg));
}

double antenna_gain_dbi(const AntennaPattern& p, double az_deg, double el_deg) {
  const auto& C = channel_constants();
  const double ah = plane_attenuation_db(wrap_deg(az_deg - p.bearing_deg), p.hhpbw_deg);
  const double av = plane_attenuation_db(el_deg - p.tilt_deg, p.vhpbw_deg);
  return max_gain_dbi(p.vhpbw_deg, p.hhpbw_deg) + std::max(ah + av, -C.combined_limit_db);
}

double breakpoint_distance_m(double h_bs_m, double h_ut_m, double fc_ghz) {
  const auto& C = channel_constants();
  const double hb = h_bs_m - C.effective_env_height_m;
  const double hu = h_ut_m - C.effective_env_height_m;
  return 4.0 * hb * hu * (fc_ghz * 1e9) / C.speed_of_light_mps;
}

double path_loss_db(LinkKind kind, bool los, double d2d_m, double d3d_m,
                    double h_bs_m, double h_ut_m, double fc_ghz) {
  const auto& C = channel_constants();
  d3d_m = std::max(d3d_m, 1.0);
  const double lf = 20.0 * std::log10(fc_ghz);
  if (kind == LinkKind::uav && h_ut_m > C.uav_band_min_m) {
    if (los || h_ut_m > C.uav_full_los_height_m)
      return 28.0 + 22.0 * std::log10(d3d_m) + lf;
    return -17.5 + (46.0 - 7.0 * std::log10(h_ut_m)) * std::log10(d3d_m) +
           20.0 * std::log10(40.0 * kPi * fc_ghz / 3.0);
  }
  const double bp = breakpoint_distance_m(h_bs_m, h_ut_m, fc_ghz);
  const double dh = h_bs_m - h_ut_m;
  double pl_los;
  if (d2d_m <= bp)
    pl_los = 28.0 + 22.0 * std::log10(d3d_m) + lf;
  else
    pl_los = 28.0 + 40.0 * std::log10(d3d_m) + lf - 9.0 * std::log10(bp * bp + dh * dh);
  if (los) return pl_los;
  const double pl_nlos =
      13.54 + 39.08 * std::log10(d3d_m) + lf - 0.6 * (h_ut_m - 1.5);
  return std::max(pl_los, pl_nlos);
}

double los_probability(LinkKind kind, double d2d_m, double h_ut_m) {
  const auto& C = channel_constants();
  if (kind == LinkKind::uav && h_ut_m > C.uav_band_min_m) {
    if (h_ut_m > C.uav_full_los_height_m) return 1.0;
    const double lh = std::log10(h_ut_m);
    const double d1 = std::max(460.0 * lh - 700.0, 18.0);
    if (d2d_m <= d1) return 1.0;
    const double p1 = 4300.0 * lh - 3800.0;
    return d1 / d2d_m + std::exp(-d2d_m / p1) * (1.0 - d1 / d2d_m);
  }
  if (d2d_m <= C.gue_los_near_m) return 1.0;
  return C.gue_los_near_m / d2d_m +
         std::exp(-d2d_m / C.gue_los_decay_m) * (1.0 - C.gue_los_near_m / d2d_m);
}

double sf_sigma_db(LinkKind kind, bool los, double h_ut_m) {
  const auto& C = channel_constants();
  if (kind == LinkKind::uav && h_ut_m > C.uav_band_min_m)
    return los ? C.uav_los_sigma_db : C.uav_nlos_sigma_db;
  return los ? C.gue_los_sigma_db : C.gue_nlos_sigma_db;
}

double small_scale_power(UeKind kind, Rng& rng) {
  return kind == UeKind::uav ? 1.0 : rng.exponential();
}

FadingDraw FadingDraw::sample(const Deployment& dep, std::uint64_t seed,
                              int draw_idx, int round) {
  const Eigen::Index n_cells = static_cast<Eigen::Index>(dep.layout.cells.size());
  const Eigen::Index n_ues = static_cast<Eigen::Index>(dep.ues.size());
  FadingDraw fd;
  fd.h2.setOnes(n_cells, n_ues);
  for (const Ue& ue : dep.ues) {
    if (ue.kind == UeKind::uav) continue;
    Rng rng = Rng::stream(seed, {tag("fading"), static_cast<std::uint64_t>(ue.id),
                                 static_cast<std::uint64_t>(draw_idx),
                                 static_cast<std::uint64_t>(round)});
    for (Eigen::Index b = 0; b < n_cells; ++b)
      fd.h2(b, ue.id) = small_scale_power(UeKind::gue, rng);
  }
  return fd;
}

LinkCache LinkCache::build(const ScenarioSpec& spec, const Deployment& dep,
                           std::uint64_t seed) {
  const Eigen::Index n_cells = static_cast<Eigen::Index>(dep.layout.cells.size());
  const Eigen::Index n_ues = static_cast<Eigen::Index>(dep.ues.size());
  LinkCache lc;
  lc.az_deg.resize(n_cells, n_ues);
  lc.el_deg.resize(n_cells, n_ues);
  lc.pl_db.resize(n_cells, n_ues);
  lc.sf_db.resize(n_cells, n_ues);
  lc.los.resize(n_cells, n_ues);

  for (Eigen::Index b = 0; b < n_cells; ++b) {
    const Cell& cell = dep.layout.cells[static_cast<std::size_t>(b)];
    for (Eigen::Index k = 0; k < n_ues; ++k) {
      const Ue& ue = dep.ues[static_cast<std::size_t>(k)];
      const LinkKind kind = to_link_kind(ue.kind);
      const double dz = ue.pos.z() - spec.bs_height_m;

      // One uniform and one normal per link, shared across wrap copies, so
      // the copy choice does not perturb other links' draws.
      Rng rng = Rng::stream(seed, {tag("link"), static_cast<std::uint64_t>(b),
                                   static_cast<std::uint64_t>(k)});
      const double u_los = rng.uniform();
      const double z_sf = rng.normal();

      double best_pl = 1e30;
      double best_az = 0.0, best_el = 0.0;
      bool best_los = true;
      for (const Eigen::Vector2d& off : dep.layout.wrap_offsets) {
        const Eigen::Vector2d site = cell.site_xy + off;
        const double dx = ue.pos.x() - site.x();
        const double dy = ue.pos.y() - site.y();
        const double d2d = std::hypot(dx, dy);
        const double d3d = std::hypot(d2d, dz);
        const bool los = u_los < los_probability(kind, d2d, ue.pos.z());
        const double pl = path_loss_db(kind, los, d2d, d3d, spec.bs_height_m,
                                       ue.pos.z(), spec.carrier_ghz);
        if (pl < best_pl) {
          best_pl = pl;
          best_az = rad2deg(std::atan2(dx, dy));  // clockwise from north
          best_el = rad2deg(std::atan2(dz, d2d));
          best_los = los;
        }
      }
      lc.pl_db(b, k) = best_pl;
      lc.az_deg(b, k) = best_az;
      lc.el_deg(b, k) = best_el;
      lc.los(b, k) = best_los ? 1 : 0;
      lc.sf_db(b, k) = sf_sigma_db(kind, best_los, ue.pos.z()) * z_sf;
    }
  }
  return lc;
}

GainTable compose_gain_table(const ScenarioSpec& spec, const Deployment& dep,
                             std::shared_ptr<const LinkCache> cache,
                             const DecisionVector& decision) {
  const Eigen::Index n_cells = static_cast<Eigen::Index>(dep.layout.cells.size());
  const Eigen::Index n_ues = static_cast<Eigen::Index>(dep.ues.size());
  if (decision.tilt_deg.size() != n_cells || decision.vhpbw_deg.size() != n_cells)
    throw ConfigError("decision vector size does not match the cell count");

  GainTable gt;
  gt.cache = std::move(cache);
  gt.gain_db.resize(n_cells, n_ues);
  const auto& C = channel_constants();
  for (Eigen::Index b = 0; b < n_cells; ++b) {
    const Cell& cell = dep.layout.cells[static_cast<std::size_t>(b)];
    const double vhpbw = decision.vhpbw_deg[b];
    const double tilt = decision.tilt_deg[b];
    const double mg = max_gain_dbi(vhpbw, spec.hhpbw_deg);
    for (Eigen::Index k = 0; k < n_ues; ++k) {
      const double ah = plane_attenuation_db(
          wrap_deg(gt.cache->az_deg(b, k) - cell.bearing_deg), spec.hhpbw_deg);
      const double av =
          plane_attenuation_db(gt.cache->el_deg(b, k) - tilt, vhpbw);
      const double a = mg + std::max(ah + av, -C.combined_limit_db);
      gt.gain_db(b, k) = -gt.cache->pl_db(b, k) + gt.cache->sf_db(b, k) + a;
    }
  }
  return gt;
}

GainTable build_gain_table(const ScenarioSpec& spec, const Deployment& dep,
                           const DecisionVector& decision, std::uint64_t seed) {
  auto cache = std::make_shared<const LinkCache>(LinkCache::build(spec, dep, seed));
  return compose_gain_table(spec, dep, std::move(cache), decision);
}

std::string channel_constants_json() {
  const auto& C = channel_constants();
  nlohmann::json j;
  j["speed_of_light_mps"] = C.speed_of_light_mps;
  j["thermal_noise_dbm_per_hz"] = C.thermal_noise_dbm_per_hz;
  j["antenna"] = {
      {"quad_coeff", C.quad_coeff},
      {"plane_limit_db", C.plane_limit_db},
      {"combined_limit_db", C.combined_limit_db},
      {"ref_hpbw_deg", C.ref_hpbw_deg},
      {"ref_gain_dbi", C.ref_gain_dbi},
      {"max_gain", "ref_gain_dbi + 10 log10(ref_hpbw^2 / (vhpbw * hhpbw))"},
  };
  j["ground_uma"] = {
      {"los_sigma_db", C.gue_los_sigma_db},
      {"nlos_sigma_db", C.gue_nlos_sigma_db},
      {"effective_env_height_m", C.effective_env_height_m},
      {"los_near_m", C.gue_los_near_m},
      {"los_decay_m", C.gue_los_decay_m},
      {"los_prob", "d2d <= 18 ? 1 : 18/d2d + exp(-d2d/63) (1 - 18/d2d)"},
      {"breakpoint_m", "4 (hbs - 1)(hut - 1) fc_hz / c"},
      {"pl_los_near_db", "28 + 22 log10(d3d) + 20 log10(fc_ghz)"},
      {"pl_los_far_db",
       "28 + 40 log10(d3d) + 20 log10(fc_ghz) - 9 log10(bp^2 + (hbs - hut)^2)"},
      {"pl_nlos_db",
       "max(pl_los, 13.54 + 39.08 log10(d3d) + 20 log10(fc_ghz) - 0.6 (hut - 1.5))"},
  };
  j["aerial_umaav"] = {
      {"band_min_m", C.uav_band_min_m},
      {"full_los_above_m", C.uav_full_los_height_m},
      {"los_sigma_db", C.uav_los_sigma_db},
      {"los_sigma_note",
       "TR 36.777 lists 4.64 exp(-0.0066 h), under 2 dB at corridor heights; "
       "pure-LoS aerial links are modeled without shadow variability"},
      {"nlos_sigma_db", C.uav_nlos_sigma_db},
      {"los_prob_d1_m", "max(460 log10(h) - 700, 18)"},
      {"los_prob_p1_m", "4300 log10(h) - 3800"},
      {"los_prob",
       "h > 100 ? 1 : (d2d <= d1 ? 1 : d1/d2d + exp(-d2d/p1) (1 - d1/d2d))"},
      {"pl_los_db", "28 + 22 log10(d3d) + 20 log10(fc_ghz)"},
      {"pl_nlos_db",
       "-17.5 + (46 - 7 log10(h)) log10(d3d) + 20 log10(40 pi fc_ghz / 3)"},
  };
  return j.dump(2);
}

}  // namespace celltune
