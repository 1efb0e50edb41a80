#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <celltune/errors.hpp>

namespace celltune {

// Axis-aligned UAV corridor box flown at a fixed height.
struct CorridorSpec {
  double x0 = 0.0, x1 = 0.0;
  double y0 = 0.0, y1 = 0.0;
  double height_m = 150.0;
};

struct Cell {
  int id = 0;    // site * 3 + sector
  int site = 0;
  Eigen::Vector2d site_xy{0.0, 0.0};
  double bearing_deg = 0.0;  // boresight azimuth, clockwise from north
};

struct HexLayout {
  double isd_m = 500.0;
  int n_rings = 2;
  std::vector<Eigen::Vector2d> sites;
  std::vector<Cell> cells;
  // Cluster translations used for wrap-around; identity first. Seven vectors
  // for the 19-site cluster, identity only otherwise.
  std::vector<Eigen::Vector2d> wrap_offsets;
};

HexLayout build_hex_layout(double isd_m, int n_rings);

// True when p lies inside the union of the sites' hexagonal cells.
bool in_footprint(const HexLayout& lay, const Eigen::Vector2d& p);

enum class UeKind { gue, uav };

struct Ue {
  int id = 0;
  UeKind kind = UeKind::gue;
  Eigen::Vector3d pos{0.0, 0.0, 0.0};  // z is height above ground
  int corridor = -1;                   // -1 unless dropped inside a corridor
};

struct ScenarioSpec {
  double isd_m = 500.0;
  int n_rings = 2;
  double bs_height_m = 25.0;
  double carrier_ghz = 2.0;
  double bandwidth_hz = 10e6;
  double tx_power_dbm = 46.0;
  double noise_figure_db = 9.0;
  int gues_per_sector = 10;
  double gue_height_m = 1.5;
  std::string uav_mode = "corridors";  // "corridors" or "uniform"
  int uavs_per_corridor = 70;
  std::vector<CorridorSpec> corridors;
  double uniform_uav_height_m = 150.0;
  double tilt_min_deg = -20.0;
  double tilt_max_deg = 45.0;
  double vhpbw_min_deg = 5.0;
  double vhpbw_max_deg = 70.0;
  double hhpbw_deg = 65.0;

  // 19 sites at 500 m ISD, four corridors at 150 m, 10 GUEs per sector.
  static ScenarioSpec baseline_3gpp();

  void validate(const HexLayout& lay) const;  // throws ConfigError
};

struct Deployment {
  HexLayout layout;
  std::vector<Ue> ues;  // GUEs first, then UAVs
  int n_gue = 0;
  int n_uav = 0;
};

// Deterministic given (spec, seed); validates the spec first.
Deployment drop_ues(const ScenarioSpec& spec, std::uint64_t seed);

ScenarioSpec scenario_from_json_string(const std::string& text);
std::string scenario_to_json_string(const ScenarioSpec& spec);

// Per-cell electrical tilt (positive is up) and vertical HPBW.
struct DecisionVector {
  Eigen::VectorXd tilt_deg;
  Eigen::VectorXd vhpbw_deg;
  bool joint = false;  // when false only tilts are exposed to the optimizer

  static DecisionVector baseline(int n_cells);

  // Optimizer coordinates: [tilts] or [tilts, vhpbws] when joint.
  Eigen::VectorXd to_raw() const;
  static DecisionVector from_raw(const Eigen::VectorXd& raw, int n_cells,
                                 bool joint, const DecisionVector& base);

  std::uint64_t hash() const;
};

// Box bounds for the optimizer coordinates of a decision vector.
std::pair<Eigen::VectorXd, Eigen::VectorXd> decision_bounds(
    const ScenarioSpec& spec, int n_cells, bool joint);

}  // namespace celltune
