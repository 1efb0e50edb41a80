#pragma once

#include <celltune/bo.hpp>

#include <Eigen/Dense>

#include <limits>
#include <optional>

namespace celltune::detail {

// Shared evaluation bookkeeping for the optimizer runners: raw<->unit
// mapping, trace recording, best tracking, and abort-on-throw semantics.
struct TraceRunner {
  const ObjectiveFn& f;
  BoxBounds box;
  RunTrace trace;
  int evals = 0;
  double best_y = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x_unit;

  TraceRunner(const ObjectiveFn& fn, const BoxBounds& b) : f(fn), box(b) {}

  Eigen::VectorXd to_raw(const Eigen::VectorXd& u) const {
    return box.lo.array() + u.array() * (box.hi - box.lo).array();
  }

  // nullopt -> evaluation threw; trace.aborted is set and the run must stop.
  std::optional<double> evaluate(const Eigen::VectorXd& u, int coordinate,
                                 int region) {
    double y;
    try {
      y = f(to_raw(u));
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.error = e.what();
      return std::nullopt;
    }
    ++evals;
    record(u, y, coordinate, region, false);
    return y;
  }

  // Adds an observation carried over from a source run; spends no budget and
  // never advances the incumbent, which tracks values measured under f only.
  void inject(const Eigen::VectorXd& u, double value, int region) {
    record(u, value, -1, region, true);
  }

 private:
  void record(const Eigen::VectorXd& u, double y, int coordinate, int region,
              bool from_source) {
    if (!from_source && y > best_y) {
      best_y = y;
      best_x_unit = u;
    }
    TracePoint p;
    p.iteration = static_cast<int>(trace.points.size());
    p.x = to_raw(u);
    p.value = y;
    p.best_value = best_y;
    if (best_x_unit.size() > 0) p.best_x = to_raw(best_x_unit);
    p.coordinate = coordinate;
    p.region = region;
    p.from_source = from_source;
    trace.points.push_back(std::move(p));
  }
};

}  // namespace celltune::detail
