#include <doctest.h>

#include <celltune/errors.hpp>
#include <celltune/transfer.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

using namespace celltune;

namespace {

SourceData grid_source(int per_axis, const std::function<double(double, double, double)>& g) {
  SourceData src;
  src.x.resize(per_axis * per_axis * per_axis, 3);
  src.y.resize(src.x.rows());
  int n = 0;
  for (int a = 0; a < per_axis; ++a)
    for (int b = 0; b < per_axis; ++b)
      for (int c = 0; c < per_axis; ++c) {
        const double step = 1.0 / (per_axis - 1);
        src.x.row(n) << a * step, b * step, c * step;
        src.y[n] = g(a * step, b * step, c * step);
        ++n;
      }
  return src;
}

}  // namespace

TEST_SUITE("transfer") {

TEST_CASE("seed split arithmetic: fresh slots first, best source rest") {
  TurboConfig cfg;
  cfg.n_regions = 4;
  cfg.n_init_per_region = 57;  // 228 initial slots
  cfg.seed = 21;

  SourceData src;
  src.x.resize(200, 3);
  src.y.resize(200);
  Rng rng(500);
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 3; ++j) src.x(i, j) = rng.uniform();
    src.y[i] = static_cast<double>(rng.index(50));  // coarse, so ties occur
  }

  const TurboSeed half = build_seeded_dataset(src, 0.5, 3, cfg);
  REQUIRE(half.x.rows() == 228);
  const Eigen::MatrixXd design = turbo_initial_design(3, cfg);
  for (int i = 0; i < 114; ++i) {
    CHECK_FALSE(half.value[i].has_value());
    CHECK((half.x.row(i) - design.row(i)).cwiseAbs().maxCoeff() == 0.0);
  }
  // Copied slots carry the source's best values, descending, ties in source
  // order.
  std::vector<int> order(200);
  for (int i = 0; i < 200; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return src.y[a] > src.y[b]; });
  for (int k = 0; k < 114; ++k) {
    REQUIRE(half.value[114 + k].has_value());
    CHECK(*half.value[114 + k] == src.y[order[k]]);
    CHECK((half.x.row(114 + k) - src.x.row(order[k])).cwiseAbs().maxCoeff() ==
          0.0);
  }

  // mix 0 wants 228 copies but the source only has 200.
  const TurboSeed all = build_seeded_dataset(src, 0.0, 3, cfg);
  CHECK(all.x.rows() == 200);
  for (int k = 0; k < 200; ++k) CHECK(all.value[k].has_value());

  const TurboSeed cold = build_seeded_dataset(src, 1.0, 3, cfg);
  CHECK(cold.x.rows() == 228);
  for (int k = 0; k < 228; ++k) CHECK_FALSE(cold.value[k].has_value());

  // ceil splits: 228 slots at mix 0.3 keep 69 fresh.
  const TurboSeed frac = build_seeded_dataset(src, 0.3, 3, cfg);
  int n_fresh = 0;
  for (const auto& v : frac.value)
    if (!v.has_value()) ++n_fresh;
  CHECK(n_fresh == 69);
  CHECK(frac.x.rows() == 228);
}

TEST_CASE("seed construction rejects bad inputs") {
  TurboConfig cfg;
  SourceData src;
  src.x = Eigen::MatrixXd::Zero(4, 2);
  src.y = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(build_seeded_dataset(src, 0.5, 3, cfg), ConfigError);
  src.x = Eigen::MatrixXd::Zero(4, 3);
  src.y = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(build_seeded_dataset(src, 0.5, 3, cfg), ConfigError);
  src.y = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(build_seeded_dataset(src, -0.1, 3, cfg), ConfigError);
  CHECK_THROWS_AS(build_seeded_dataset(src, 1.1, 3, cfg), ConfigError);
  CHECK_NOTHROW(build_seeded_dataset(src, 1.0, 3, cfg));
}

TEST_CASE("mix one reproduces the cold start bitwise") {
  auto f = [](const Eigen::VectorXd& x) {
    return -(x.array() - 0.6).matrix().squaredNorm();
  };
  TurboConfig cfg;
  cfg.n_regions = 2;
  cfg.batch_q = 3;
  cfg.n_init_per_region = 5;
  cfg.max_evals = 25;
  cfg.seed = 31;
  const BoxBounds box = BoxBounds::unit(3);
  SourceData src;  // deliberately empty: mix 1 never reads it
  src.x.resize(0, 3);
  src.y.resize(0);

  const TurboSeed seed = build_seeded_dataset(src, 1.0, 3, cfg);
  const RunTrace cold = run_turbo(f, box, cfg);
  const RunTrace warm = run_turbo(f, box, cfg, &seed);
  REQUIRE(cold.points.size() == warm.points.size());
  for (std::size_t i = 0; i < cold.points.size(); ++i) {
    CHECK(cold.points[i].value == warm.points[i].value);
    CHECK((cold.points[i].x - warm.points[i].x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("matching source informs the search without faking the incumbent") {
  const Eigen::Vector3d c(0.52, 0.31, 0.68);
  auto f = [&](const Eigen::VectorXd& x) { return -(x - c).squaredNorm(); };
  const SourceData src = grid_source(5, [&](double a, double b, double g) {
    return -(Eigen::Vector3d(a, b, g) - c).squaredNorm();
  });

  TurboConfig cfg;
  cfg.n_regions = 2;
  cfg.batch_q = 4;
  cfg.n_init_per_region = 10;
  cfg.max_evals = 20;
  cfg.seed = 33;
  const TurboSeed seed = build_seeded_dataset(src, 0.25, 3, cfg);
  const RunTrace trace = run_turbo(f, BoxBounds::unit(3), cfg, &seed);

  int evaluated = 0, injected = 0;
  double best_evaluated = -1e300;
  for (const auto& p : trace.points) {
    if (p.from_source) {
      ++injected;
    } else {
      ++evaluated;
      best_evaluated = std::max(best_evaluated, p.value);
    }
  }
  CHECK(evaluated == 20);
  CHECK(injected == 15);  // 2 * 10 slots, ceil(0.25 * 20) = 5 fresh
  CHECK(trace.best_value() == best_evaluated);
  CHECK(trace.best_value() >= -0.05);
}

TEST_CASE("misleading source values never surface as the best") {
  auto f = [](const Eigen::VectorXd& x) {
    return -(x.array() - 0.5).matrix().squaredNorm();  // true optimum is 0
  };
  SourceData src;
  src.x.resize(12, 3);
  src.y.resize(12);
  Rng rng(501);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 3; ++j) src.x(i, j) = rng.uniform();
    src.y[i] = 5.0 + i;  // unattainable claims
  }
  TurboConfig cfg;
  cfg.n_regions = 2;
  cfg.batch_q = 3;
  cfg.n_init_per_region = 6;
  cfg.max_evals = 18;
  cfg.seed = 35;
  const TurboSeed seed = build_seeded_dataset(src, 0.0, 3, cfg);
  const RunTrace trace = run_turbo(f, BoxBounds::unit(3), cfg, &seed);

  CHECK(trace.best_value() <= 0.0);  // a measured value, not a claim
  int evaluated = 0;
  for (const auto& p : trace.points)
    if (!p.from_source) ++evaluated;
  CHECK(evaluated == 18);
}

TEST_CASE("arm sweep runs every mix under one budget") {
  auto f = [](const Eigen::VectorXd& x) { return x.prod(); };
  SourceData src;
  src.x.resize(10, 2);
  src.y.resize(10);
  Rng rng(502);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 2; ++j) src.x(i, j) = rng.uniform();
    src.y[i] = src.x.row(i).prod();
  }
  TurboConfig cfg;
  cfg.n_regions = 2;
  cfg.batch_q = 2;
  cfg.n_init_per_region = 3;
  cfg.max_evals = 10;
  cfg.seed = 37;
  const BoxBounds box = BoxBounds::unit(2);
  const auto arms = run_transfer_experiment(f, box, cfg, src, {1.0, 0.5, 0.0});
  REQUIRE(arms.size() == 3);
  CHECK(arms[0].mix == 1.0);
  CHECK(arms[1].mix == 0.5);
  CHECK(arms[2].mix == 0.0);
  for (const auto& arm : arms) {
    int evaluated = 0;
    for (const auto& p : arm.trace.points)
      if (!p.from_source) ++evaluated;
    CHECK(evaluated == 10);
  }
  // The all-fresh arm is exactly the cold run.
  const RunTrace cold = run_turbo(f, box, cfg);
  REQUIRE(arms[0].trace.points.size() == cold.points.size());
  for (std::size_t i = 0; i < cold.points.size(); ++i)
    CHECK(arms[0].trace.points[i].value == cold.points[i].value);
}

}  // TEST_SUITE
