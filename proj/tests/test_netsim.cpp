#include <doctest.h>

#include <celltune/mathu.hpp>
#include <celltune/netsim.hpp>

#include <cmath>
#include <vector>

using namespace celltune;

TEST_SUITE("netsim") {

TEST_CASE("thermal noise power at 10 MHz with NF 9 dB") {
  CHECK(noise_power_dbm(10e6, 9.0) == doctest::Approx(-95.0).epsilon(1e-12));
}

TEST_CASE("association picks the strongest cell, ties to the lowest id") {
  Eigen::MatrixXd g(3, 4);
  g << -80, -70, -90, -60,
       -70, -70, -95, -60,
       -75, -70, -90, -60;
  const Eigen::VectorXi a = associate(g);
  CHECK(a[0] == 1);
  CHECK(a[1] == 0);  // three-way tie
  CHECK(a[2] == 0);
  CHECK(a[3] == 0);  // exact tie across all rows
}

TEST_CASE("raising one link's gain can only attract the association") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd g(5, 8);
    for (int i = 0; i < g.size(); ++i) g(i / 8, i % 8) = rng.uniform(-120.0, -60.0);
    const int c = static_cast<int>(rng.index(5));
    const int k = static_cast<int>(rng.index(8));
    Eigen::MatrixXd g2 = g;
    g2(c, k) += 100.0;
    const Eigen::VectorXi a2 = associate(g2);
    CHECK(a2[k] == c);
    for (int j = 0; j < 8; ++j)
      if (j != k) CHECK(a2[j] == associate(g)[j]);
  }
}

TEST_CASE("single-cell SINR is signal over noise") {
  Eigen::MatrixXd g(1, 1);
  g << -100.0;
  const Eigen::VectorXi a = associate(g);
  const Eigen::VectorXd s = sinr_linear(g, a, 46.0, -95.0);
  // rx = 46 - 100 = -54 dBm over -95 dBm noise: 41 dB.
  CHECK(lin_to_db(s[0]) == doctest::Approx(41.0).epsilon(1e-9));
}

TEST_CASE("equal-gain interferers give the hand-computed SINR") {
  Eigen::MatrixXd g(3, 1);
  g << -90.0, -90.0, -90.0;
  const Eigen::VectorXi a = associate(g);
  REQUIRE(a[0] == 0);
  const Eigen::VectorXd s = sinr_linear(g, a, 46.0, -95.0);
  const double rx = db_to_lin(46.0 - 90.0);
  const double want = rx / (2.0 * rx + db_to_lin(-95.0));
  CHECK(s[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("SINR is invariant to a common dB shift of gains and noise") {
  Rng rng(10);
  Eigen::MatrixXd g(4, 6);
  for (int i = 0; i < g.size(); ++i) g(i / 6, i % 6) = rng.uniform(-120.0, -60.0);
  const Eigen::VectorXi a = associate(g);
  const Eigen::VectorXd s0 = sinr_linear(g, a, 46.0, -95.0);
  const Eigen::VectorXd s1 = sinr_linear(g.array() + 7.0, a, 46.0, -88.0);
  for (int k = 0; k < 6; ++k) CHECK(s1[k] == doctest::Approx(s0[k]).epsilon(1e-12));
}

TEST_CASE("UAV rates: full-band share, exact log2 form, draw-count invariant") {
  Eigen::MatrixXd g(1, 2);
  g << -100.0, -100.0;
  const std::vector<UeKind> kinds{UeKind::uav, UeKind::uav};
  const Eigen::VectorXi a = associate(g);
  const double noise = -95.0;
  const Eigen::VectorXd r1 = rates_bps(g, kinds, a, 46.0, noise, 10e6, 1, 5, 0);
  const Eigen::VectorXd r100 = rates_bps(g, kinds, a, 46.0, noise, 10e6, 100, 5, 0);
  const double sinr = db_to_lin(46.0 - 100.0) / db_to_lin(noise);
  // Two UEs share one cell, so each gets half the band-time.
  const double want = 0.5 * 10e6 * std::log2(1.0 + sinr);
  CHECK(r1[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(r1[1] == doctest::Approx(want).epsilon(1e-12));
  CHECK(r1 == r100);
}

TEST_CASE("GUE Rayleigh rate matches the exponential-integral value") {
  // At mean SINR 1: E[log2(1 + X)], X ~ Exp(1), equals e * E1(1) / ln 2.
  Eigen::MatrixXd g(1, 1);
  g << -95.0 - 46.0;  // rx equals noise
  const std::vector<UeKind> kinds{UeKind::gue};
  const Eigen::VectorXi a = associate(g);
  const Eigen::VectorXd r =
      rates_bps(g, kinds, a, 46.0, -95.0, 1.0, 20000, 12, 0);
  CHECK(r[0] == doctest::Approx(0.860338).epsilon(0.01));
  const Eigen::VectorXd r2 = rates_bps(g, kinds, a, 46.0, -95.0, 1.0, 50, 12, 0);
  CHECK(r2[0] != r[0]);  // GUE rates depend on the fading draw count
}

TEST_CASE("objective weights and floor") {
  const Eigen::VectorXd rates =
      (Eigen::VectorXd(2) << std::exp(1.0), std::exp(2.0)).finished();
  const std::vector<UeKind> kinds{UeKind::gue, UeKind::uav};
  CHECK(objective(rates, kinds, 0.5, 1.0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(objective(rates, kinds, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(objective(rates, kinds, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  // Rates below the floor contribute log(floor) = 0.
  const Eigen::VectorXd tiny = (Eigen::VectorXd(2) << 0.25, std::exp(2.0)).finished();
  CHECK(objective(tiny, kinds, 0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-equal rates give an exact closed-form objective") {
  const int n = 101;
  const double r = 1234.5;
  Eigen::VectorXd rates = Eigen::VectorXd::Constant(n, r);
  std::vector<UeKind> kinds(n, UeKind::gue);
  for (int i = 0; i < 40; ++i) kinds[i] = UeKind::uav;
  const double f = objective(rates, kinds, 0.5, 1.0);
  CHECK(f == doctest::Approx(0.5 * n * std::log(r)).epsilon(1e-12));
}

TEST_CASE("geometric mean and the objective mapping round trip") {
  Eigen::VectorXd r2(2);
  r2 << 1.0, 4.0;
  CHECK(geo_mean(r2) == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(13);
  Eigen::VectorXd rates(57);
  std::vector<UeKind> kinds(57);
  for (int i = 0; i < 57; ++i) {
    rates[i] = std::exp(rng.uniform(8.0, 16.0));
    kinds[i] = i % 3 == 0 ? UeKind::uav : UeKind::gue;
  }
  const double f = objective(rates, kinds, 0.5, 1.0);
  // Halved weights cancel against the doubled argument.
  const double mapped = map_objective_to_geomean(2.0 * f, 57);
  CHECK(mapped == doctest::Approx(geo_mean(rates)).epsilon(1e-12));
}

TEST_CASE("UAV coverage counts and threshold monotonicity") {
  Eigen::VectorXd sinr_db(5);
  sinr_db << -10.0, -5.0, -4.9, 3.0, 20.0;
  const std::vector<UeKind> kinds{UeKind::uav, UeKind::uav, UeKind::uav,
                                  UeKind::uav, UeKind::gue};
  CHECK(uav_coverage(sinr_db, kinds, -5.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(uav_coverage(sinr_db, kinds, -20.0) == 1.0);
  CHECK(uav_coverage(sinr_db, kinds, 50.0) == 0.0);
  double prev = 1.0;
  for (double tau = -20.0; tau <= 25.0; tau += 1.0) {
    const double c = uav_coverage(sinr_db, kinds, tau);
    CHECK(c <= prev);
    prev = c;
  }
  const std::vector<UeKind> no_uav{UeKind::gue, UeKind::gue, UeKind::gue,
                                   UeKind::gue, UeKind::gue};
  CHECK_THROWS_AS(uav_coverage(sinr_db, no_uav, -5.0), std::domain_error);
}

TEST_CASE("evaluator is bit-reproducible and redrop mode is not") {
  ScenarioSpec spec = ScenarioSpec::baseline_3gpp();
  EvalSettings st;
  st.n_fading_draws = 4;
  Evaluator ev(spec, st, 17);
  const DecisionVector dec = DecisionVector::baseline(57);
  const EvalReport a = ev.evaluate(dec);
  const EvalReport b = ev.evaluate(dec);
  CHECK(a.objective_value == b.objective_value);
  CHECK(a.rate_bps == b.rate_bps);
  CHECK(a.sinr_db == b.sinr_db);
  CHECK(a.assoc == b.assoc);

  EvalSettings noisy = st;
  noisy.redrop_per_eval = true;
  Evaluator evn(spec, noisy, 17);
  const EvalReport c = evn.evaluate_next(dec);
  const EvalReport d = evn.evaluate_next(dec);
  CHECK(c.objective_value != d.objective_value);

  // A fresh evaluator with the same seed replays the same rounds.
  Evaluator evn2(spec, noisy, 17);
  CHECK(evn2.evaluate_next(dec).objective_value == c.objective_value);
}

TEST_CASE("every nonempty cell's band-time shares sum to one") {
  ScenarioSpec spec = ScenarioSpec::baseline_3gpp();
  EvalSettings st;
  st.n_fading_draws = 2;
  Evaluator ev(spec, st, 19);
  const EvalReport rep = ev.evaluate(DecisionVector::baseline(57));
  std::vector<int> counts(57, 0);
  for (int k = 0; k < rep.assoc.size(); ++k) ++counts[rep.assoc[k]];
  std::vector<double> share(57, 0.0);
  for (int k = 0; k < rep.assoc.size(); ++k)
    share[rep.assoc[k]] += 1.0 / counts[rep.assoc[k]];
  for (int b = 0; b < 57; ++b)
    if (counts[b] > 0) CHECK(share[b] == doctest::Approx(1.0).epsilon(1e-9));
  for (int k = 0; k < rep.rate_bps.size(); ++k) {
    CHECK(rep.rate_bps[k] > 0.0);
    CHECK(std::isfinite(rep.rate_bps[k]));
  }
}

TEST_CASE("baseline all-downtilt scenario: deep UAV outage, sub-Mbps geo mean") {
  ScenarioSpec spec = ScenarioSpec::baseline_3gpp();
  EvalSettings st;  // reporting defaults
  Evaluator ev(spec, st, 1);
  const EvalReport rep = ev.evaluate(DecisionVector::baseline(57));
  CHECK(rep.uav_coverage <= 0.01);
  CHECK(rep.uav_outage >= 0.99);
  CHECK(rep.geo_mean_rate_bps > 0.73e6 * 0.75);
  CHECK(rep.geo_mean_rate_bps < 0.73e6 * 1.25);
}

}  // TEST_SUITE
