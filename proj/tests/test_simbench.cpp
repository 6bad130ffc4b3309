#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "lcp/csv.hpp"
#include "lcp/simbench.hpp"
#include "oracles.hpp"

using lcp::ExperimentConfig;
using lcp::Index;
using lcp::MethodSpec;
using lcp::SimDraw;
using lcp::Vector;

namespace {

double sd_of(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
}

}  // namespace

TEST_CASE("identity-signal generator noise scales follow their advertised laws") {
  auto rng = testor::make_rng(7001);
  for (char noise : {'a', 'b', 'c'}) {
    const SimDraw d = lcp::gen_example1(20000, noise, rng);
    std::vector<double> standardized;
    for (Index i = 0; i < d.calib.size(); ++i) {
      const double x = d.calib.x(i, 0);
      const double ax = std::abs(x);
      const double scale = noise == 'a' ? 1.0
                           : noise == 'b' ? 1.0 / (2.0 * ax + 1.0)
                                          : ax / (ax + 1.0);
      if (scale < 1e-6) continue;  // the 'c' law degenerates at the origin
      standardized.push_back((d.calib.y[i] - x) / scale);
    }
    CHECK(sd_of(standardized) == doctest::Approx(1.0).epsilon(0.03));
  }

  // The 'c' law pins the response at the signal when the feature vanishes.
  auto rng2 = testor::make_rng(7002);
  const SimDraw dc = lcp::gen_example1(20000, 'c', rng2);
  for (Index i = 0; i < dc.calib.size(); ++i) {
    const double ax = std::abs(dc.calib.x(i, 0));
    if (ax < 1e-3)
      CHECK(std::abs(dc.calib.y[i] - dc.calib.x(i, 0)) <= ax / (ax + 1.0) * 6.0);
  }
  CHECK_THROWS_AS(lcp::gen_example1(100, 'z', rng2), std::invalid_argument);
  CHECK_THROWS_AS(lcp::gen_example1(0, 'a', rng2), std::invalid_argument);
}

TEST_CASE("three-point design hits its mixture weights and degenerates at zero") {
  auto rng = testor::make_rng(7010);
  const Index n = 100000;
  const SimDraw d = lcp::gen_counterexample2(n, 0.8, rng);
  Index at_minus = 0, at_zero = 0, at_plus = 0;
  for (Index i = 0; i < n; ++i) {
    const double x = d.calib.x(i, 0);
    if (x == -1.0) ++at_minus;
    else if (x == 0.0) ++at_zero;
    else if (x == 1.0) ++at_plus;
    else FAIL("unexpected feature value");
    if (x == 0.0) CHECK(d.calib.y[i] == 0.0);  // zero-width noise
    else CHECK(std::abs(d.calib.y[i] - x) <= 2.0);
  }
  // 1/6, 2/3, 1/6 within three binomial standard errors.
  const double se_side = std::sqrt((1.0 / 6) * (5.0 / 6) / static_cast<double>(n));
  const double se_zero = std::sqrt((2.0 / 3) * (1.0 / 3) / static_cast<double>(n));
  CHECK(std::abs(static_cast<double>(at_minus) / n - 1.0 / 6) <= 3 * se_side);
  CHECK(std::abs(static_cast<double>(at_plus) / n - 1.0 / 6) <= 3 * se_side);
  CHECK(std::abs(static_cast<double>(at_zero) / n - 2.0 / 3) <= 3 * se_zero);
  CHECK_THROWS_AS(lcp::gen_counterexample2(10, 1.0, rng), std::invalid_argument);
}

TEST_CASE("shift design weight function is the closed-form density ratio") {
  CHECK(lcp::covariate_shift_weight(Vector::Constant(1, 1.5)) == 1.0);
  CHECK(lcp::covariate_shift_weight(Vector::Zero(1)) == std::exp(-4.5));
  CHECK(lcp::covariate_shift_weight(Vector::Constant(1, 3.0)) == std::exp(4.5));

  // Importance identity E[w(X) g(X)] = E_shifted[g(X)], probed with the
  // bounded g = 1{x <= 2} whose shifted mean is Phi(-1).  (The raw mean of w
  // is 1 too, but sd(w) = sqrt(e^9 - 1) ~ 90 makes it a hopeless Monte Carlo
  // target at this sample size, so it only gets a loose sanity band.)
  auto rng = testor::make_rng(7020);
  double w_sum = 0.0, wg_sum = 0.0, tx_sum = 0.0;
  const int reps = 50;
  const Index n = 2000;
  for (int r = 0; r < reps; ++r) {
    const SimDraw d = lcp::gen_covariate_shift(n, rng);
    for (Index i = 0; i < n; ++i) {
      const double w = lcp::covariate_shift_weight(d.calib.x.row(i));
      w_sum += w;
      if (d.calib.x(i, 0) <= 2.0) wg_sum += w;
    }
    tx_sum += d.x_test[0];
  }
  const double phi_m1 = 0.15865525393145705;  // Phi(-1)
  CHECK(wg_sum / static_cast<double>(reps * n) ==
        doctest::Approx(phi_m1).epsilon(0.05));
  const double w_mean = w_sum / static_cast<double>(reps * n);
  CHECK(w_mean > 0.4);
  CHECK(w_mean < 2.5);
  CHECK(tx_sum / reps == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("high-dimensional generator keys its noise to the last coordinate") {
  auto rng = testor::make_rng(7030);
  for (char c : {'a', 'b'}) {
    const SimDraw d = lcp::gen_highdim(20000, 5, c, rng);
    std::vector<double> inner, outer;
    for (Index i = 0; i < d.calib.size(); ++i) {
      CHECK(d.calib.x.row(i).minCoeff() >= -3.0);
      CHECK(d.calib.x.row(i).maxCoeff() <= 3.0);
      const double resid =
          d.calib.y[i] - d.calib.x(i, 0) - d.calib.x(i, 1) - d.calib.x(i, 2);
      (std::abs(d.calib.x(i, 4)) <= 1.0 ? inner : outer).push_back(resid);
    }
    const double want_inner = c == 'a' ? 1.0 : 0.5;
    const double want_outer = c == 'a' ? 1.0 : 2.0;
    CHECK(sd_of(inner) == doctest::Approx(want_inner).epsilon(0.05));
    CHECK(sd_of(outer) == doctest::Approx(want_outer).epsilon(0.05));
  }
  CHECK_THROWS_AS(lcp::gen_highdim(100, 2, 'a', rng), std::invalid_argument);
  CHECK_THROWS_AS(lcp::gen_highdim(100, 5, 'x', rng), std::invalid_argument);
}

TEST_CASE("generator ids parse to the right draw routines") {
  auto rng = testor::make_rng(7040);
  const auto g1 = lcp::make_generator("example1b");
  CHECK(g1.id == "example1b");
  CHECK_FALSE(g1.shift_weight);
  CHECK(g1.draw(10, rng).calib.size() == 10);

  // The level parameter reshapes the mixture: at 0.9 the origin carries
  // 0.9/1.1 of the mass instead of 2/3.
  const auto g2 = lcp::make_generator("counterexample2:0.9");
  Index at_zero = 0;
  const Index n = 20000;
  const SimDraw d = g2.draw(n, rng);
  for (Index i = 0; i < n; ++i) at_zero += d.calib.x(i, 0) == 0.0;
  CHECK(static_cast<double>(at_zero) / n ==
        doctest::Approx(0.9 / 1.1).epsilon(0.02));

  const auto g3 = lcp::make_generator("covshift");
  CHECK(g3.shift_weight);
  const auto g4 = lcp::make_generator("highdim:b:7");
  CHECK(g4.draw(5, rng).calib.x.cols() == 7);
  // The design's score inverts the three-coordinate signal.
  Vector probe = Vector::Zero(7);
  probe[0] = 1.0;
  probe[1] = 2.0;
  probe[2] = 3.0;
  CHECK(lcp::eval_score(g4.score, probe, 10.0).value() == 4.0);

  CHECK_THROWS_AS(lcp::make_generator("example1d"), std::invalid_argument);
  CHECK_THROWS_AS(lcp::make_generator("highdim:c:5"), std::invalid_argument);
  CHECK_THROWS_AS(lcp::make_generator("counterexample2x"), std::invalid_argument);
}

TEST_CASE("method strings parse to their evaluation kinds") {
  CHECK(lcp::parse_method("cb").kind == MethodSpec::Kind::Split);
  CHECK(lcp::parse_method("wcb").kind == MethodSpec::Kind::WeightedSplit);

  const auto lcb = lcp::parse_method("lcb-box:1.5");
  CHECK(lcb.kind == MethodSpec::Kind::Lcp);
  CHECK(lcb.localizer.kind == lcp::LocalizerKind::DistanceBox);
  CHECK(lcb.localizer.h == 1.5);
  CHECK_FALSE(lcb.auto_tuned);

  const auto autod = lcp::parse_method("lcb-auto:knn");
  CHECK(autod.kind == MethodSpec::Kind::Lcp);
  CHECK(autod.localizer.kind == lcp::LocalizerKind::Knn);
  CHECK(autod.auto_tuned);

  const auto naive = lcp::parse_method("naive-box:1.5");
  CHECK(naive.kind == MethodSpec::Kind::NaiveLcp);

  const auto slcb = lcp::parse_method("slcb:450");
  CHECK(slcb.kind == MethodSpec::Kind::ShiftLcp);
  CHECK(slcb.localizer.kind == lcp::LocalizerKind::ShiftKnn);
  CHECK(slcb.localizer.h == 450.0);

  CHECK_THROWS_AS(lcp::parse_method("banana"), std::invalid_argument);
  CHECK_THROWS_AS(lcp::parse_method("lcb-box"), std::invalid_argument);
}

TEST_CASE("experiment tables are reproducible and shaped one row per method-level") {
  ExperimentConfig config;
  config.generator = "example1a";
  config.n = 40;
  config.repetitions = 5;
  config.alphas = {0.8, 0.9};
  config.methods = {"cb", "lcb-box:1"};
  config.seed = 404;
  const auto t1 = lcp::run_coverage_experiment(config);
  const auto t2 = lcp::run_coverage_experiment(config);
  CHECK(lcp::coverage_table_csv(t1) == lcp::coverage_table_csv(t2));
  REQUIRE(t1.rows.size() == 4);
  CHECK(t1.rows[0].method == "cb");
  CHECK(t1.rows[0].alpha == 0.8);
  CHECK(t1.rows[1].alpha == 0.9);
  CHECK(t1.rows[2].method == "lcb-box:1");
  CHECK(std::isnan(t1.rows[0].h));
  CHECK(t1.rows[2].h == 1.0);
  for (const auto& row : t1.rows) {
    CHECK(row.generator == "example1a");
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
  }

  config.repetitions = 1;
  const auto t3 = lcp::run_coverage_experiment(config);
  for (const auto& row : t3.rows) CHECK((row.coverage == 0.0 || row.coverage == 1.0));
}

TEST_CASE("starved calibration sets go fully infinite at extreme levels") {
  ExperimentConfig config;
  config.generator = "example1a";
  config.n = 5;
  config.repetitions = 20;
  config.alphas = {0.99};
  config.methods = {"cb", "lcb-box:1"};
  config.seed = 11;
  const auto t = lcp::run_coverage_experiment(config);
  for (const auto& row : t.rows) {
    CHECK(row.coverage == 1.0);
    CHECK(row.inf_frac == 1.0);
    CHECK(std::isinf(row.mean_width));
  }
  const std::string text = lcp::coverage_table_csv(t);
  CHECK(text.find(",inf,") != std::string::npos);
}

TEST_CASE("pooled conformal hits its level on homoscedastic draws") {
  ExperimentConfig config;
  config.generator = "example1a";
  config.n = 80;
  config.repetitions = 400;
  config.alphas = {0.8};
  config.methods = {"cb"};
  config.seed = 2024;
  const auto t = lcp::run_coverage_experiment(config);
  REQUIRE(t.rows.size() == 1);
  const auto& row = t.rows[0];
  CHECK(row.coverage >= 0.72);
  CHECK(row.coverage <= 0.88);
  CHECK(row.se ==
        std::sqrt(row.coverage * (1.0 - row.coverage) / 400.0));
  CHECK(row.inf_frac == 0.0);
  CHECK(row.mean_width > 0.0);
}

TEST_CASE("pinned-level box undercovers the three-point design; the search repairs it") {
  ExperimentConfig config;
  config.generator = "counterexample2:0.8";
  config.n = 800;
  config.repetitions = 300;
  config.alphas = {0.8};
  config.methods = {"naive-box:1.5", "lcb-box:1.5"};
  config.seed = 99;
  const auto t = lcp::run_coverage_experiment(config);
  REQUIRE(t.rows.size() == 2);
  const double naive = t.rows[0].coverage;
  const double searched = t.rows[1].coverage;
  // The pinned level drifts toward 2/3; the searched level restores >= 0.8
  // up to Monte Carlo noise.
  CHECK(naive >= 0.58);
  CHECK(naive <= 0.75);
  CHECK(searched >= 0.74);
  CHECK(searched >= naive + 0.05);
}

TEST_CASE("auto-tuned bandwidth lands on the offered grid and still covers") {
  ExperimentConfig config;
  config.generator = "example1a";
  config.n = 120;
  config.repetitions = 30;
  config.alphas = {0.8};
  config.methods = {"lcb-auto:box"};
  config.seed = 5;
  const auto t = lcp::run_coverage_experiment(config);
  REQUIRE(t.rows.size() == 1);
  const double h = t.rows[0].h;
  CHECK((h == 0.1 || h == 0.5 || h == 1.0 || h == 2.0));
  CHECK(t.rows[0].coverage >= 0.6);
}

TEST_CASE("shift methods run against the shifted design") {
  ExperimentConfig config;
  config.generator = "covshift";
  config.n = 100;
  config.repetitions = 100;
  config.alphas = {0.9};
  config.methods = {"wcb", "slcb:90"};
  config.seed = 31;
  const auto t = lcp::run_coverage_experiment(config);
  REQUIRE(t.rows.size() == 2);
  CHECK(std::isnan(t.rows[0].h));
  CHECK(t.rows[1].h == 90.0);
  for (const auto& row : t.rows) CHECK(row.coverage >= 0.8);

  // The pooled weighted method cannot run without a weight function.
  ExperimentConfig bad = config;
  bad.generator = "example1a";
  bad.repetitions = 2;
  const auto tb = lcp::run_coverage_experiment(bad);
  for (const auto& row : tb.rows) CHECK(std::isnan(row.coverage));
}

TEST_CASE("experiment tables serialize with the fixed column set") {
  ExperimentConfig config;
  config.generator = "example1a";
  config.n = 30;
  config.repetitions = 3;
  config.alphas = {0.85};
  config.methods = {"cb"};
  config.seed = 1;
  const std::string text =
      lcp::coverage_table_csv(lcp::run_coverage_experiment(config));
  std::istringstream in(text);
  const auto table = lcp::csv::read_table(in);
  CHECK(table.header ==
        std::vector<std::string>{"method", "alpha", "generator", "h", "coverage",
                                 "se", "mean_width", "inf_frac"});
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0][0] == "cb");
  CHECK(lcp::csv::parse_double(table.rows[0][1]) == 0.85);
  CHECK(std::isnan(lcp::csv::parse_double(table.rows[0][3])));
}

TEST_CASE("experiment configs are validated before any work") {
  ExperimentConfig config;
  config.repetitions = 0;
  CHECK_THROWS_AS(lcp::run_coverage_experiment(config), std::invalid_argument);
  config.repetitions = 1;
  config.alphas = {};
  CHECK_THROWS_AS(lcp::run_coverage_experiment(config), std::invalid_argument);
  config.alphas = {1.0};
  CHECK_THROWS_AS(lcp::run_coverage_experiment(config), std::invalid_argument);
  config.alphas = {0.8};
  config.methods = {};
  CHECK_THROWS_AS(lcp::run_coverage_experiment(config), std::invalid_argument);
  config.methods = {"cb"};
  config.generator = "nope";
  CHECK_THROWS_AS(lcp::run_coverage_experiment(config), std::invalid_argument);
}
