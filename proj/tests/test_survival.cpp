#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "gliopipe/survival.hpp"

using namespace gliopipe;
using namespace gliopipe::survival;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<double>> random_X(std::mt19937& rng, int n, int f) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<std::vector<double>> X(n, std::vector<double>(f));
  for (auto& row : X)
    for (auto& v : row) v = u(rng);
  return X;
}

}  // namespace

TEST_CASE("classify: threshold semantics and monotonicity") {
  CHECK(classify(200) == SurvivalClass::Short);
  CHECK(classify(400) == SurvivalClass::Medium);
  CHECK(classify(500) == SurvivalClass::Long);
  CHECK(classify(300) == SurvivalClass::Medium);  // t1 <= days
  CHECK(classify(450) == SurvivalClass::Medium);  // days <= t2
  CHECK(classify(299.999) == SurvivalClass::Short);
  int prev = 0;
  for (double d = 0; d <= 1000; d += 7.3) {
    const int c = int(classify(d));
    CHECK(c >= prev);
    prev = c;
  }
  CHECK_THROWS_AS(classify(-1.0), InvalidInput);
  CHECK_THROWS_AS(classify(100.0, {500.0, 400.0}), InvalidInput);
}

TEST_CASE("filter_gtr keeps only GTR, evaluation also needs known days") {
  std::vector<SurvivalRecord> recs(4);
  recs[0] = {"a", 60, 400.0, ResectionStatus::GTR};
  recs[1] = {"b", 55, 300.0, ResectionStatus::STR};
  recs[2] = {"c", 70, std::nullopt, ResectionStatus::GTR};
  recs[3] = {"d", 50, 100.0, ResectionStatus::NA};
  const auto pred = filter_gtr(recs, false);
  REQUIRE(pred.size() == 2);
  CHECK(pred[0].case_id == "a");
  CHECK(pred[1].case_id == "c");
  const auto eval = filter_gtr(recs, true);
  REQUIRE(eval.size() == 1);
  CHECK(eval[0].case_id == "a");
  CHECK(filter_gtr({}).empty());
}

TEST_CASE("fit_rfr: constant target gives constant predictions") {
  std::mt19937 rng(1);
  const auto X = random_X(rng, 30, 5);
  const std::vector<double> y(30, 365.0);
  const ForestModel m = fit_rfr(X, y, {20, 2, 0, 7}, "fp");
  for (const auto& row : X) CHECK(m.predict(row) == doctest::Approx(365.0));
}

TEST_CASE("fit_rfr: deterministic step target reaches OOB R^2 > 0.9") {
  std::mt19937 rng(2);
  auto X = random_X(rng, 200, 4);
  std::vector<double> y(200);
  for (int i = 0; i < 200; ++i) y[i] = X[i][2] < 5.0 ? 100.0 : 600.0;
  const ForestModel m = fit_rfr(X, y, {100, 2, 0, 3}, "fp");
  CHECK(m.oob_r2 > 0.9);
}

TEST_CASE("fit_rfr determinism and error handling") {
  std::mt19937 rng(3);
  const auto X = random_X(rng, 40, 3);
  std::vector<double> y(40);
  for (int i = 0; i < 40; ++i) y[i] = 10.0 * X[i][0] + X[i][1];
  const ForestModel a = fit_rfr(X, y, {30, 2, 0, 5}, "fp");
  const ForestModel b = fit_rfr(X, y, {30, 2, 0, 5}, "fp");
  std::mt19937 rng2(4);
  for (const auto& probe : random_X(rng2, 10, 3))
    CHECK(a.predict(probe) == doctest::Approx(b.predict(probe)));

  CHECK_THROWS_AS(fit_rfr({{1.0}, {2.0}}, {1.0, 2.0}, {10, 2, 0, 0}, "fp"),
                  TooFewSamples);
  auto bad = X;
  bad[7][1] = std::nan("");
  try {
    fit_rfr(bad, y, {10, 2, 0, 0}, "fp");
    FAIL("expected InvalidFeature");
  } catch (const InvalidFeature& e) {
    CHECK(e.index == 1);
  }
}

TEST_CASE("forest predictions stay within the training target range") {
  std::mt19937 rng(5);
  const auto X = random_X(rng, 60, 4);
  std::vector<double> y(60);
  std::uniform_real_distribution<double> u(50.0, 900.0);
  for (auto& v : y) v = u(rng);
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  const ForestModel m = fit_rfr(X, y, {40, 2, 0, 6}, "fp");
  for (const auto& probe : random_X(rng, 25, 4)) {
    const double p = m.predict(probe);
    CHECK(p >= lo - 1e-9);
    CHECK(p <= hi + 1e-9);
  }
}

TEST_CASE("single-tree forest predicts that tree's leaf; duplicated tree shifts the mean") {
  std::mt19937 rng(6);
  const auto X = random_X(rng, 20, 3);
  std::vector<double> y(20);
  for (int i = 0; i < 20; ++i) y[i] = 30.0 * X[i][0];
  ForestModel m = fit_rfr(X, y, {1, 2, 0, 9}, "fp");
  REQUIRE(m.trees.size() == 1);
  const std::vector<double> probe = {5.0, 5.0, 5.0};
  CHECK(m.predict(probe) == doctest::Approx(std::max(0.0, m.trees[0].predict(probe))));

  ForestModel two = fit_rfr(X, y, {2, 2, 0, 9}, "fp");
  const double t0 = two.trees[0].predict(probe), t1 = two.trees[1].predict(probe);
  CHECK(two.predict(probe) == doctest::Approx(std::max(0.0, (t0 + t1) / 2.0)));
  // tree order must not matter
  std::swap(two.trees[0], two.trees[1]);
  CHECK(two.predict(probe) == doctest::Approx(std::max(0.0, (t0 + t1) / 2.0)));
}

TEST_CASE("predict_days enforces the feature schema") {
  std::mt19937 rng(7);
  const auto X = random_X(rng, 20, 3);
  const std::vector<double> y(20, 200.0);
  const ForestModel m = fit_rfr(X, y, {5, 2, 0, 1}, "schema_v1");
  CHECK(predict_days(m, {1.0, 2.0, 3.0}, "schema_v1") == doctest::Approx(200.0));
  CHECK_THROWS_AS(predict_days(m, {1.0, 2.0, 3.0}, "other"), FeatureSchemaMismatch);
  CHECK_THROWS_AS(predict_days(m, {1.0}, "schema_v1"), FeatureSchemaMismatch);
}

TEST_CASE("model save/load roundtrip preserves predictions") {
  std::mt19937 rng(8);
  const auto X = random_X(rng, 50, 4);
  std::vector<double> y(50);
  for (int i = 0; i < 50; ++i) y[i] = 40.0 * X[i][1] + 7.0 * X[i][3];
  const ForestModel m = fit_rfr(X, y, {25, 2, 0, 11}, "fp_rt");
  const fs::path p = fs::temp_directory_path() / "gliopipe_forest.json";
  save_model(m, p.string());
  const ForestModel r = load_model(p.string());
  CHECK(r.feature_fingerprint == "fp_rt");
  CHECK(r.oob_r2 == doctest::Approx(m.oob_r2));
  CHECK(r.trees.size() == m.trees.size());
  for (const auto& probe : random_X(rng, 10, 4))
    CHECK(r.predict(probe) == doctest::Approx(m.predict(probe)));
}

TEST_CASE("spearman: exact agreement, reversal, monotone transform, ties") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(spearman(x, x) == doctest::Approx(1.0));
  CHECK(spearman(x, {5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  // monotone transform invariance on positive values
  std::vector<double> sq;
  for (double v : x) sq.push_back(v * v);
  CHECK(spearman(x, sq) == doctest::Approx(1.0));
  // hand-checked tie case: average ranks
  const std::vector<double> a = {1, 2, 2, 4};
  const std::vector<double> b = {10, 20, 30, 40};
  // ranks of a: 1, 2.5, 2.5, 4 vs 1,2,3,4 -> r = 0.9486832980505138
  CHECK(spearman(a, b) == doctest::Approx(0.9486832980505138).epsilon(1e-12));
  // degenerate: constant input
  CHECK(spearman({3, 3, 3}, {1, 2, 3}) == doctest::Approx(0.0));
}

TEST_CASE("evaluate_os: perfect predictions and hand-computed errors") {
  const std::vector<double> t = {100, 350, 500, 800};
  const OSReport perfect = evaluate_os(t, t);
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.mse == doctest::Approx(0.0));
  CHECK(perfect.medianse == doctest::Approx(0.0));
  CHECK(perfect.stdse == doctest::Approx(0.0));
  CHECK(perfect.spearmanr == doctest::Approx(1.0));
  CHECK(perfect.n_cases == 4);

  const std::vector<double> p = {110, 340, 510, 790};  // errors 10^2 each
  const OSReport r = evaluate_os(p, t);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.mse == doctest::Approx(100.0));
  CHECK(r.medianse == doctest::Approx(100.0));
  CHECK(r.stdse == doctest::Approx(0.0));
  CHECK(r.spearmanr == doctest::Approx(1.0));
}

TEST_CASE("evaluate_os: rank reversal and permutation equivariance") {
  const std::vector<double> t = {100, 200, 300, 400};
  const std::vector<double> p = {400, 300, 200, 100};
  CHECK(evaluate_os(p, t).spearmanr == doctest::Approx(-1.0));

  const std::vector<double> t2 = {400, 100, 300, 200};
  const std::vector<double> p2 = {100, 400, 200, 300};
  const OSReport a = evaluate_os(p, t);
  const OSReport b = evaluate_os(p2, t2);
  CHECK(a.accuracy == doctest::Approx(b.accuracy));
  CHECK(a.mse == doctest::Approx(b.mse));
  CHECK(a.medianse == doctest::Approx(b.medianse));
  CHECK(a.spearmanr == doctest::Approx(b.spearmanr));
}

TEST_CASE("evaluate_os input validation") {
  CHECK_THROWS_AS(evaluate_os({1.0}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(evaluate_os({1.0}, {1.0}), ShapeError);  // needs >= 2
}

TEST_CASE("os report json names the Table-5 fields and the mode") {
  OSReport r;
  r.accuracy = 0.5;
  r.mse = 123.0;
  r.medianse = 50.0;
  r.stdse = 10.0;
  r.spearmanr = 0.4;
  r.n_cases = 8;
  const std::string j = os_report_to_json(r, "resubstitution");
  for (const char* key : {"accuracy", "mse", "medianse", "stdse", "spearmanr", "mode"})
    CHECK(j.find(key) != std::string::npos);
  CHECK(j.find("resubstitution") != std::string::npos);
}
