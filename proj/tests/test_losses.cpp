#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gliopipe/errors.hpp"
#include "gliopipe/losses.hpp"

using namespace gliopipe;

namespace {

struct RandomCase {
  std::vector<float> pred;
  std::vector<std::uint8_t> target;
};

RandomCase random_case(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(0.02f, 0.98f);
  std::bernoulli_distribution b(0.3);
  RandomCase c;
  c.pred.resize(n);
  c.target.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.pred[i] = u(rng);
    c.target[i] = b(rng) ? 1 : 0;
  }
  return c;
}

// central finite difference in double precision against the measured float step
double fd_relative_error(LossKind kind, const FocalParams& fp, RandomCase c) {
  std::mt19937 idx_rng(std::uint32_t(c.pred.size()));
  double worst = 0;
  std::vector<float> grad;
  compute_loss(kind, fp, c.pred, c.target, &grad);
  for (std::size_t i = 0; i < c.pred.size(); i += 7) {
    const float orig = c.pred[i];
    const float hi = orig + 1e-4f;
    const float lo = orig - 1e-4f;
    c.pred[i] = hi;
    const double lp = compute_loss(kind, fp, c.pred, c.target, nullptr);
    c.pred[i] = lo;
    const double lm = compute_loss(kind, fp, c.pred, c.target, nullptr);
    c.pred[i] = orig;
    const double fd = (lp - lm) / (double(hi) - double(lo));
    const double denom = std::max(std::abs(fd), 1e-6);
    worst = std::max(worst, std::abs(fd - double(grad[i])) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("soft dice: hand-computed value 1 - 1/1.5") {
  std::vector<float> pred = {0.5f, 0.5f};
  std::vector<std::uint8_t> target = {1, 0};
  CHECK(soft_dice_loss(pred, target) == doctest::Approx(1.0 - 1.0 / 1.5).epsilon(1e-5));
}

TEST_CASE("soft dice: perfect binary agreement gives ~0, both-empty gives 0") {
  std::vector<float> pred = {1.f, 0.f, 1.f, 0.f};
  std::vector<std::uint8_t> target = {1, 0, 1, 0};
  CHECK(soft_dice_loss(pred, target) == doctest::Approx(0.0).epsilon(1e-5));

  std::vector<float> zeros(8, 0.f);
  std::vector<std::uint8_t> empty(8, 0);
  CHECK(soft_dice_loss(zeros, empty) == doctest::Approx(0.0));
}

TEST_CASE("soft dice: shape mismatch throws") {
  std::vector<float> pred = {0.5f};
  std::vector<std::uint8_t> target = {1, 0};
  CHECK_THROWS_AS(soft_dice_loss(pred, target), ShapeError);
}

TEST_CASE("soft dice decreases as positive predictions rise") {
  std::vector<std::uint8_t> target = {1, 1, 0, 0};
  double prev = 2.0;
  for (float p : {0.1f, 0.3f, 0.5f, 0.7f, 0.9f}) {
    std::vector<float> pred = {p, p, 0.f, 0.f};
    const double l = soft_dice_loss(pred, target);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("focal: single positive at p=0.5, alpha=1, gamma=0 is ln 2") {
  std::vector<float> pred = {0.5f};
  std::vector<std::uint8_t> target = {1};
  CHECK(focal_loss(pred, target, {1.0, 0.0}) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-6));
}

TEST_CASE("focal: single positive p=0.9, alpha=0.25, gamma=2") {
  std::vector<float> pred = {0.9f};
  std::vector<std::uint8_t> target = {1};
  const double expected = 0.25 * 0.01 * (-std::log(0.9));
  CHECK(focal_loss(pred, target, {0.25, 2.0}) ==
        doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("focal: perfect confidence drives loss to ~0") {
  std::vector<float> pred = {1.f, 0.f, 1.f};
  std::vector<std::uint8_t> target = {1, 0, 1};
  CHECK(focal_loss(pred, target, {}) < 1e-5);
}

TEST_CASE("focal with gamma=0 equals alpha-weighted cross-entropy within 1e-10") {
  std::mt19937 rng(21);
  for (int t = 0; t < 50; ++t) {
    const RandomCase c = random_case(rng, 64);
    const FocalParams fp{0.25, 0.0};
    const double fl = focal_loss(c.pred, c.target, fp);
    double ce = 0;
    for (std::size_t i = 0; i < c.pred.size(); ++i) {
      const double p = std::clamp(double(c.pred[i]), 1e-7, 1.0 - 1e-7);
      ce += c.target[i] ? -0.25 * std::log(p) : -0.75 * std::log(1.0 - p);
    }
    ce /= double(c.pred.size());
    CHECK(std::abs(fl - ce) < 1e-10);
  }
}

TEST_CASE("both losses are permutation invariant") {
  std::mt19937 rng(5);
  RandomCase c = random_case(rng, 64);
  const double d0 = soft_dice_loss(c.pred, c.target);
  const double f0 = focal_loss(c.pred, c.target, {});
  std::vector<std::size_t> perm(c.pred.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RandomCase p;
  for (std::size_t i : perm) {
    p.pred.push_back(c.pred[i]);
    p.target.push_back(c.target[i]);
  }
  CHECK(soft_dice_loss(p.pred, p.target) == doctest::Approx(d0).epsilon(1e-12));
  CHECK(focal_loss(p.pred, p.target, {}) == doctest::Approx(f0).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences (100 random 8x8)") {
  std::mt19937 rng(2024);
  for (int t = 0; t < 100; ++t) {
    const RandomCase c = random_case(rng, 64);
    CHECK(fd_relative_error(LossKind::Dice, {}, c) < 1e-4);
    CHECK(fd_relative_error(LossKind::Focal, {0.25, 2.0}, c) < 1e-4);
  }
}

TEST_CASE("gradient special cases: gamma=0 and gamma=1") {
  std::mt19937 rng(77);
  const RandomCase c = random_case(rng, 64);
  CHECK(fd_relative_error(LossKind::Focal, {0.5, 0.0}, c) < 1e-4);
  CHECK(fd_relative_error(LossKind::Focal, {0.5, 1.0}, c) < 1e-4);
}

TEST_CASE("loss selection by name") {
  CHECK(loss_from_name("dice") == LossKind::Dice);
  CHECK(loss_from_name("focal") == LossKind::Focal);
  CHECK_THROWS_AS(loss_from_name("hinge"), ConfigError);
}

TEST_CASE("compute_loss writes gradient of requested kind") {
  std::vector<float> pred = {0.3f, 0.7f};
  std::vector<std::uint8_t> target = {1, 0};
  std::vector<float> g1, g2;
  const double l1 = compute_loss(LossKind::Dice, {}, pred, target, &g1);
  const double l2 = compute_loss(LossKind::Focal, {}, pred, target, &g2);
  CHECK(l1 == doctest::Approx(soft_dice_loss(pred, target)));
  CHECK(l2 == doctest::Approx(focal_loss(pred, target, {})));
  CHECK(g1.size() == 2);
  CHECK(g2.size() == 2);
  CHECK(g1 != g2);
}
