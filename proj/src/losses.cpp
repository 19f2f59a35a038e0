#include "gliopipe/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gliopipe/errors.hpp"

namespace gliopipe {

namespace {
constexpr double kDiceEps = 1e-6;
constexpr double kProbClamp = 1e-7;

void check_shapes(std::size_t np, std::size_t nt) {
  if (np != nt) throw ShapeError("pred/target size mismatch");
  if (np == 0) throw ShapeError("empty tensors");
}
}  // namespace

LossKind loss_from_name(const std::string& name) {
  if (name == "dice") return LossKind::Dice;
  if (name == "focal") return LossKind::Focal;
  throw ConfigError("unknown loss '" + name + "' (expected dice|focal)");
}

const char* loss_name(LossKind k) { return k == LossKind::Dice ? "dice" : "focal"; }

double soft_dice_loss(std::span<const float> pred, std::span<const std::uint8_t> target) {
  check_shapes(pred.size(), target.size());
  double inter = 0.0, p2 = 0.0, q2 = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    const double q = target[i];
    inter += p * q;
    p2 += p * p;
    q2 += q;  // q is binary, q^2 == q
  }
  return 1.0 - (2.0 * inter + kDiceEps) / (p2 + q2 + kDiceEps);
}

std::vector<double> soft_dice_grad(std::span<const float> pred,
                                   std::span<const std::uint8_t> target) {
  check_shapes(pred.size(), target.size());
  double inter = 0.0, p2 = 0.0, q2 = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += double(pred[i]) * target[i];
    p2 += double(pred[i]) * pred[i];
    q2 += target[i];
  }
  const double num = 2.0 * inter + kDiceEps;
  const double den = p2 + q2 + kDiceEps;

  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    // d/dp_i [1 - num/den] = -(2*q_i*den - num*2*p_i) / den^2
    g[i] = -(2.0 * target[i] * den - num * 2.0 * pred[i]) / (den * den);
  }
  return g;
}

double focal_loss(std::span<const float> pred, std::span<const std::uint8_t> target,
                  const FocalParams& params) {
  check_shapes(pred.size(), target.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(double(pred[i]), kProbClamp, 1.0 - kProbClamp);
    const double pt = target[i] ? p : 1.0 - p;
    const double at = target[i] ? params.alpha : 1.0 - params.alpha;
    const double mod = params.gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, params.gamma);
    total += -at * mod * std::log(pt);
  }
  return total / double(pred.size());
}

std::vector<double> focal_grad(std::span<const float> pred,
                               std::span<const std::uint8_t> target,
                               const FocalParams& params) {
  check_shapes(pred.size(), target.size());
  const double inv_n = 1.0 / double(pred.size());
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(double(pred[i]), kProbClamp, 1.0 - kProbClamp);
    const double pt = target[i] ? p : 1.0 - p;
    const double at = target[i] ? params.alpha : 1.0 - params.alpha;
    // d/dpt of -at*(1-pt)^g*log(pt), then chain dpt/dp = +1 or -1
    double dpt;
    if (params.gamma == 0.0) {
      dpt = -at / pt;
    } else {
      dpt = at * (params.gamma * std::pow(1.0 - pt, params.gamma - 1.0) * std::log(pt) -
                  std::pow(1.0 - pt, params.gamma) / pt);
    }
    g[i] = (target[i] ? dpt : -dpt) * inv_n;
  }
  return g;
}

double compute_loss(LossKind kind, const FocalParams& params,
                    std::span<const float> pred, std::span<const std::uint8_t> target,
                    std::vector<float>* grad_out) {
  double loss;
  std::vector<double> g;
  if (kind == LossKind::Dice) {
    loss = soft_dice_loss(pred, target);
    if (grad_out) g = soft_dice_grad(pred, target);
  } else {
    loss = focal_loss(pred, target, params);
    if (grad_out) g = focal_grad(pred, target, params);
  }
  if (grad_out) {
    grad_out->resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) (*grad_out)[i] = float(g[i]);
  }
  return loss;
}

}  // namespace gliopipe
