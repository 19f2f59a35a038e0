#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gliopipe {

struct FocalParams {
  double alpha = 0.25;  // class-balance weight on positive voxels
  double gamma = 2.0;   // focusing exponent
};

enum class LossKind { Dice, Focal };

LossKind loss_from_name(const std::string& name);
const char* loss_name(LossKind k);

/// 1 - (2*sum(p*q) + eps) / (sum(p^2) + sum(q^2) + eps), eps = 1e-6.
/// Both-empty inputs give 0.
double soft_dice_loss(std::span<const float> pred, std::span<const std::uint8_t> target);

/// Gradient of soft_dice_loss with respect to pred.
std::vector<double> soft_dice_grad(std::span<const float> pred,
                                   std::span<const std::uint8_t> target);

/// Mean over voxels of -alpha_t * (1 - p_t)^gamma * log(p_t) with
/// p_t = p on positives and 1-p on negatives; p clamped to [1e-7, 1-1e-7].
double focal_loss(std::span<const float> pred, std::span<const std::uint8_t> target,
                  const FocalParams& params);

std::vector<double> focal_grad(std::span<const float> pred,
                               std::span<const std::uint8_t> target,
                               const FocalParams& params);

/// Unified entry point used by the trainer; writes the gradient into grad_out
/// when non-null.
double compute_loss(LossKind kind, const FocalParams& params,
                    std::span<const float> pred, std::span<const std::uint8_t> target,
                    std::vector<float>* grad_out);

}  // namespace gliopipe
