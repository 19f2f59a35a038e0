#pragma once

#include <cstdint>
#include <vector>

#include "gliopipe/volume.hpp"

namespace gliopipe::nn {

/// Same-size 2D convolution, stride 1, kernel k in {1,3}, zero padding.
/// Weights laid out [out_c][in_c][k][k], bias [out_c].
void conv_forward(const FeatureMap& x, const std::vector<float>& weight,
                  const std::vector<float>& bias, int out_c, int k, FeatureMap& y);

/// Accumulates parameter gradients into dweight/dbias and writes the input
/// gradient into dx.
void conv_backward(const FeatureMap& x, const std::vector<float>& weight, int out_c,
                   int k, const FeatureMap& dy, FeatureMap& dx,
                   std::vector<float>& dweight, std::vector<float>& dbias);

void relu_forward(const FeatureMap& x, FeatureMap& y);
void relu_backward(const FeatureMap& y, const FeatureMap& dy, FeatureMap& dx);

/// 2x2 max pooling, stride 2; argmax holds flat input indices for backward.
void maxpool2_forward(const FeatureMap& x, FeatureMap& y, std::vector<std::int32_t>& argmax);
void maxpool2_backward(const FeatureMap& dy, const std::vector<std::int32_t>& argmax,
                       int in_h, int in_w, FeatureMap& dx);

/// Nearest-neighbour 2x upsampling.
void upsample2_forward(const FeatureMap& x, FeatureMap& y);
void upsample2_backward(const FeatureMap& dy, FeatureMap& dx);

/// Channel concatenation of maps sharing spatial shape.
void concat_forward(const std::vector<const FeatureMap*>& xs, FeatureMap& y);
/// Splits dy back into per-input gradients (accumulating).
void concat_backward(const FeatureMap& dy, const std::vector<FeatureMap*>& dxs);

void sigmoid_forward(const FeatureMap& x, FeatureMap& y);
void sigmoid_backward(const FeatureMap& y, const FeatureMap& dy, FeatureMap& dx);

}  // namespace gliopipe::nn
