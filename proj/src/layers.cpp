#include "gliopipe/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace gliopipe::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// spatial positions per GEMM chunk; bounds transient im2col memory
constexpr int kChunk = 16384;

// Column block for positions [p0, p1): rows = in_c*9, one column per position.
void im2col3(const FeatureMap& x, int p0, int p1, float* col) {
  const int h = x.h, w = x.w, len = p1 - p0;
  for (int ci = 0; ci < x.c; ++ci) {
    const float* src = x.v.data() + std::size_t(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* row = col + (std::size_t(ci) * 9 + ky * 3 + kx) * len;
        for (int p = p0; p < p1; ++p) {
          const int y = p / w + ky - 1;
          const int xx = p % w + kx - 1;
          row[p - p0] =
              (unsigned(y) < unsigned(h) && unsigned(xx) < unsigned(w)) ? src[y * w + xx] : 0.f;
        }
      }
    }
  }
}

// Scatter-add of a column block back onto the input gradient.
void col2im3(const float* col, int p0, int p1, FeatureMap& dx) {
  const int h = dx.h, w = dx.w, len = p1 - p0;
  for (int ci = 0; ci < dx.c; ++ci) {
    float* dst = dx.v.data() + std::size_t(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* row = col + (std::size_t(ci) * 9 + ky * 3 + kx) * len;
        for (int p = p0; p < p1; ++p) {
          const int y = p / w + ky - 1;
          const int xx = p % w + kx - 1;
          if (unsigned(y) < unsigned(h) && unsigned(xx) < unsigned(w))
            dst[y * w + xx] += row[p - p0];
        }
      }
    }
  }
}

}  // namespace

void conv_forward(const FeatureMap& x, const std::vector<float>& weight,
                  const std::vector<float>& bias, int out_c, int k, FeatureMap& y) {
  const int hw = x.h * x.w;
  y = FeatureMap(out_c, x.h, x.w);
  CMapRM W(weight.data(), out_c, x.c * k * k);
  MapRM Y(y.v.data(), out_c, hw);

  if (k == 1) {
    CMapRM X(x.v.data(), x.c, hw);
    Y.noalias() = W * X;
  } else {
    std::vector<float> col(std::size_t(x.c) * 9 * std::min(hw, kChunk));
    for (int p0 = 0; p0 < hw; p0 += kChunk) {
      const int p1 = std::min(hw, p0 + kChunk);
      im2col3(x, p0, p1, col.data());
      CMapRM C(col.data(), x.c * 9, p1 - p0);
      Y.middleCols(p0, p1 - p0).noalias() = W * C;
    }
  }
  for (int oc = 0; oc < out_c; ++oc) Y.row(oc).array() += bias[oc];
}

void conv_backward(const FeatureMap& x, const std::vector<float>& weight, int out_c,
                   int k, const FeatureMap& dy, FeatureMap& dx,
                   std::vector<float>& dweight, std::vector<float>& dbias) {
  const int hw = x.h * x.w;
  dx = FeatureMap(x.c, x.h, x.w);
  CMapRM W(weight.data(), out_c, x.c * k * k);
  CMapRM dY(dy.v.data(), out_c, hw);
  MapRM dW(dweight.data(), out_c, x.c * k * k);

  // fixed-order scalar reduction: Eigen's vectorized sum() peels by pointer
  // alignment, which makes the rounding depend on the buffer address
  for (int oc = 0; oc < out_c; ++oc) {
    const float* row = dy.v.data() + std::size_t(oc) * hw;
    double s = 0.0;
    for (int i = 0; i < hw; ++i) s += row[i];
    dbias[oc] += float(s);
  }

  if (k == 1) {
    CMapRM X(x.v.data(), x.c, hw);
    MapRM dX(dx.v.data(), x.c, hw);
    dW.noalias() += dY * X.transpose();
    dX.noalias() = W.transpose() * dY;
  } else {
    std::vector<float> col(std::size_t(x.c) * 9 * std::min(hw, kChunk));
    std::vector<float> dcol(col.size());
    for (int p0 = 0; p0 < hw; p0 += kChunk) {
      const int p1 = std::min(hw, p0 + kChunk);
      im2col3(x, p0, p1, col.data());
      CMapRM C(col.data(), x.c * 9, p1 - p0);
      MapRM dC(dcol.data(), x.c * 9, p1 - p0);
      dW.noalias() += dY.middleCols(p0, p1 - p0) * C.transpose();
      dC.noalias() = W.transpose() * dY.middleCols(p0, p1 - p0);
      col2im3(dcol.data(), p0, p1, dx);
    }
  }
}

void relu_forward(const FeatureMap& x, FeatureMap& y) {
  y = FeatureMap(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > 0.f ? x.v[i] : 0.f;
}

void relu_backward(const FeatureMap& y, const FeatureMap& dy, FeatureMap& dx) {
  dx = FeatureMap(y.c, y.h, y.w);
  for (std::size_t i = 0; i < y.v.size(); ++i) dx.v[i] = y.v[i] > 0.f ? dy.v[i] : 0.f;
}

void maxpool2_forward(const FeatureMap& x, FeatureMap& y, std::vector<std::int32_t>& argmax) {
  if (x.h % 2 || x.w % 2) throw ShapeError("maxpool2 needs even spatial dims");
  const int oh = x.h / 2, ow = x.w / 2;
  y = FeatureMap(x.c, oh, ow);
  argmax.assign(y.v.size(), 0);
  for (int c = 0; c < x.c; ++c) {
    const float* src = x.v.data() + std::size_t(c) * x.h * x.w;
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        int best = (2 * yy) * x.w + 2 * xx;
        for (int dy2 = 0; dy2 < 2; ++dy2)
          for (int dx2 = 0; dx2 < 2; ++dx2) {
            const int idx = (2 * yy + dy2) * x.w + (2 * xx + dx2);
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = (std::size_t(c) * oh + yy) * ow + xx;
        y.v[o] = src[best];
        argmax[o] = best;
      }
  }
}

void maxpool2_backward(const FeatureMap& dy, const std::vector<std::int32_t>& argmax,
                       int in_h, int in_w, FeatureMap& dx) {
  dx = FeatureMap(dy.c, in_h, in_w);
  for (int c = 0; c < dy.c; ++c) {
    float* dst = dx.v.data() + std::size_t(c) * in_h * in_w;
    const std::size_t base = std::size_t(c) * dy.h * dy.w;
    for (std::size_t i = 0; i < std::size_t(dy.h) * dy.w; ++i)
      dst[argmax[base + i]] += dy.v[base + i];
  }
}

void upsample2_forward(const FeatureMap& x, FeatureMap& y) {
  y = FeatureMap(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int yy = 0; yy < y.h; ++yy) {
      const float* src = &x.v[(std::size_t(c) * x.h + yy / 2) * x.w];
      float* dst = &y.v[(std::size_t(c) * y.h + yy) * y.w];
      for (int xx = 0; xx < y.w; ++xx) dst[xx] = src[xx / 2];
    }
}

void upsample2_backward(const FeatureMap& dy, FeatureMap& dx) {
  dx = FeatureMap(dy.c, dy.h / 2, dy.w / 2);
  for (int c = 0; c < dy.c; ++c)
    for (int yy = 0; yy < dy.h; ++yy) {
      const float* src = &dy.v[(std::size_t(c) * dy.h + yy) * dy.w];
      float* dst = &dx.v[(std::size_t(c) * dx.h + yy / 2) * dx.w];
      for (int xx = 0; xx < dy.w; ++xx) dst[xx / 2] += src[xx];
    }
}

void concat_forward(const std::vector<const FeatureMap*>& xs, FeatureMap& y) {
  int total_c = 0;
  for (const auto* x : xs) {
    if (x->h != xs[0]->h || x->w != xs[0]->w)
      throw ShapeError("concat inputs disagree on spatial shape");
    total_c += x->c;
  }
  y = FeatureMap(total_c, xs[0]->h, xs[0]->w);
  std::size_t off = 0;
  for (const auto* x : xs) {
    std::copy(x->v.begin(), x->v.end(), y.v.begin() + off);
    off += x->v.size();
  }
}

void concat_backward(const FeatureMap& dy, const std::vector<FeatureMap*>& dxs) {
  std::size_t off = 0;
  for (auto* dx : dxs) {
    for (std::size_t i = 0; i < dx->v.size(); ++i) dx->v[i] += dy.v[off + i];
    off += dx->v.size();
  }
}

void sigmoid_forward(const FeatureMap& x, FeatureMap& y) {
  y = FeatureMap(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = 1.f / (1.f + std::exp(-x.v[i]));
}

void sigmoid_backward(const FeatureMap& y, const FeatureMap& dy, FeatureMap& dx) {
  dx = FeatureMap(y.c, y.h, y.w);
  for (std::size_t i = 0; i < y.v.size(); ++i) dx.v[i] = dy.v[i] * y.v[i] * (1.f - y.v[i]);
}

}  // namespace gliopipe::nn
