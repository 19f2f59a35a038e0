#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gliopipe/errors.hpp"

namespace gliopipe {

using Dim3 = std::array<int, 3>;        // (nx, ny, nz), x fastest in memory
using Spacing = std::array<double, 3>;  // mm per voxel along x, y, z

inline std::size_t voxel_count(const Dim3& d) {
  return std::size_t(d[0]) * std::size_t(d[1]) * std::size_t(d[2]);
}

inline std::size_t flat_index(const Dim3& d, int x, int y, int z) {
  return std::size_t(x) + std::size_t(d[0]) * (std::size_t(y) + std::size_t(d[1]) * std::size_t(z));
}

/// 3D scalar grid in NIfTI memory order (x fastest, then y, then z).
struct Volume {
  Dim3 dim{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<float> data;

  float& at(int x, int y, int z) { return data[flat_index(dim, x, y, z)]; }
  float at(int x, int y, int z) const { return data[flat_index(dim, x, y, z)]; }
  std::size_t size() const { return data.size(); }
};

/// Binary voxel mask; values are 0 or 1.
struct BinaryMask {
  Dim3 dim{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int x, int y, int z) { return data[flat_index(dim, x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return data[flat_index(dim, x, y, z)]; }
  std::size_t size() const { return data.size(); }
};

inline Volume make_volume(const Dim3& dim, const Spacing& sp, float fill = 0.f) {
  Volume v;
  v.dim = dim;
  v.spacing = sp;
  v.data.assign(voxel_count(dim), fill);
  return v;
}

inline BinaryMask make_mask(const Dim3& dim, const Spacing& sp, std::uint8_t fill = 0) {
  BinaryMask m;
  m.dim = dim;
  m.spacing = sp;
  m.data.assign(voxel_count(dim), fill);
  return m;
}

/// 2D multi-channel feature map, laid out [channel][row][col].
struct FeatureMap {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  FeatureMap() = default;
  FeatureMap(int c_, int h_, int w_, float fill = 0.f)
      : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, fill) {}

  float& at(int ch, int y, int x) { return v[(std::size_t(ch) * h + y) * w + x]; }
  float at(int ch, int y, int x) const { return v[(std::size_t(ch) * h + y) * w + x]; }
  std::size_t plane() const { return std::size_t(h) * w; }
  std::size_t size() const { return v.size(); }
};

}  // namespace gliopipe
