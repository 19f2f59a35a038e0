#include "gliopipe/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gliopipe {

ZScoreResult zscore_normalize(const Volume& volume, const BinaryMask* mask) {
  if (mask && mask->dim != volume.dim)
    throw ShapeError("mask shape does not match volume");
  for (float x : volume.data)
    if (!std::isfinite(x)) throw InvalidInput("non-finite voxel in volume");

  auto in_region = [&](std::size_t i) {
    return mask ? mask->data[i] != 0 : volume.data[i] != 0.f;
  };

  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < volume.data.size(); ++i) {
    if (!in_region(i)) continue;
    sum += volume.data[i];
    sum2 += double(volume.data[i]) * volume.data[i];
    ++n;
  }

  ZScoreResult res;
  res.volume = volume;
  if (n == 0) {
    std::fill(res.volume.data.begin(), res.volume.data.end(), 0.f);
    res.degenerate = true;
    return res;
  }

  const double mu = sum / double(n);
  const double var = std::max(0.0, sum2 / double(n) - mu * mu);
  const double sigma = std::sqrt(var);
  const double eps = 1e-8;
  res.degenerate = sigma == 0.0;

  for (std::size_t i = 0; i < volume.data.size(); ++i)
    res.volume.data[i] =
        in_region(i) ? float((volume.data[i] - mu) / (sigma + eps)) : 0.f;
  return res;
}

void normalize_scan(MultiModalScan& scan) {
  for (auto& vol : scan.volumes) vol = zscore_normalize(vol).volume;
}

std::vector<SliceSample> extract_slices(const MultiModalScan& scan,
                                        const LabelMap& labels, SubregionId region) {
  if (labels.dim != scan.dim) throw ShapeMismatch("labels do not match scan shape");
  const int depth = scan.dim[2];
  if (depth <= kDroppedTopSlices) throw EmptyDataset("volume depth too small");

  const int h = scan.dim[1], w = scan.dim[0];
  std::vector<SliceSample> out;
  out.reserve(std::size_t(depth - kDroppedTopSlices));

  for (int z = 0; z < depth - kDroppedTopSlices; ++z) {
    SliceSample s;
    s.case_id = scan.case_id;
    s.slice_index = z;
    s.image = FeatureMap(4, h, w);
    for (int m = 0; m < 4; ++m) {
      const float* plane = scan.volumes[m].data.data() + flat_index(scan.dim, 0, 0, z);
      std::copy(plane, plane + std::size_t(h) * w, s.image.v.begin() + std::size_t(m) * h * w);
    }
    s.target.resize(std::size_t(h) * w);
    const std::uint8_t* lplane = labels.grid.data() + flat_index(labels.dim, 0, 0, z);
    for (std::size_t i = 0; i < s.target.size(); ++i)
      s.target[i] = label_in_subregion(lplane[i], region) ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<std::string> case_ids, double fraction,
                           std::uint64_t seed) {
  if (case_ids.size() < 2) throw TooFewCases("need at least 2 cases to split");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidInput("split fraction must be in (0,1)");

  std::sort(case_ids.begin(), case_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(case_ids.begin(), case_ids.end(), rng);

  std::size_t n_train = std::size_t(std::lround(fraction * double(case_ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, case_ids.size() - 1);

  DatasetSplit split;
  split.train_ids.assign(case_ids.begin(), case_ids.begin() + n_train);
  split.val_ids.assign(case_ids.begin() + n_train, case_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  return split;
}

}  // namespace gliopipe
