#pragma once

#include <vector>

#include "gliopipe/data_model.hpp"

namespace gliopipe {

/// Number of trailing axial slices dropped from every volume.
constexpr int kDroppedTopSlices = 10;

/// One 2D training sample: a 4-channel slice and its binary target.
struct SliceSample {
  FeatureMap image;           // 4 x H x W (rows = y, cols = x)
  std::vector<std::uint8_t> target;  // H*W binary
  std::string case_id;
  int slice_index = 0;
};

struct ZScoreResult {
  Volume volume;
  bool degenerate = false;  // sigma was zero over the region
};

/// Z-score normalization over the region voxels (mask, or nonzero voxels when
/// the mask is absent). Voxels outside the region are set to 0.
ZScoreResult zscore_normalize(const Volume& volume, const BinaryMask* mask = nullptr);

/// Normalizes all four modalities of a scan in place (per-volume statistics).
void normalize_scan(MultiModalScan& scan);

/// Axial slices 0..D-11 of a (normalized) scan with per-slice subregion
/// targets. Throws EmptyDataset when depth leaves nothing.
std::vector<SliceSample> extract_slices(const MultiModalScan& scan,
                                        const LabelMap& labels, SubregionId region);

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

/// Deterministic per-case split; |train| = round(fraction * N).
DatasetSplit split_dataset(std::vector<std::string> case_ids, double fraction,
                           std::uint64_t seed);

}  // namespace gliopipe
