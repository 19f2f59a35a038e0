#pragma once

#include <array>
#include <string>
#include <vector>

#include "gliopipe/data_model.hpp"

namespace gliopipe::features {

constexpr int kFeatureCount = 17;

/// Fixed column order of the feature CSV.
const std::array<std::string, kFeatureCount>& feature_names();

/// Stable fingerprint of the feature ordering, embedded in survival models.
std::string feature_schema_fingerprint();

struct StatisticalFeatures {
  double edema_voxels = 0;
  double necrosis_voxels = 0;
  double enhancing_voxels = 0;
  double tumor_extent = 0;      // WT bounding-box volume / brain voxel count
  double tumor_proportion = 0;  // |WT| / brain voxel count
};

StatisticalFeatures statistical_features(const LabelMap& labels,
                                         const BinaryMask& brain_mask);

struct ShapeFeatures {
  double elongation = 0;
  double flatness = 0;
  double minor_axis_mm = 0;
  double major_axis_mm = 0;
  double diam2d_row_mm = 0;    // max in-plane diameter over fixed-row planes
  double diam2d_col_mm = 0;    // fixed-column planes
  double diam2d_slice_mm = 0;  // fixed-slice (axial) planes
  double diam3d_mm = 0;
  double sphericity = 0;
  double surface_area_mm2 = 0;
  double mesh_volume_mm3 = 0;
};

/// Principal-axis, diameter, surface and sphericity descriptors of the tumor
/// core mask (physical mm coordinates). Throws EmptyRegion on empty masks.
ShapeFeatures shape_features(const BinaryMask& tc_mask, const Spacing& spacing);

struct FeatureVector {
  std::string case_id;
  std::array<double, kFeatureCount> values{};
  bool empty_core = false;  // shape slots zero-filled
};

FeatureVector build_feature_vector(const LabelMap& labels, const BinaryMask& brain_mask,
                                   double age_years);

std::string features_to_csv(const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> features_from_csv(const std::string& path);

}  // namespace gliopipe::features
