#pragma once

#include <string>

#include "gliopipe/volume.hpp"

namespace gliopipe::nifti {

/// Reads a single-file NIfTI-1 volume (.nii or .nii.gz). Values are converted
/// to float with scl_slope/scl_inter applied; spacing comes from pixdim and
/// falls back to 1 mm where the header gives no positive value.
Volume read_volume(const std::string& path);

/// Writes a float32 single-file NIfTI-1 volume. Gzip-compressed when the
/// path ends in .gz.
void write_volume(const std::string& path, const Volume& v);

/// Writes a uint8 label volume (values fit the BraTS label alphabet).
void write_labels(const std::string& path, const Dim3& dim, const Spacing& sp,
                  const std::vector<std::uint8_t>& labels);

}  // namespace gliopipe::nifti
