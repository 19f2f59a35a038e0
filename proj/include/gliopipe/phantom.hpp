#pragma once

#include <string>

#include "gliopipe/data_model.hpp"

namespace gliopipe::phantom {

struct PhantomOptions {
  int n_cases = 4;
  Dim3 dim = {64, 64, 32};
  Spacing spacing = {1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;
};

struct PhantomCase {
  MultiModalScan scan;
  LabelMap labels;
  double age = 0;
  double survival_days = 0;
};

/// Synthetic case: ellipsoidal brain with a nested ellipsoidal tumor
/// (ET core, NCR shell, ED rim) and modality-specific contrast so each
/// subregion is learnable from intensities.
PhantomCase make_phantom_case(const std::string& case_id, const PhantomOptions& opts,
                              std::uint64_t case_seed);

/// Writes n_cases phantom cases in the directory-per-case layout plus a
/// survival metadata CSV at <root>/survival.csv.
void write_phantom_dataset(const std::string& root, const PhantomOptions& opts);

}  // namespace gliopipe::phantom
