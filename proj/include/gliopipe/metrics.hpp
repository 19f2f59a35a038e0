#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gliopipe/data_model.hpp"

namespace gliopipe::metrics {

/// 2|P∩G| / (|P|+|G|); both-empty pairs score 1.
double dice(const BinaryMask& pred, const BinaryMask& gt);

/// |P∩G| / |G|; empty ground truth scores 1 when the prediction is also empty.
double sensitivity(const BinaryMask& pred, const BinaryMask& gt);

/// 95th-percentile symmetric boundary distance in mm (6-connected boundaries,
/// exact Euclidean distances, linear-interpolation percentile). Both masks
/// empty gives 0; exactly one empty gives nullopt (excluded sentinel).
std::optional<double> hausdorff95(const BinaryMask& pred, const BinaryMask& gt);

struct RegionScores {
  double dice = 0.0;
  double sensitivity = 0.0;
  std::optional<double> hausdorff95;
};

struct CaseMetrics {
  std::string case_id;
  RegionScores wt, tc, et;
};

CaseMetrics evaluate_case(const LabelMap& pred, const LabelMap& gt);

struct Stats {
  double mean = 0.0, stddev = 0.0, median = 0.0, q25 = 0.0, q75 = 0.0;
  int n = 0;        // defined values aggregated
  int excluded = 0; // sentinel values dropped
};

/// Mean/StdDev/Median/25quantile/75quantile per metric x region, with
/// population standard deviation and interpolated quantiles.
struct SummaryTable {
  // index [metric][region]; metrics: dice, sensitivity, hausdorff95;
  // regions: ET, WT, TC (column order of the report)
  Stats cells[3][3];
  int n_cases = 0;
};

SummaryTable aggregate(const std::vector<CaseMetrics>& cases);

/// Linear-interpolation percentile of a sorted-or-not sample, q in [0,1].
double percentile(std::vector<double> values, double q);

std::string summary_to_csv(const SummaryTable& t);
std::string report_to_json(const std::vector<CaseMetrics>& cases, const SummaryTable& t);

}  // namespace gliopipe::metrics
