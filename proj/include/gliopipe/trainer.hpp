#pragma once

#include <map>
#include <optional>
#include <utility>

#include "gliopipe/losses.hpp"
#include "gliopipe/network.hpp"
#include "gliopipe/preprocess.hpp"

namespace gliopipe {

struct CascadeConfig {
  LossKind loss = LossKind::Dice;
  FocalParams focal;
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  double split_fraction = 0.75;
  int max_steps = 0;              // optional cap on optimizer steps (0 = none)
  double target_train_dice = 0.0; // early stop once training DSC reaches this
};

struct TrainReport {
  std::vector<double> train_loss;  // one entry per completed epoch
  std::vector<double> val_loss;
  std::vector<double> train_dice;  // filled only when target_train_dice > 0
  int steps = 0;
  int best_epoch = -1;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct StageData {
  std::vector<SliceSample> train;
  std::vector<SliceSample> val;
};

/// Mini-batch Adam over the slice set; returns best-validation-loss weights.
/// epochs == 0 returns the initialization unchanged.
std::pair<WeightSet, TrainReport> train_stage(SubregionId region, const StageData& data,
                                              const std::optional<WeightSet>& init,
                                              const NetworkSpec& nspec,
                                              const CascadeConfig& cfg);

/// Mean loss of a weight set over a slice list (no parameter updates).
double evaluate_loss(const Network& net, const std::vector<SliceSample>& slices,
                     LossKind loss, const FocalParams& focal);

struct CasePair {
  MultiModalScan scan;  // normalized before training
  LabelMap labels;
};

struct CascadeResult {
  std::map<SubregionId, WeightSet> weights;   // WT, NCR, ED, ET
  std::map<SubregionId, TrainReport> reports;
};

/// Whole-tumor stage from scratch, then NCR/ED/ET initialized from the WT
/// weights. Scans are z-score normalized in place.
CascadeResult run_cascade(const CascadeConfig& cfg, const NetworkSpec& nspec,
                          std::vector<CasePair>& cases);

/// ET > NCR > ED merge priority.
LabelMap merge_subregion_masks(const BinaryMask& ncr, const BinaryMask& ed,
                               const BinaryMask& et);

/// Per-slice inference with the three subregion networks (order NCR, ED, ET),
/// threshold 0.5, merged into one label volume. The scan must already be
/// normalized; the dropped top slices come out as background.
LabelMap segment_volume(const std::array<const Network*, 3>& nets,
                        const MultiModalScan& scan);

}  // namespace gliopipe
