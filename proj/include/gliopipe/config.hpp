#pragma once

#include <array>
#include <string>

#include "gliopipe/data_model.hpp"
#include "gliopipe/network.hpp"
#include "gliopipe/survival.hpp"
#include "gliopipe/trainer.hpp"

namespace gliopipe {

/// One configuration file drives every stage; unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;

  struct Data {
    std::string cases_dir;
    std::string survival_csv;
    SurvivalColumns columns;
  } data;

  struct Preprocess {
    std::string out_dir;
  } preprocess;

  struct NetworkOpts {
    std::array<int, 3> encoder_maps = {64, 128, 256};
    int dense_block_depth = 3;
  } network;

  struct Train {
    std::string loss = "dice";
    FocalParams focal;
    int epochs = 50;
    int batch_size = 8;
    double learning_rate = 1e-4;
    double split_fraction = 0.75;
    int max_steps = 0;
    double target_train_dice = 0.0;
    std::string weights_dir;
  } train;

  struct Segment {
    std::string weights_dir;
    std::string out_dir;
  } segment;

  struct Evaluate {
    std::string pred_dir;
    std::string gt_dir;
    std::string out;  // JSON path; CSV written alongside
  } evaluate;

  struct Features {
    std::string pred_dir;  // empty: use ground-truth segmentations
    std::string out_csv;
  } features;

  struct Survival {
    int n_trees = 100;
    int min_leaf = 2;
    int max_depth = 0;
    double threshold_short = 300.0;
    double threshold_long = 450.0;
    std::string model_path;
    std::string pred_csv;
    std::string report_path;
    std::string mode = "resubstitution";  // or "holdout"
  } survival;

  struct Report {
    std::string out_dir;
  } report;

  CascadeConfig cascade_config() const;
  NetworkSpec network_spec(int height, int width) const;
  survival::ForestConfig forest_config() const;
  survival::ClassThresholds thresholds() const;
};

/// Parses and schema-validates a JSON config file.
PipelineConfig load_config(const std::string& path);

/// Checksum of the canonicalized config content.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace gliopipe
