#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gliopipe/data_model.hpp"

namespace gliopipe::survival {

enum class SurvivalClass { Short = 0, Medium = 1, Long = 2 };

struct ClassThresholds {
  double t1 = 300.0;  // days; short below t1
  double t2 = 450.0;  // long above t2
};

SurvivalClass classify(double days, const ClassThresholds& thr = {});

struct ForestConfig {
  int n_trees = 100;
  int min_leaf = 2;
  int max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;      // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double value = 0;      // leaf mean
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const std::vector<double>& x) const;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestConfig config;
  std::string feature_fingerprint;
  double oob_r2 = 0.0;
  int n_features = 0;

  double predict(const std::vector<double>& x) const;  // clamped at 0
};

/// Bootstrap-aggregated regression trees with sqrt-feature subsetting per
/// split; reports out-of-bag R^2.
ForestModel fit_rfr(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const ForestConfig& cfg,
                    const std::string& feature_fingerprint);

double predict_days(const ForestModel& model, const std::vector<double>& x,
                    const std::string& feature_fingerprint);

void save_model(const ForestModel& model, const std::string& path);
ForestModel load_model(const std::string& path);

/// Keeps GTR records; for_evaluation additionally requires known survival.
std::vector<SurvivalRecord> filter_gtr(const std::vector<SurvivalRecord>& records,
                                       bool for_evaluation = false);

struct OSReport {
  double accuracy = 0;
  double mse = 0;
  double medianse = 0;
  double stdse = 0;  // population std of squared errors
  double spearmanr = 0;
  int n_cases = 0;
};

OSReport evaluate_os(const std::vector<double>& pred_days,
                     const std::vector<double>& true_days,
                     const ClassThresholds& thr = {});

/// Spearman rank correlation with average-rank tie handling.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

std::string os_report_to_json(const OSReport& r, const std::string& mode);

}  // namespace gliopipe::survival
