#pragma once

#include "gliopipe/config.hpp"
#include "gliopipe/manifest.hpp"
#include "gliopipe/metrics.hpp"

namespace gliopipe {

/// Pipeline stages. Each writes its artifacts atomically plus a manifest
/// recording config hash, seed, and input/output checksums.
namespace pipeline {

void run_preprocess(const PipelineConfig& cfg);
void run_train(const PipelineConfig& cfg);
void run_segment(const PipelineConfig& cfg);
void run_evaluate(const PipelineConfig& cfg);
void run_features(const PipelineConfig& cfg);
void run_survival_train(const PipelineConfig& cfg);
void run_survival_predict(const PipelineConfig& cfg);
void run_survival_eval(const PipelineConfig& cfg);
void run_report(const PipelineConfig& cfg);

/// Dispatch by stage name; throws ConfigError for unknown commands.
void run(const std::string& command, const PipelineConfig& cfg);

}  // namespace pipeline
}  // namespace gliopipe
