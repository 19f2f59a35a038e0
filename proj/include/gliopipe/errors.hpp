#pragma once

#include <stdexcept>
#include <string>

namespace gliopipe {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : PipelineError {
  using PipelineError::PipelineError;
};

struct MissingModality : PipelineError {
  using PipelineError::PipelineError;
};

struct ShapeMismatch : PipelineError {
  using PipelineError::PipelineError;
};

// raised on tensor/mask shape disagreements inside compute kernels
struct ShapeError : PipelineError {
  using PipelineError::PipelineError;
};

struct InvalidLabel : PipelineError {
  int value;
  std::size_t count;
  InvalidLabel(int v, std::size_t n)
      : PipelineError("invalid label value " + std::to_string(v) + " at " +
                      std::to_string(n) + " voxel(s)"),
        value(v), count(n) {}
};

struct ParseError : PipelineError {
  std::size_t line;
  ParseError(std::size_t ln, const std::string& what)
      : PipelineError("parse error at line " + std::to_string(ln) + ": " + what),
        line(ln) {}
};

struct EmptyDataset : PipelineError {
  using PipelineError::PipelineError;
};

struct TooFewCases : PipelineError {
  using PipelineError::PipelineError;
};

struct IncompatibleWeights : PipelineError {
  using PipelineError::PipelineError;
};

struct TrainingDiverged : PipelineError {
  int epoch;
  explicit TrainingDiverged(int ep)
      : PipelineError("training diverged (non-finite loss) at epoch " +
                      std::to_string(ep)),
        epoch(ep) {}
};

struct ConfigError : PipelineError {
  using PipelineError::PipelineError;
};

struct StageDependencyError : PipelineError {
  using PipelineError::PipelineError;
};

struct EmptyBrainMask : PipelineError {
  using PipelineError::PipelineError;
};

struct EmptyRegion : PipelineError {
  using PipelineError::PipelineError;
};

struct TooFewSamples : PipelineError {
  using PipelineError::PipelineError;
};

struct InvalidFeature : PipelineError {
  int index;
  explicit InvalidFeature(int idx)
      : PipelineError("non-finite value in feature column " + std::to_string(idx)),
        index(idx) {}
};

struct FeatureSchemaMismatch : PipelineError {
  using PipelineError::PipelineError;
};

struct EmptyInput : PipelineError {
  using PipelineError::PipelineError;
};

struct InvalidInput : PipelineError {
  using PipelineError::PipelineError;
};

}  // namespace gliopipe
