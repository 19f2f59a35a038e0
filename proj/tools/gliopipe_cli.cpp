#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gliopipe/errors.hpp"
#include "gliopipe/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"glioma segmentation and survival pipeline"};
  app.require_subcommand(1);

  const char* stages[] = {"preprocess",     "train",            "segment",
                          "evaluate",       "features",         "survival-train",
                          "survival-predict", "survival-eval",  "report"};

  std::string config_path;
  std::string command;
  for (const char* s : stages) {
    auto* sub = app.add_subcommand(s, std::string("run the ") + s + " stage");
    sub->add_option("-c,--config", config_path, "pipeline configuration (JSON)")
        ->required();
    sub->callback([&command, s] { command = s; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const gliopipe::PipelineConfig cfg = gliopipe::load_config(config_path);
    gliopipe::pipeline::run(command, cfg);
  } catch (const gliopipe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gliopipe::StageDependencyError& e) {
    std::cerr << "missing stage dependency: " << e.what() << "\n";
    return 3;
  } catch (const gliopipe::PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
