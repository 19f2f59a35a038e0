#include "gliopipe/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gliopipe {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError("expected object at " + where);
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw ConfigError("unknown config key '" + where + "." + key + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

CascadeConfig PipelineConfig::cascade_config() const {
  CascadeConfig c;
  c.loss = loss_from_name(train.loss);
  c.focal = train.focal;
  c.epochs = train.epochs;
  c.batch_size = train.batch_size;
  c.learning_rate = train.learning_rate;
  c.seed = seed;
  c.split_fraction = train.split_fraction;
  c.max_steps = train.max_steps;
  c.target_train_dice = train.target_train_dice;
  return c;
}

NetworkSpec PipelineConfig::network_spec(int height, int width) const {
  NetworkSpec s;
  s.height = height;
  s.width = width;
  s.encoder_maps = network.encoder_maps;
  s.dense_block_depth = network.dense_block_depth;
  return s;
}

survival::ForestConfig PipelineConfig::forest_config() const {
  survival::ForestConfig f;
  f.n_trees = survival.n_trees;
  f.min_leaf = survival.min_leaf;
  f.max_depth = survival.max_depth;
  f.seed = seed;
  return f;
}

survival::ClassThresholds PipelineConfig::thresholds() const {
  return {survival.threshold_short, survival.threshold_long};
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }

  PipelineConfig cfg;
  try {
    reject_unknown(j, {"seed", "data", "preprocess", "network", "train", "segment",
                       "evaluate", "features", "survival", "report"},
                   "(root)");
    read_opt(j, "seed", cfg.seed);

    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"cases_dir", "survival_csv", "columns"}, "data");
      read_opt(d, "cases_dir", cfg.data.cases_dir);
      read_opt(d, "survival_csv", cfg.data.survival_csv);
      if (d.contains("columns")) {
        const auto& c = d["columns"];
        reject_unknown(c, {"id", "age", "survival", "resection"}, "data.columns");
        read_opt(c, "id", cfg.data.columns.id);
        read_opt(c, "age", cfg.data.columns.age);
        read_opt(c, "survival", cfg.data.columns.survival);
        read_opt(c, "resection", cfg.data.columns.resection);
      }
    }
    if (j.contains("preprocess")) {
      reject_unknown(j["preprocess"], {"out_dir"}, "preprocess");
      read_opt(j["preprocess"], "out_dir", cfg.preprocess.out_dir);
    }
    if (j.contains("network")) {
      const auto& n = j["network"];
      reject_unknown(n, {"encoder_maps", "dense_block_depth"}, "network");
      if (n.contains("encoder_maps")) {
        auto maps = n["encoder_maps"].get<std::vector<int>>();
        if (maps.size() != 3) throw ConfigError("network.encoder_maps needs 3 values");
        cfg.network.encoder_maps = {maps[0], maps[1], maps[2]};
      }
      read_opt(n, "dense_block_depth", cfg.network.dense_block_depth);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      reject_unknown(t,
                     {"loss", "focal", "epochs", "batch_size", "learning_rate",
                      "split_fraction", "max_steps", "target_train_dice", "weights_dir"},
                     "train");
      read_opt(t, "loss", cfg.train.loss);
      loss_from_name(cfg.train.loss);  // validate early
      if (t.contains("focal")) {
        reject_unknown(t["focal"], {"alpha", "gamma"}, "train.focal");
        read_opt(t["focal"], "alpha", cfg.train.focal.alpha);
        read_opt(t["focal"], "gamma", cfg.train.focal.gamma);
        if (!(cfg.train.focal.alpha > 0.0 && cfg.train.focal.alpha <= 1.0))
          throw ConfigError("train.focal.alpha must be in (0,1]");
        if (cfg.train.focal.gamma < 0.0)
          throw ConfigError("train.focal.gamma must be >= 0");
      }
      read_opt(t, "epochs", cfg.train.epochs);
      read_opt(t, "batch_size", cfg.train.batch_size);
      read_opt(t, "learning_rate", cfg.train.learning_rate);
      read_opt(t, "split_fraction", cfg.train.split_fraction);
      read_opt(t, "max_steps", cfg.train.max_steps);
      read_opt(t, "target_train_dice", cfg.train.target_train_dice);
      read_opt(t, "weights_dir", cfg.train.weights_dir);
      if (cfg.train.epochs < 0) throw ConfigError("train.epochs must be >= 0");
      if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
      if (!(cfg.train.split_fraction > 0.0 && cfg.train.split_fraction < 1.0))
        throw ConfigError("train.split_fraction must be in (0,1)");
    }
    if (j.contains("segment")) {
      reject_unknown(j["segment"], {"weights_dir", "out_dir"}, "segment");
      read_opt(j["segment"], "weights_dir", cfg.segment.weights_dir);
      read_opt(j["segment"], "out_dir", cfg.segment.out_dir);
    }
    if (j.contains("evaluate")) {
      reject_unknown(j["evaluate"], {"pred_dir", "gt_dir", "out"}, "evaluate");
      read_opt(j["evaluate"], "pred_dir", cfg.evaluate.pred_dir);
      read_opt(j["evaluate"], "gt_dir", cfg.evaluate.gt_dir);
      read_opt(j["evaluate"], "out", cfg.evaluate.out);
    }
    if (j.contains("features")) {
      reject_unknown(j["features"], {"pred_dir", "out_csv"}, "features");
      read_opt(j["features"], "pred_dir", cfg.features.pred_dir);
      read_opt(j["features"], "out_csv", cfg.features.out_csv);
    }
    if (j.contains("survival")) {
      const auto& s = j["survival"];
      reject_unknown(s,
                     {"n_trees", "min_leaf", "max_depth", "threshold_short",
                      "threshold_long", "model_path", "pred_csv", "report_path", "mode"},
                     "survival");
      read_opt(s, "n_trees", cfg.survival.n_trees);
      read_opt(s, "min_leaf", cfg.survival.min_leaf);
      read_opt(s, "max_depth", cfg.survival.max_depth);
      read_opt(s, "threshold_short", cfg.survival.threshold_short);
      read_opt(s, "threshold_long", cfg.survival.threshold_long);
      read_opt(s, "model_path", cfg.survival.model_path);
      read_opt(s, "pred_csv", cfg.survival.pred_csv);
      read_opt(s, "report_path", cfg.survival.report_path);
      read_opt(s, "mode", cfg.survival.mode);
      if (cfg.survival.n_trees < 1) throw ConfigError("survival.n_trees must be >= 1");
      if (!(cfg.survival.threshold_short < cfg.survival.threshold_long))
        throw ConfigError("survival.threshold_short must be < threshold_long");
      if (cfg.survival.mode != "resubstitution" && cfg.survival.mode != "holdout")
        throw ConfigError("survival.mode must be resubstitution|holdout");
    }
    if (j.contains("report")) {
      reject_unknown(j["report"], {"out_dir"}, "report");
      read_opt(j["report"], "out_dir", cfg.report.out_dir);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return cfg;
}

std::string config_hash(const PipelineConfig& cfg) {
  // canonical serialization of every field that affects results
  std::ostringstream os;
  os.precision(17);
  os << cfg.seed << '|' << cfg.data.cases_dir << '|' << cfg.data.survival_csv << '|'
     << cfg.network.encoder_maps[0] << ',' << cfg.network.encoder_maps[1] << ','
     << cfg.network.encoder_maps[2] << '|' << cfg.network.dense_block_depth << '|'
     << cfg.train.loss << '|' << cfg.train.focal.alpha << ',' << cfg.train.focal.gamma
     << '|' << cfg.train.epochs << '|' << cfg.train.batch_size << '|'
     << cfg.train.learning_rate << '|' << cfg.train.split_fraction << '|'
     << cfg.train.max_steps << '|' << cfg.train.target_train_dice << '|'
     << cfg.survival.n_trees << '|' << cfg.survival.min_leaf << '|'
     << cfg.survival.max_depth << '|' << cfg.survival.threshold_short << ','
     << cfg.survival.threshold_long << '|' << cfg.survival.mode;
  const std::string s = os.str();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

}  // namespace gliopipe
