#include "gliopipe/survival.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gliopipe::survival {

using json = nlohmann::json;

SurvivalClass classify(double days, const ClassThresholds& thr) {
  if (days < 0) throw InvalidInput("negative survival days");
  if (!(thr.t1 < thr.t2)) throw InvalidInput("class thresholds must satisfy t1 < t2");
  if (days < thr.t1) return SurvivalClass::Short;
  if (days <= thr.t2) return SurvivalClass::Medium;
  return SurvivalClass::Long;
}

double RegressionTree::predict(const std::vector<double>& x) const {
  int i = 0;
  while (nodes[i].feature >= 0)
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

double ForestModel::predict(const std::vector<double>& x) const {
  double sum = 0;
  for (const auto& t : trees) sum += t.predict(x);
  return std::max(0.0, sum / double(trees.size()));
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& X;
  const std::vector<double>& y;
  const ForestConfig& cfg;
  std::mt19937_64& rng;
  int n_features;
  int mtry;
  RegressionTree tree;

  int build(std::vector<int>& idx, int begin, int end, int depth) {
    const int n = end - begin;
    double mean = 0;
    for (int i = begin; i < end; ++i) mean += y[idx[i]];
    mean /= double(n);

    TreeNode node;
    node.value = mean;
    const int self = int(tree.nodes.size());
    tree.nodes.push_back(node);

    if (n < 2 * cfg.min_leaf || (cfg.max_depth > 0 && depth >= cfg.max_depth))
      return self;

    double sse = 0;
    for (int i = begin; i < end; ++i) sse += (y[idx[i]] - mean) * (y[idx[i]] - mean);
    if (sse <= 1e-12) return self;

    // random feature subset, then exhaustive threshold search per feature
    std::vector<int> feats(n_features);
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<int> pick(i, n_features - 1);
      std::swap(feats[i], feats[pick(rng)]);
    }

    int best_feat = -1;
    double best_thr = 0, best_score = sse;
    std::vector<std::pair<double, double>> vals(n);  // (x, y)
    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feats[fi];
      for (int i = 0; i < n; ++i)
        vals[i] = {X[idx[begin + i]][f], y[idx[begin + i]]};
      std::sort(vals.begin(), vals.end());

      double left_sum = 0, left_sq = 0;
      double total_sum = 0, total_sq = 0;
      for (const auto& [xv, yv] : vals) {
        total_sum += yv;
        total_sq += yv * yv;
      }
      for (int i = 0; i + 1 < n; ++i) {
        left_sum += vals[i].second;
        left_sq += vals[i].second * vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double score = (left_sq - left_sum * left_sum / nl) +
                             (right_sq - right_sum * right_sum / nr);
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feat = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feat < 0) return self;

    auto mid = std::partition(idx.begin() + begin, idx.begin() + end,
                              [&](int i) { return X[i][best_feat] <= best_thr; });
    const int split = int(mid - idx.begin());
    if (split == begin || split == end) return self;

    tree.nodes[self].feature = best_feat;
    tree.nodes[self].threshold = best_thr;
    tree.nodes[self].left = build(idx, begin, split, depth + 1);
    tree.nodes[self].right = build(idx, split, end, depth + 1);
    return self;
  }
};

}  // namespace

ForestModel fit_rfr(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const ForestConfig& cfg,
                    const std::string& feature_fingerprint) {
  const int n = int(X.size());
  if (n < 5) throw TooFewSamples("random forest needs at least 5 samples");
  if (y.size() != X.size()) throw ShapeError("feature/target row count mismatch");
  const int n_features = int(X[0].size());
  for (const auto& row : X) {
    if (int(row.size()) != n_features) throw ShapeError("ragged feature matrix");
    for (int j = 0; j < n_features; ++j)
      if (!std::isfinite(row[j])) throw InvalidFeature(j);
  }
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidInput("non-finite target");

  ForestModel model;
  model.config = cfg;
  model.feature_fingerprint = feature_fingerprint;
  model.n_features = n_features;
  const int mtry = std::max(1, int(std::ceil(std::sqrt(double(n_features)))));

  std::vector<double> oob_sum(n, 0.0);
  std::vector<int> oob_count(n, 0);

  for (int t = 0; t < cfg.n_trees; ++t) {
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + std::uint64_t(t) + 1);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> bag(n);
    std::vector<std::uint8_t> in_bag(n, 0);
    for (int i = 0; i < n; ++i) {
      bag[i] = pick(rng);
      in_bag[bag[i]] = 1;
    }

    TreeBuilder builder{X, y, cfg, rng, n_features, mtry, {}};
    builder.build(bag, 0, n, 0);
    model.trees.push_back(std::move(builder.tree));

    for (int i = 0; i < n; ++i)
      if (!in_bag[i]) {
        oob_sum[i] += model.trees.back().predict(X[i]);
        ++oob_count[i];
      }
  }

  double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
  double ss_tot = 0, ss_res = 0;
  int n_oob = 0;
  for (int i = 0; i < n; ++i) {
    if (!oob_count[i]) continue;
    const double pred = oob_sum[i] / double(oob_count[i]);
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - y_mean) * (y[i] - y_mean);
    ++n_oob;
  }
  model.oob_r2 = (n_oob > 1 && ss_tot > 0) ? 1.0 - ss_res / ss_tot : 0.0;
  return model;
}

double predict_days(const ForestModel& model, const std::vector<double>& x,
                    const std::string& feature_fingerprint) {
  if (feature_fingerprint != model.feature_fingerprint)
    throw FeatureSchemaMismatch("feature schema does not match the trained model");
  if (int(x.size()) != model.n_features)
    throw FeatureSchemaMismatch("feature vector length does not match the model");
  return model.predict(x);
}

void save_model(const ForestModel& model, const std::string& path) {
  json j;
  j["feature_fingerprint"] = model.feature_fingerprint;
  j["n_features"] = model.n_features;
  j["oob_r2"] = model.oob_r2;
  j["config"] = {{"n_trees", model.config.n_trees},
                 {"min_leaf", model.config.min_leaf},
                 {"max_depth", model.config.max_depth},
                 {"seed", model.config.seed}};
  json trees = json::array();
  for (const auto& t : model.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);

  std::ofstream out(path + ".tmp", std::ios::binary);
  if (!out) throw IoError("cannot create model file: " + path);
  out << j.dump();
  out.close();
  std::error_code ec;
  std::filesystem::rename(path + ".tmp", path, ec);
  if (ec) throw IoError("cannot finalize model file: " + path);
}

ForestModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    throw IoError("corrupt model file: " + path);
  }
  ForestModel m;
  m.feature_fingerprint = j.at("feature_fingerprint").get<std::string>();
  m.n_features = j.at("n_features").get<int>();
  m.oob_r2 = j.value("oob_r2", 0.0);
  m.config.n_trees = j.at("config").at("n_trees").get<int>();
  m.config.min_leaf = j.at("config").at("min_leaf").get<int>();
  m.config.max_depth = j.at("config").at("max_depth").get<int>();
  m.config.seed = j.at("config").at("seed").get<std::uint64_t>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      TreeNode nd;
      nd.feature = nj.at(0).get<int>();
      nd.threshold = nj.at(1).get<double>();
      nd.left = nj.at(2).get<int>();
      nd.right = nj.at(3).get<int>();
      nd.value = nj.at(4).get<double>();
      t.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

std::vector<SurvivalRecord> filter_gtr(const std::vector<SurvivalRecord>& records,
                                       bool for_evaluation) {
  std::vector<SurvivalRecord> out;
  for (const auto& r : records) {
    if (r.resection != ResectionStatus::GTR) continue;
    if (for_evaluation && !r.survival_days) continue;
    out.push_back(r);
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const int n = int(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("spearman needs paired data");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

OSReport evaluate_os(const std::vector<double>& pred_days,
                     const std::vector<double>& true_days, const ClassThresholds& thr) {
  if (pred_days.size() != true_days.size()) throw ShapeError("pred/true length mismatch");
  if (pred_days.size() < 2) throw ShapeError("evaluate_os needs at least 2 cases");

  OSReport r;
  r.n_cases = int(pred_days.size());

  std::vector<double> sq(pred_days.size());
  int correct = 0;
  for (std::size_t i = 0; i < pred_days.size(); ++i) {
    const double e = pred_days[i] - true_days[i];
    sq[i] = e * e;
    if (classify(pred_days[i], thr) == classify(true_days[i], thr)) ++correct;
  }
  r.accuracy = double(correct) / double(pred_days.size());

  double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / double(sq.size());
  double var = 0;
  for (double s : sq) var += (s - mean) * (s - mean);
  var /= double(sq.size());
  r.mse = mean;
  r.stdse = std::sqrt(var);

  std::vector<double> sorted = sq;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.medianse = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  r.spearmanr = spearman(pred_days, true_days);
  return r;
}

std::string os_report_to_json(const OSReport& r, const std::string& mode) {
  json j;
  j["accuracy"] = r.accuracy;
  j["mse"] = r.mse;
  j["medianse"] = r.medianse;
  j["stdse"] = r.stdse;
  j["spearmanr"] = r.spearmanr;
  j["n_cases"] = r.n_cases;
  j["evaluation_mode"] = mode;
  return j.dump(2);
}

}  // namespace gliopipe::survival
