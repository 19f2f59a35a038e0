#include "gliopipe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

namespace gliopipe {

namespace {

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<float>> m, v;
  long t = 0;

  explicit Adam(const std::vector<ParamTensor>& params, double lr_) : lr(lr_) {
    m.resize(params.size());
    v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i].assign(params[i].count(), 0.f);
      v[i].assign(params[i].count(), 0.f);
    }
  }

  void step(std::vector<ParamTensor>& params, const GradBuffer& grads) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].data;
      const auto& g = grads.g[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[i][j] = float(beta1 * m[i][j] + (1.0 - beta1) * g[j]);
        v[i][j] = float(beta2 * v[i][j] + (1.0 - beta2) * double(g[j]) * g[j]);
        const double mhat = m[i][j] / bc1;
        const double vhat = v[i][j] / bc2;
        p[j] -= float(lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

// Mean per-case DSC of thresholded predictions against the slice targets.
double training_dice(const Network& net, const std::vector<SliceSample>& slices) {
  std::unordered_map<std::string, std::pair<double, double>> per_case;  // 2*inter, |P|+|G|
  for (const auto& s : slices) {
    FeatureMap pred = net.forward(s.image, nullptr);
    double inter = 0, psum = 0, gsum = 0;
    for (std::size_t i = 0; i < s.target.size(); ++i) {
      const int p = pred.v[i] >= 0.5f ? 1 : 0;
      inter += p & s.target[i];
      psum += p;
      gsum += s.target[i];
    }
    auto& acc = per_case[s.case_id];
    acc.first += 2.0 * inter;
    acc.second += psum + gsum;
  }
  double total = 0;
  for (const auto& [id, acc] : per_case)
    total += acc.second == 0.0 ? 1.0 : acc.first / acc.second;
  return per_case.empty() ? 0.0 : total / double(per_case.size());
}

}  // namespace

double evaluate_loss(const Network& net, const std::vector<SliceSample>& slices,
                     LossKind loss, const FocalParams& focal) {
  if (slices.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : slices) {
    FeatureMap pred = net.forward(s.image, nullptr);
    total += compute_loss(loss, focal, pred.v, s.target, nullptr);
  }
  return total / double(slices.size());
}

std::pair<WeightSet, TrainReport> train_stage(SubregionId region, const StageData& data,
                                              const std::optional<WeightSet>& init,
                                              const NetworkSpec& nspec,
                                              const CascadeConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Network net(nspec, cfg.seed);
  if (init) net.set_weights(*init);

  TrainReport report;
  report.seed = cfg.seed;

  if (cfg.epochs == 0) {
    WeightSet w = net.get_weights();
    w.stage = subregion_name(region);
    return {std::move(w), std::move(report)};
  }
  if (data.train.empty()) throw EmptyDataset("no training slices");

  Adam opt(net.mutable_params(), cfg.learning_rate);
  GradBuffer grads = net.make_grad_buffer();
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  WeightSet best = net.get_weights();
  double best_val = std::numeric_limits<double>::infinity();
  bool done = false;

  std::vector<float> grad_buf;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int epoch_batches = 0;

    for (std::size_t b = 0; b < order.size() && !done; b += std::size_t(cfg.batch_size)) {
      const std::size_t b_end = std::min(order.size(), b + std::size_t(cfg.batch_size));
      const double inv_n = 1.0 / double(b_end - b);
      grads.zero();
      double batch_loss = 0.0;

      for (std::size_t k = b; k < b_end; ++k) {
        const SliceSample& s = data.train[order[k]];
        Network::Context ctx;
        FeatureMap pred = net.forward(s.image, &ctx);
        batch_loss += compute_loss(cfg.loss, cfg.focal, pred.v, s.target, &grad_buf);
        FeatureMap dout(1, pred.h, pred.w);
        for (std::size_t i = 0; i < grad_buf.size(); ++i)
          dout.v[i] = float(grad_buf[i] * inv_n);
        net.backward(ctx, dout, grads);
      }
      batch_loss *= inv_n;
      if (!std::isfinite(batch_loss)) throw TrainingDiverged(epoch);

      opt.step(net.mutable_params(), grads);
      epoch_loss += batch_loss;
      ++epoch_batches;
      ++report.steps;
      if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) done = true;
    }

    report.train_loss.push_back(epoch_loss / std::max(1, epoch_batches));
    const double val = data.val.empty()
                           ? report.train_loss.back()
                           : evaluate_loss(net, data.val, cfg.loss, cfg.focal);
    if (!std::isfinite(val)) throw TrainingDiverged(epoch);
    report.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = net.get_weights();
      report.best_epoch = epoch;
    }

    if (cfg.target_train_dice > 0.0) {
      const double dsc = training_dice(net, data.train);
      report.train_dice.push_back(dsc);
      if (dsc >= cfg.target_train_dice) {
        // converged; keep the current weights rather than an earlier snapshot
        best = net.get_weights();
        report.best_epoch = epoch;
        done = true;
      }
    }
  }

  best.stage = subregion_name(region);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), std::move(report)};
}

CascadeResult run_cascade(const CascadeConfig& cfg, const NetworkSpec& nspec,
                          std::vector<CasePair>& cases) {
  if (cases.size() < 2) throw TooFewCases("cascade needs at least 2 cases");

  for (auto& c : cases) {
    if (c.labels.dim != c.scan.dim)
      throw ShapeMismatch("labels do not match scan for case " + c.scan.case_id);
    normalize_scan(c.scan);
  }

  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.scan.case_id);
  DatasetSplit split = split_dataset(ids, cfg.split_fraction, cfg.seed);
  auto in_train = [&](const std::string& id) {
    return std::binary_search(split.train_ids.begin(), split.train_ids.end(), id);
  };

  auto stage_data = [&](SubregionId region) {
    StageData d;
    for (const auto& c : cases) {
      auto slices = extract_slices(c.scan, c.labels, region);
      auto& dst = in_train(c.scan.case_id) ? d.train : d.val;
      for (auto& s : slices) dst.push_back(std::move(s));
    }
    return d;
  };

  CascadeResult result;

  StageData wt_data = stage_data(SubregionId::WT);
  CascadeConfig wt_cfg = cfg;
  auto [wt_weights, wt_report] = train_stage(SubregionId::WT, wt_data, std::nullopt,
                                             nspec, wt_cfg);
  const std::string wt_checksum = weights_checksum(wt_weights);
  result.weights[SubregionId::WT] = wt_weights;
  result.reports[SubregionId::WT] = std::move(wt_report);

  const std::array<SubregionId, 3> subregions = {SubregionId::NCR, SubregionId::ED,
                                                 SubregionId::ET};
  for (std::size_t i = 0; i < subregions.size(); ++i) {
    StageData d = stage_data(subregions[i]);
    CascadeConfig sub_cfg = cfg;
    sub_cfg.seed = cfg.seed + i + 1;
    try {
      auto [w, rep] = train_stage(subregions[i], d, wt_weights, nspec, sub_cfg);
      w.parent_checksum = wt_checksum;
      result.weights[subregions[i]] = std::move(w);
      result.reports[subregions[i]] = std::move(rep);
    } catch (const PipelineError& e) {
      throw PipelineError(std::string("stage ") + subregion_name(subregions[i]) + ": " +
                          e.what());
    }
  }
  return result;
}

LabelMap merge_subregion_masks(const BinaryMask& ncr, const BinaryMask& ed,
                               const BinaryMask& et) {
  if (ncr.dim != ed.dim || ed.dim != et.dim)
    throw ShapeError("subregion masks disagree on shape");
  LabelMap out;
  out.dim = ncr.dim;
  out.spacing = ncr.spacing;
  out.grid.resize(ncr.data.size());
  for (std::size_t i = 0; i < out.grid.size(); ++i)
    out.grid[i] = et.data[i] ? 4 : ncr.data[i] ? 1 : ed.data[i] ? 2 : 0;
  return out;
}

LabelMap segment_volume(const std::array<const Network*, 3>& nets,
                        const MultiModalScan& scan) {
  const int h = scan.dim[1], w = scan.dim[0], depth = scan.dim[2];
  for (const Network* n : nets)
    if (n->spec().height != h || n->spec().width != w)
      throw IncompatibleWeights("network spec does not match scan shape");

  std::array<BinaryMask, 3> masks;  // NCR, ED, ET
  for (auto& m : masks) m = make_mask(scan.dim, scan.spacing);

  FeatureMap slice(4, h, w);
  for (int z = 0; z < depth - kDroppedTopSlices; ++z) {
    for (int m = 0; m < 4; ++m) {
      const float* plane = scan.volumes[m].data.data() + flat_index(scan.dim, 0, 0, z);
      std::copy(plane, plane + std::size_t(h) * w, slice.v.begin() + std::size_t(m) * h * w);
    }
    const std::size_t base = flat_index(scan.dim, 0, 0, z);
    for (int k = 0; k < 3; ++k) {
      FeatureMap pred = nets[k]->forward(slice, nullptr);
      for (std::size_t i = 0; i < pred.v.size(); ++i)
        masks[k].data[base + i] = pred.v[i] >= 0.5f ? 1 : 0;
    }
  }
  LabelMap out = merge_subregion_masks(masks[0], masks[1], masks[2]);
  out.case_id = scan.case_id;
  return out;
}

}  // namespace gliopipe
