#include "gliopipe/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gliopipe/features.hpp"
#include "gliopipe/nifti.hpp"
#include "gliopipe/preprocess.hpp"
#include "gliopipe/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gliopipe::pipeline {

namespace {

void require(const std::string& path, const std::string& what) {
  if (!fs::exists(path))
    throw StageDependencyError("missing " + what + ": " + path);
}

void require_set(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError("config key '" + key + "' is required here");
}

std::vector<std::string> case_scan_paths(const std::string& case_dir) {
  std::vector<std::string> out;
  NamingConvention naming;
  const std::string id = fs::path(case_dir).filename().string();
  for (const auto& suffix : naming.modality_suffixes)
    for (const auto& ext : naming.extensions) {
      const fs::path p = fs::path(case_dir) / (id + "_" + suffix + ext);
      if (fs::exists(p)) {
        out.push_back(p.string());
        break;
      }
    }
  return out;
}

std::string pred_path_for(const std::string& pred_dir, const std::string& case_id) {
  for (const char* ext : {".nii", ".nii.gz"}) {
    const fs::path p = fs::path(pred_dir) / (case_id + ext);
    if (fs::exists(p)) return p.string();
  }
  throw StageDependencyError("missing prediction for case " + case_id + " under " +
                             pred_dir);
}

LabelMap ground_truth_for(const std::string& gt_dir, const std::string& case_id) {
  const fs::path as_case = fs::path(gt_dir) / case_id;
  if (fs::is_directory(as_case)) return load_case_labels(as_case.string());
  for (const char* ext : {".nii", ".nii.gz"}) {
    const fs::path p = fs::path(gt_dir) / (case_id + ext);
    if (fs::exists(p)) {
      LabelMap lm = load_label_map(p.string());
      lm.case_id = case_id;
      return lm;
    }
  }
  throw StageDependencyError("missing ground truth for case " + case_id + " under " +
                             gt_dir);
}

BinaryMask brain_mask_of(const MultiModalScan& scan) {
  BinaryMask m = make_mask(scan.dim, scan.spacing);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    for (int mod = 0; mod < 4; ++mod)
      if (scan.volumes[mod].data[i] != 0.f) {
        m.data[i] = 1;
        break;
      }
  return m;
}

std::vector<CasePair> load_cases(const std::string& cases_dir) {
  std::vector<CasePair> cases;
  for (const auto& id : list_case_ids(cases_dir)) {
    const std::string dir = (fs::path(cases_dir) / id).string();
    CasePair c;
    c.scan = load_scan(dir);
    c.labels = load_case_labels(dir);
    cases.push_back(std::move(c));
  }
  return cases;
}

const std::map<SubregionId, std::string> kWeightFiles = {
    {SubregionId::WT, "wt.weights"},
    {SubregionId::NCR, "ncr.weights"},
    {SubregionId::ED, "ed.weights"},
    {SubregionId::ET, "et.weights"},
};

}  // namespace

void run_preprocess(const PipelineConfig& cfg) {
  require_set(cfg.data.cases_dir, "data.cases_dir");
  require_set(cfg.preprocess.out_dir, "preprocess.out_dir");
  require(cfg.data.cases_dir, "cases directory");

  Manifest man;
  man.stage = "preprocess";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;

  for (const auto& id : list_case_ids(cfg.data.cases_dir)) {
    const std::string in_dir = (fs::path(cfg.data.cases_dir) / id).string();
    for (const auto& p : case_scan_paths(in_dir)) man.add_input(p);

    MultiModalScan scan = load_scan(in_dir);
    normalize_scan(scan);

    const fs::path out_dir = fs::path(cfg.preprocess.out_dir) / id;
    fs::create_directories(out_dir);
    NamingConvention naming;
    for (int m = 0; m < 4; ++m) {
      const std::string out =
          (out_dir / (id + "_" + naming.modality_suffixes[m] + ".nii")).string();
      nifti::write_volume(out, scan.volumes[m]);
      man.add_output(out);
    }
    LabelMap labels = load_case_labels(in_dir);
    const std::string seg_out = (out_dir / (id + "_seg.nii")).string();
    save_label_map(seg_out, labels);
    man.add_output(seg_out);
  }
  write_manifest(man, cfg.preprocess.out_dir);
}

void run_train(const PipelineConfig& cfg) {
  require_set(cfg.data.cases_dir, "data.cases_dir");
  require_set(cfg.train.weights_dir, "train.weights_dir");
  require(cfg.data.cases_dir, "cases directory");

  std::vector<CasePair> cases = load_cases(cfg.data.cases_dir);
  if (cases.empty()) throw StageDependencyError("no cases under " + cfg.data.cases_dir);

  Manifest man;
  man.stage = "train";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  for (const auto& id : list_case_ids(cfg.data.cases_dir))
    for (const auto& p : case_scan_paths((fs::path(cfg.data.cases_dir) / id).string()))
      man.add_input(p);

  const NetworkSpec nspec = cfg.network_spec(cases[0].scan.dim[1], cases[0].scan.dim[0]);
  CascadeResult result = run_cascade(cfg.cascade_config(), nspec, cases);

  fs::create_directories(cfg.train.weights_dir);
  json curves;
  for (const auto& [region, w] : result.weights) {
    const std::string path =
        (fs::path(cfg.train.weights_dir) / kWeightFiles.at(region)).string();
    save_weights(w, path);
    man.add_output(path);

    const TrainReport& rep = result.reports.at(region);
    json r;
    r["train_loss"] = rep.train_loss;
    r["val_loss"] = rep.val_loss;
    r["train_dice"] = rep.train_dice;
    r["steps"] = rep.steps;
    r["best_epoch"] = rep.best_epoch;
    r["seed"] = rep.seed;
    r["wall_seconds"] = rep.wall_seconds;
    curves[subregion_name(region)] = r;
  }
  const std::string report_path =
      (fs::path(cfg.train.weights_dir) / "train_report.json").string();
  atomic_write_text(report_path, curves.dump(2));
  man.add_output(report_path);
  write_manifest(man, cfg.train.weights_dir);
}

void run_segment(const PipelineConfig& cfg) {
  require_set(cfg.data.cases_dir, "data.cases_dir");
  require_set(cfg.segment.weights_dir, "segment.weights_dir");
  require_set(cfg.segment.out_dir, "segment.out_dir");

  Manifest man;
  man.stage = "segment";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;

  std::map<SubregionId, WeightSet> weights;
  for (SubregionId r : {SubregionId::NCR, SubregionId::ED, SubregionId::ET}) {
    const std::string path =
        (fs::path(cfg.segment.weights_dir) / kWeightFiles.at(r)).string();
    require(path, "weight file");
    man.add_input(path);
    weights[r] = load_weights(path);
  }

  const NetworkSpec nspec = spec_from_fingerprint(weights[SubregionId::NCR].fingerprint);
  Network ncr(nspec, 0), ed(nspec, 0), et(nspec, 0);
  ncr.set_weights(weights[SubregionId::NCR]);
  ed.set_weights(weights[SubregionId::ED]);
  et.set_weights(weights[SubregionId::ET]);

  fs::create_directories(cfg.segment.out_dir);
  for (const auto& id : list_case_ids(cfg.data.cases_dir)) {
    MultiModalScan scan = load_scan((fs::path(cfg.data.cases_dir) / id).string());
    normalize_scan(scan);
    LabelMap pred = segment_volume({&ncr, &ed, &et}, scan);
    const std::string out = (fs::path(cfg.segment.out_dir) / (id + ".nii")).string();
    save_label_map(out, pred);
    man.add_output(out);
  }
  write_manifest(man, cfg.segment.out_dir);
}

void run_evaluate(const PipelineConfig& cfg) {
  require_set(cfg.evaluate.pred_dir, "evaluate.pred_dir");
  require_set(cfg.evaluate.gt_dir, "evaluate.gt_dir");
  require_set(cfg.evaluate.out, "evaluate.out");
  require(cfg.evaluate.pred_dir, "prediction directory");
  require(cfg.evaluate.gt_dir, "ground-truth directory");

  Manifest man;
  man.stage = "evaluate";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;

  // evaluate every prediction file present
  std::vector<std::string> case_ids;
  for (const auto& e : fs::directory_iterator(cfg.evaluate.pred_dir)) {
    std::string name = e.path().filename().string();
    if (name.ends_with(".nii.gz"))
      case_ids.push_back(name.substr(0, name.size() - 7));
    else if (name.ends_with(".nii"))
      case_ids.push_back(name.substr(0, name.size() - 4));
  }
  std::sort(case_ids.begin(), case_ids.end());
  if (case_ids.empty())
    throw StageDependencyError("no predictions under " + cfg.evaluate.pred_dir);

  std::vector<metrics::CaseMetrics> all;
  for (const auto& id : case_ids) {
    const std::string pred_path = pred_path_for(cfg.evaluate.pred_dir, id);
    man.add_input(pred_path);
    LabelMap pred = load_label_map(pred_path);
    pred.case_id = id;
    LabelMap gt = ground_truth_for(cfg.evaluate.gt_dir, id);
    pred.spacing = gt.spacing;
    all.push_back(metrics::evaluate_case(pred, gt));
  }

  const metrics::SummaryTable table = metrics::aggregate(all);
  atomic_write_text(cfg.evaluate.out, metrics::report_to_json(all, table));
  man.add_output(cfg.evaluate.out);

  std::string csv_path = cfg.evaluate.out;
  if (csv_path.ends_with(".json")) csv_path.resize(csv_path.size() - 5);
  csv_path += ".csv";
  atomic_write_text(csv_path, metrics::summary_to_csv(table));
  man.add_output(csv_path);
  write_manifest(man, fs::path(cfg.evaluate.out).parent_path().string());
}

void run_features(const PipelineConfig& cfg) {
  require_set(cfg.data.cases_dir, "data.cases_dir");
  require_set(cfg.data.survival_csv, "data.survival_csv");
  require_set(cfg.features.out_csv, "features.out_csv");
  require(cfg.data.survival_csv, "survival metadata CSV");

  Manifest man;
  man.stage = "features";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  man.add_input(cfg.data.survival_csv);

  const auto records = load_survival_table(cfg.data.survival_csv, cfg.data.columns);
  std::map<std::string, double> age_of;
  for (const auto& r : records) age_of[r.case_id] = r.age;

  std::vector<features::FeatureVector> rows;
  for (const auto& id : list_case_ids(cfg.data.cases_dir)) {
    auto it = age_of.find(id);
    if (it == age_of.end()) continue;  // no survival metadata, not an OS case

    const std::string dir = (fs::path(cfg.data.cases_dir) / id).string();
    MultiModalScan scan = load_scan(dir);
    LabelMap labels;
    if (cfg.features.pred_dir.empty()) {
      labels = load_case_labels(dir);
    } else {
      const std::string pred_path = pred_path_for(cfg.features.pred_dir, id);
      man.add_input(pred_path);
      labels = load_label_map(pred_path);
      labels.case_id = id;
      labels.spacing = scan.spacing;
    }
    rows.push_back(features::build_feature_vector(labels, brain_mask_of(scan), it->second));
  }
  if (rows.empty()) throw StageDependencyError("no cases with survival metadata");

  atomic_write_text(cfg.features.out_csv, features::features_to_csv(rows));
  man.add_output(cfg.features.out_csv);
  write_manifest(man, fs::path(cfg.features.out_csv).parent_path().string());
}

namespace {

struct JoinedData {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  std::vector<std::string> ids;
};

// GTR cases with known survival whose features are present.
JoinedData join_features_meta(const PipelineConfig& cfg) {
  require(cfg.features.out_csv, "features CSV");
  require(cfg.data.survival_csv, "survival metadata CSV");
  const auto rows = features::features_from_csv(cfg.features.out_csv);
  const auto records =
      survival::filter_gtr(load_survival_table(cfg.data.survival_csv, cfg.data.columns),
                           /*for_evaluation=*/true);
  std::map<std::string, double> days_of;
  for (const auto& r : records) days_of[r.case_id] = *r.survival_days;

  JoinedData d;
  for (const auto& row : rows) {
    auto it = days_of.find(row.case_id);
    if (it == days_of.end()) continue;
    d.X.emplace_back(row.values.begin(), row.values.end());
    d.y.push_back(it->second);
    d.ids.push_back(row.case_id);
  }
  return d;
}

}  // namespace

void run_survival_train(const PipelineConfig& cfg) {
  require_set(cfg.features.out_csv, "features.out_csv");
  require_set(cfg.data.survival_csv, "data.survival_csv");
  require_set(cfg.survival.model_path, "survival.model_path");
  require(cfg.features.out_csv, "features CSV");
  require(cfg.data.survival_csv, "survival table");

  Manifest man;
  man.stage = "survival-train";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  man.add_input(cfg.features.out_csv);
  man.add_input(cfg.data.survival_csv);

  JoinedData d = join_features_meta(cfg);
  auto model = survival::fit_rfr(d.X, d.y, cfg.forest_config(),
                                 features::feature_schema_fingerprint());
  survival::save_model(model, cfg.survival.model_path);
  man.add_output(cfg.survival.model_path);
  write_manifest(man, fs::path(cfg.survival.model_path).parent_path().string());
}

void run_survival_predict(const PipelineConfig& cfg) {
  require_set(cfg.survival.model_path, "survival.model_path");
  require_set(cfg.features.out_csv, "features.out_csv");
  require_set(cfg.survival.pred_csv, "survival.pred_csv");
  require(cfg.survival.model_path, "survival model");
  require(cfg.features.out_csv, "features CSV");

  Manifest man;
  man.stage = "survival-predict";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  man.add_input(cfg.survival.model_path);
  man.add_input(cfg.features.out_csv);

  const auto model = survival::load_model(cfg.survival.model_path);
  const auto rows = features::features_from_csv(cfg.features.out_csv);

  std::ostringstream csv;
  csv.precision(12);
  csv << "case_id,predicted_days\n";
  for (const auto& row : rows) {
    std::vector<double> x(row.values.begin(), row.values.end());
    csv << row.case_id << ","
        << survival::predict_days(model, x, features::feature_schema_fingerprint())
        << "\n";
  }
  atomic_write_text(cfg.survival.pred_csv, csv.str());
  man.add_output(cfg.survival.pred_csv);
  write_manifest(man, fs::path(cfg.survival.pred_csv).parent_path().string());
}

void run_survival_eval(const PipelineConfig& cfg) {
  require_set(cfg.survival.pred_csv, "survival.pred_csv");
  require_set(cfg.data.survival_csv, "data.survival_csv");
  require_set(cfg.survival.report_path, "survival.report_path");
  require(cfg.survival.pred_csv, "prediction CSV");
  require(cfg.data.survival_csv, "survival metadata CSV");

  Manifest man;
  man.stage = "survival-eval";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  man.add_input(cfg.survival.pred_csv);
  man.add_input(cfg.data.survival_csv);

  std::ifstream in(cfg.survival.pred_csv);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, double> pred_of;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(lineno, "expected case_id,days");
    try {
      pred_of[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(lineno, "non-numeric prediction");
    }
  }

  const auto records =
      survival::filter_gtr(load_survival_table(cfg.data.survival_csv, cfg.data.columns),
                           /*for_evaluation=*/true);
  std::vector<double> pred, truth;
  for (const auto& r : records) {
    auto it = pred_of.find(r.case_id);
    if (it == pred_of.end()) continue;
    pred.push_back(it->second);
    truth.push_back(*r.survival_days);
  }
  if (pred.size() < 2)
    throw StageDependencyError("fewer than 2 evaluable GTR cases with predictions");

  const auto report = survival::evaluate_os(pred, truth, cfg.thresholds());
  atomic_write_text(cfg.survival.report_path,
                    survival::os_report_to_json(report, cfg.survival.mode));
  man.add_output(cfg.survival.report_path);
  write_manifest(man, fs::path(cfg.survival.report_path).parent_path().string());
}

void run_report(const PipelineConfig& cfg) {
  require_set(cfg.report.out_dir, "report.out_dir");

  Manifest man;
  man.stage = "report";
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  fs::create_directories(cfg.report.out_dir);

  json combined;
  if (!cfg.evaluate.out.empty()) {
    require(cfg.evaluate.out, "segmentation report");
    man.add_input(cfg.evaluate.out);
    std::ifstream in(cfg.evaluate.out);
    json seg;
    in >> seg;
    combined["segmentation"] = seg["summary"];

    std::string csv_path = cfg.evaluate.out;
    if (csv_path.ends_with(".json")) csv_path.resize(csv_path.size() - 5);
    csv_path += ".csv";
    if (fs::exists(csv_path)) {
      std::ifstream c(csv_path);
      std::stringstream buf;
      buf << c.rdbuf();
      const std::string out = (fs::path(cfg.report.out_dir) / "segmentation.csv").string();
      atomic_write_text(out, buf.str());
      man.add_output(out);
    }
  }
  if (!cfg.survival.report_path.empty() && fs::exists(cfg.survival.report_path)) {
    man.add_input(cfg.survival.report_path);
    std::ifstream in(cfg.survival.report_path);
    json os;
    in >> os;
    combined["overall_survival"] = os;
  }
  const std::string out = (fs::path(cfg.report.out_dir) / "report.json").string();
  atomic_write_text(out, combined.dump(2));
  man.add_output(out);
  write_manifest(man, cfg.report.out_dir);
}

void run(const std::string& command, const PipelineConfig& cfg) {
  if (command == "preprocess") return run_preprocess(cfg);
  if (command == "train") return run_train(cfg);
  if (command == "segment") return run_segment(cfg);
  if (command == "evaluate") return run_evaluate(cfg);
  if (command == "features") return run_features(cfg);
  if (command == "survival-train") return run_survival_train(cfg);
  if (command == "survival-predict") return run_survival_predict(cfg);
  if (command == "survival-eval") return run_survival_eval(cfg);
  if (command == "report") return run_report(cfg);
  throw ConfigError("unknown command: " + command);
}

}  // namespace gliopipe::pipeline
