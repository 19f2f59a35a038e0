#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gliopipe/features.hpp"
#include "gliopipe/phantom.hpp"
#include "gliopipe/pipeline.hpp"

using namespace gliopipe;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("gliopipe_pl_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p.string()) << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small phantom dataset shared by the stage tests
fs::path phantom_root(const std::string& tag, int n_cases = 3) {
  const fs::path root = fresh_dir(tag);
  phantom::PhantomOptions opts;
  opts.n_cases = n_cases;
  opts.dim = {24, 24, 14};
  opts.seed = 11;
  phantom::write_phantom_dataset(root.string(), opts);
  return root;
}

}  // namespace

TEST_CASE("config: full file parses, defaults hold for omitted sections") {
  const fs::path dir = fresh_dir("cfg");
  write_text(dir / "cfg.json", R"({
    "seed": 9,
    "data": {"cases_dir": "/x/cases", "survival_csv": "/x/surv.csv"},
    "train": {"loss": "focal", "focal": {"alpha": 0.5, "gamma": 1.0},
              "epochs": 3, "batch_size": 2, "learning_rate": 0.001},
    "survival": {"n_trees": 7, "threshold_short": 250, "threshold_long": 500}
  })");
  const PipelineConfig cfg = load_config((dir / "cfg.json").string());
  CHECK(cfg.seed == 9);
  CHECK(cfg.data.cases_dir == "/x/cases");
  CHECK(cfg.train.loss == "focal");
  CHECK(cfg.train.focal.alpha == doctest::Approx(0.5));
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.survival.n_trees == 7);
  CHECK(cfg.thresholds().t1 == doctest::Approx(250));
  CHECK(cfg.network.encoder_maps == std::array<int, 3>{64, 128, 256});
  CHECK(cfg.train.split_fraction == doctest::Approx(0.75));
  CHECK(cfg.survival.mode == "resubstitution");
}

TEST_CASE("config: unknown keys rejected at every level") {
  const fs::path dir = fresh_dir("cfgbad");
  write_text(dir / "root.json", R"({"seed": 1, "bogus": 2})");
  CHECK_THROWS_AS(load_config((dir / "root.json").string()), ConfigError);
  write_text(dir / "nested.json", R"({"train": {"epochs": 1, "momentum": 0.9}})");
  CHECK_THROWS_AS(load_config((dir / "nested.json").string()), ConfigError);
  write_text(dir / "deep.json", R"({"train": {"focal": {"alpha": 0.5, "beta": 1}}})");
  CHECK_THROWS_AS(load_config((dir / "deep.json").string()), ConfigError);
}

TEST_CASE("config: value validation and bad JSON") {
  const fs::path dir = fresh_dir("cfgval");
  write_text(dir / "neg.json", R"({"train": {"epochs": -1}})");
  CHECK_THROWS_AS(load_config((dir / "neg.json").string()), ConfigError);
  write_text(dir / "frac.json", R"({"train": {"split_fraction": 1.5}})");
  CHECK_THROWS_AS(load_config((dir / "frac.json").string()), ConfigError);
  write_text(dir / "loss.json", R"({"train": {"loss": "hinge"}})");
  CHECK_THROWS_AS(load_config((dir / "loss.json").string()), ConfigError);
  write_text(dir / "syntax.json", "{ not json");
  CHECK_THROWS_AS(load_config((dir / "syntax.json").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("config hash is stable and sensitive to values") {
  const fs::path dir = fresh_dir("cfghash");
  write_text(dir / "a.json", R"({"seed": 5})");
  write_text(dir / "b.json", R"({"seed": 6})");
  const PipelineConfig a1 = load_config((dir / "a.json").string());
  const PipelineConfig a2 = load_config((dir / "a.json").string());
  const PipelineConfig b = load_config((dir / "b.json").string());
  CHECK(config_hash(a1) == config_hash(a2));
  CHECK(config_hash(a1) != config_hash(b));
}

TEST_CASE("checksums: FNV over strings and files agree") {
  const fs::path dir = fresh_dir("sum");
  const std::string content = "deterministic payload";
  write_text(dir / "f.txt", content);
  CHECK(file_checksum((dir / "f.txt").string()) == string_checksum(content));
  CHECK(string_checksum("a") != string_checksum("b"));
  CHECK_THROWS_AS(file_checksum((dir / "nope").string()), IoError);
}

TEST_CASE("manifest payload is deterministic; timestamp lives outside it") {
  const fs::path dir = fresh_dir("man");
  write_text(dir / "in.txt", "input data");
  const auto build = [&] {
    Manifest m;
    m.stage = "demo";
    m.config_hash = "abc";
    m.seed = 3;
    m.add_input((dir / "in.txt").string());
    return m;
  };
  const json j1 = json::parse(build().to_json());
  const json j2 = json::parse(build().to_json());
  CHECK(j1["payload"] == j2["payload"]);
  CHECK(j1["payload_checksum"] == j2["payload_checksum"]);
  CHECK(j1.contains("timestamp"));
  CHECK_FALSE(j1["payload"].contains("timestamp"));
  CHECK(string_checksum(j1["payload"].dump()) == j1["payload_checksum"].get<std::string>());
}

TEST_CASE("atomic_write_text leaves no temp file and replaces content") {
  const fs::path dir = fresh_dir("atomic");
  const fs::path p = dir / "out.txt";
  atomic_write_text(p.string(), "first");
  atomic_write_text(p.string(), "second");
  CHECK(read_text(p) == "second");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("evaluate stage: predictions equal to ground truth score perfectly") {
  const fs::path root = phantom_root("eval");
  const fs::path pred = fresh_dir("eval_pred");
  const fs::path out_dir = fresh_dir("eval_out");
  // copy each ground-truth segmentation as the "prediction"
  for (const auto& id : list_case_ids(root.string()))
    fs::copy_file(root / id / (id + "_seg.nii"), pred / (id + ".nii"));

  PipelineConfig cfg;
  cfg.evaluate.pred_dir = pred.string();
  cfg.evaluate.gt_dir = root.string();
  cfg.evaluate.out = (out_dir / "seg_report.json").string();
  pipeline::run(std::string("evaluate"), cfg);

  const json rep = json::parse(read_text(out_dir / "seg_report.json"));
  for (const auto& c : rep["cases"]) {
    for (const char* region : {"WT", "TC", "ET"}) {
      CHECK(c[region]["dice"].get<double>() == doctest::Approx(1.0));
      CHECK(c[region]["sensitivity"].get<double>() == doctest::Approx(1.0));
    }
  }
  CHECK(rep["summary"]["DSC"]["WT"]["mean"].get<double>() == doctest::Approx(1.0));
  CHECK(fs::exists(out_dir / "seg_report.csv"));
  CHECK(fs::exists(out_dir / "manifest.json"));
}

TEST_CASE("evaluate stage dependency errors") {
  PipelineConfig cfg;
  cfg.evaluate.pred_dir = "/nonexistent/preds";
  cfg.evaluate.gt_dir = "/nonexistent/gt";
  cfg.evaluate.out = "/tmp/never.json";
  CHECK_THROWS_AS(pipeline::run_evaluate(cfg), StageDependencyError);

  const fs::path empty = fresh_dir("eval_empty");
  cfg.evaluate.pred_dir = empty.string();
  cfg.evaluate.gt_dir = empty.string();
  CHECK_THROWS_AS(pipeline::run_evaluate(cfg), StageDependencyError);

  PipelineConfig unset;
  unset.evaluate.gt_dir = "/x";
  unset.evaluate.out = "/y";
  CHECK_THROWS_AS(pipeline::run_evaluate(unset), ConfigError);  // pred_dir unset
}

TEST_CASE("preprocess stage normalizes volumes and writes a manifest") {
  const fs::path root = phantom_root("prep", 2);
  const fs::path out = fresh_dir("prep_out");
  PipelineConfig cfg;
  cfg.data.cases_dir = root.string();
  cfg.preprocess.out_dir = out.string();
  pipeline::run_preprocess(cfg);

  for (const auto& id : list_case_ids(root.string())) {
    const MultiModalScan s = load_scan((out / id).string());
    // normalized: nonzero voxels should straddle zero
    double lo = 1e9, hi = -1e9;
    for (float v : s.volumes[0].data) {
      lo = std::min(lo, double(v));
      hi = std::max(hi, double(v));
    }
    CHECK(lo < 0);
    CHECK(hi > 0);
    CHECK(fs::exists(out / id / (id + "_seg.nii")));
  }
  const json man = json::parse(read_text(out / "manifest.json"));
  CHECK(man["payload"]["stage"] == "preprocess");
  CHECK_FALSE(man["payload"]["inputs"].empty());
  CHECK_FALSE(man["payload"]["outputs"].empty());
}

TEST_CASE("features -> survival-train -> predict -> eval roundtrip on phantoms") {
  const fs::path root = phantom_root("surv", 8);
  const fs::path work = fresh_dir("surv_work");
  const fs::path model_dir = fresh_dir("surv_model");
  const fs::path pred_dir = fresh_dir("surv_pred");
  const fs::path rep_dir = fresh_dir("surv_rep");

  PipelineConfig cfg;
  cfg.seed = 4;
  cfg.data.cases_dir = root.string();
  cfg.data.survival_csv = (root / "survival.csv").string();
  cfg.features.out_csv = (work / "features.csv").string();
  cfg.survival.model_path = (model_dir / "model.json").string();
  cfg.survival.pred_csv = (pred_dir / "pred.csv").string();
  cfg.survival.report_path = (rep_dir / "os_report.json").string();
  cfg.survival.n_trees = 30;

  pipeline::run_features(cfg);
  const auto rows = features::features_from_csv(cfg.features.out_csv);
  CHECK(rows.size() == 8);

  pipeline::run_survival_train(cfg);
  CHECK(fs::exists(cfg.survival.model_path));

  pipeline::run_survival_predict(cfg);
  CHECK(fs::exists(cfg.survival.pred_csv));

  pipeline::run_survival_eval(cfg);
  const json os = json::parse(read_text(cfg.survival.report_path));
  CHECK(os["n_cases"].get<int>() == 8);
  CHECK(os["accuracy"].get<double>() >= 0.0);
  CHECK(os["evaluation_mode"] == "resubstitution");

  // resubstitution on a forest should track the target ranking reasonably
  CHECK(os["spearmanr"].get<double>() > 0.3);

  // report stage combines the OS report without recomputation
  PipelineConfig rcfg = cfg;
  rcfg.report.out_dir = (rep_dir / "final").string();
  pipeline::run_report(rcfg);
  const json combined = json::parse(read_text(fs::path(rcfg.report.out_dir) / "report.json"));
  CHECK(combined["overall_survival"]["n_cases"].get<int>() == 8);
}

TEST_CASE("survival-train without the features artifact is a dependency error") {
  PipelineConfig cfg;
  cfg.features.out_csv = "/nonexistent/features.csv";
  cfg.data.survival_csv = "/nonexistent/survival.csv";
  cfg.survival.model_path = "/tmp/never_model.json";
  CHECK_THROWS_AS(pipeline::run_survival_train(cfg), StageDependencyError);
}

TEST_CASE("segment stage without weight files is a dependency error") {
  const fs::path root = phantom_root("seg_missing", 1);
  const fs::path empty = fresh_dir("seg_now");
  PipelineConfig cfg;
  cfg.data.cases_dir = root.string();
  cfg.segment.weights_dir = empty.string();
  cfg.segment.out_dir = (empty / "out").string();
  CHECK_THROWS_AS(pipeline::run_segment(cfg), StageDependencyError);
}

TEST_CASE("unknown command is a config error") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(pipeline::run(std::string("transmogrify"), cfg), ConfigError);
}
