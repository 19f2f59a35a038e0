#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gliopipe/preprocess.hpp"

using namespace gliopipe;

namespace {

MultiModalScan synthetic_scan(const Dim3& d, std::uint64_t seed) {
  MultiModalScan s;
  s.case_id = "syn";
  s.dim = d;
  s.spacing = {1, 1, 1};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.1f, 10.f);
  for (auto& v : s.volumes) {
    v = make_volume(d, s.spacing);
    for (auto& x : v.data) x = u(rng);
  }
  return s;
}

LabelMap zero_labels(const Dim3& d) {
  LabelMap lm;
  lm.dim = d;
  lm.spacing = {1, 1, 1};
  lm.grid.assign(voxel_count(d), 0);
  return lm;
}

}  // namespace

TEST_CASE("zscore: region values {1,3} map to {-1,+1}") {
  Volume v = make_volume({2, 1, 1}, {1, 1, 1});
  v.data = {1.f, 3.f};
  const ZScoreResult r = zscore_normalize(v);
  CHECK(r.volume.data[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(r.volume.data[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_FALSE(r.degenerate);
}

TEST_CASE("zscore: constant region is degenerate and zeroed") {
  Volume v = make_volume({3, 3, 1}, {1, 1, 1}, 5.f);
  const ZScoreResult r = zscore_normalize(v);
  CHECK(r.degenerate);
  for (float x : r.volume.data) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("zscore: background voxels stay zero and are excluded from stats") {
  Volume v = make_volume({4, 1, 1}, {1, 1, 1});
  v.data = {0.f, 1.f, 3.f, 0.f};
  const ZScoreResult r = zscore_normalize(v);
  CHECK(r.volume.data[0] == 0.f);
  CHECK(r.volume.data[3] == 0.f);
  CHECK(r.volume.data[1] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(r.volume.data[2] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("zscore with explicit mask restricts statistics to the mask") {
  Volume v = make_volume({4, 1, 1}, {1, 1, 1});
  v.data = {100.f, 1.f, 3.f, 100.f};
  BinaryMask m = make_mask({4, 1, 1}, {1, 1, 1});
  m.data = {0, 1, 1, 0};
  const ZScoreResult r = zscore_normalize(v, &m);
  CHECK(r.volume.data[1] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(r.volume.data[2] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.volume.data[0] == 0.f);
}

TEST_CASE("normalized volume has zero mean unit variance over the region") {
  Volume v = make_volume({16, 16, 8}, {1, 1, 1});
  std::mt19937 rng(3);
  std::normal_distribution<float> g(40.f, 7.f);
  for (auto& x : v.data) x = g(rng);
  const ZScoreResult r = zscore_normalize(v);
  double sum = 0, sq = 0;
  for (float x : r.volume.data) {
    sum += x;
    sq += double(x) * x;
  }
  const double n = double(r.volume.data.size());
  CHECK(std::abs(sum / n) < 1e-4);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("extract_slices drops the last 10 slices") {
  const Dim3 d{8, 8, 24};
  const MultiModalScan s = synthetic_scan(d, 1);
  const auto slices = extract_slices(s, zero_labels(d), SubregionId::WT);
  CHECK(slices.size() == 14);  // D - 10
  for (const auto& sl : slices) {
    CHECK(sl.image.c == 4);
    CHECK(sl.image.h == 8);
    CHECK(sl.image.w == 8);
    CHECK(sl.slice_index < 14);
    // tumor-free case: all-zero targets retained
    CHECK(std::all_of(sl.target.begin(), sl.target.end(),
                      [](std::uint8_t t) { return t == 0; }));
  }
}

TEST_CASE("extract_slices: depth 10 leaves nothing") {
  const Dim3 d{8, 8, 10};
  const MultiModalScan s = synthetic_scan(d, 2);
  CHECK_THROWS_AS(extract_slices(s, zero_labels(d), SubregionId::WT), EmptyDataset);
}

TEST_CASE("extract_slices targets follow the requested subregion") {
  const Dim3 d{4, 4, 12};
  const MultiModalScan s = synthetic_scan(d, 3);
  LabelMap lm = zero_labels(d);
  lm.grid[flat_index(d, 1, 1, 0)] = 2;  // edema
  lm.grid[flat_index(d, 2, 2, 0)] = 4;  // enhancing
  const auto wt = extract_slices(s, lm, SubregionId::WT);
  const auto et = extract_slices(s, lm, SubregionId::ET);
  // slice layout rows=y cols=x
  CHECK(wt[0].target[1 * 4 + 1] == 1);
  CHECK(wt[0].target[2 * 4 + 2] == 1);
  CHECK(et[0].target[1 * 4 + 1] == 0);
  CHECK(et[0].target[2 * 4 + 2] == 1);
}

TEST_CASE("split_dataset: 100 cases at 0.75 gives 75/25") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("case_" + std::to_string(1000 + i));
  const DatasetSplit sp = split_dataset(ids, 0.75, 42);
  CHECK(sp.train_ids.size() == 75);
  CHECK(sp.val_ids.size() == 25);

  // partition: no overlap, full coverage
  std::vector<std::string> all = sp.train_ids;
  all.insert(all.end(), sp.val_ids.begin(), sp.val_ids.end());
  std::sort(all.begin(), all.end());
  std::sort(ids.begin(), ids.end());
  CHECK(all == ids);
}

TEST_CASE("split_dataset is deterministic and seed-sensitive") {
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("c" + std::to_string(i));
  const DatasetSplit a = split_dataset(ids, 0.75, 7);
  const DatasetSplit b = split_dataset(ids, 0.75, 7);
  const DatasetSplit c = split_dataset(ids, 0.75, 8);
  CHECK(a.train_ids == b.train_ids);
  CHECK(a.val_ids == b.val_ids);
  CHECK(a.train_ids != c.train_ids);
}

TEST_CASE("split_dataset input order does not matter") {
  std::vector<std::string> ids = {"d", "a", "c", "b", "e", "f"};
  std::vector<std::string> sorted_ids = {"a", "b", "c", "d", "e", "f"};
  const DatasetSplit a = split_dataset(ids, 0.5, 9);
  const DatasetSplit b = split_dataset(sorted_ids, 0.5, 9);
  CHECK(a.train_ids == b.train_ids);
}

TEST_CASE("split_dataset keeps both sides nonempty and rejects tiny sets") {
  std::vector<std::string> two = {"a", "b"};
  const DatasetSplit sp = split_dataset(two, 0.99, 1);
  CHECK(sp.train_ids.size() == 1);
  CHECK(sp.val_ids.size() == 1);
  CHECK_THROWS_AS(split_dataset({"only"}, 0.75, 1), TooFewCases);
}
