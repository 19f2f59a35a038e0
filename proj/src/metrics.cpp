#include "gliopipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gliopipe::metrics {

using json = nlohmann::json;

namespace {

void check_shapes(const BinaryMask& a, const BinaryMask& b) {
  if (a.dim != b.dim) throw ShapeError("mask shapes differ");
}

/// Voxels of the mask with at least one 6-neighbour outside the mask
/// (grid borders count as outside).
std::vector<std::uint8_t> boundary_of(const BinaryMask& m) {
  const auto& d = m.dim;
  std::vector<std::uint8_t> out(m.data.size(), 0);
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = flat_index(d, x, y, z);
        if (!m.data[i]) continue;
        const bool edge =
            x == 0 || x == d[0] - 1 || y == 0 || y == d[1] - 1 || z == 0 || z == d[2] - 1;
        if (edge || !m.data[flat_index(d, x - 1, y, z)] ||
            !m.data[flat_index(d, x + 1, y, z)] || !m.data[flat_index(d, x, y - 1, z)] ||
            !m.data[flat_index(d, x, y + 1, z)] || !m.data[flat_index(d, x, y, z - 1)] ||
            !m.data[flat_index(d, x, y, z + 1)])
          out[i] = 1;
      }
  return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher 1D squared distance transform with squared
// sample spacing w (lower envelope of parabolas).
void dt1d(std::vector<double>& f, double w, std::vector<int>& v, std::vector<double>& z,
          std::vector<double>& scratch) {
  const int n = int(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (f[v[0]] == kInf && k == 0) {
      v[0] = q;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    if (f[v[0]] == kInf) {
      scratch[q] = kInf;
      continue;
    }
    while (z[k + 1] < q) ++k;
    scratch[q] = w * (q - v[k]) * (q - v[k]) + f[v[k]];
  }
  std::copy(scratch.begin(), scratch.begin() + n, f.begin());
}

// Exact squared Euclidean distance (mm^2) to the nearest site voxel centre.
std::vector<double> squared_edt(const std::vector<std::uint8_t>& sites, const Dim3& d,
                                const Spacing& sp) {
  std::vector<double> g(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) g[i] = sites[i] ? 0.0 : kInf;

  const int maxdim = std::max({d[0], d[1], d[2]});
  std::vector<double> f(maxdim), z(maxdim + 1), scratch(maxdim);
  std::vector<int> v(maxdim);

  // x pass
  for (int zz = 0; zz < d[2]; ++zz)
    for (int y = 0; y < d[1]; ++y) {
      f.resize(d[0]);
      for (int x = 0; x < d[0]; ++x) f[x] = g[flat_index(d, x, y, zz)];
      dt1d(f, sp[0] * sp[0], v, z, scratch);
      for (int x = 0; x < d[0]; ++x) g[flat_index(d, x, y, zz)] = f[x];
      f.resize(maxdim);
    }
  // y pass
  for (int zz = 0; zz < d[2]; ++zz)
    for (int x = 0; x < d[0]; ++x) {
      f.resize(d[1]);
      for (int y = 0; y < d[1]; ++y) f[y] = g[flat_index(d, x, y, zz)];
      dt1d(f, sp[1] * sp[1], v, z, scratch);
      for (int y = 0; y < d[1]; ++y) g[flat_index(d, x, y, zz)] = f[y];
      f.resize(maxdim);
    }
  // z pass
  for (int y = 0; y < d[1]; ++y)
    for (int x = 0; x < d[0]; ++x) {
      f.resize(d[2]);
      for (int zz = 0; zz < d[2]; ++zz) f[zz] = g[flat_index(d, x, y, zz)];
      dt1d(f, sp[2] * sp[2], v, z, scratch);
      for (int zz = 0; zz < d[2]; ++zz) g[flat_index(d, x, y, zz)] = f[zz];
      f.resize(maxdim);
    }
  return g;
}

std::vector<double> directed_distances(const std::vector<std::uint8_t>& from_boundary,
                                       const std::vector<double>& sq_dist_to_other) {
  std::vector<double> out;
  for (std::size_t i = 0; i < from_boundary.size(); ++i)
    if (from_boundary[i]) out.push_back(std::sqrt(sq_dist_to_other[i]));
  return out;
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInput("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q * double(values.size() - 1);
  const std::size_t lo = std::size_t(rank);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - double(lo);
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  check_shapes(pred, gt);
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    inter += pred.data[i] & gt.data[i];
    p += pred.data[i];
    g += gt.data[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * double(inter) / double(p + g);
}

double sensitivity(const BinaryMask& pred, const BinaryMask& gt) {
  check_shapes(pred, gt);
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    inter += pred.data[i] & gt.data[i];
    p += pred.data[i];
    g += gt.data[i];
  }
  if (g == 0) return p == 0 ? 1.0 : 0.0;
  return double(inter) / double(g);
}

std::optional<double> hausdorff95(const BinaryMask& pred, const BinaryMask& gt) {
  check_shapes(pred, gt);
  const bool p_empty = std::find(pred.data.begin(), pred.data.end(), 1) == pred.data.end();
  const bool g_empty = std::find(gt.data.begin(), gt.data.end(), 1) == gt.data.end();
  if (p_empty && g_empty) return 0.0;
  if (p_empty != g_empty) return std::nullopt;

  const auto bp = boundary_of(pred);
  const auto bg = boundary_of(gt);
  const auto dist_to_g = squared_edt(bg, pred.dim, pred.spacing);
  const auto dist_to_p = squared_edt(bp, pred.dim, pred.spacing);

  const auto d_pg = directed_distances(bp, dist_to_g);
  const auto d_gp = directed_distances(bg, dist_to_p);
  return std::max(percentile(d_pg, 0.95), percentile(d_gp, 0.95));
}

CaseMetrics evaluate_case(const LabelMap& pred, const LabelMap& gt) {
  if (pred.dim != gt.dim) throw ShapeError("prediction and ground truth shapes differ");
  CaseMetrics m;
  m.case_id = gt.case_id.empty() ? pred.case_id : gt.case_id;

  const std::array<SubregionId, 3> regions = {SubregionId::WT, SubregionId::TC,
                                              SubregionId::ET};
  RegionScores* out[3] = {&m.wt, &m.tc, &m.et};
  for (int r = 0; r < 3; ++r) {
    BinaryMask pm = subregion_mask(pred, regions[r]);
    BinaryMask gm = subregion_mask(gt, regions[r]);
    pm.spacing = gt.spacing;
    out[r]->dice = dice(pm, gm);
    out[r]->sensitivity = sensitivity(pm, gm);
    out[r]->hausdorff95 = hausdorff95(pm, gm);
  }
  return m;
}

namespace {

Stats stats_of(const std::vector<double>& vals, int excluded) {
  Stats s;
  s.n = int(vals.size());
  s.excluded = excluded;
  if (vals.empty()) return s;
  double sum = 0, sum2 = 0;
  for (double v : vals) {
    sum += v;
    sum2 += v * v;
  }
  s.mean = sum / double(vals.size());
  s.stddev = std::sqrt(std::max(0.0, sum2 / double(vals.size()) - s.mean * s.mean));
  s.median = percentile(vals, 0.5);
  s.q25 = percentile(vals, 0.25);
  s.q75 = percentile(vals, 0.75);
  return s;
}

const char* kRegionNames[3] = {"ET", "WT", "TC"};
const char* kMetricNames[3] = {"DSC", "Sensitivity", "Hausdorff95"};

const RegionScores& region_of(const CaseMetrics& c, int col) {
  switch (col) {
    case 0: return c.et;
    case 1: return c.wt;
    default: return c.tc;
  }
}

}  // namespace

SummaryTable aggregate(const std::vector<CaseMetrics>& cases) {
  if (cases.empty()) throw EmptyInput("no case metrics to aggregate");
  SummaryTable t;
  t.n_cases = int(cases.size());
  for (int reg = 0; reg < 3; ++reg) {
    std::vector<double> d, s, h;
    int excluded = 0;
    for (const auto& c : cases) {
      const RegionScores& rs = region_of(c, reg);
      d.push_back(rs.dice);
      s.push_back(rs.sensitivity);
      if (rs.hausdorff95)
        h.push_back(*rs.hausdorff95);
      else
        ++excluded;
    }
    t.cells[0][reg] = stats_of(d, 0);
    t.cells[1][reg] = stats_of(s, 0);
    t.cells[2][reg] = stats_of(h, excluded);
  }
  return t;
}

std::string summary_to_csv(const SummaryTable& t) {
  std::ostringstream os;
  os << "Statistic";
  for (int m = 0; m < 3; ++m)
    for (int r = 0; r < 3; ++r) os << "," << kMetricNames[m] << "_" << kRegionNames[r];
  os << "\n";
  const char* rows[5] = {"Mean", "StdDev", "Median", "25quantile", "75quantile"};
  for (int row = 0; row < 5; ++row) {
    os << rows[row];
    for (int m = 0; m < 3; ++m)
      for (int r = 0; r < 3; ++r) {
        const Stats& s = t.cells[m][r];
        const double v = row == 0   ? s.mean
                         : row == 1 ? s.stddev
                         : row == 2 ? s.median
                         : row == 3 ? s.q25
                                    : s.q75;
        os << "," << v;
      }
    os << "\n";
  }
  os << "Excluded";
  for (int m = 0; m < 3; ++m)
    for (int r = 0; r < 3; ++r) os << "," << t.cells[m][r].excluded;
  os << "\n";
  return os.str();
}

std::string report_to_json(const std::vector<CaseMetrics>& cases, const SummaryTable& t) {
  json j;
  j["n_cases"] = t.n_cases;
  json per_case = json::array();
  auto scores_json = [](const RegionScores& rs) {
    json r;
    r["dice"] = rs.dice;
    r["sensitivity"] = rs.sensitivity;
    if (rs.hausdorff95)
      r["hausdorff95"] = *rs.hausdorff95;
    else
      r["hausdorff95"] = nullptr;
    return r;
  };
  for (const auto& c : cases) {
    json cj;
    cj["case_id"] = c.case_id;
    cj["WT"] = scores_json(c.wt);
    cj["TC"] = scores_json(c.tc);
    cj["ET"] = scores_json(c.et);
    per_case.push_back(cj);
  }
  j["cases"] = per_case;
  json summary;
  for (int m = 0; m < 3; ++m)
    for (int r = 0; r < 3; ++r) {
      const Stats& s = t.cells[m][r];
      summary[kMetricNames[m]][kRegionNames[r]] = {
          {"mean", s.mean},       {"stddev", s.stddev}, {"median", s.median},
          {"q25", s.q25},         {"q75", s.q75},       {"n", s.n},
          {"excluded", s.excluded}};
    }
  j["summary"] = summary;
  return j.dump(2);
}

}  // namespace gliopipe::metrics
