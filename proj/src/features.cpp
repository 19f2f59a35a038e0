#include "gliopipe/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace gliopipe::features {

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "edema_voxels",   "necrosis_voxels", "enhancing_voxels", "tumor_extent",
      "tumor_proportion", "elongation",    "flatness",         "minor_axis_mm",
      "major_axis_mm",  "diam2d_row_mm",   "diam2d_col_mm",    "diam2d_slice_mm",
      "diam3d_mm",      "sphericity",      "surface_area_mm2", "mesh_volume_mm3",
      "age_years"};
  return names;
}

std::string feature_schema_fingerprint() {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& n : feature_names())
    for (char c : n) {
      h ^= std::uint8_t(c);
      h *= 1099511628211ull;
    }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

StatisticalFeatures statistical_features(const LabelMap& labels,
                                         const BinaryMask& brain_mask) {
  if (labels.dim != brain_mask.dim) throw ShapeError("brain mask shape mismatch");
  std::size_t brain = 0;
  for (auto b : brain_mask.data) brain += b;
  if (brain == 0) throw EmptyBrainMask("brain mask is empty");

  StatisticalFeatures f;
  const auto& d = labels.dim;
  int lo[3] = {d[0], d[1], d[2]}, hi[3] = {-1, -1, -1};
  std::size_t wt = 0;
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const std::uint8_t lbl = labels.at(x, y, z);
        if (lbl == 2) f.edema_voxels += 1;
        else if (lbl == 1) f.necrosis_voxels += 1;
        else if (lbl == 4) f.enhancing_voxels += 1;
        if (lbl == 1 || lbl == 2 || lbl == 4) {
          ++wt;
          lo[0] = std::min(lo[0], x); hi[0] = std::max(hi[0], x);
          lo[1] = std::min(lo[1], y); hi[1] = std::max(hi[1], y);
          lo[2] = std::min(lo[2], z); hi[2] = std::max(hi[2], z);
        }
      }
  if (wt > 0) {
    const double bbox = double(hi[0] - lo[0] + 1) * double(hi[1] - lo[1] + 1) *
                        double(hi[2] - lo[2] + 1);
    f.tumor_extent = bbox / double(brain);
    f.tumor_proportion = double(wt) / double(brain);
  }
  return f;
}

namespace {

struct Point {
  double x, y, z;
};

double max_pairwise_sq(const std::vector<Point>& pts) {
  double best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y,
                   dz = pts[i].z - pts[j].z;
      best = std::max(best, dx * dx + dy * dy + dz * dz);
    }
  return best;
}

}  // namespace

ShapeFeatures shape_features(const BinaryMask& mask, const Spacing& sp) {
  const auto& d = mask.dim;
  std::size_t n = 0;
  for (auto b : mask.data) n += b;
  if (n == 0) throw EmptyRegion("shape features of an empty mask");

  ShapeFeatures f;

  // covariance of voxel centres in physical coordinates
  double mean[3] = {0, 0, 0};
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x)
        if (mask.at(x, y, z)) {
          mean[0] += x * sp[0];
          mean[1] += y * sp[1];
          mean[2] += z * sp[2];
        }
  for (double& m : mean) m /= double(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x)
        if (mask.at(x, y, z)) {
          const Eigen::Vector3d p(x * sp[0] - mean[0], y * sp[1] - mean[1],
                                  z * sp[2] - mean[2]);
          cov += p * p.transpose();
        }
  cov /= double(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // ascending order from Eigen; we want l1 >= l2 >= l3
  const double l3 = std::max(0.0, eig.eigenvalues()[0]);
  const double l2 = std::max(0.0, eig.eigenvalues()[1]);
  const double l1 = std::max(0.0, eig.eigenvalues()[2]);

  constexpr double tiny = 1e-30;
  f.elongation = l1 > tiny ? std::sqrt(l2 / l1) : 1.0;
  f.flatness = l1 > tiny ? std::sqrt(l3 / l1) : 1.0;
  f.major_axis_mm = 4.0 * std::sqrt(l1);
  f.minor_axis_mm = 4.0 * std::sqrt(l2);

  // boundary voxels and exposed faces
  std::vector<Point> boundary;
  double area = 0;
  const double face[3] = {sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]};
  auto inside = [&](int x, int y, int z) {
    return x >= 0 && x < d[0] && y >= 0 && y < d[1] && z >= 0 && z < d[2] &&
           mask.at(x, y, z);
  };
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        int exposed = 0;
        if (!inside(x - 1, y, z)) { area += face[0]; ++exposed; }
        if (!inside(x + 1, y, z)) { area += face[0]; ++exposed; }
        if (!inside(x, y - 1, z)) { area += face[1]; ++exposed; }
        if (!inside(x, y + 1, z)) { area += face[1]; ++exposed; }
        if (!inside(x, y, z - 1)) { area += face[2]; ++exposed; }
        if (!inside(x, y, z + 1)) { area += face[2]; ++exposed; }
        if (exposed) boundary.push_back({x * sp[0], y * sp[1], z * sp[2]});
      }

  f.surface_area_mm2 = area;
  f.mesh_volume_mm3 = double(n) * sp[0] * sp[1] * sp[2];
  f.sphericity =
      std::cbrt(36.0 * std::numbers::pi * f.mesh_volume_mm3 * f.mesh_volume_mm3) / area;

  f.diam3d_mm = std::sqrt(max_pairwise_sq(boundary));

  // 2D diameters: max over all planes of the family of the in-plane maximum
  auto planar_diam = [&](auto key_of) {
    std::map<int, std::vector<Point>> planes;
    for (const auto& p : boundary) planes[key_of(p)].push_back(p);
    double best = 0;
    for (auto& [k, pts] : planes) best = std::max(best, max_pairwise_sq(pts));
    return std::sqrt(best);
  };
  f.diam2d_row_mm = planar_diam([&](const Point& p) { return int(std::lround(p.y / sp[1])); });
  f.diam2d_col_mm = planar_diam([&](const Point& p) { return int(std::lround(p.x / sp[0])); });
  f.diam2d_slice_mm = planar_diam([&](const Point& p) { return int(std::lround(p.z / sp[2])); });

  return f;
}

FeatureVector build_feature_vector(const LabelMap& labels, const BinaryMask& brain_mask,
                                   double age_years) {
  FeatureVector v;
  v.case_id = labels.case_id;

  const StatisticalFeatures st = statistical_features(labels, brain_mask);
  v.values[0] = st.edema_voxels;
  v.values[1] = st.necrosis_voxels;
  v.values[2] = st.enhancing_voxels;
  v.values[3] = st.tumor_extent;
  v.values[4] = st.tumor_proportion;

  BinaryMask tc = subregion_mask(labels, SubregionId::TC);
  tc.spacing = labels.spacing;
  bool empty = std::find(tc.data.begin(), tc.data.end(), 1) == tc.data.end();
  if (empty) {
    v.empty_core = true;  // shape slots stay zero
  } else {
    const ShapeFeatures sh = shape_features(tc, labels.spacing);
    v.values[5] = sh.elongation;
    v.values[6] = sh.flatness;
    v.values[7] = sh.minor_axis_mm;
    v.values[8] = sh.major_axis_mm;
    v.values[9] = sh.diam2d_row_mm;
    v.values[10] = sh.diam2d_col_mm;
    v.values[11] = sh.diam2d_slice_mm;
    v.values[12] = sh.diam3d_mm;
    v.values[13] = sh.sphericity;
    v.values[14] = sh.surface_area_mm2;
    v.values[15] = sh.mesh_volume_mm3;
  }
  v.values[16] = age_years;
  return v;
}

std::string features_to_csv(const std::vector<FeatureVector>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "case_id";
  for (const auto& n : feature_names()) os << "," << n;
  os << ",empty_core\n";
  for (const auto& r : rows) {
    os << r.case_id;
    for (double v : r.values) os << "," << v;
    os << "," << (r.empty_core ? 1 : 0) << "\n";
  }
  return os.str();
}

std::vector<FeatureVector> features_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open features CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty features CSV");

  // header must match the schema exactly
  std::ostringstream expect;
  expect << "case_id";
  for (const auto& n : feature_names()) expect << "," << n;
  expect << ",empty_core";
  if (line != expect.str())
    throw FeatureSchemaMismatch("features CSV header does not match schema");

  std::vector<FeatureVector> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string field;
    FeatureVector v;
    if (!std::getline(ss, v.case_id, ',')) throw ParseError(lineno, "missing case id");
    for (int i = 0; i < kFeatureCount; ++i) {
      if (!std::getline(ss, field, ',')) throw ParseError(lineno, "too few fields");
      try {
        v.values[i] = std::stod(field);
      } catch (const std::exception&) {
        throw ParseError(lineno, "non-numeric feature '" + field + "'");
      }
    }
    if (std::getline(ss, field, ',')) v.empty_core = field == "1";
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace gliopipe::features
