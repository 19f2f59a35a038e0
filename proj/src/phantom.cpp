#include "gliopipe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "gliopipe/manifest.hpp"
#include "gliopipe/nifti.hpp"

namespace fs = std::filesystem;

namespace gliopipe::phantom {

PhantomCase make_phantom_case(const std::string& case_id, const PhantomOptions& opts,
                              std::uint64_t case_seed) {
  std::mt19937_64 rng(case_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, opts.noise_sigma);

  const auto& d = opts.dim;
  const double cx = 0.5 * (d[0] - 1), cy = 0.5 * (d[1] - 1), cz = 0.5 * (d[2] - 1);
  const double bx = 0.46 * d[0], by = 0.46 * d[1], bz = 0.46 * d[2];

  // tumor must live inside the slices that survive preprocessing
  const int usable_z = d[2] - 11;
  const double tz = 4.0 + unit(rng) * std::max(1.0, usable_z - 14.0) + 3.0;
  const double tx = cx + (unit(rng) - 0.5) * 0.3 * d[0];
  const double ty = cy + (unit(rng) - 0.5) * 0.3 * d[1];
  const double rx = (0.14 + 0.08 * unit(rng)) * d[0];
  const double ry = (0.14 + 0.08 * unit(rng)) * d[1];
  const double rz = std::min(0.28 * d[2], double(usable_z) - tz - 1.0);

  PhantomCase out;
  out.labels.case_id = case_id;
  out.labels.dim = d;
  out.labels.spacing = opts.spacing;
  out.labels.grid.assign(voxel_count(d), 0);

  out.scan.case_id = case_id;
  out.scan.dim = d;
  out.scan.spacing = opts.spacing;
  for (auto& v : out.scan.volumes) v = make_volume(d, opts.spacing);

  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const double be = std::pow((x - cx) / bx, 2) + std::pow((y - cy) / by, 2) +
                          std::pow((z - cz) / bz, 2);
        if (be > 1.0) continue;  // outside brain: all modalities zero

        const double te = std::sqrt(std::pow((x - tx) / rx, 2) +
                                    std::pow((y - ty) / ry, 2) +
                                    std::pow((z - tz) / rz, 2));
        std::uint8_t label = 0;
        if (te <= 0.4) label = 4;       // enhancing core
        else if (te <= 0.7) label = 1;  // necrotic shell
        else if (te <= 1.0) label = 2;  // edema rim

        const std::size_t i = flat_index(d, x, y, z);
        out.labels.grid[i] = label;

        // modality-specific contrast: T1 dark necrosis, T2 bright edema,
        // T1c bright enhancement, FLAIR bright whole tumor
        double t1 = 1.0, t2 = 1.0, t1c = 1.0, flair = 1.0;
        if (label == 1) { t1 = 0.5; t2 = 1.4; flair = 1.9; }
        if (label == 2) { t2 = 2.0; flair = 2.0; }
        if (label == 4) { t1c = 2.2; t2 = 1.3; flair = 1.9; }

        const double vals[4] = {t1, t2, t1c, flair};
        for (int m = 0; m < 4; ++m)
          out.scan.volumes[m].data[i] =
              float(std::max(0.05, vals[m] + noise(rng)));
      }

  std::uniform_real_distribution<double> age_dist(40.0, 75.0);
  out.age = age_dist(rng);
  std::size_t wt = 0, brain = 0;
  for (std::size_t i = 0; i < out.labels.grid.size(); ++i) {
    if (out.scan.volumes[0].data[i] != 0.f) ++brain;
    if (out.labels.grid[i]) ++wt;
  }
  const double proportion = brain ? double(wt) / double(brain) : 0.0;
  out.survival_days =
      std::clamp(900.0 - 4000.0 * proportion - 6.0 * (out.age - 40.0) + 40.0 * noise(rng),
                 30.0, 1700.0);
  return out;
}

void write_phantom_dataset(const std::string& root, const PhantomOptions& opts) {
  fs::create_directories(root);
  std::ostringstream csv;
  csv << "BraTS19ID,Age,Survival,ResectionStatus\n";

  for (int c = 0; c < opts.n_cases; ++c) {
    std::ostringstream id_os;
    id_os << "phantom_" << (c < 9 ? "0" : "") << (c + 1);
    const std::string id = id_os.str();
    PhantomCase pc = make_phantom_case(id, opts, opts.seed * 1000003ull + c);

    const fs::path dir = fs::path(root) / id;
    fs::create_directories(dir);
    NamingConvention naming;
    for (int m = 0; m < 4; ++m)
      nifti::write_volume((dir / (id + "_" + naming.modality_suffixes[m] + ".nii")).string(),
                          pc.scan.volumes[m]);
    save_label_map((dir / (id + "_seg.nii")).string(), pc.labels);

    csv << id << "," << pc.age << "," << int(std::lround(pc.survival_days)) << ",GTR\n";
  }
  atomic_write_text((fs::path(root) / "survival.csv").string(), csv.str());
}

}  // namespace gliopipe::phantom
