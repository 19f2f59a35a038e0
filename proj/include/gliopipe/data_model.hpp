#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gliopipe/volume.hpp"

namespace gliopipe {

/// Four co-registered modality volumes for one case, fixed order
/// T1, T2, T1c, FLAIR.
struct MultiModalScan {
  std::string case_id;
  std::array<Volume, 4> volumes;
  Dim3 dim{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
};

constexpr std::array<const char*, 4> kModalityNames = {"t1", "t2", "t1ce", "flair"};

/// Integer label volume over the alphabet {0, 1, 2, 4}.
struct LabelMap {
  std::string case_id;
  Dim3 dim{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> grid;

  std::uint8_t at(int x, int y, int z) const { return grid[flat_index(dim, x, y, z)]; }
};

/// Tumor subregions and their label sets.
enum class SubregionId { WT, TC, ET, NCR, ED };

const char* subregion_name(SubregionId r);
SubregionId subregion_from_name(const std::string& name);

/// True iff the raw label belongs to the subregion's label set
/// (WT={1,2,4}, TC={1,4}, ET={4}, NCR={1}, ED={2}).
bool label_in_subregion(std::uint8_t label, SubregionId r);

enum class ResectionStatus { GTR, STR, NA };

struct SurvivalRecord {
  std::string case_id;
  double age = 0.0;
  std::optional<double> survival_days;
  ResectionStatus resection = ResectionStatus::NA;
};

/// Column names of the survival metadata CSV.
struct SurvivalColumns {
  std::string id = "BraTS19ID";
  std::string age = "Age";
  std::string survival = "Survival";
  std::string resection = "ResectionStatus";
};

/// File-layout conventions for a case directory:
/// <case_id>/<case_id>_<modality>.<ext> plus <case_id>_seg.<ext>.
struct NamingConvention {
  std::array<std::string, 4> modality_suffixes = {"t1", "t2", "t1ce", "flair"};
  std::string seg_suffix = "seg";
  std::vector<std::string> extensions = {".nii", ".nii.gz"};
};

MultiModalScan load_scan(const std::string& case_dir,
                         const NamingConvention& naming = {});

LabelMap load_label_map(const std::string& path);

/// Companion ground-truth labels for a case directory.
LabelMap load_case_labels(const std::string& case_dir,
                          const NamingConvention& naming = {});

void save_label_map(const std::string& path, const LabelMap& labels);

BinaryMask subregion_mask(const LabelMap& labels, SubregionId region);

std::vector<SurvivalRecord> load_survival_table(const std::string& path,
                                                const SurvivalColumns& cols = {});

/// Case ids of the immediate subdirectories of a dataset root, sorted.
std::vector<std::string> list_case_ids(const std::string& root);

}  // namespace gliopipe
