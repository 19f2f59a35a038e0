#include "gliopipe/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gliopipe/nifti.hpp"

namespace fs = std::filesystem;

namespace gliopipe {

const char* subregion_name(SubregionId r) {
  switch (r) {
    case SubregionId::WT: return "WT";
    case SubregionId::TC: return "TC";
    case SubregionId::ET: return "ET";
    case SubregionId::NCR: return "NCR";
    case SubregionId::ED: return "ED";
  }
  return "?";
}

SubregionId subregion_from_name(const std::string& name) {
  if (name == "WT") return SubregionId::WT;
  if (name == "TC") return SubregionId::TC;
  if (name == "ET") return SubregionId::ET;
  if (name == "NCR") return SubregionId::NCR;
  if (name == "ED") return SubregionId::ED;
  throw InvalidInput("unknown subregion name: " + name);
}

bool label_in_subregion(std::uint8_t label, SubregionId r) {
  switch (r) {
    case SubregionId::WT: return label == 1 || label == 2 || label == 4;
    case SubregionId::TC: return label == 1 || label == 4;
    case SubregionId::ET: return label == 4;
    case SubregionId::NCR: return label == 1;
    case SubregionId::ED: return label == 2;
  }
  return false;
}

namespace {

std::string find_case_file(const std::string& case_dir, const std::string& case_id,
                           const std::string& suffix, const NamingConvention& naming) {
  for (const auto& ext : naming.extensions) {
    fs::path p = fs::path(case_dir) / (case_id + "_" + suffix + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

}  // namespace

MultiModalScan load_scan(const std::string& case_dir, const NamingConvention& naming) {
  if (!fs::is_directory(case_dir)) throw IoError("not a case directory: " + case_dir);
  const std::string case_id = fs::path(case_dir).filename().string();

  MultiModalScan scan;
  scan.case_id = case_id;
  for (int m = 0; m < 4; ++m) {
    std::string path = find_case_file(case_dir, case_id, naming.modality_suffixes[m], naming);
    if (path.empty())
      throw MissingModality("missing modality '" + naming.modality_suffixes[m] +
                            "' for case " + case_id);
    scan.volumes[m] = nifti::read_volume(path);
    if (m == 0) {
      scan.dim = scan.volumes[0].dim;
      scan.spacing = scan.volumes[0].spacing;
    } else if (scan.volumes[m].dim != scan.dim) {
      throw ShapeMismatch("modality volumes disagree on shape for case " + case_id);
    }
  }
  return scan;
}

LabelMap load_label_map(const std::string& path) {
  Volume v = nifti::read_volume(path);
  LabelMap lm;
  lm.case_id = fs::path(path).filename().string();
  lm.dim = v.dim;
  lm.spacing = v.spacing;
  lm.grid.resize(v.data.size());

  std::map<int, std::size_t> bad;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    int lbl = int(std::lround(v.data[i]));
    if (lbl != 0 && lbl != 1 && lbl != 2 && lbl != 4) {
      ++bad[lbl];
      continue;
    }
    lm.grid[i] = std::uint8_t(lbl);
  }
  if (!bad.empty()) {
    auto worst = std::max_element(bad.begin(), bad.end(),
                                  [](auto& a, auto& b) { return a.second < b.second; });
    throw InvalidLabel(worst->first, worst->second);
  }
  return lm;
}

LabelMap load_case_labels(const std::string& case_dir, const NamingConvention& naming) {
  const std::string case_id = fs::path(case_dir).filename().string();
  std::string path = find_case_file(case_dir, case_id, naming.seg_suffix, naming);
  if (path.empty()) throw IoError("missing segmentation file for case " + case_id);
  LabelMap lm = load_label_map(path);
  lm.case_id = case_id;
  return lm;
}

void save_label_map(const std::string& path, const LabelMap& labels) {
  nifti::write_labels(path, labels.dim, labels.spacing, labels.grid);
}

BinaryMask subregion_mask(const LabelMap& labels, SubregionId region) {
  BinaryMask m;
  m.dim = labels.dim;
  m.spacing = labels.spacing;
  m.data.resize(labels.grid.size());
  for (std::size_t i = 0; i < labels.grid.size(); ++i)
    m.data[i] = label_in_subregion(labels.grid[i], region) ? 1 : 0;
  return m;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace and CR
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

ResectionStatus parse_resection(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::toupper);
  if (s == "GTR") return ResectionStatus::GTR;
  if (s == "STR") return ResectionStatus::STR;
  return ResectionStatus::NA;  // anything else never participates downstream
}

}  // namespace

std::vector<SurvivalRecord> load_survival_table(const std::string& path,
                                                const SurvivalColumns& cols) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open survival table: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  auto header = split_csv_line(line);

  auto col_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    return -1;
  };
  int ci = col_of(cols.id), ca = col_of(cols.age), cs = col_of(cols.survival),
      cr = col_of(cols.resection);
  if (ci < 0 || ca < 0)
    throw ParseError(1, "missing required columns '" + cols.id + "'/'" + cols.age + "'");

  std::vector<SurvivalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    if (int(f.size()) <= std::max({ci, ca})) throw ParseError(lineno, "too few fields");

    SurvivalRecord rec;
    rec.case_id = f[ci];
    try {
      std::size_t pos = 0;
      rec.age = std::stod(f[ca], &pos);
      if (pos != f[ca].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(lineno, "non-numeric age '" + f[ca] + "'");
    }
    if (rec.age <= 0) throw ParseError(lineno, "non-positive age");

    if (cs >= 0 && int(f.size()) > cs && !f[cs].empty()) {
      try {
        std::size_t pos = 0;
        double days = std::stod(f[cs], &pos);
        if (pos != f[cs].size()) throw std::invalid_argument("trailing");
        if (days < 0) throw ParseError(lineno, "negative survival days");
        rec.survival_days = days;
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception&) {
        // dataset ships entries like "ALIVE (361 days later)"; treat as absent
        rec.survival_days.reset();
      }
    }
    if (cr >= 0 && int(f.size()) > cr) rec.resection = parse_resection(f[cr]);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> list_case_ids(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root);
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace gliopipe
