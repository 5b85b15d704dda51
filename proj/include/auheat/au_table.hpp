#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "auheat/geometry.hpp"

namespace auheat {

// One ROI center: weighted landmark combination plus an offset expressed in
// face-local axes (x toward the image-right eye, y perpendicular down-face),
// in fractions of the inter-ocular distance.
struct CenterRule {
  std::vector<std::pair<int, double>> points;  // (landmark index, weight), weights sum to 1
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
};

struct AUEntry {
  int au = 0;
  std::array<CenterRule, 2> centers;
};

struct AUTable {
  int version = 1;
  std::vector<AUEntry> entries;

  std::vector<int> au_codes() const;
  int size() const { return static_cast<int>(entries.size()); }
  void validate() const;  // throws ValidationError on invariant violations
};

// AU codes with built-in center rules.
const std::vector<int>& supported_au_codes();

// Built-in table for the requested codes, in the requested order.
// Throws ValidationError for codes outside the supported set.
AUTable default_au_table(const std::vector<int>& au_codes);

std::string au_table_to_json(const AUTable& table);
AUTable au_table_from_json(const std::string& json_text);
void save_au_table(const std::filesystem::path& path, const AUTable& table);
AUTable load_au_table(const std::filesystem::path& path);

// Per-AU ROI center pairs in the landmark frame. Offsets follow the face
// axes derived from the eye centers, so results are equivariant to
// similarity transforms of the landmarks.
std::vector<std::array<Eigen::Vector2d, 2>> compute_roi_centers(const Landmarks68& landmarks, const AUTable& table);

}  // namespace auheat
