#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "auheat/geometry.hpp"
#include "auheat/heatmap.hpp"

namespace auheat {

struct ManifestRow {
  std::string image;    // path relative to the manifest directory
  std::string subject;
  Landmarks68 landmarks;
  std::map<int, int> labels;  // au code -> {0, 1}
};

// Dataset index: header.json {au_codes, frame_size, n_rows} + rows.jsonl.
struct Manifest {
  std::vector<int> au_codes;
  std::array<int, 2> frame_size{0, 0};  // (W, H)
  std::vector<ManifestRow> rows;
  std::filesystem::path root;  // directory holding header.json/rows.jsonl

  // Labels of one row ordered by `codes` (defaults to the header order).
  LabelVector labels_for(const ManifestRow& row, const std::vector<int>& codes = {}) const;
  std::vector<std::string> subjects() const;  // unique, sorted
};

// Accepts the corpus directory or a path to its header file.
// Schema-validated: image files must exist, rows carry exactly 136 landmark
// values and labels for exactly the header's AU codes.
Manifest load_manifest(const std::filesystem::path& path);

// Writes header.json + rows.jsonl atomically (temp + rename).
void save_manifest(const std::filesystem::path& dir, const Manifest& manifest);

}  // namespace auheat
