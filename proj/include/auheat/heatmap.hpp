#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <vector>

namespace auheat {

// Binary AU occurrences, ordered like the active AUTable.
using LabelVector = std::vector<int>;

// n signed heatmaps in [-1, 1], one per AU.
struct HeatmapStack {
  std::vector<Eigen::ArrayXXf> maps;  // each (H, W)
  std::vector<int> au_codes;          // ordering metadata, may be empty

  int n() const { return static_cast<int>(maps.size()); }
  int height() const { return maps.empty() ? 0 : static_cast<int>(maps[0].rows()); }
  int width() const { return maps.empty() ? 0 : static_cast<int>(maps[0].cols()); }
};

struct GaussianParams {
  double sigma = 20.0;  // pixels, at the heatmap's native resolution
};

// The default sigma is defined at 128 px and scales linearly with resolution.
inline double default_sigma_for(int height) { return 20.0 * height / 128.0; }

using RoiCenters = std::vector<std::array<Eigen::Vector2d, 2>>;

// Signed-Gaussian encoding: map i gets two windows peaking at its ROI
// centers, multiplied by +1 (active) or -1 (inactive), summed, then clipped
// to [-1, 1]. Windows are evaluated at integer pixel coordinates.
// `out_of_frame`, when given, receives (au index, window index) pairs whose
// center lies outside [0,W)x[0,H).
HeatmapStack encode_heatmaps(const LabelVector& labels, const RoiCenters& centers, const GaussianParams& sigma,
                             int height, int width, std::vector<std::pair<int, int>>* out_of_frame = nullptr);

// Occurrence rule: AU active iff the map sums to a strictly positive value.
LabelVector decode_labels(const HeatmapStack& heatmaps);

// Mean squared error over all n*H*W elements.
double heatmap_mse(const HeatmapStack& pred, const HeatmapStack& target);

// Raw float32 dump with a JSON sidecar {n, H, W, au_codes}.
void save_heatmaps(const std::filesystem::path& raw_path, const HeatmapStack& stack);
HeatmapStack load_heatmaps(const std::filesystem::path& raw_path);

}  // namespace auheat
