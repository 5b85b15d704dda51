#pragma once

#include <vector>

#include "auheat/au_table.hpp"
#include "auheat/heatmap.hpp"
#include "auheat/manifest.hpp"
#include "auheat/nn/tensor.hpp"

namespace auheat {

// One manifest row after alignment: image cropped to the model input size,
// landmarks and ROI centers in the aligned frame.
struct AlignedSample {
  Image8 image;
  Landmarks68 landmarks;
  RoiCenters centers;
  LabelVector labels;  // ordered per the dataset's au_codes
  std::string subject;
};

struct AlignedDataset {
  std::vector<AlignedSample> samples;
  std::vector<int> au_codes;
  int input_size = 0;

  int n_au() const { return static_cast<int>(au_codes.size()); }
};

// Loads and aligns every manifest row once. `au_codes` must be a subset of
// the manifest's; labels and ROI centers follow the order of `table`.
AlignedDataset load_aligned_dataset(const Manifest& manifest, const AUTable& table, int input_size);

// Assemble a float [0,1] image batch for the given sample indices.
nn::TensorF make_image_batch(const AlignedDataset& ds, const std::vector<int>& indices);

// Ground-truth heatmap batch (N, n_au, S, S) per the signed-Gaussian coding.
nn::TensorF make_target_batch(const AlignedDataset& ds, const std::vector<int>& indices, double sigma);

// Per-AU binary label batch (N, n_au, 1, 1).
nn::TensorF make_label_batch(const AlignedDataset& ds, const std::vector<int>& indices);

}  // namespace auheat
