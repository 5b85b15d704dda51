#include "auheat/dataset.hpp"

#include <algorithm>

#include "auheat/errors.hpp"

namespace auheat {

AlignedDataset load_aligned_dataset(const Manifest& manifest, const AUTable& table, int input_size) {
  AlignedDataset ds;
  ds.au_codes = table.au_codes();
  ds.input_size = input_size;
  for (int au : ds.au_codes)
    if (std::find(manifest.au_codes.begin(), manifest.au_codes.end(), au) == manifest.au_codes.end())
      throw ValidationError("dataset: manifest has no labels for AU " + std::to_string(au));

  ds.samples.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    Image8 img = read_png(manifest.root / row.image);
    AlignedFace aligned = align_face(img, row.landmarks, input_size);
    AlignedSample s;
    s.image = std::move(aligned.image);
    s.landmarks = aligned.landmarks;
    s.centers = compute_roi_centers(s.landmarks, table);
    s.labels = manifest.labels_for(row, ds.au_codes);
    s.subject = row.subject;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

nn::TensorF make_image_batch(const AlignedDataset& ds, const std::vector<int>& indices) {
  const int s = ds.input_size;
  nn::TensorF batch(static_cast<int>(indices.size()), 3, s, s);
  for (size_t i = 0; i < indices.size(); ++i) {
    const Image8& img = ds.samples[indices[i]].image;
    for (int c = 0; c < 3; ++c) {
      auto plane = batch.plane(static_cast<int>(i), c);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) plane(y, x) = static_cast<float>(img.px(x, y)[c]) / 255.0f;
    }
  }
  return batch;
}

nn::TensorF make_target_batch(const AlignedDataset& ds, const std::vector<int>& indices, double sigma) {
  const int s = ds.input_size;
  const int n_au = ds.n_au();
  nn::TensorF batch(static_cast<int>(indices.size()), n_au, s, s);
  for (size_t i = 0; i < indices.size(); ++i) {
    const AlignedSample& sample = ds.samples[indices[i]];
    HeatmapStack stack = encode_heatmaps(sample.labels, sample.centers, {sigma}, s, s);
    for (int a = 0; a < n_au; ++a) {
      auto plane = batch.plane(static_cast<int>(i), a);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) plane(y, x) = stack.maps[a](y, x);
    }
  }
  return batch;
}

nn::TensorF make_label_batch(const AlignedDataset& ds, const std::vector<int>& indices) {
  const int n_au = ds.n_au();
  nn::TensorF batch(static_cast<int>(indices.size()), n_au, 1, 1);
  for (size_t i = 0; i < indices.size(); ++i)
    for (int a = 0; a < n_au; ++a) batch.at(static_cast<int>(i), a, 0, 0) = static_cast<float>(ds.samples[indices[i]].labels[a]);
  return batch;
}

}  // namespace auheat
