#include "auheat/heatmap.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

#include "auheat/errors.hpp"

namespace auheat {

using json = nlohmann::json;

HeatmapStack encode_heatmaps(const LabelVector& labels, const RoiCenters& centers, const GaussianParams& sigma,
                             int height, int width, std::vector<std::pair<int, int>>* out_of_frame) {
  if (sigma.sigma <= 0) throw ValidationError("encode_heatmaps: sigma must be positive");
  if (labels.size() != centers.size()) throw ValidationError("encode_heatmaps: labels/centers arity mismatch");
  if (height <= 0 || width <= 0) throw ValidationError("encode_heatmaps: empty frame");

  HeatmapStack stack;
  stack.maps.reserve(labels.size());
  const double inv2s2 = 1.0 / (2.0 * sigma.sigma * sigma.sigma);
  Eigen::ArrayXd xs = Eigen::ArrayXd::LinSpaced(width, 0, width - 1);
  Eigen::ArrayXd ys = Eigen::ArrayXd::LinSpaced(height, 0, height - 1);

  for (size_t i = 0; i < labels.size(); ++i) {
    const float lambda = labels[i] ? 1.0f : -1.0f;
    Eigen::ArrayXXd m = Eigen::ArrayXXd::Zero(height, width);
    for (int k = 0; k < 2; ++k) {
      const Eigen::Vector2d& c = centers[i][k];
      if (out_of_frame && (c.x() < 0 || c.x() >= width || c.y() < 0 || c.y() >= height))
        out_of_frame->emplace_back(static_cast<int>(i), k);
      // Separable evaluation: exp(-(dx^2+dy^2)/2s^2) = col * row outer product.
      Eigen::ArrayXd gx = (-(xs - c.x()).square() * inv2s2).exp();
      Eigen::ArrayXd gy = (-(ys - c.y()).square() * inv2s2).exp();
      m += (gy.matrix() * gx.matrix().transpose()).array();
    }
    m = (m * lambda).cwiseMax(-1.0).cwiseMin(1.0);
    stack.maps.push_back(m.cast<float>());
  }
  return stack;
}

LabelVector decode_labels(const HeatmapStack& heatmaps) {
  LabelVector out;
  out.reserve(heatmaps.maps.size());
  for (const auto& m : heatmaps.maps) out.push_back(m.template cast<double>().sum() > 0.0 ? 1 : 0);
  return out;
}

double heatmap_mse(const HeatmapStack& pred, const HeatmapStack& target) {
  if (pred.n() != target.n() || pred.height() != target.height() || pred.width() != target.width())
    throw ValidationError("heatmap_mse: shape mismatch");
  if (pred.n() == 0) throw ValidationError("heatmap_mse: empty stacks");
  double acc = 0;
  for (int i = 0; i < pred.n(); ++i)
    acc += (pred.maps[i].template cast<double>() - target.maps[i].template cast<double>()).square().sum();
  return acc / (static_cast<double>(pred.n()) * pred.height() * pred.width());
}

void save_heatmaps(const std::filesystem::path& raw_path, const HeatmapStack& stack) {
  std::ofstream f(raw_path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot write heatmap dump: " + raw_path.string());
  for (const auto& m : stack.maps) {
    // Row-major scanlines, little-endian float32.
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) {
        const float v = m(r, c);
        f.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
  }
  json side;
  side["n"] = stack.n();
  side["H"] = stack.height();
  side["W"] = stack.width();
  side["au_codes"] = stack.au_codes;
  std::ofstream sf(raw_path.string() + ".json");
  if (!sf) throw RuntimeFailure("cannot write heatmap sidecar for " + raw_path.string());
  sf << side.dump(2) << "\n";
}

HeatmapStack load_heatmaps(const std::filesystem::path& raw_path) {
  std::ifstream sf(raw_path.string() + ".json");
  if (!sf) throw ValidationError("missing heatmap sidecar for " + raw_path.string());
  json side;
  try {
    sf >> side;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("heatmap sidecar: invalid JSON: ") + e.what());
  }
  const int n = side.at("n").get<int>(), h = side.at("H").get<int>(), w = side.at("W").get<int>();
  HeatmapStack stack;
  stack.au_codes = side.value("au_codes", std::vector<int>{});
  std::ifstream f(raw_path, std::ios::binary);
  if (!f) throw ValidationError("cannot open heatmap dump: " + raw_path.string());
  for (int i = 0; i < n; ++i) {
    Eigen::ArrayXXf m(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        float v;
        if (!f.read(reinterpret_cast<char*>(&v), sizeof(float))) throw ValidationError("heatmap dump truncated: " + raw_path.string());
        m(r, c) = v;
      }
    stack.maps.push_back(std::move(m));
  }
  return stack;
}

}  // namespace auheat
