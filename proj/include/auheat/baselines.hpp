#pragma once

#include <string>
#include <vector>

#include "auheat/backbone.hpp"
#include "auheat/errors.hpp"
#include "auheat/nn/layers.hpp"

namespace auheat {

// Which contiguous thirds of the k feature maps to keep. When k is not
// divisible by 3 the remainder goes to the late group.
struct GroupMask {
  bool early = true;
  bool middle = true;
  bool late = true;

  void validate() const {
    if (!early && !middle && !late) throw ValidationError("GroupMask: at least one group must be kept");
  }

  // [begin, end) block ranges for (early, middle, late).
  static std::array<std::pair<int, int>, 3> group_ranges(int k) {
    const int g = k / 3;
    return {{{0, g}, {g, 2 * g}, {2 * g, k}}};
  }
};

// Dropped groups are replaced by zero tensors of matching shape so consumer
// architectures are unchanged across ablation arms.
template <typename S>
FeatureMapSet<S> mask_feature_groups(const FeatureMapSet<S>& features, const GroupMask& mask) {
  mask.validate();
  const int k = static_cast<int>(features.size());
  auto ranges = GroupMask::group_ranges(k);
  const bool keep[3] = {mask.early, mask.middle, mask.late};
  FeatureMapSet<S> out = features;
  for (int gi = 0; gi < 3; ++gi) {
    if (keep[gi]) continue;
    for (int b = ranges[gi].first; b < ranges[gi].second; ++b) out[b].set_zero();
  }
  return out;
}

// Every feature map bilinearly upsampled to (H, W) and concatenated along
// channels. C_total = sum of per-level channels.
template <typename S>
nn::Tensor<S> upscale_concat(const FeatureMapSet<S>& features, int out_h, int out_w) {
  if (features.empty()) throw ValidationError("upscale_concat: empty feature set");
  int c_total = 0;
  for (const auto& f : features) c_total += f.c();
  const int n = features[0].n();
  nn::Tensor<S> out(n, c_total, out_h, out_w);
  nn::Ctx ctx{false, nullptr};
  int c_off = 0;
  for (const auto& f : features) {
    nn::BilinearResize<S> resize(out_h, out_w);
    nn::Tensor<S> up = f.h() == out_h && f.w() == out_w ? f : resize.forward(f, ctx);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < f.c(); ++c) out.plane(i, c_off + c) = up.plane(i, c);
    c_off += f.c();
  }
  return out;
}

// Per-pixel MLP on upscaled-and-concatenated features, realized as pointwise
// convolutions (the same weights applied independently at every pixel).
template <typename S>
class PixelMlp {
 public:
  PixelMlp() = default;
  PixelMlp(int in_channels, int hidden, int n_au)
      : in_channels_(in_channels), fc1_(in_channels, hidden, 1, 1, 0), fc2_(hidden, n_au, 1, 1, 0) {}

  void init(RngEngine& eng) {
    fc1_.init(eng);
    fc2_.init(eng, 0.2);
  }

  nn::Tensor<S> forward(const nn::Tensor<S>& per_pixel_features, const nn::Ctx& ctx) {
    if (per_pixel_features.c() != in_channels_)
      throw ValidationError("pixel_mlp_forward: feature width mismatch (expected " + std::to_string(in_channels_) +
                            " channels, got " + std::to_string(per_pixel_features.c()) + ")");
    nn::Tensor<S> h = fc1_.forward(per_pixel_features, ctx);
    h = act_.forward(h, ctx);
    return fc2_.forward(h, ctx);
  }

  nn::Tensor<S> backward(const nn::Tensor<S>& gy) { return fc1_.backward(act_.backward(fc2_.backward(gy))); }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    fc1_.visit_params(p + ".fc1", v);
    fc2_.visit_params(p + ".fc2", v);
  }

 private:
  int in_channels_ = 0;
  nn::Conv2d<S> fc1_, fc2_;
  nn::ReLU<S> act_;
};

// Direct AU prediction from the flattened style code: 2-layer MLP with
// sigmoid outputs, trained with per-AU binary cross-entropy. Decision rule
// is probability strictly greater than 0.5.
template <typename S>
class LatentHead {
 public:
  LatentHead() = default;
  LatentHead(int style_size, int n_au, int hidden = 256)
      : style_size_(style_size), fc1_(style_size, hidden), fc2_(hidden, n_au) {}

  void init(RngEngine& eng) {
    fc1_.init(eng, std::sqrt(2.0));
    fc2_.init(eng, 0.2);
  }

  // styles: (N, style_size, 1, 1); returns logits (N, n_au, 1, 1)
  nn::Tensor<S> forward_logits(const nn::Tensor<S>& styles, const nn::Ctx& ctx) {
    if (styles.c() != style_size_)
      throw ValidationError("latent_code_forward: style code size mismatch (expected " + std::to_string(style_size_) +
                            ", got " + std::to_string(styles.c()) + ")");
    nn::Tensor<S> h = fc1_.forward(styles, ctx);
    h = act_.forward(h, ctx);
    return fc2_.forward(h, ctx);
  }

  nn::Tensor<S> probabilities(const nn::Tensor<S>& styles) {
    nn::Ctx ctx{false, nullptr};
    nn::Tensor<S> z = forward_logits(styles, ctx);
    z.flat().array() = S(1) / (S(1) + (-z.flat().array()).exp());
    return z;
  }

  static std::vector<int> decide(const nn::Tensor<S>& probs, int sample) {
    std::vector<int> out(probs.c());
    for (int i = 0; i < probs.c(); ++i) out[i] = probs.at(sample, i, 0, 0) > S(0.5) ? 1 : 0;
    return out;
  }

  nn::Tensor<S> backward(const nn::Tensor<S>& glogits) { return fc1_.backward(act_.backward(fc2_.backward(glogits))); }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    fc1_.visit_params(p + ".fc1", v);
    fc2_.visit_params(p + ".fc2", v);
  }

 private:
  int style_size_ = 0;
  nn::Linear<S> fc1_, fc2_;
  nn::ReLU<S> act_;
};

}  // namespace auheat
