#pragma once

#include <string>
#include <vector>

#include "auheat/backbone.hpp"
#include "auheat/errors.hpp"
#include "auheat/nn/layers.hpp"

namespace auheat {

struct InterpreterConfig {
  int k = 6;
  std::vector<int> feature_channels = {32, 32, 16, 16, 8, 4};  // channels of f_1..f_k
  int hidden = 8;       // pyramid hidden width
  int ksize = 3;
  int n_au = 6;
  int out_h = 128;
  int out_w = 128;
  double dropout = 0.1;

  void validate() const {
    if (k < 1) throw ValidationError("InterpreterConfig: k must be >= 1");
    if (static_cast<int>(feature_channels.size()) != k)
      throw ValidationError("InterpreterConfig: feature_channels length must equal k");
    if (hidden < 1) throw ValidationError("InterpreterConfig: hidden width must be >= 1");
    if (n_au < 1) throw ValidationError("InterpreterConfig: n_au must be >= 1");
    if (out_h < 1 || out_w < 1) throw ValidationError("InterpreterConfig: invalid output size");
    if (dropout < 0 || dropout >= 1) throw ValidationError("InterpreterConfig: dropout must be in [0, 1)");
  }

  static InterpreterConfig for_backbone(const BackboneConfig& b, int n_au) {
    InterpreterConfig c;
    c.k = b.k;
    c.feature_channels = b.gen_channels;
    c.n_au = n_au;
    c.out_h = c.out_w = b.input_size();
    return c;
  }
};

// Hierarchical fusion of the k multi-resolution feature maps into an
// n-channel heatmap stack:
//   c_0 = 0;  c_i = C_i(c_{i-1} + P_i(f_i))
// where P_i is a learned pointwise projection to the hidden width and C_i is
// interpolate -> conv -> relu -> batchnorm (the final block is interpolate ->
// conv only, so heatmap values stay unbounded). Dropout follows each
// non-final block during training.
template <typename S>
class PyramidInterpreter {
 public:
  PyramidInterpreter() = default;
  explicit PyramidInterpreter(const InterpreterConfig& cfg) : cfg_(validated(cfg)) {
    for (int i = 0; i < cfg_.k; ++i) {
      proj_.emplace_back(cfg_.feature_channels[i], cfg_.hidden, 1, 1, 0);
      const bool final_block = i == cfg_.k - 1;
      conv_.emplace_back(cfg_.hidden, final_block ? cfg_.n_au : cfg_.hidden, cfg_.ksize, 1, cfg_.ksize / 2);
      if (!final_block) {
        acts_.emplace_back();
        bns_.emplace_back(cfg_.hidden);
        drops_.emplace_back(cfg_.dropout);
        ups_.emplace_back();
      }
    }
    final_resize_ = nn::BilinearResize<S>(cfg_.out_h, cfg_.out_w);
  }

  void init(RngEngine& eng) {
    for (auto& p : proj_) p.init(eng);
    for (size_t i = 0; i + 1 < conv_.size(); ++i) conv_[i].init(eng);
    // Small prediction head so initial heatmaps start near zero.
    conv_.back().init(eng, 0.2);
  }

  const InterpreterConfig& config() const { return cfg_; }

  Eigen::Index parameter_count() {
    Eigen::Index total = 0;
    visit_params("interpreter", nn::ParamVisitor<S>([&total](const nn::ParamRef<S>& r) {
                   if (r.kind == nn::ParamKind::kParam) total += r.size;
                 }));
    return total;
  }

  // features: k tensors, (N, C_i, r_i, r_i) with r_i = 4*2^(i-1) except that
  // the first level only fixes the base resolution (r_1 = features[0].h()).
  nn::Tensor<S> forward(const FeatureMapSet<S>& features, const nn::Ctx& ctx) {
    check_features(features);
    nn::Tensor<S> c;  // zero c_0 makes the first sum just P_1(f_1)
    for (int i = 0; i < cfg_.k; ++i) {
      nn::Tensor<S> p = proj_[i].forward(features[i], ctx);
      if (i == 0)
        c = std::move(p);
      else
        c.flat() += p.flat();
      const bool final_block = i == cfg_.k - 1;
      c = final_block ? final_resize_.forward(c, ctx) : ups_[i].forward(c, ctx);
      c = conv_[i].forward(c, ctx);
      if (!final_block) {
        c = acts_[i].forward(c, ctx);
        c = bns_[i].forward(c, ctx);
        c = drops_[i].forward(c, ctx);
      }
    }
    return c;
  }

  // Returns per-level gradients with respect to the input features.
  FeatureMapSet<S> backward(const nn::Tensor<S>& gy) {
    FeatureMapSet<S> gfeatures(cfg_.k);
    nn::Tensor<S> g = gy;
    for (int i = cfg_.k - 1; i >= 0; --i) {
      const bool final_block = i == cfg_.k - 1;
      if (!final_block) {
        g = drops_[i].backward(g);
        g = bns_[i].backward(g);
        g = acts_[i].backward(g);
      }
      g = conv_[i].backward(g);
      g = final_block ? final_resize_.backward(g) : ups_[i].backward(g);
      gfeatures[i] = proj_[i].backward(g);
      // remaining g flows into c_{i-1}
    }
    return gfeatures;
  }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    for (int i = 0; i < cfg_.k; ++i) {
      proj_[i].visit_params(p + ".proj" + std::to_string(i), v);
      conv_[i].visit_params(p + ".conv" + std::to_string(i), v);
      if (i + 1 < cfg_.k) bns_[i].visit_params(p + ".bn" + std::to_string(i), v);
    }
  }

 private:
  static const InterpreterConfig& validated(const InterpreterConfig& cfg) {
    cfg.validate();
    return cfg;
  }

  void check_features(const FeatureMapSet<S>& features) const {
    if (static_cast<int>(features.size()) != cfg_.k)
      throw ValidationError("interpret: expected " + std::to_string(cfg_.k) + " feature maps, got " +
                            std::to_string(features.size()));
    const int r1 = features[0].h();
    for (int i = 0; i < cfg_.k; ++i) {
      const int r = r1 << i;
      if (features[i].c() != cfg_.feature_channels[i] || features[i].h() != r || features[i].w() != r)
        throw ValidationError("interpret: feature map " + std::to_string(i + 1) + " has wrong shape");
      if (features[i].n() != features[0].n()) throw ValidationError("interpret: inconsistent batch size");
    }
  }

  InterpreterConfig cfg_;
  std::vector<nn::Conv2d<S>> proj_, conv_;
  std::vector<nn::ReLU<S>> acts_;
  std::vector<nn::BatchNorm2d<S>> bns_;
  std::vector<nn::Dropout<S>> drops_;
  std::vector<nn::Upsample2x<S>> ups_;
  nn::BilinearResize<S> final_resize_;
};

using PyramidInterpreterF = PyramidInterpreter<float>;

}  // namespace auheat
