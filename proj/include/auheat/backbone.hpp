#pragma once

#include <optional>
#include <string>
#include <vector>

#include "auheat/errors.hpp"
#include "auheat/nn/layers.hpp"

namespace auheat {

// Style-based synthesis backbone: k blocks, each upsampling 2x with two
// style-modulated convolutions. Resolutions run 4, 8, ..., 4*2^(k-1); the
// input/output image resolution equals the last block's.
struct BackboneConfig {
  int k = 6;
  std::vector<int> gen_channels = {32, 32, 16, 16, 8, 4};  // per block, coarse to fine
  int style_dim = 64;
  int encoder_base = 8;    // channels after the first encoder stage
  int encoder_max = 64;    // channel cap
  int encoder_depth = 1;   // convolutions per resolution stage
  bool fine_tune = true;

  int input_size() const { return 4 << (k - 1); }
  int num_styles() const { return 2 * k; }
  int resolution(int block) const { return 4 << block; }  // block in [0, k)

  void validate() const {
    if (k < 2) throw ValidationError("BackboneConfig: k must be >= 2");
    if (static_cast<int>(gen_channels.size()) != k)
      throw ValidationError("BackboneConfig: channel schedule length must equal k");
    for (int c : gen_channels)
      if (c < 1) throw ValidationError("BackboneConfig: channels must be positive");
    if (style_dim < 1) throw ValidationError("BackboneConfig: style_dim must be positive");
    if (encoder_depth < 1) throw ValidationError("BackboneConfig: encoder_depth must be positive");
  }
};

// Per-sample extended style code, one row per modulation layer.
template <typename S>
struct StyleCode {
  nn::MatX<S> rows;  // (2k, style_dim)
};

template <typename S>
using FeatureMapSet = std::vector<nn::Tensor<S>>;  // k tensors, (N, C_i, r_i, r_i)

// ---------------------------------------------------------------------------
// Encoder: strided convolution pyramid down to 4x4, then a linear head
// emitting all 2k style rows at once.
// ---------------------------------------------------------------------------
template <typename S>
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const BackboneConfig& cfg) : cfg_(cfg) {
    int res = cfg.input_size();
    int in_ch = 3;
    int stage = 0;
    while (res > 4) {
      const int out_ch = std::min(cfg.encoder_base << stage, cfg.encoder_max);
      stages_.emplace_back();
      auto& st = stages_.back();
      st.convs.emplace_back(in_ch, out_ch, 3, 2, 1);
      for (int d = 1; d < cfg.encoder_depth; ++d) st.convs.emplace_back(out_ch, out_ch, 3, 1, 1);
      for (size_t c = 0; c < st.convs.size(); ++c) {
        st.norms.emplace_back(out_ch);
        st.acts.emplace_back(0.2);
      }
      in_ch = out_ch;
      res /= 2;
      ++stage;
    }
    head_ = nn::Linear<S>(in_ch * 4 * 4, cfg.num_styles() * cfg.style_dim);
  }

  void init(RngEngine& eng) {
    for (auto& st : stages_)
      for (auto& c : st.convs) c.init(eng, std::sqrt(2.0 / 1.04));  // leaky-relu gain
    head_.init(eng, 1.0);
  }

  // images: (N, 3, R, R) in [0,1]; returns styles (N, 2k*style_dim, 1, 1)
  nn::Tensor<S> forward(const nn::Tensor<S>& images, const nn::Ctx& ctx) {
    if (images.c() != 3 || images.h() != cfg_.input_size() || images.w() != cfg_.input_size())
      throw ValidationError("encode_image: expected " + std::to_string(cfg_.input_size()) + "x" +
                            std::to_string(cfg_.input_size()) + " RGB input, got " + std::to_string(images.h()) + "x" +
                            std::to_string(images.w()));
    nn::Tensor<S> x = images;
    for (auto& st : stages_)
      for (size_t c = 0; c < st.convs.size(); ++c) {
        x = st.convs[c].forward(x, ctx);
        x = st.norms[c].forward(x, ctx);
        x = st.acts[c].forward(x, ctx);
      }
    flat_shape_ = {x.c(), x.h(), x.w()};
    return head_.forward(x.reshaped(x.c() * x.h() * x.w(), 1, 1), ctx);
  }

  void backward(const nn::Tensor<S>& gstyles) {
    nn::Tensor<S> g = head_.backward(gstyles).reshaped(flat_shape_[0], flat_shape_[1], flat_shape_[2]);
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it)
      for (int c = static_cast<int>(it->convs.size()) - 1; c >= 0; --c) {
        g = it->acts[c].backward(g);
        g = it->norms[c].backward(g);
        g = it->convs[c].backward(g);
      }
  }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    for (size_t s = 0; s < stages_.size(); ++s)
      for (size_t c = 0; c < stages_[s].convs.size(); ++c)
        stages_[s].convs[c].visit_params(p + ".stage" + std::to_string(s) + ".conv" + std::to_string(c), v);
    head_.visit_params(p + ".head", v);
  }

 private:
  struct Stage {
    std::vector<nn::Conv2d<S>> convs;
    std::vector<nn::InstanceNorm<S>> norms;
    std::vector<nn::LeakyReLU<S>> acts;
  };

  BackboneConfig cfg_;
  std::vector<Stage> stages_;
  nn::Linear<S> head_;
  std::array<int, 3> flat_shape_ = {0, 0, 0};
};

// ---------------------------------------------------------------------------
// Generator: learned 4x4 constant, then k blocks of
//   [upsample] -> conv -> lrelu -> stylenorm -> conv -> lrelu -> stylenorm
// The feature tap f_i is the output of block i's second style norm.
// ---------------------------------------------------------------------------
template <typename S>
class Generator {
 public:
  struct Output {
    FeatureMapSet<S> taps;  // k tensors
    nn::Tensor<S> rgb;      // (N, 3, r_k, r_k)
  };

  Generator() = default;
  explicit Generator(const BackboneConfig& cfg) : cfg_(cfg) {
    const int c0 = cfg.gen_channels[0];
    const int d = cfg.style_dim;
    const_input_ = nn::VecX<S>::Zero(static_cast<Eigen::Index>(c0) * 16);
    gconst_ = const_input_;
    int in_ch = c0;
    for (int i = 0; i < cfg.k; ++i) {
      const int out_ch = cfg.gen_channels[i];
      Block b;
      b.conv1 = nn::Conv2d<S>(in_ch, out_ch, 3, 1, 1);
      b.conv2 = nn::Conv2d<S>(out_ch, out_ch, 3, 1, 1);
      b.ada1 = nn::StyleNorm<S>(out_ch, d);
      b.ada2 = nn::StyleNorm<S>(out_ch, d);
      b.act1 = nn::LeakyReLU<S>(0.2);
      b.act2 = nn::LeakyReLU<S>(0.2);
      blocks_.push_back(std::move(b));
      in_ch = out_ch;
    }
    to_rgb_ = nn::Conv2d<S>(in_ch, 3, 1, 1, 0);
  }

  void init(RngEngine& eng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < const_input_.size(); ++i) const_input_[i] = static_cast<S>(dist(eng));
    for (auto& b : blocks_) {
      b.conv1.init(eng, std::sqrt(2.0 / 1.04));
      b.conv2.init(eng, std::sqrt(2.0 / 1.04));
      b.ada1.init(eng);
      b.ada2.init(eng);
    }
    to_rgb_.init(eng, 1.0);
  }

  // styles: (N, 2k*style_dim, 1, 1)
  Output forward(const nn::Tensor<S>& styles, const nn::Ctx& ctx) {
    const int n = styles.n();
    if (styles.c() != cfg_.num_styles() * cfg_.style_dim)
      throw ValidationError("synthesize_with_taps: style code shape does not match config (expected " +
                            std::to_string(cfg_.num_styles()) + "x" + std::to_string(cfg_.style_dim) + ")");
    styles_in_ = styles;
    Output out;
    nn::Tensor<S> h(n, cfg_.gen_channels[0], 4, 4);
    for (int i = 0; i < n; ++i) Eigen::Map<nn::VecX<S>>(h.sample(i), const_input_.size()) = const_input_;
    for (int i = 0; i < cfg_.k; ++i) {
      auto& b = blocks_[i];
      if (i > 0) h = b.up.forward(h, ctx);
      h = b.conv1.forward(h, ctx);
      h = b.act1.forward(h, ctx);
      h = b.ada1.forward(h, style_slice(styles, 2 * i), ctx);
      h = b.conv2.forward(h, ctx);
      h = b.act2.forward(h, ctx);
      h = b.ada2.forward(h, style_slice(styles, 2 * i + 1), ctx);
      out.taps.push_back(h);
    }
    out.rgb = to_rgb_.forward(h, ctx);
    return out;
  }

  // tap_grads: per-block gradients (empty tensors are treated as zero);
  // rgb_grad: optional gradient on the reconstructed image.
  // Returns the style gradient, shaped like the styles input.
  nn::Tensor<S> backward(const std::vector<nn::Tensor<S>>& tap_grads, const nn::Tensor<S>* rgb_grad) {
    const int n = styles_in_.n();
    const int d = cfg_.style_dim;
    nn::Tensor<S> gstyles(n, cfg_.num_styles() * d, 1, 1);
    nn::Tensor<S> g;
    if (rgb_grad) g = to_rgb_.backward(*rgb_grad);
    for (int i = cfg_.k - 1; i >= 0; --i) {
      auto& b = blocks_[i];
      if (!tap_grads.empty() && !tap_grads[i].empty()) {
        if (g.empty())
          g = tap_grads[i];
        else
          g.flat() += tap_grads[i].flat();
      }
      if (g.empty()) g = nn::Tensor<S>(n, cfg_.gen_channels[i], cfg_.resolution(i), cfg_.resolution(i));
      nn::MatX<S> gs1 = nn::MatX<S>::Zero(n, d), gs2 = nn::MatX<S>::Zero(n, d);
      g = b.ada2.backward(g, gs2);
      g = b.act2.backward(g);
      g = b.conv2.backward(g);
      g = b.ada1.backward(g, gs1);
      g = b.act1.backward(g);
      g = b.conv1.backward(g);
      if (i > 0) g = b.up.backward(g);
      scatter_style_grad(gstyles, gs1, 2 * i);
      scatter_style_grad(gstyles, gs2, 2 * i + 1);
    }
    for (int i = 0; i < n; ++i) gconst_ += Eigen::Map<nn::VecX<S>>(g.sample(i), gconst_.size());
    return gstyles;
  }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    v({p + ".const_input", const_input_.data(), gconst_.data(), const_input_.size(), {cfg_.gen_channels[0], 4, 4},
       nn::ParamKind::kParam});
    for (int i = 0; i < cfg_.k; ++i) {
      const std::string bp = p + ".block" + std::to_string(i);
      blocks_[i].conv1.visit_params(bp + ".conv1", v);
      blocks_[i].ada1.visit_params(bp + ".ada1", v);
      blocks_[i].conv2.visit_params(bp + ".conv2", v);
      blocks_[i].ada2.visit_params(bp + ".ada2", v);
    }
    to_rgb_.visit_params(p + ".to_rgb", v);
  }

 private:
  struct Block {
    nn::Upsample2x<S> up;
    nn::Conv2d<S> conv1, conv2;
    nn::StyleNorm<S> ada1, ada2;
    nn::LeakyReLU<S> act1 = nn::LeakyReLU<S>(0.2), act2 = nn::LeakyReLU<S>(0.2);
  };

  nn::MatX<S> style_slice(const nn::Tensor<S>& styles, int layer) const {
    const int d = cfg_.style_dim;
    nn::MatX<S> s(styles.n(), d);
    for (int i = 0; i < styles.n(); ++i)
      s.row(i) = Eigen::Map<const nn::VecX<S>>(styles.sample(i) + static_cast<Eigen::Index>(layer) * d, d).transpose();
    return s;
  }

  void scatter_style_grad(nn::Tensor<S>& gstyles, const nn::MatX<S>& gs, int layer) const {
    const int d = cfg_.style_dim;
    for (int i = 0; i < gstyles.n(); ++i)
      Eigen::Map<nn::VecX<S>>(gstyles.sample(i) + static_cast<Eigen::Index>(layer) * d, d) += gs.row(i).transpose();
  }

  BackboneConfig cfg_;
  nn::VecX<S> const_input_, gconst_;
  std::vector<Block> blocks_;
  nn::Conv2d<S> to_rgb_;
  nn::Tensor<S> styles_in_;
};

// ---------------------------------------------------------------------------
// Encoder + generator pair.
// ---------------------------------------------------------------------------
template <typename S>
class Backbone {
 public:
  struct Output {
    nn::Tensor<S> styles;    // (N, 2k*style_dim, 1, 1)
    FeatureMapSet<S> taps;   // k feature maps
    nn::Tensor<S> rgb;       // reconstruction
  };

  Backbone() = default;
  explicit Backbone(const BackboneConfig& cfg) : cfg_(validated(cfg)), encoder_(cfg_), generator_(cfg_) {}

  void init(RngEngine& eng) {
    encoder_.init(eng);
    generator_.init(eng);
  }

  const BackboneConfig& config() const { return cfg_; }

  Output forward(const nn::Tensor<S>& images, const nn::Ctx& ctx) {
    Output out;
    out.styles = encoder_.forward(images, ctx);
    auto gen = generator_.forward(out.styles, ctx);
    out.taps = std::move(gen.taps);
    out.rgb = std::move(gen.rgb);
    return out;
  }

  // Encoder-only pass (the latent-code baseline consumes just the styles).
  nn::Tensor<S> forward_styles(const nn::Tensor<S>& images, const nn::Ctx& ctx) {
    return encoder_.forward(images, ctx);
  }

  void backward(const std::vector<nn::Tensor<S>>& tap_grads, const nn::Tensor<S>* rgb_grad = nullptr) {
    nn::Tensor<S> gstyles = generator_.backward(tap_grads, rgb_grad);
    encoder_.backward(gstyles);
  }

  // Single-image conveniences matching the module contracts.
  StyleCode<S> encode_image(const nn::Tensor<S>& image) {
    nn::Ctx ctx{false, nullptr};
    nn::Tensor<S> styles = encoder_.forward(image, ctx);
    StyleCode<S> code;
    code.rows = nn::MatX<S>(cfg_.num_styles(), cfg_.style_dim);
    for (int l = 0; l < cfg_.num_styles(); ++l)
      code.rows.row(l) =
          Eigen::Map<const nn::VecX<S>>(styles.sample(0) + static_cast<Eigen::Index>(l) * cfg_.style_dim, cfg_.style_dim).transpose();
    return code;
  }

  std::pair<nn::Tensor<S>, FeatureMapSet<S>> synthesize_with_taps(const StyleCode<S>& code) {
    if (code.rows.rows() != cfg_.num_styles() || code.rows.cols() != cfg_.style_dim)
      throw ValidationError("synthesize_with_taps: style code shape does not match config");
    nn::Tensor<S> styles(1, cfg_.num_styles() * cfg_.style_dim, 1, 1);
    for (int l = 0; l < cfg_.num_styles(); ++l)
      Eigen::Map<nn::VecX<S>>(styles.sample(0) + static_cast<Eigen::Index>(l) * cfg_.style_dim, cfg_.style_dim) =
          code.rows.row(l).transpose();
    nn::Ctx ctx{false, nullptr};
    auto gen = generator_.forward(styles, ctx);
    return {std::move(gen.rgb), std::move(gen.taps)};
  }

  void visit_params(const std::string& p, const nn::ParamVisitor<S>& v) {
    const std::string base = p.empty() ? std::string() : p + ".";
    encoder_.visit_params(base + "encoder", v);
    generator_.visit_params(base + "generator", v);
  }

 private:
  static const BackboneConfig& validated(const BackboneConfig& cfg) {
    cfg.validate();
    return cfg;
  }

  BackboneConfig cfg_;
  Encoder<S> encoder_;
  Generator<S> generator_;
};

using BackboneF = Backbone<float>;

}  // namespace auheat
