#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "auheat/nn/params.hpp"
#include "auheat/nn/tensor.hpp"
#include "auheat/rng.hpp"

namespace auheat::nn {

struct Ctx {
  bool training = false;
  RngEngine* rng = nullptr;  // consumed by Dropout in training mode
};

template <typename S>
void kaiming_normal(RowMatX<S>& w, Eigen::Index fan_in, RngEngine& eng, double gain = std::sqrt(2.0)) {
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = static_cast<S>(dist(eng));
}

// ---------------------------------------------------------------------------
// Convolution (square kernel). Weight layout (out_ch, in_ch*k*k), GEMM over
// im2col patches; 1x1 stride-1 convolutions skip im2col entirely.
// ---------------------------------------------------------------------------
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad < 0 ? ksize / 2 : pad) {
    weight_ = RowMatX<S>::Zero(out_ch_, static_cast<Eigen::Index>(in_ch_) * k_ * k_);
    bias_ = VecX<S>::Zero(out_ch_);
    gw_ = weight_;
    gb_ = bias_;
  }

  void init(RngEngine& eng, double gain = std::sqrt(2.0)) {
    kaiming_normal(weight_, weight_.cols(), eng, gain);
    bias_.setZero();
  }

  int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
  int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    input_ = x;
    const int ho = out_h(x.h()), wo = out_w(x.w());
    Tensor<S> y(x.n(), out_ch_, ho, wo);
    for (int i = 0; i < x.n(); ++i) {
      auto yi = y.chw(i);
      if (is_pointwise()) {
        yi.noalias() = weight_ * x.chw(i);
      } else {
        im2col(x, i, patches_);
        yi.noalias() = weight_ * patches_;
      }
      yi.colwise() += bias_;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    const Tensor<S>& x = input_;
    Tensor<S> gx(x.n(), x.c(), x.h(), x.w());
    for (int i = 0; i < x.n(); ++i) {
      auto g = gy.chw(i);
      gb_ += g.rowwise().sum();
      if (is_pointwise()) {
        gw_.noalias() += g * x.chw(i).transpose();
        gx.chw(i).noalias() = weight_.transpose() * g;
      } else {
        im2col(x, i, patches_);
        gw_.noalias() += g * patches_.transpose();
        gpatches_.noalias() = weight_.transpose() * g;
        col2im(gpatches_, gx, i);
      }
    }
    return gx;
  }

  void visit_params(const std::string& p, const ParamVisitor<S>& v) {
    v({p + ".weight", weight_.data(), gw_.data(), weight_.size(), {out_ch_, in_ch_, k_, k_}, ParamKind::kParam});
    v({p + ".bias", bias_.data(), gb_.data(), bias_.size(), {out_ch_}, ParamKind::kParam});
  }

  RowMatX<S>& weight() { return weight_; }
  VecX<S>& bias() { return bias_; }

 private:
  bool is_pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  void im2col(const Tensor<S>& x, int i, RowMatX<S>& out) const {
    const int ho = out_h(x.h()), wo = out_w(x.w());
    out.resize(static_cast<Eigen::Index>(in_ch_) * k_ * k_, static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < in_ch_; ++c) {
      const S* plane = x.sample(i) + static_cast<Eigen::Index>(c) * x.h() * x.w();
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          S* row = out.data() + (static_cast<Eigen::Index>(c) * k_ * k_ + ky * k_ + kx) * ho * wo;
          if (stride_ == 1) {
            const int shift = kx - pad_;
            const int x0 = std::max(0, -shift), x1 = std::min(wo, x.w() - shift);
            for (int oy = 0; oy < ho; ++oy) {
              S* dst = row + static_cast<Eigen::Index>(oy) * wo;
              const int iy = oy + ky - pad_;
              if (iy < 0 || iy >= x.h()) {
                std::fill(dst, dst + wo, S(0));
                continue;
              }
              if (x0 > 0) std::fill(dst, dst + x0, S(0));
              if (x1 > x0) std::copy(plane + static_cast<Eigen::Index>(iy) * x.w() + x0 + shift, plane + static_cast<Eigen::Index>(iy) * x.w() + x1 + shift, dst + x0);
              if (x1 < wo) std::fill(dst + std::max(x1, 0), dst + wo, S(0));
            }
          } else {
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              S* dst = row + static_cast<Eigen::Index>(oy) * wo;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride_ + kx - pad_;
                dst[ox] = (iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w()) ? plane[static_cast<Eigen::Index>(iy) * x.w() + ix] : S(0);
              }
            }
          }
        }
      }
    }
  }

  void col2im(const RowMatX<S>& gp, Tensor<S>& gx, int i) const {
    const int ho = out_h(gx.h()), wo = out_w(gx.w());
    for (int c = 0; c < in_ch_; ++c) {
      S* plane = gx.sample(i) + static_cast<Eigen::Index>(c) * gx.h() * gx.w();
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const S* row = gp.data() + (static_cast<Eigen::Index>(c) * k_ * k_ + ky * k_ + kx) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= gx.h()) continue;
            const S* src = row + static_cast<Eigen::Index>(oy) * wo;
            S* drow = plane + static_cast<Eigen::Index>(iy) * gx.w();
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < gx.w()) drow[ix] += src[ox];
            }
          }
        }
      }
    }
  }

  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  RowMatX<S> weight_, gw_;
  VecX<S> bias_, gb_;
  Tensor<S> input_;
  RowMatX<S> patches_, gpatches_;
};

// ---------------------------------------------------------------------------
// Fully connected layer over (N, in, 1, 1) tensors.
// ---------------------------------------------------------------------------
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out) : in_(in), out_(out) {
    weight_ = RowMatX<S>::Zero(out, in);
    bias_ = VecX<S>::Zero(out);
    gw_ = weight_;
    gb_ = bias_;
  }

  void init(RngEngine& eng, double gain = 1.0) {
    kaiming_normal(weight_, in_, eng, gain);
    bias_.setZero();
  }

  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    input_ = x;
    Tensor<S> y(x.n(), out_, 1, 1);
    y.rows().noalias() = x.rows() * weight_.transpose();
    y.rows().rowwise() += bias_.transpose();
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    Tensor<S> gx(input_.n(), input_.c(), input_.h(), input_.w());
    gw_.noalias() += gy.rows().transpose() * input_.rows();
    gb_ += gy.rows().colwise().sum().transpose();
    gx.rows().noalias() = gy.rows() * weight_;
    return gx;
  }

  void visit_params(const std::string& p, const ParamVisitor<S>& v) {
    v({p + ".weight", weight_.data(), gw_.data(), weight_.size(), {out_, in_}, ParamKind::kParam});
    v({p + ".bias", bias_.data(), gb_.data(), bias_.size(), {out_}, ParamKind::kParam});
  }

 private:
  int in_ = 0, out_ = 0;
  RowMatX<S> weight_, gw_;
  VecX<S> bias_, gb_;
  Tensor<S> input_;
};

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel, running stats at inference.
// ---------------------------------------------------------------------------
template <typename S>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = VecX<S>::Ones(c_);
    beta_ = VecX<S>::Zero(c_);
    ggamma_ = VecX<S>::Zero(c_);
    gbeta_ = VecX<S>::Zero(c_);
    running_mean_ = VecX<S>::Zero(c_);
    running_var_ = VecX<S>::Ones(c_);
  }

  Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) {
    train_cached_ = ctx.training;
    Tensor<S> y(x.n(), x.c(), x.h(), x.w());
    const Eigen::Index m = static_cast<Eigen::Index>(x.n()) * x.h() * x.w();
    if (ctx.training) {
      xhat_ = Tensor<S>(x.n(), x.c(), x.h(), x.w());
      inv_std_.resize(c_);
      for (int c = 0; c < c_; ++c) {
        S mu = 0, var = 0;
        for (int i = 0; i < x.n(); ++i) mu += x.plane(i, c).sum();
        mu /= static_cast<S>(m);
        for (int i = 0; i < x.n(); ++i) var += (x.plane(i, c).array() - mu).square().sum();
        var /= static_cast<S>(m);
        const S inv = S(1) / std::sqrt(var + static_cast<S>(eps_));
        inv_std_[c] = inv;
        for (int i = 0; i < x.n(); ++i) {
          xhat_.plane(i, c).array() = (x.plane(i, c).array() - mu) * inv;
          y.plane(i, c).array() = xhat_.plane(i, c).array() * gamma_[c] + beta_[c];
        }
        const S unbiased = m > 1 ? var * static_cast<S>(m) / static_cast<S>(m - 1) : var;
        running_mean_[c] = static_cast<S>((1.0 - momentum_) * running_mean_[c] + momentum_ * mu);
        running_var_[c] = static_cast<S>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
      }
    } else {
      for (int c = 0; c < c_; ++c) {
        const S inv = S(1) / std::sqrt(running_var_[c] + static_cast<S>(eps_));
        for (int i = 0; i < x.n(); ++i)
          y.plane(i, c).array() = (x.plane(i, c).array() - running_mean_[c]) * inv * gamma_[c] + beta_[c];
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    assert(train_cached_ && "BatchNorm2d::backward requires a training-mode forward");
    const Eigen::Index m = static_cast<Eigen::Index>(gy.n()) * gy.h() * gy.w();
    Tensor<S> gx(gy.n(), gy.c(), gy.h(), gy.w());
    for (int c = 0; c < c_; ++c) {
      S sum_g = 0, sum_gx = 0;
      for (int i = 0; i < gy.n(); ++i) {
        sum_g += gy.plane(i, c).sum();
        sum_gx += (gy.plane(i, c).array() * xhat_.plane(i, c).array()).sum();
      }
      gbeta_[c] += sum_g;
      ggamma_[c] += sum_gx;
      const S k1 = sum_g / static_cast<S>(m), k2 = sum_gx / static_cast<S>(m);
      for (int i = 0; i < gy.n(); ++i)
        gx.plane(i, c).array() =
            (gy.plane(i, c).array() - k1 - xhat_.plane(i, c).array() * k2) * gamma_[c] * inv_std_[c];
    }
    return gx;
  }

  void visit_params(const std::string& p, const ParamVisitor<S>& v) {
    v({p + ".gamma", gamma_.data(), ggamma_.data(), gamma_.size(), {c_}, ParamKind::kParam});
    v({p + ".beta", beta_.data(), gbeta_.data(), beta_.size(), {c_}, ParamKind::kParam});
    v({p + ".running_mean", running_mean_.data(), nullptr, running_mean_.size(), {c_}, ParamKind::kBuffer});
    v({p + ".running_var", running_var_.data(), nullptr, running_var_.size(), {c_}, ParamKind::kBuffer});
  }

  VecX<S>& running_mean() { return running_mean_; }
  VecX<S>& running_var() { return running_var_; }

 private:
  int c_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  VecX<S> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_;
  Tensor<S> xhat_;
  VecX<S> inv_std_;
  bool train_cached_ = false;
};

namespace detail {

// Shared instance-norm statistics pass: writes xhat, returns 1/std per plane.
template <typename S>
inline S normalize_plane(const S* x, S* xhat, Eigen::Index m, double eps) {
  Eigen::Map<const ArrX<S>> xm(x, m);
  const S mu = xm.mean();
  const S var = (xm - mu).square().sum() / static_cast<S>(m);
  const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
  Eigen::Map<ArrX<S>>(xhat, m) = (xm - mu) * inv;
  return inv;
}

// dL/dx for a normalized plane given dL/dxhat.
template <typename S>
inline void normalize_plane_backward(const S* gxhat, const S* xhat, S inv, S* gx, Eigen::Index m) {
  Eigen::Map<const ArrX<S>> g(gxhat, m), xh(xhat, m);
  const S k1 = g.mean();
  const S k2 = (g * xh).mean();
  Eigen::Map<ArrX<S>>(gx, m) = (g - k1 - xh * k2) * inv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instance normalization, no affine. Stateless across batches.
// ---------------------------------------------------------------------------
template <typename S>
class InstanceNorm {
 public:
  InstanceNorm() = default;
  explicit InstanceNorm(int channels, double eps = 1e-5) : c_(channels), eps_(eps) {}

  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    const Eigen::Index m = static_cast<Eigen::Index>(x.h()) * x.w();
    xhat_ = Tensor<S>(x.n(), x.c(), x.h(), x.w());
    inv_std_.resize(static_cast<Eigen::Index>(x.n()) * x.c());
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < x.c(); ++c)
        inv_std_[static_cast<Eigen::Index>(i) * x.c() + c] =
            detail::normalize_plane(x.sample(i) + static_cast<Eigen::Index>(c) * m, xhat_.sample(i) + static_cast<Eigen::Index>(c) * m, m, eps_);
    return xhat_;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    const Eigen::Index m = static_cast<Eigen::Index>(gy.h()) * gy.w();
    Tensor<S> gx(gy.n(), gy.c(), gy.h(), gy.w());
    for (int i = 0; i < gy.n(); ++i)
      for (int c = 0; c < gy.c(); ++c)
        detail::normalize_plane_backward(gy.sample(i) + static_cast<Eigen::Index>(c) * m, xhat_.sample(i) + static_cast<Eigen::Index>(c) * m,
                                         inv_std_[static_cast<Eigen::Index>(i) * gy.c() + c], gx.sample(i) + static_cast<Eigen::Index>(c) * m, m);
    return gx;
  }

  void visit_params(const std::string&, const ParamVisitor<S>&) {}

 private:
  int c_ = 0;
  double eps_ = 1e-5;
  Tensor<S> xhat_;
  VecX<S> inv_std_;
};

// ---------------------------------------------------------------------------
// Style-modulated normalization: instance-norm the features, then scale/shift
// each channel by an affine projection of the per-sample style vector.
//   [gamma; beta] = A * style + b,  y = (1 + gamma) * xhat + beta
// ---------------------------------------------------------------------------
template <typename S>
class StyleNorm {
 public:
  StyleNorm() = default;
  StyleNorm(int channels, int style_dim, double eps = 1e-5) : c_(channels), d_(style_dim), eps_(eps) {
    affine_ = RowMatX<S>::Zero(2 * c_, d_);
    bias_ = VecX<S>::Zero(2 * c_);
    gaffine_ = affine_;
    gbias_ = bias_;
  }

  void init(RngEngine& eng) { kaiming_normal(affine_, d_, eng, 0.5); }

  // styles: (N, style_dim)
  Tensor<S> forward(const Tensor<S>& x, const MatX<S>& styles, const Ctx&) {
    const Eigen::Index m = static_cast<Eigen::Index>(x.h()) * x.w();
    styles_ = styles;
    xhat_ = Tensor<S>(x.n(), x.c(), x.h(), x.w());
    inv_std_.resize(static_cast<Eigen::Index>(x.n()) * x.c());
    gamma_beta_.noalias() = styles * affine_.transpose();  // (N, 2C)
    gamma_beta_.rowwise() += bias_.transpose();
    Tensor<S> y(x.n(), x.c(), x.h(), x.w());
    for (int i = 0; i < x.n(); ++i) {
      for (int c = 0; c < x.c(); ++c) {
        S* xh = xhat_.sample(i) + static_cast<Eigen::Index>(c) * m;
        inv_std_[static_cast<Eigen::Index>(i) * x.c() + c] = detail::normalize_plane(x.sample(i) + static_cast<Eigen::Index>(c) * m, xh, m, eps_);
        const S g = S(1) + gamma_beta_(i, c), b = gamma_beta_(i, c_ + c);
        Eigen::Map<ArrX<S>>(y.sample(i) + static_cast<Eigen::Index>(c) * m, m) = Eigen::Map<ArrX<S>>(xh, m) * g + b;
      }
    }
    return y;
  }

  // Returns gx; accumulates gstyles into the provided (N, style_dim) matrix.
  Tensor<S> backward(const Tensor<S>& gy, MatX<S>& gstyles) {
    const Eigen::Index m = static_cast<Eigen::Index>(gy.h()) * gy.w();
    Tensor<S> gx(gy.n(), gy.c(), gy.h(), gy.w());
    MatX<S> ggb = MatX<S>::Zero(gy.n(), 2 * c_);  // d(gamma,beta) per sample
    ArrX<S> gxhat(m);
    for (int i = 0; i < gy.n(); ++i) {
      for (int c = 0; c < gy.c(); ++c) {
        Eigen::Map<const ArrX<S>> g(gy.sample(i) + static_cast<Eigen::Index>(c) * m, m);
        Eigen::Map<const ArrX<S>> xh(xhat_.sample(i) + static_cast<Eigen::Index>(c) * m, m);
        ggb(i, c) = (g * xh).sum();
        ggb(i, c_ + c) = g.sum();
        gxhat = g * (S(1) + gamma_beta_(i, c));
        detail::normalize_plane_backward(gxhat.data(), xh.data(), inv_std_[static_cast<Eigen::Index>(i) * gy.c() + c],
                                         gx.sample(i) + static_cast<Eigen::Index>(c) * m, m);
      }
    }
    gaffine_.noalias() += ggb.transpose() * styles_;
    gbias_ += ggb.colwise().sum().transpose();
    gstyles.noalias() += ggb * affine_;
    return gx;
  }

  void visit_params(const std::string& p, const ParamVisitor<S>& v) {
    v({p + ".affine", affine_.data(), gaffine_.data(), affine_.size(), {2 * c_, d_}, ParamKind::kParam});
    v({p + ".bias", bias_.data(), gbias_.data(), bias_.size(), {2 * c_}, ParamKind::kParam});
  }

 private:
  int c_ = 0, d_ = 0;
  double eps_ = 1e-5;
  RowMatX<S> affine_, gaffine_;
  VecX<S> bias_, gbias_;
  MatX<S> styles_, gamma_beta_;
  Tensor<S> xhat_;
  VecX<S> inv_std_;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------
template <typename S>
class LeakyReLU {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(static_cast<S>(slope)) {}

  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    input_ = x;
    Tensor<S> y = x;
    y.flat() = y.flat().array().max(S(0)) + y.flat().array().min(S(0)) * slope_;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    Tensor<S> gx = gy;
    gx.flat().array() *= (input_.flat().array() > S(0)).template cast<S>() * (S(1) - slope_) + slope_;
    return gx;
  }

  void visit_params(const std::string&, const ParamVisitor<S>&) {}

 private:
  S slope_;
  Tensor<S> input_;
};

template <typename S>
class ReLU : public LeakyReLU<S> {
 public:
  ReLU() : LeakyReLU<S>(0.0) {}
};

// ---------------------------------------------------------------------------
// Nearest-neighbour 2x upsampling.
// ---------------------------------------------------------------------------
template <typename S>
class Upsample2x {
 public:
  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    in_h_ = x.h();
    in_w_ = x.w();
    Tensor<S> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < x.c(); ++c) {
        auto src = x.plane(i, c);
        auto dst = y.plane(i, c);
        for (int r = 0; r < x.h(); ++r)
          for (int cc = 0; cc < x.w(); ++cc) {
            const S v = src(r, cc);
            dst(2 * r, 2 * cc) = v;
            dst(2 * r, 2 * cc + 1) = v;
            dst(2 * r + 1, 2 * cc) = v;
            dst(2 * r + 1, 2 * cc + 1) = v;
          }
      }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    Tensor<S> gx(gy.n(), gy.c(), in_h_, in_w_);
    for (int i = 0; i < gy.n(); ++i)
      for (int c = 0; c < gy.c(); ++c) {
        auto src = gy.plane(i, c);
        auto dst = gx.plane(i, c);
        for (int r = 0; r < in_h_; ++r)
          for (int cc = 0; cc < in_w_; ++cc)
            dst(r, cc) = src(2 * r, 2 * cc) + src(2 * r, 2 * cc + 1) + src(2 * r + 1, 2 * cc) + src(2 * r + 1, 2 * cc + 1);
      }
    return gx;
  }

  void visit_params(const std::string&, const ParamVisitor<S>&) {}

 private:
  int in_h_ = 0, in_w_ = 0;
};

// ---------------------------------------------------------------------------
// Bilinear resize to a fixed output size, half-pixel-center convention.
// Identity when sizes match.
// ---------------------------------------------------------------------------
template <typename S>
class BilinearResize {
 public:
  BilinearResize() = default;
  BilinearResize(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}

  Tensor<S> forward(const Tensor<S>& x, const Ctx&) {
    in_h_ = x.h();
    in_w_ = x.w();
    build_tables(x.h(), x.w());
    Tensor<S> y(x.n(), x.c(), out_h_, out_w_);
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < x.c(); ++c) {
        auto src = x.plane(i, c);
        auto dst = y.plane(i, c);
        for (int r = 0; r < out_h_; ++r)
          for (int cc = 0; cc < out_w_; ++cc) {
            const auto& ry = ytab_[r];
            const auto& rx = xtab_[cc];
            dst(r, cc) = ry.w0 * (rx.w0 * src(ry.i0, rx.i0) + rx.w1 * src(ry.i0, rx.i1)) +
                         ry.w1 * (rx.w0 * src(ry.i1, rx.i0) + rx.w1 * src(ry.i1, rx.i1));
          }
      }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    Tensor<S> gx(gy.n(), gy.c(), in_h_, in_w_);
    for (int i = 0; i < gy.n(); ++i)
      for (int c = 0; c < gy.c(); ++c) {
        auto src = gy.plane(i, c);
        auto dst = gx.plane(i, c);
        for (int r = 0; r < out_h_; ++r)
          for (int cc = 0; cc < out_w_; ++cc) {
            const auto& ry = ytab_[r];
            const auto& rx = xtab_[cc];
            const S g = src(r, cc);
            dst(ry.i0, rx.i0) += ry.w0 * rx.w0 * g;
            dst(ry.i0, rx.i1) += ry.w0 * rx.w1 * g;
            dst(ry.i1, rx.i0) += ry.w1 * rx.w0 * g;
            dst(ry.i1, rx.i1) += ry.w1 * rx.w1 * g;
          }
      }
    return gx;
  }

  void visit_params(const std::string&, const ParamVisitor<S>&) {}

 private:
  struct Tap {
    int i0, i1;
    S w0, w1;
  };

  void build_tables(int in_h, int in_w) {
    auto fill = [](std::vector<Tap>& tab, int out_n, int in_n) {
      tab.resize(out_n);
      const double scale = static_cast<double>(in_n) / out_n;
      for (int i = 0; i < out_n; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        s = std::min(std::max(s, 0.0), static_cast<double>(in_n - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, in_n - 1);
        const double f = s - i0;
        tab[i] = {i0, i1, static_cast<S>(1.0 - f), static_cast<S>(f)};
      }
    };
    fill(ytab_, out_h_, in_h);
    fill(xtab_, out_w_, in_w);
  }

  int out_h_ = 0, out_w_ = 0, in_h_ = 0, in_w_ = 0;
  std::vector<Tap> ytab_, xtab_;
};

// ---------------------------------------------------------------------------
// Inverted dropout; identity at inference.
// ---------------------------------------------------------------------------
template <typename S>
class Dropout {
 public:
  Dropout() = default;
  explicit Dropout(double rate) : rate_(rate) {}

  Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) {
    if (!ctx.training || rate_ <= 0.0) {
      active_ = false;
      return x;
    }
    assert(ctx.rng && "Dropout in training mode needs an RNG");
    active_ = true;
    mask_ = Tensor<S>(x.n(), x.c(), x.h(), x.w());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate_));
    S* m = mask_.data();
    for (Eigen::Index i = 0; i < mask_.size(); ++i) m[i] = u(*ctx.rng) < rate_ ? S(0) : keep_scale;
    Tensor<S> y = x;
    y.flat().array() *= mask_.flat().array();
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) {
    if (!active_) return gy;
    Tensor<S> gx = gy;
    gx.flat().array() *= mask_.flat().array();
    return gx;
  }

  void visit_params(const std::string&, const ParamVisitor<S>&) {}

 private:
  double rate_ = 0.0;
  bool active_ = false;
  Tensor<S> mask_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------
template <typename S>
S mse_loss(const Tensor<S>& pred, const Tensor<S>& target, Tensor<S>* grad = nullptr) {
  assert(pred.same_shape(target));
  const S inv_n = S(1) / static_cast<S>(pred.size());
  S loss = (pred.flat() - target.flat()).squaredNorm() * inv_n;
  if (grad) {
    *grad = Tensor<S>(pred.n(), pred.c(), pred.h(), pred.w());
    grad->flat() = (pred.flat() - target.flat()) * (S(2) * inv_n);
  }
  return loss;
}

// Numerically stable binary cross-entropy on logits; targets in {0,1}.
template <typename S>
S bce_with_logits(const Tensor<S>& logits, const Tensor<S>& targets, Tensor<S>* grad = nullptr) {
  assert(logits.same_shape(targets));
  const S inv_n = S(1) / static_cast<S>(logits.size());
  auto z = logits.flat().array();
  auto t = targets.flat().array();
  const S loss = (z.max(S(0)) - z * t + (S(1) + (-z.abs()).exp()).log()).sum() * inv_n;
  if (grad) {
    *grad = Tensor<S>(logits.n(), logits.c(), logits.h(), logits.w());
    grad->flat().array() = (S(1) / (S(1) + (-z).exp()) - t) * inv_n;
  }
  return loss;
}

}  // namespace auheat::nn
