#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cstdint>
#include <vector>

namespace auheat::nn {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

// Dense 4-D batch tensor, NCHW, contiguous. The (c, h*w) slice of one sample
// is exposed as a row-major Eigen map so convolutions reduce to GEMM.
template <typename S>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w), buf_(VecX<S>::Zero(static_cast<Eigen::Index>(n) * c * h * w)) {}

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  Eigen::Index size() const { return buf_.size(); }
  bool empty() const { return buf_.size() == 0; }
  bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  S* data() { return buf_.data(); }
  const S* data() const { return buf_.data(); }

  Eigen::Map<VecX<S>> flat() { return {buf_.data(), buf_.size()}; }
  Eigen::Map<const VecX<S>> flat() const { return {buf_.data(), buf_.size()}; }

  S* sample(int i) { return buf_.data() + static_cast<Eigen::Index>(i) * c_ * h_ * w_; }
  const S* sample(int i) const { return buf_.data() + static_cast<Eigen::Index>(i) * c_ * h_ * w_; }

  // (c, h*w) view of one sample.
  Eigen::Map<RowMatX<S>> chw(int i) { return {sample(i), c_, static_cast<Eigen::Index>(h_) * w_}; }
  Eigen::Map<const RowMatX<S>> chw(int i) const { return {sample(i), c_, static_cast<Eigen::Index>(h_) * w_}; }

  // (h, w) view of one channel plane.
  Eigen::Map<RowMatX<S>> plane(int i, int ch) { return {sample(i) + static_cast<Eigen::Index>(ch) * h_ * w_, h_, w_}; }
  Eigen::Map<const RowMatX<S>> plane(int i, int ch) const { return {sample(i) + static_cast<Eigen::Index>(ch) * h_ * w_, h_, w_}; }

  // (n, c*h*w) view of the full batch.
  Eigen::Map<RowMatX<S>> rows() { return {buf_.data(), n_, static_cast<Eigen::Index>(c_) * h_ * w_}; }
  Eigen::Map<const RowMatX<S>> rows() const { return {buf_.data(), n_, static_cast<Eigen::Index>(c_) * h_ * w_}; }

  S& at(int i, int ch, int y, int x) { return buf_[((static_cast<Eigen::Index>(i) * c_ + ch) * h_ + y) * w_ + x]; }
  S at(int i, int ch, int y, int x) const { return buf_[((static_cast<Eigen::Index>(i) * c_ + ch) * h_ + y) * w_ + x]; }

  void set_zero() { buf_.setZero(); }

  // Reinterpret the per-sample block as a different CHW factorization.
  Tensor reshaped(int c, int h, int w) const {
    assert(static_cast<Eigen::Index>(c) * h * w == static_cast<Eigen::Index>(c_) * h_ * w_);
    Tensor out = *this;
    out.c_ = c;
    out.h_ = h;
    out.w_ = w;
    return out;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(n_, c_, h_, w_);
    out.flat() = buf_.template cast<T>();
    return out;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  VecX<S> buf_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace auheat::nn
