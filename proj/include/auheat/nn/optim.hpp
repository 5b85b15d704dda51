#pragma once

#include <cmath>
#include <vector>

#include "auheat/nn/params.hpp"
#include "auheat/nn/tensor.hpp"

namespace auheat::nn {

template <typename S>
void zero_grads(const std::vector<ParamRef<S>>& params) {
  for (const auto& p : params)
    if (p.grad) Eigen::Map<VecX<S>>(p.grad, p.size).setZero();
}

template <typename S>
double global_grad_norm(const std::vector<ParamRef<S>>& params) {
  double sq = 0;
  for (const auto& p : params) {
    if (!p.grad) continue;
    sq += Eigen::Map<const VecX<S>>(p.grad, p.size).template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

// Scales gradients so the global norm is at most `max_norm`; returns the
// post-clip norm.
template <typename S>
double clip_global_grad_norm(const std::vector<ParamRef<S>>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const S scale = static_cast<S>(max_norm / norm);
    for (const auto& p : params)
      if (p.grad) Eigen::Map<VecX<S>>(p.grad, p.size) *= scale;
    return max_norm;
  }
  return norm;
}

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay. Buffers (kBuffer refs) are never touched.
template <typename S>
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<ParamRef<S>> params, AdamWOptions opt) : params_(std::move(params)), opt_(opt) {
    for (const auto& p : params_) {
      m_.push_back(VecX<S>::Zero(p.kind == ParamKind::kParam ? p.size : 0));
      v_.push_back(VecX<S>::Zero(p.kind == ParamKind::kParam ? p.size : 0));
    }
  }

  const std::vector<ParamRef<S>>& params() const { return params_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
    const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
    for (size_t k = 0; k < params_.size(); ++k) {
      const auto& p = params_[k];
      if (p.kind != ParamKind::kParam || !p.grad) continue;
      Eigen::Map<VecX<S>> theta(p.value, p.size);
      Eigen::Map<const VecX<S>> g(p.grad, p.size);
      auto& m = m_[k];
      auto& v = v_[k];
      m = static_cast<S>(opt_.beta1) * m + static_cast<S>(1.0 - opt_.beta1) * g;
      v.array() = static_cast<S>(opt_.beta2) * v.array() + static_cast<S>(1.0 - opt_.beta2) * g.array().square();
      theta.array() -= static_cast<S>(opt_.lr) *
                       ((m.array() / static_cast<S>(bc1)) / ((v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(opt_.eps)));
      if (opt_.weight_decay > 0) theta -= static_cast<S>(opt_.lr * opt_.weight_decay) * theta;
    }
  }

 private:
  std::vector<ParamRef<S>> params_;
  AdamWOptions opt_;
  std::vector<VecX<S>> m_, v_;
  long t_ = 0;
};

}  // namespace auheat::nn
