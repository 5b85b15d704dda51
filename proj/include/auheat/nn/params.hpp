#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace auheat::nn {

enum class ParamKind {
  kParam,   // trainable, receives gradient
  kBuffer,  // persistent state (e.g. batch-norm running stats), no gradient
};

// Flat view over one named tensor of a module. `grad` is null for buffers.
template <typename S>
struct ParamRef {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  Eigen::Index size = 0;
  std::vector<int> shape;
  ParamKind kind = ParamKind::kParam;
};

template <typename S>
using ParamVisitor = std::function<void(const ParamRef<S>&)>;

template <typename S, typename Derived>
std::vector<ParamRef<S>> collect_params(Derived& m, const std::string& prefix = "") {
  std::vector<ParamRef<S>> out;
  m.visit_params(prefix, [&out](const ParamRef<S>& r) { out.push_back(r); });
  return out;
}

}  // namespace auheat::nn
