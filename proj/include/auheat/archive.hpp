#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "auheat/nn/params.hpp"
#include "auheat/nn/tensor.hpp"

namespace auheat {

// A named tensor as stored in a weight archive.
struct ArchiveTensor {
  std::vector<int> shape;
  std::vector<float> values;
};

using ArchiveMap = std::map<std::string, ArchiveTensor>;

// Directory layout: index.json {name -> {shape, dtype, file}} plus one raw
// little-endian float32 file per tensor.
void save_archive(const std::filesystem::path& dir, const ArchiveMap& tensors);
ArchiveMap load_archive(const std::filesystem::path& dir);

// Snapshot every param/buffer of a module into an ArchiveMap.
template <typename S, typename Module>
ArchiveMap snapshot_module(Module& m, const std::string& prefix = "") {
  ArchiveMap out;
  m.visit_params(prefix, nn::ParamVisitor<S>([&out](const nn::ParamRef<S>& r) {
                   ArchiveTensor t;
                   t.shape = r.shape;
                   t.values.resize(static_cast<size_t>(r.size));
                   for (Eigen::Index i = 0; i < r.size; ++i) t.values[static_cast<size_t>(i)] = static_cast<float>(r.value[i]);
                   out.emplace(r.name, std::move(t));
                 }));
  return out;
}

namespace detail {
[[noreturn]] void throw_archive_error(const std::vector<std::string>& missing, const std::vector<std::string>& extra,
                                      const std::vector<std::string>& bad_shape);
}

// Restore module state; reports missing/extra tensors and shape mismatches
// by name via ValidationError.
template <typename S, typename Module>
void restore_module(Module& m, const ArchiveMap& tensors, const std::string& prefix = "") {
  std::vector<std::string> missing, bad_shape;
  std::map<std::string, bool> used;
  for (const auto& [name, _] : tensors) used[name] = false;
  m.visit_params(prefix, nn::ParamVisitor<S>([&](const nn::ParamRef<S>& r) {
                   auto it = tensors.find(r.name);
                   if (it == tensors.end()) {
                     missing.push_back(r.name);
                     return;
                   }
                   used[r.name] = true;
                   if (it->second.shape != r.shape || static_cast<Eigen::Index>(it->second.values.size()) != r.size) {
                     bad_shape.push_back(r.name);
                     return;
                   }
                   for (Eigen::Index i = 0; i < r.size; ++i) r.value[i] = static_cast<S>(it->second.values[static_cast<size_t>(i)]);
                 }));
  std::vector<std::string> extra;
  for (const auto& [name, u] : used)
    if (!u) extra.push_back(name);
  if (!missing.empty() || !extra.empty() || !bad_shape.empty()) detail::throw_archive_error(missing, extra, bad_shape);
}

}  // namespace auheat
