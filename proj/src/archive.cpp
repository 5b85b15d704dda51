#include "auheat/archive.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <numeric>

#include "auheat/errors.hpp"

namespace auheat {

using json = nlohmann::json;

namespace {

std::string tensor_file_name(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) c = '_';
  return s + ".bin";
}

}  // namespace

namespace detail {

void throw_archive_error(const std::vector<std::string>& missing, const std::vector<std::string>& extra,
                         const std::vector<std::string>& bad_shape) {
  std::string msg = "archive mismatch:";
  auto append = [&msg](const char* label, const std::vector<std::string>& names) {
    if (names.empty()) return;
    msg += std::string(" ") + label + " [";
    for (size_t i = 0; i < names.size(); ++i) msg += (i ? ", " : "") + names[i];
    msg += "]";
  };
  append("missing", missing);
  append("unexpected", extra);
  append("shape mismatch", bad_shape);
  throw ValidationError(msg);
}

}  // namespace detail

void save_archive(const std::filesystem::path& dir, const ArchiveMap& tensors) {
  std::filesystem::create_directories(dir);
  json index;
  for (const auto& [name, t] : tensors) {
    const std::string file = tensor_file_name(name);
    index[name] = {{"shape", t.shape}, {"dtype", "float32"}, {"file", file}};
    std::ofstream f(dir / file, std::ios::binary);
    if (!f) throw RuntimeFailure("archive: cannot write " + (dir / file).string());
    f.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!f) throw RuntimeFailure("archive: write failed for " + (dir / file).string());
  }
  std::ofstream idx(dir / "index.json");
  if (!idx) throw RuntimeFailure("archive: cannot write index in " + dir.string());
  idx << index.dump(2) << "\n";
}

ArchiveMap load_archive(const std::filesystem::path& dir) {
  std::ifstream idxf(dir / "index.json");
  if (!idxf) throw ValidationError("archive: missing index.json in " + dir.string());
  json index;
  try {
    idxf >> index;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("archive: invalid index.json: ") + e.what());
  }
  if (index.empty()) throw ValidationError("archive: no tensors in " + dir.string());

  ArchiveMap out;
  for (const auto& [name, meta] : index.items()) {
    const std::string dtype = meta.value("dtype", "");
    if (dtype != "float32") throw ValidationError("archive: unsupported dtype '" + dtype + "' for tensor " + name);
    ArchiveTensor t;
    t.shape = meta.at("shape").get<std::vector<int>>();
    const auto count = std::accumulate(t.shape.begin(), t.shape.end(), static_cast<std::int64_t>(1),
                                       [](std::int64_t a, int b) { return a * b; });
    const auto path = dir / meta.at("file").get<std::string>();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("archive: missing tensor file " + path.string());
    t.values.resize(static_cast<size_t>(count));
    f.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(t.values.size() * sizeof(float)))
      throw ValidationError("archive: tensor file truncated: " + path.string());
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace auheat
