#include "auheat/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "auheat/errors.hpp"

namespace auheat {

using json = nlohmann::json;

LabelVector Manifest::labels_for(const ManifestRow& row, const std::vector<int>& codes) const {
  const std::vector<int>& order = codes.empty() ? au_codes : codes;
  LabelVector out;
  out.reserve(order.size());
  for (int au : order) {
    auto it = row.labels.find(au);
    if (it == row.labels.end()) throw ValidationError("manifest row missing label for AU " + std::to_string(au));
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::string> Manifest::subjects() const {
  std::set<std::string> s;
  for (const auto& r : rows) s.insert(r.subject);
  return {s.begin(), s.end()};
}

namespace {

std::filesystem::path resolve_header(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return path / "header.json";
  return path;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  const auto header_path = resolve_header(path);
  std::ifstream hf(header_path);
  if (!hf) throw ValidationError("manifest: cannot open " + header_path.string());
  json header;
  try {
    hf >> header;
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest header: invalid JSON: " + std::string(e.what()));
  }

  Manifest m;
  m.root = header_path.parent_path();
  try {
    m.au_codes = header.at("au_codes").get<std::vector<int>>();
    m.frame_size = {header.at("frame_size").at(0).get<int>(), header.at("frame_size").at(1).get<int>()};
  } catch (const json::exception& e) {
    throw ValidationError("manifest header: schema error: " + std::string(e.what()));
  }
  const std::string rows_file = header.value("rows_file", "rows.jsonl");
  const long declared_rows = header.value("n_rows", -1L);

  std::ifstream rf(m.root / rows_file);
  if (!rf) throw ValidationError("manifest: cannot open rows file " + (m.root / rows_file).string());

  std::set<int> header_codes(m.au_codes.begin(), m.au_codes.end());
  std::string line;
  long line_no = 0;
  while (std::getline(rf, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("manifest rows line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    ManifestRow row;
    try {
      row.image = j.at("image").get<std::string>();
      row.subject = j.at("subject").get<std::string>();
      const auto& lm = j.at("landmarks");
      if (lm.size() != 136)
        throw ValidationError("manifest rows line " + std::to_string(line_no) + ": expected 136 landmark values, got " +
                              std::to_string(lm.size()));
      for (int i = 0; i < 68; ++i) {
        row.landmarks(i, 0) = lm.at(2 * i).get<double>();
        row.landmarks(i, 1) = lm.at(2 * i + 1).get<double>();
      }
      for (const auto& [key, value] : j.at("labels").items()) {
        const int au = std::stoi(key);
        const int v = value.get<int>();
        if (v != 0 && v != 1)
          throw ValidationError("manifest rows line " + std::to_string(line_no) + ": labels must be 0/1");
        row.labels[au] = v;
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError("manifest rows line " + std::to_string(line_no) + ": schema error: " + e.what());
    }
    std::set<int> row_codes;
    for (const auto& [au, _] : row.labels) row_codes.insert(au);
    if (row_codes != header_codes)
      throw ValidationError("manifest rows line " + std::to_string(line_no) + ": labels do not cover the header AU codes");
    if (!landmarks_finite(row.landmarks))
      throw ValidationError("manifest rows line " + std::to_string(line_no) + ": non-finite landmark");
    m.rows.push_back(std::move(row));
  }

  if (m.rows.empty()) throw ValidationError("manifest: no rows in " + (m.root / rows_file).string());
  if (declared_rows >= 0 && declared_rows != static_cast<long>(m.rows.size()))
    throw ValidationError("manifest: header declares " + std::to_string(declared_rows) + " rows but found " +
                          std::to_string(m.rows.size()));

  std::vector<std::string> missing;
  for (const auto& r : m.rows) {
    if (!std::filesystem::exists(m.root / r.image)) {
      missing.push_back(r.image);
      if (missing.size() >= 10) break;
    }
  }
  if (!missing.empty()) {
    std::string msg = "manifest: missing image files:";
    for (const auto& f : missing) msg += " " + f;
    throw ValidationError(msg);
  }
  return m;
}

void save_manifest(const std::filesystem::path& dir, const Manifest& manifest) {
  std::filesystem::create_directories(dir);
  json header;
  header["au_codes"] = manifest.au_codes;
  header["frame_size"] = manifest.frame_size;
  header["n_rows"] = manifest.rows.size();
  header["rows_file"] = "rows.jsonl";

  const auto tmp_rows = dir / "rows.jsonl.tmp";
  {
    std::ofstream rf(tmp_rows);
    if (!rf) throw RuntimeFailure("manifest: cannot write " + tmp_rows.string());
    for (const auto& r : manifest.rows) {
      json j;
      j["image"] = r.image;
      j["subject"] = r.subject;
      std::vector<double> lm(136);
      for (int i = 0; i < 68; ++i) {
        lm[2 * i] = r.landmarks(i, 0);
        lm[2 * i + 1] = r.landmarks(i, 1);
      }
      j["landmarks"] = lm;
      json labels = json::object();
      for (const auto& [au, v] : r.labels) labels[std::to_string(au)] = v;
      j["labels"] = labels;
      rf << j.dump() << "\n";
    }
  }
  const auto tmp_header = dir / "header.json.tmp";
  {
    std::ofstream hf(tmp_header);
    if (!hf) throw RuntimeFailure("manifest: cannot write " + tmp_header.string());
    hf << header.dump(2) << "\n";
  }
  std::filesystem::rename(tmp_rows, dir / "rows.jsonl");
  std::filesystem::rename(tmp_header, dir / "header.json");
}

}  // namespace auheat
