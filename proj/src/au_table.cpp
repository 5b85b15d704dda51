#include "auheat/au_table.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>

#include "auheat/errors.hpp"

namespace auheat {

using json = nlohmann::json;

std::vector<int> AUTable::au_codes() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.au);
  return out;
}

void AUTable::validate() const {
  for (const auto& e : entries) {
    for (const auto& rule : e.centers) {
      if (rule.points.empty()) throw ValidationError("AUTable: empty center rule for AU " + std::to_string(e.au));
      double wsum = 0;
      for (const auto& [idx, w] : rule.points) {
        if (idx < 0 || idx > 67)
          throw ValidationError("AUTable: landmark index out of range for AU " + std::to_string(e.au));
        wsum += w;
      }
      if (std::abs(wsum - 1.0) > 1e-9)
        throw ValidationError("AUTable: rule weights must sum to 1 for AU " + std::to_string(e.au));
    }
  }
}

namespace {

CenterRule rule(std::vector<std::pair<int, double>> pts, double dx, double dy) {
  CenterRule r;
  r.points = std::move(pts);
  r.offset = {dx, dy};
  return r;
}

// Built-in ROI center rules. Positions approximate the facial regions each
// AU activates; everything is overridable through the JSON config format.
const std::map<int, std::array<CenterRule, 2>>& builtin_rules() {
  static const std::map<int, std::array<CenterRule, 2>> rules = {
      // inner brow raiser: inner brow ends, lifted
      {1, {rule({{21, 1.0}}, 0, -0.15), rule({{22, 1.0}}, 0, -0.15)}},
      // outer brow raiser: outer brow ends, lifted
      {2, {rule({{17, 1.0}}, 0, -0.15), rule({{26, 1.0}}, 0, -0.15)}},
      // brow lowerer: mid brows, pushed toward the eyes
      {4, {rule({{19, 1.0}}, 0, 0.05), rule({{24, 1.0}}, 0, 0.05)}},
      // cheek raiser: below each eye
      {6, {rule({{36, 0.5}, {39, 0.5}}, 0, 0.25), rule({{42, 0.5}, {45, 0.5}}, 0, 0.25)}},
      // lid tightener: lower lids
      {7, {rule({{40, 0.5}, {41, 0.5}}, 0, 0.0), rule({{46, 0.5}, {47, 0.5}}, 0, 0.0)}},
      // nose wrinkler: nostril wings, lifted
      {9, {rule({{31, 1.0}}, 0, -0.10), rule({{35, 1.0}}, 0, -0.10)}},
      // upper lip raiser
      {10, {rule({{50, 1.0}}, 0, 0.0), rule({{52, 1.0}}, 0, 0.0)}},
      // lip corner puller: mouth corners
      {12, {rule({{48, 1.0}}, 0, 0.0), rule({{54, 1.0}}, 0, 0.0)}},
      // dimpler: just outside the mouth corners
      {14, {rule({{48, 1.0}}, -0.08, 0.0), rule({{54, 1.0}}, 0.08, 0.0)}},
      // lip corner depressor: below the mouth corners
      {15, {rule({{48, 1.0}}, 0, 0.08), rule({{54, 1.0}}, 0, 0.08)}},
      // chin raiser: chin boss
      {17, {rule({{7, 0.5}, {58, 0.5}}, 0, 0.0), rule({{9, 0.5}, {56, 0.5}}, 0, 0.0)}},
      // lip tightener: lip midline
      {23, {rule({{51, 1.0}}, 0, 0.0), rule({{57, 1.0}}, 0, 0.0)}},
      // lip pressor: inner lip midline
      {24, {rule({{62, 1.0}}, 0, 0.0), rule({{66, 1.0}}, 0, 0.0)}},
      // lips part: mouth interior
      {25, {rule({{62, 0.5}, {66, 0.5}}, 0, 0.0), rule({{51, 0.5}, {57, 0.5}}, 0, 0.0)}},
      // jaw drop: along the chin line
      {26, {rule({{7, 1.0}}, 0, 0.05), rule({{9, 1.0}}, 0, 0.05)}},
  };
  return rules;
}

}  // namespace

const std::vector<int>& supported_au_codes() {
  static const std::vector<int> codes = [] {
    std::vector<int> c;
    for (const auto& [au, _] : builtin_rules()) c.push_back(au);
    return c;
  }();
  return codes;
}

AUTable default_au_table(const std::vector<int>& au_codes) {
  AUTable t;
  for (int au : au_codes) {
    auto it = builtin_rules().find(au);
    if (it == builtin_rules().end()) throw ValidationError("unknown AU code: " + std::to_string(au));
    t.entries.push_back({au, it->second});
  }
  t.validate();
  return t;
}

std::string au_table_to_json(const AUTable& table) {
  json j;
  j["version"] = table.version;
  j["entries"] = json::array();
  for (const auto& e : table.entries) {
    json centers = json::array();
    for (const auto& rule : e.centers) {
      json pts = json::array();
      for (const auto& [idx, w] : rule.points) pts.push_back(json::array({idx, w}));
      centers.push_back({{"points", pts}, {"offset", {rule.offset.x(), rule.offset.y()}}});
    }
    j["entries"].push_back({{"au", e.au}, {"centers", centers}});
  }
  return j.dump(2) + "\n";
}

AUTable au_table_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("AUTable: invalid JSON: ") + e.what());
  }
  AUTable t;
  try {
    t.version = j.at("version").get<int>();
    for (const auto& je : j.at("entries")) {
      AUEntry e;
      e.au = je.at("au").get<int>();
      const auto& centers = je.at("centers");
      if (centers.size() != 2) throw ValidationError("AUTable: each entry needs exactly two center rules");
      for (int k = 0; k < 2; ++k) {
        CenterRule r;
        for (const auto& p : centers[k].at("points")) r.points.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
        r.offset = {centers[k].at("offset").at(0).get<double>(), centers[k].at("offset").at(1).get<double>()};
        e.centers[k] = std::move(r);
      }
      t.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("AUTable: schema error: ") + e.what());
  }
  t.validate();
  return t;
}

void save_au_table(const std::filesystem::path& path, const AUTable& table) {
  std::ofstream f(path);
  if (!f) throw RuntimeFailure("cannot write AU table: " + path.string());
  f << au_table_to_json(table);
}

AUTable load_au_table(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open AU table: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return au_table_from_json(text);
}

std::vector<std::array<Eigen::Vector2d, 2>> compute_roi_centers(const Landmarks68& landmarks, const AUTable& table) {
  const Eigen::Vector2d le = left_eye_center(landmarks);
  const Eigen::Vector2d re = right_eye_center(landmarks);
  const Eigen::Vector2d d = re - le;
  const double iod = d.norm();
  if (iod < 1e-9) throw ValidationError("compute_roi_centers: degenerate landmarks (coincident eye centers)");
  const Eigen::Vector2d ex = d / iod;            // toward the image-right eye
  const Eigen::Vector2d ey(-ex.y(), ex.x());     // +90 deg in image coords: down-face

  std::vector<std::array<Eigen::Vector2d, 2>> out;
  out.reserve(table.entries.size());
  for (const auto& e : table.entries) {
    std::array<Eigen::Vector2d, 2> pair;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      for (const auto& [idx, w] : e.centers[k].points) c += w * landmarks.row(idx).transpose();
      c += iod * (e.centers[k].offset.x() * ex + e.centers[k].offset.y() * ey);
      pair[k] = c;
    }
    out.push_back(pair);
  }
  return out;
}

}  // namespace auheat
