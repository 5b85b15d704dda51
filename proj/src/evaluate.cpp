#include "auheat/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "auheat/rng.hpp"

namespace auheat {

using json = nlohmann::json;

F1Result f1_per_au(const std::vector<LabelVector>& predictions, const std::vector<LabelVector>& truths) {
  if (predictions.size() != truths.size()) throw ValidationError("f1_per_au: prediction/truth count mismatch");
  if (predictions.empty()) throw ValidationError("f1_per_au: empty inputs");
  const size_t n_au = truths[0].size();
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i].size() != n_au || truths[i].size() != n_au)
      throw ValidationError("f1_per_au: AU arity mismatch at sample " + std::to_string(i));

  F1Result out;
  out.per_au.resize(n_au, 0.0);
  for (size_t a = 0; a < n_au; ++a) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
      const int p = predictions[i][a], t = truths[i][a];
      tp += (p == 1 && t == 1);
      fp += (p == 1 && t == 0);
      fn += (p == 0 && t == 1);
    }
    const long denom = 2 * tp + fp + fn;
    out.per_au[a] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  out.mean = std::accumulate(out.per_au.begin(), out.per_au.end(), 0.0) / static_cast<double>(n_au);
  return out;
}

std::map<std::string, int> make_subject_folds(const std::vector<std::string>& subjects, int n_folds) {
  std::set<std::string> unique(subjects.begin(), subjects.end());
  if (static_cast<int>(unique.size()) < n_folds)
    throw ValidationError("make_subject_folds: fewer subjects (" + std::to_string(unique.size()) + ") than folds (" +
                          std::to_string(n_folds) + ")");
  std::map<std::string, int> out;
  int i = 0;
  for (const auto& s : unique) out[s] = i++ % n_folds;  // std::set iterates lexicographically
  return out;
}

std::map<std::string, int> make_subject_folds(const Manifest& manifest, int n_folds) {
  return make_subject_folds(manifest.subjects(), n_folds);
}

namespace {

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::vector<double> round4(const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [](double v) { return round4(v); });
  return out;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

json report_to_json(const EvalReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_val", f.n_val},
                     {"n_test", f.n_test},
                     {"per_au_f1", f.per_au_f1},
                     {"mean_f1", f.mean_f1}});
  return json{{"protocol", r.protocol},
              {"arm", r.arm_tag},
              {"au_codes", r.au_codes},
              {"per_au_f1", r.per_au_f1},
              {"mean_f1", r.mean_f1},
              {"fold_assignment", r.fold_assignment},
              {"folds", folds},
              {"sample_counts", r.sample_counts},
              {"seed", r.seed},
              {"config_hash", r.config_hash},
              {"wall_clock_sec", r.wall_clock_sec},
              {"metadata", r.metadata}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.protocol = j.at("protocol").get<std::string>();
    r.arm_tag = j.value("arm", "pyramid");
    r.au_codes = j.at("au_codes").get<std::vector<int>>();
    r.per_au_f1 = j.at("per_au_f1").get<std::vector<double>>();
    r.mean_f1 = j.at("mean_f1").get<double>();
    r.fold_assignment = j.value("fold_assignment", std::map<std::string, int>{});
    for (const auto& jf : j.value("folds", json::array())) {
      FoldScore f;
      f.fold = jf.at("fold").get<int>();
      f.n_train = jf.value("n_train", 0);
      f.n_val = jf.value("n_val", 0);
      f.n_test = jf.value("n_test", 0);
      f.per_au_f1 = jf.at("per_au_f1").get<std::vector<double>>();
      f.mean_f1 = jf.at("mean_f1").get<double>();
      r.folds.push_back(std::move(f));
    }
    r.sample_counts = j.value("sample_counts", std::map<std::string, long>{});
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.value("config_hash", "");
    r.wall_clock_sec = j.value("wall_clock_sec", 0.0);
    r.metadata = j.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: schema error: ") + e.what());
  }
  return r;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw RuntimeFailure("cannot write report: " + path.string());
    f << report_to_json(report).dump(2) << "\n";
    if (!f) throw RuntimeFailure("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open report: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("report " + path.string() + ": invalid JSON: " + e.what());
  }
  return report_from_json(j);
}

std::string render_report_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "(no reports)\n";
  const auto& codes = reports[0].au_codes;
  std::ostringstream os;
  size_t label_w = 12;
  for (const auto& r : reports) label_w = std::max(label_w, r.arm_tag.size() + r.protocol.size() + 3);

  auto pad = [&os](const std::string& s, size_t w) { os << s << std::string(w > s.size() ? w - s.size() : 1, ' '); };
  pad("method", label_w);
  for (int au : codes) pad("AU" + std::to_string(au), 8);
  os << "Avg.\n";
  os << std::string(label_w + codes.size() * 8 + 6, '-') << "\n";
  for (const auto& r : reports) {
    pad(r.arm_tag + " (" + r.protocol + ")", label_w);
    char buf[16];
    for (size_t i = 0; i < codes.size(); ++i) {
      const double v = i < r.per_au_f1.size() && r.au_codes == codes ? r.per_au_f1[i] : std::nan("");
      std::snprintf(buf, sizeof(buf), "%.4f", v);
      pad(buf, 8);
    }
    std::snprintf(buf, sizeof(buf), "%.4f", r.mean_f1);
    os << buf << "\n";
  }
  return os.str();
}

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

std::vector<int> indices_in_fold(const AlignedDataset& ds, const std::map<std::string, int>& folds, int fold,
                                 bool invert) {
  std::vector<int> out;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const int f = folds.at(ds.samples[i].subject);
    if ((f == fold) != invert) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<LabelVector> truths_for(const AlignedDataset& ds, const std::vector<int>& idx) {
  std::vector<LabelVector> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(ds.samples[i].labels);
  return out;
}

TrainConfig fold_config(const TrainConfig& base, int fold) {
  TrainConfig c = base;
  c.seed = mix_seed(base.seed, {tag("fold"), static_cast<std::uint64_t>(fold)});
  return c;
}

std::optional<ArchiveMap> maybe_load_backbone(const ProtocolOptions& opts) {
  if (opts.backbone_archive.empty()) return std::nullopt;
  return load_archive(opts.backbone_archive);
}

void attach_common(EvalReport& r, const ProtocolOptions& opts) {
  r.arm_tag = opts.arm.tag();
  r.seed = opts.train.seed;
  r.config_hash = config_hash(opts.train);
  if (!opts.reference_scores.empty()) {
    json ref = json::object();
    for (const auto& [k, v] : opts.reference_scores) ref[k] = v;
    r.metadata["full_scale_reference"] = ref;
  }
}

// One train/evaluate rotation; returns the fold score. Training failures are
// rethrown with the fold index attached.
FoldScore run_fold(const AlignedDataset& ds, const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                   const AlignedDataset& test_ds, const std::vector<int>& test_idx, const TrainConfig& cfg,
                   const ArmSpec& arm, const ArchiveMap* backbone_init, int fold,
                   const std::vector<int>& score_au_indices) {
  TrainInputs data;
  data.train = &ds;
  data.train_indices = train_idx;
  data.val = &ds;
  data.val_indices = val_idx;
  Checkpoint cp;
  try {
    cp = train_arm(data, cfg, arm, backbone_init);
  } catch (const TrainingFailure& e) {
    throw TrainingFailure("fold " + std::to_string(fold) + ": " + e.what(), e.checkpoint);
  }

  std::vector<LabelVector> preds = predict_dataset(cp, test_ds, test_idx);
  if (!score_au_indices.empty()) {
    for (auto& p : preds) {
      LabelVector sub;
      sub.reserve(score_au_indices.size());
      for (int a : score_au_indices) sub.push_back(p[a]);
      p = std::move(sub);
    }
  }
  F1Result f1 = f1_per_au(preds, truths_for(test_ds, test_idx));

  FoldScore score;
  score.fold = fold;
  score.n_train = static_cast<int>(train_idx.size());
  score.n_val = static_cast<int>(val_idx.size());
  score.n_test = static_cast<int>(test_idx.size());
  score.per_au_f1 = round4(f1.per_au);
  score.mean_f1 = round4(mean_of(score.per_au_f1));
  return score;
}

void finalize_scores(EvalReport& r) {
  const size_t n_au = r.au_codes.size();
  std::vector<double> acc(n_au, 0.0);
  for (const auto& f : r.folds)
    for (size_t a = 0; a < n_au; ++a) acc[a] += f.per_au_f1[a];
  for (auto& v : acc) v /= static_cast<double>(r.folds.size());
  r.per_au_f1 = round4(acc);
  r.mean_f1 = mean_of(r.per_au_f1);
}

}  // namespace

EvalReport run_within_domain(const Manifest& manifest, const AUTable& table, const ProtocolOptions& opts) {
  Timer timer;
  opts.train.validate();
  const auto folds = make_subject_folds(manifest, opts.n_folds);
  AlignedDataset ds = load_aligned_dataset(manifest, table, opts.train.input_size());
  const auto backbone_init = maybe_load_backbone(opts);

  EvalReport r;
  r.protocol = "within_domain";
  r.au_codes = table.au_codes();
  r.fold_assignment = folds;
  r.sample_counts["total"] = static_cast<long>(ds.samples.size());
  attach_common(r, opts);

  for (int fold = 0; fold < opts.n_folds; ++fold) {
    const auto test_idx = indices_in_fold(ds, folds, fold, false);
    const auto train_idx = indices_in_fold(ds, folds, fold, true);
    r.folds.push_back(run_fold(ds, train_idx, test_idx, ds, test_idx, fold_config(opts.train, fold), opts.arm,
                               backbone_init ? &*backbone_init : nullptr, fold, {}));
  }
  finalize_scores(r);
  r.wall_clock_sec = timer.seconds();
  return r;
}

EvalReport run_cross_domain(const Manifest& source, const Manifest& target, const AUTable& source_table,
                            const ProtocolOptions& opts) {
  Timer timer;
  opts.train.validate();

  // AU intersection, in source-table order.
  std::set<int> target_codes(target.au_codes.begin(), target.au_codes.end());
  std::vector<int> shared;
  std::vector<int> shared_indices;  // positions within the source AU ordering
  const auto src_codes = source_table.au_codes();
  for (size_t i = 0; i < src_codes.size(); ++i)
    if (target_codes.count(src_codes[i])) {
      shared.push_back(src_codes[i]);
      shared_indices.push_back(static_cast<int>(i));
    }
  if (shared.empty()) throw ValidationError("run_cross_domain: source and target share no AU codes");

  AUTable shared_table;
  for (int idx : shared_indices) shared_table.entries.push_back(source_table.entries[idx]);

  const auto folds = make_subject_folds(source, opts.n_folds);
  AlignedDataset src_ds = load_aligned_dataset(source, source_table, opts.train.input_size());
  AlignedDataset tgt_ds = load_aligned_dataset(target, shared_table, opts.train.input_size());
  const auto backbone_init = maybe_load_backbone(opts);

  EvalReport r;
  r.protocol = "cross_domain";
  r.au_codes = shared;
  r.fold_assignment = folds;
  r.sample_counts["source_total"] = static_cast<long>(src_ds.samples.size());
  r.sample_counts["target_total"] = static_cast<long>(tgt_ds.samples.size());
  attach_common(r, opts);
  r.metadata["source_au_codes"] = src_codes;

  const bool overlap = std::filesystem::weakly_canonical(source.root) == std::filesystem::weakly_canonical(target.root);
  if (overlap) r.metadata["target_overlaps_source"] = true;

  // Fold 0 of the source is validation, the rest trains; the full target is
  // the test set. Target labels are only read by the F1 computation below.
  const auto val_idx = indices_in_fold(src_ds, folds, 0, false);
  const auto train_idx = indices_in_fold(src_ds, folds, 0, true);
  std::vector<int> test_idx(tgt_ds.samples.size());
  std::iota(test_idx.begin(), test_idx.end(), 0);

  r.folds.push_back(run_fold(src_ds, train_idx, val_idx, tgt_ds, test_idx, fold_config(opts.train, 0), opts.arm,
                             backbone_init ? &*backbone_init : nullptr, 0, shared_indices));
  finalize_scores(r);
  r.wall_clock_sec = timer.seconds();
  return r;
}

std::vector<EvalReport> run_data_efficiency(const Manifest& manifest, const AUTable& table,
                                            const std::vector<long>& sizes, const ProtocolOptions& opts) {
  opts.train.validate();
  const auto folds = make_subject_folds(manifest, opts.n_folds);
  AlignedDataset ds = load_aligned_dataset(manifest, table, opts.train.input_size());
  const auto backbone_init = maybe_load_backbone(opts);

  // Rotation 0: fold 0 is the fixed validation/test fold.
  const auto test_idx = indices_in_fold(ds, folds, 0, false);
  const auto full_train = indices_in_fold(ds, folds, 0, true);

  std::vector<EvalReport> reports;
  for (long size : sizes) {
    Timer timer;
    EvalReport r;
    r.protocol = "data_efficiency";
    r.au_codes = table.au_codes();
    r.fold_assignment = folds;
    attach_common(r, opts);

    std::vector<int> train_idx;
    if (size >= static_cast<long>(full_train.size())) {
      train_idx = full_train;
      if (size > static_cast<long>(full_train.size())) r.metadata["clipped"] = true;
    } else {
      // Seeded subset; kept in canonical order so size == |train set|
      // degenerates to the identity.
      std::vector<int> shuffled = full_train;
      RngEngine eng = make_engine(opts.train.seed, {tag("efficiency-subset"), static_cast<std::uint64_t>(size)});
      std::shuffle(shuffled.begin(), shuffled.end(), eng);
      train_idx.assign(shuffled.begin(), shuffled.begin() + size);
      std::sort(train_idx.begin(), train_idx.end());
    }
    r.metadata["requested_size"] = size;
    r.sample_counts["total"] = static_cast<long>(ds.samples.size());
    r.sample_counts["train"] = static_cast<long>(train_idx.size());
    r.sample_counts["test"] = static_cast<long>(test_idx.size());

    r.folds.push_back(run_fold(ds, train_idx, test_idx, ds, test_idx, fold_config(opts.train, 0), opts.arm,
                               backbone_init ? &*backbone_init : nullptr, 0, {}));
    finalize_scores(r);
    r.wall_clock_sec = timer.seconds();
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace auheat
