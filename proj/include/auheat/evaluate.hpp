#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

#include "auheat/training.hpp"

namespace auheat {

struct F1Result {
  std::vector<double> per_au;
  double mean = 0;
};

// F1_i = 2TP/(2TP+FP+FN) per AU; 0 when the denominator is 0.
F1Result f1_per_au(const std::vector<LabelVector>& predictions, const std::vector<LabelVector>& truths);

// Subject-independent fold assignment: unique subject IDs sorted
// lexicographically, then dealt round-robin. Deterministic; the seed is
// recorded in reports but does not alter the assignment rule.
std::map<std::string, int> make_subject_folds(const std::vector<std::string>& subjects, int n_folds);
std::map<std::string, int> make_subject_folds(const Manifest& manifest, int n_folds);

struct FoldScore {
  int fold = 0;
  int n_train = 0, n_val = 0, n_test = 0;
  std::vector<double> per_au_f1;  // 4 decimals
  double mean_f1 = 0;
};

struct EvalReport {
  std::string protocol;
  std::string arm_tag = "pyramid";
  std::vector<int> au_codes;
  std::vector<double> per_au_f1;  // 4 decimals, averaged across folds
  double mean_f1 = 0;             // arithmetic mean of per_au_f1
  std::map<std::string, int> fold_assignment;
  std::vector<FoldScore> folds;
  std::map<std::string, long> sample_counts;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_clock_sec = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Lossless JSON roundtrip; canonical (sorted-key) serialization, atomic write.
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// Plain-text table: one row per report, one column per AU plus the mean.
std::string render_report_table(const std::vector<EvalReport>& reports);

struct ProtocolOptions {
  TrainConfig train;
  ArmSpec arm;
  int n_folds = 3;
  std::filesystem::path backbone_archive;         // optional pretrained weights
  std::map<std::string, double> reference_scores; // recorded as metadata expectations only
};

// 3-fold subject-independent cross-validation: per rotation, train on the
// other folds and validate/test on the held-out fold; per-AU F1 averaged
// across folds.
EvalReport run_within_domain(const Manifest& manifest, const AUTable& table, const ProtocolOptions& opts);

// Train on source folds (fold 0 is validation), test on the full target over
// the AU intersection only. Target labels are never visible to training.
EvalReport run_cross_domain(const Manifest& source, const Manifest& target, const AUTable& source_table,
                            const ProtocolOptions& opts);

// Seeded training subsets of the rotation-0 training folds at each size,
// identical test fold. Oversize entries are clipped (flagged in metadata).
// A size covering the full training set reproduces the within-domain
// rotation-0 result for the same seed.
std::vector<EvalReport> run_data_efficiency(const Manifest& manifest, const AUTable& table,
                                            const std::vector<long>& sizes, const ProtocolOptions& opts);

}  // namespace auheat
