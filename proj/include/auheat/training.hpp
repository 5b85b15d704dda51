#pragma once

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

#include "auheat/archive.hpp"
#include "auheat/au_table.hpp"
#include "auheat/backbone.hpp"
#include "auheat/baselines.hpp"
#include "auheat/dataset.hpp"
#include "auheat/interpreter.hpp"

namespace auheat {

struct TrainConfig {
  int epochs = 15;
  int batch_size = 8;
  double lr = 5e-5;
  double weight_decay = 5e-4;
  double grad_clip = 0.1;
  std::optional<double> sigma;  // pixels; unset scales the 20 px default with resolution
  double dropout = 0.1;
  std::uint64_t seed = 0;
  bool fine_tune = true;
  int interpreter_hidden = 8;
  int mlp_hidden = 64;     // pixel-MLP baseline
  int latent_hidden = 256; // latent-code baseline
  BackboneConfig backbone;

  int input_size() const { return backbone.input_size(); }
  double effective_sigma() const { return sigma ? *sigma : default_sigma_for(input_size()); }
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

std::string config_hash(const TrainConfig& c);

// Which Table-3-style arm is being trained/evaluated.
enum class Arm { kPyramid, kPixelMlp, kLatentCode };

struct ArmSpec {
  Arm arm = Arm::kPyramid;
  GroupMask mask;  // feature-group ablation; all-keep by default

  std::string tag() const;
  static ArmSpec from_mode(const std::string& mode);  // "pyramid", "upscale-concat", "latent-code", "drop-early", ...
};

struct TrainHistory {
  std::vector<double> train_loss;  // per step
  std::vector<double> grad_norm;   // post-clip, per step
  std::vector<double> val_loss;    // per epoch
  int best_epoch = -1;
  bool diverged = false;
};

struct Checkpoint {
  TrainConfig config;
  std::string arm_tag = "pyramid";
  std::vector<int> au_codes;
  ArchiveMap backbone_weights;
  ArchiveMap head_weights;  // interpreter or baseline head
  TrainHistory history;
};

// Directory layout: {config.json, backbone/, interpreter/, history.json}.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Thrown when training diverges (non-finite loss); carries the last good
// snapshot so callers can persist it.
class TrainingFailure : public RuntimeFailure {
 public:
  TrainingFailure(const std::string& msg, Checkpoint cp) : RuntimeFailure(msg), checkpoint(std::move(cp)) {}
  Checkpoint checkpoint;
};

struct TrainInputs {
  const AlignedDataset* train = nullptr;
  std::vector<int> train_indices;
  const AlignedDataset* val = nullptr;
  std::vector<int> val_indices;
};

// End-to-end training of one arm. For the pyramid arm the backbone is
// fine-tuned when config.backbone.fine_tune is set; baseline arms keep it
// frozen. `backbone_init` supplies pretrained weights (random init otherwise).
Checkpoint train_arm(const TrainInputs& data, const TrainConfig& config, const ArmSpec& arm,
                     const ArchiveMap* backbone_init);

// Manifest-level wrapper matching the module contract (pyramid arm).
Checkpoint train_from_manifests(const Manifest& train_manifest, const Manifest& val_manifest, const AUTable& table,
                                const TrainConfig& config, const ArchiveMap* backbone_init = nullptr);

// Batched inference for any arm; one LabelVector per requested index.
std::vector<LabelVector> predict_dataset(const Checkpoint& cp, const AlignedDataset& ds,
                                         const std::vector<int>& indices);

// Single-image inference chain: align -> encode -> synthesize taps ->
// interpret -> decode.
LabelVector predict_labels(const Image8& image, const Landmarks68& landmarks, const Checkpoint& cp,
                           const AUTable& table);

// Predicted heatmaps for one aligned sample (pyramid/pixel-MLP arms).
HeatmapStack predict_heatmaps(const Checkpoint& cp, const AlignedDataset& ds, int index);

// ---------------------------------------------------------------------------
// Reconstruction pretraining (stand-in for large-corpus generative
// pretraining): encoder+generator minimize pixel MSE on a broad synthetic
// distribution.
// ---------------------------------------------------------------------------
struct PretrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  BackboneConfig backbone;
};

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

struct PretrainResult {
  ArchiveMap weights;
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;
};

PretrainResult pretrain_reconstruction(const AlignedDataset& ds, const std::vector<int>& train_indices,
                                       const PretrainConfig& config);

// Mean reconstruction MSE of a weight set over the given samples.
double reconstruction_loss(const ArchiveMap& weights, const BackboneConfig& cfg, const AlignedDataset& ds,
                           const std::vector<int>& indices);

}  // namespace auheat
