#include "auheat/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "auheat/nn/optim.hpp"
#include "auheat/rng.hpp"

namespace auheat {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be positive");
  if (lr <= 0 || weight_decay < 0 || grad_clip <= 0) throw ValidationError("TrainConfig: rates must be positive");
  if (sigma && *sigma <= 0) throw ValidationError("TrainConfig: sigma must be positive");
  if (dropout < 0 || dropout >= 1) throw ValidationError("TrainConfig: dropout must be in [0, 1)");
  if (interpreter_hidden < 1 || mlp_hidden < 1 || latent_hidden < 1)
    throw ValidationError("TrainConfig: hidden widths must be positive");
  backbone.validate();
}

void to_json(json& j, const BackboneConfig& c) {
  j = json{{"k", c.k},
           {"gen_channels", c.gen_channels},
           {"style_dim", c.style_dim},
           {"encoder_base", c.encoder_base},
           {"encoder_max", c.encoder_max},
           {"encoder_depth", c.encoder_depth},
           {"fine_tune", c.fine_tune}};
}

void from_json(const json& j, BackboneConfig& c) {
  c.k = j.value("k", c.k);
  c.gen_channels = j.value("gen_channels", c.gen_channels);
  c.style_dim = j.value("style_dim", c.style_dim);
  c.encoder_base = j.value("encoder_base", c.encoder_base);
  c.encoder_max = j.value("encoder_max", c.encoder_max);
  c.encoder_depth = j.value("encoder_depth", c.encoder_depth);
  c.fine_tune = j.value("fine_tune", c.fine_tune);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"weight_decay", c.weight_decay},
           {"grad_clip", c.grad_clip},
           {"dropout", c.dropout},
           {"seed", c.seed},
           {"fine_tune", c.fine_tune},
           {"interpreter_hidden", c.interpreter_hidden},
           {"mlp_hidden", c.mlp_hidden},
           {"latent_hidden", c.latent_hidden},
           {"backbone", c.backbone}};
  if (c.sigma)
    j["sigma"] = *c.sigma;
  else
    j["sigma"] = nullptr;
}

void from_json(const json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  if (j.contains("sigma") && !j.at("sigma").is_null()) c.sigma = j.at("sigma").get<double>();
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  c.fine_tune = j.value("fine_tune", c.fine_tune);
  c.interpreter_hidden = j.value("interpreter_hidden", c.interpreter_hidden);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.latent_hidden = j.value("latent_hidden", c.latent_hidden);
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
}

void to_json(json& j, const PretrainConfig& c) {
  j = json{{"epochs", c.epochs},     {"batch_size", c.batch_size}, {"lr", c.lr},
           {"weight_decay", c.weight_decay}, {"grad_clip", c.grad_clip},  {"seed", c.seed},
           {"backbone", c.backbone}};
}

void from_json(const json& j, PretrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
}

std::string config_hash(const TrainConfig& c) {
  json j = c;
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(tag(j.dump())));
  return buf;
}

std::string ArmSpec::tag() const {
  switch (arm) {
    case Arm::kPixelMlp:
      return "upscale_concat";
    case Arm::kLatentCode:
      return "latent_code";
    case Arm::kPyramid:
      break;
  }
  if (!mask.early) return "- Early";
  if (!mask.middle) return "- Middle";
  if (!mask.late) return "- Late";
  return "pyramid";
}

ArmSpec ArmSpec::from_mode(const std::string& mode) {
  ArmSpec s;
  if (mode == "pyramid" || mode.empty()) return s;
  if (mode == "upscale-concat") {
    s.arm = Arm::kPixelMlp;
    return s;
  }
  if (mode == "latent-code") {
    s.arm = Arm::kLatentCode;
    return s;
  }
  if (mode == "drop-early") {
    s.mask.early = false;
    return s;
  }
  if (mode == "drop-middle") {
    s.mask.middle = false;
    return s;
  }
  if (mode == "drop-late") {
    s.mask.late = false;
    return s;
  }
  throw ValidationError("unknown ablation mode: " + mode);
}

namespace {

struct HistoryIo {
  static json dump(const TrainHistory& h) {
    return json{{"train_loss", h.train_loss},
                {"grad_norm", h.grad_norm},
                {"val_loss", h.val_loss},
                {"best_epoch", h.best_epoch},
                {"diverged", h.diverged}};
  }
  static TrainHistory parse(const json& j) {
    TrainHistory h;
    h.train_loss = j.value("train_loss", std::vector<double>{});
    h.grad_norm = j.value("grad_norm", std::vector<double>{});
    h.val_loss = j.value("val_loss", std::vector<double>{});
    h.best_epoch = j.value("best_epoch", -1);
    h.diverged = j.value("diverged", false);
    return h;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& cp) {
  std::filesystem::create_directories(dir);
  json cfg = cp.config;
  json meta{{"config", cfg}, {"arm", cp.arm_tag}, {"au_codes", cp.au_codes}, {"config_hash", config_hash(cp.config)}};
  std::ofstream cf(dir / "config.json");
  if (!cf) throw RuntimeFailure("checkpoint: cannot write config.json in " + dir.string());
  cf << meta.dump(2) << "\n";
  save_archive(dir / "backbone", cp.backbone_weights);
  save_archive(dir / "interpreter", cp.head_weights);
  std::ofstream hf(dir / "history.json");
  if (!hf) throw RuntimeFailure("checkpoint: cannot write history.json in " + dir.string());
  hf << HistoryIo::dump(cp.history).dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream cf(dir / "config.json");
  if (!cf) throw ValidationError("checkpoint: missing config.json in " + dir.string());
  json meta;
  try {
    cf >> meta;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint config: invalid JSON: ") + e.what());
  }
  Checkpoint cp;
  cp.config = meta.at("config").get<TrainConfig>();
  cp.arm_tag = meta.value("arm", "pyramid");
  cp.au_codes = meta.at("au_codes").get<std::vector<int>>();
  cp.backbone_weights = load_archive(dir / "backbone");
  cp.head_weights = load_archive(dir / "interpreter");
  std::ifstream hf(dir / "history.json");
  if (hf) {
    json h;
    hf >> h;
    cp.history = HistoryIo::parse(h);
  }
  return cp;
}

namespace {

constexpr const char* kBackbonePrefix = "";  // names start with encoder./generator.

BackboneF build_backbone(const TrainConfig& cfg, const ArchiveMap* init_weights) {
  BackboneF bb(cfg.backbone);
  RngEngine eng = make_engine(cfg.seed, {tag("init-backbone")});
  bb.init(eng);
  if (init_weights) restore_module<float>(bb, *init_weights, kBackbonePrefix);
  return bb;
}

PyramidInterpreterF build_interpreter(const TrainConfig& cfg, int n_au) {
  InterpreterConfig ic = InterpreterConfig::for_backbone(cfg.backbone, n_au);
  ic.hidden = cfg.interpreter_hidden;
  ic.dropout = cfg.dropout;
  PyramidInterpreterF interp(ic);
  RngEngine eng = make_engine(cfg.seed, {tag("init-head")});
  interp.init(eng);
  return interp;
}

int concat_channels(const BackboneConfig& b) {
  int c = 0;
  for (int ch : b.gen_channels) c += ch;
  return c;
}

struct ArmModel {
  TrainConfig cfg;
  ArmSpec arm;
  int n_au = 0;
  BackboneF backbone;
  PyramidInterpreterF interpreter;
  PixelMlp<float> mlp;
  LatentHead<float> latent;

  ArmModel(const TrainConfig& config, const ArmSpec& spec, int n_au_count, const ArchiveMap* backbone_init)
      : cfg(config), arm(spec), n_au(n_au_count), backbone(build_backbone(config, backbone_init)) {
    RngEngine eng = make_engine(cfg.seed, {tag("init-head")});
    switch (arm.arm) {
      case Arm::kPyramid:
        interpreter = build_interpreter(cfg, n_au);
        break;
      case Arm::kPixelMlp:
        mlp = PixelMlp<float>(concat_channels(cfg.backbone), cfg.mlp_hidden, n_au);
        mlp.init(eng);
        break;
      case Arm::kLatentCode:
        latent = LatentHead<float>(cfg.backbone.num_styles() * cfg.backbone.style_dim, n_au, cfg.latent_hidden);
        latent.init(eng);
        break;
    }
  }

  bool heatmap_based() const { return arm.arm != Arm::kLatentCode; }
  bool backbone_trainable() const { return arm.arm == Arm::kPyramid && cfg.fine_tune; }

  std::vector<nn::ParamRef<float>> trainable_params() {
    std::vector<nn::ParamRef<float>> out;
    nn::ParamVisitor<float> add = [&out](const nn::ParamRef<float>& r) {
      if (r.kind == nn::ParamKind::kParam) out.push_back(r);
    };
    head_visit(add);
    if (backbone_trainable()) backbone.visit_params(kBackbonePrefix, add);
    return out;
  }

  void head_visit(const nn::ParamVisitor<float>& v) {
    switch (arm.arm) {
      case Arm::kPyramid:
        interpreter.visit_params("interpreter", v);
        break;
      case Arm::kPixelMlp:
        mlp.visit_params("pixel_mlp", v);
        break;
      case Arm::kLatentCode:
        latent.visit_params("latent_head", v);
        break;
    }
  }

  ArchiveMap snapshot_backbone() { return snapshot_module<float>(backbone, kBackbonePrefix); }

  ArchiveMap snapshot_head() {
    ArchiveMap out;
    head_visit(nn::ParamVisitor<float>([&out](const nn::ParamRef<float>& r) {
      ArchiveTensor t;
      t.shape = r.shape;
      t.values.assign(r.value, r.value + r.size);
      out.emplace(r.name, std::move(t));
    }));
    return out;
  }

  void restore(const ArchiveMap& backbone_w, const ArchiveMap& head_w) {
    restore_module<float>(backbone, backbone_w, kBackbonePrefix);
    struct HeadShim {
      ArmModel* m;
      void visit_params(const std::string&, const nn::ParamVisitor<float>& v) { m->head_visit(v); }
    } shim{this};
    restore_module<float>(shim, head_w);
  }

  // Heatmap-space prediction (pyramid and pixel-MLP arms).
  nn::TensorF forward_heatmaps(const nn::TensorF& images, const nn::Ctx& ctx, const nn::Ctx& backbone_ctx) {
    auto out = backbone.forward(images, backbone_ctx);
    FeatureMapSet<float> feats = mask_feature_groups(out.taps, arm.mask);
    if (arm.arm == Arm::kPixelMlp) {
      nn::TensorF concat = upscale_concat(feats, cfg.input_size(), cfg.input_size());
      return mlp.forward(concat, ctx);
    }
    return interpreter.forward(feats, ctx);
  }

  void backward_heatmaps(const nn::TensorF& grad) {
    if (arm.arm == Arm::kPixelMlp) {
      mlp.backward(grad);  // backbone frozen for this arm
      return;
    }
    FeatureMapSet<float> gtaps = interpreter.backward(grad);
    if (backbone_trainable()) {
      gtaps = mask_feature_groups(gtaps, arm.mask);  // dropped groups carry no gradient
      backbone.backward(gtaps, nullptr);
    }
  }

  nn::TensorF forward_logits(const nn::TensorF& images, const nn::Ctx& ctx, const nn::Ctx& backbone_ctx) {
    nn::TensorF styles = backbone.forward_styles(images, backbone_ctx);
    return latent.forward_logits(styles, ctx);
  }
};

std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size) {
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < indices.size(); i += batch_size) {
    out.emplace_back(indices.begin() + i, indices.begin() + std::min(indices.size(), i + batch_size));
  }
  return out;
}

double eval_loss(ArmModel& model, const AlignedDataset& ds, const std::vector<int>& indices, double sigma) {
  if (indices.empty()) return 0.0;
  nn::Ctx ctx{false, nullptr};
  double total = 0;
  for (const auto& batch : make_batches(indices, model.cfg.batch_size)) {
    nn::TensorF images = make_image_batch(ds, batch);
    double loss;
    if (model.heatmap_based()) {
      nn::TensorF targets = make_target_batch(ds, batch, sigma);
      loss = nn::mse_loss(model.forward_heatmaps(images, ctx, ctx), targets);
    } else {
      nn::TensorF labels = make_label_batch(ds, batch);
      loss = nn::bce_with_logits(model.forward_logits(images, ctx, ctx), labels);
    }
    total += loss * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(indices.size());
}

}  // namespace

Checkpoint train_arm(const TrainInputs& data, const TrainConfig& config, const ArmSpec& arm,
                     const ArchiveMap* backbone_init) {
  config.validate();
  arm.mask.validate();
  if (!data.train || data.train_indices.empty()) throw ValidationError("train: empty training set");
  const AlignedDataset& train_ds = *data.train;
  const AlignedDataset& val_ds = data.val ? *data.val : train_ds;
  if (train_ds.input_size != config.input_size())
    throw ValidationError("train: dataset resolution does not match the model input size");

  const int n_au = train_ds.n_au();
  const double sigma = config.effective_sigma();
  ArmModel model(config, arm, n_au, backbone_init);

  Checkpoint cp;
  cp.config = config;
  cp.arm_tag = arm.tag();
  cp.au_codes = train_ds.au_codes;
  cp.backbone_weights = model.snapshot_backbone();
  cp.head_weights = model.snapshot_head();

  if (config.epochs == 0) return cp;

  nn::AdamWOptions opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  nn::AdamW<float> opt(model.trainable_params(), opt_cfg);

  RngEngine dropout_eng = make_engine(config.seed, {tag("dropout")});
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> order = data.train_indices;
    RngEngine order_eng = make_engine(config.seed, {tag("epoch-order"), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), order_eng);

    for (const auto& batch : make_batches(order, config.batch_size)) {
      nn::TensorF images = make_image_batch(train_ds, batch);
      nn::Ctx train_ctx{true, &dropout_eng};
      nn::Ctx backbone_ctx = model.backbone_trainable() ? train_ctx : nn::Ctx{false, nullptr};

      double loss;
      nn::TensorF grad;
      if (model.heatmap_based()) {
        nn::TensorF targets = make_target_batch(train_ds, batch, sigma);
        nn::TensorF pred = model.forward_heatmaps(images, train_ctx, backbone_ctx);
        loss = nn::mse_loss(pred, targets, &grad);
      } else {
        nn::TensorF labels = make_label_batch(train_ds, batch);
        nn::TensorF logits = model.forward_logits(images, train_ctx, backbone_ctx);
        loss = nn::bce_with_logits(logits, labels, &grad);
      }

      if (!std::isfinite(loss)) {
        cp.history.diverged = true;
        throw TrainingFailure("training diverged (non-finite loss); last good checkpoint retained", cp);
      }

      nn::zero_grads(opt.params());
      if (model.heatmap_based())
        model.backward_heatmaps(grad);
      else
        model.latent.backward(grad);  // latent arm: backbone frozen
      const double post_clip = nn::clip_global_grad_norm(opt.params(), config.grad_clip);
      opt.step();

      cp.history.train_loss.push_back(loss);
      cp.history.grad_norm.push_back(post_clip);
    }

    const std::vector<int>& val_idx = data.val_indices;
    const double vloss = val_idx.empty() ? cp.history.train_loss.back() : eval_loss(model, val_ds, val_idx, sigma);
    cp.history.val_loss.push_back(vloss);
    if (vloss < best_val) {
      best_val = vloss;
      cp.history.best_epoch = epoch;
      cp.backbone_weights = model.snapshot_backbone();
      cp.head_weights = model.snapshot_head();
    }
  }
  return cp;
}

Checkpoint train_from_manifests(const Manifest& train_manifest, const Manifest& val_manifest, const AUTable& table,
                                const TrainConfig& config, const ArchiveMap* backbone_init) {
  if (train_manifest.rows.empty() || val_manifest.rows.empty()) throw ValidationError("train: empty manifest");
  AlignedDataset train_ds = load_aligned_dataset(train_manifest, table, config.input_size());
  AlignedDataset val_ds = load_aligned_dataset(val_manifest, table, config.input_size());
  TrainInputs data;
  data.train = &train_ds;
  data.val = &val_ds;
  data.train_indices.resize(train_ds.samples.size());
  data.val_indices.resize(val_ds.samples.size());
  std::iota(data.train_indices.begin(), data.train_indices.end(), 0);
  std::iota(data.val_indices.begin(), data.val_indices.end(), 0);
  return train_arm(data, config, ArmSpec{}, backbone_init);
}

namespace {

ArmSpec arm_from_tag(const std::string& tag_str) {
  ArmSpec s;
  if (tag_str == "upscale_concat")
    s.arm = Arm::kPixelMlp;
  else if (tag_str == "latent_code")
    s.arm = Arm::kLatentCode;
  else if (tag_str == "- Early")
    s.mask.early = false;
  else if (tag_str == "- Middle")
    s.mask.middle = false;
  else if (tag_str == "- Late")
    s.mask.late = false;
  return s;
}

}  // namespace

std::vector<LabelVector> predict_dataset(const Checkpoint& cp, const AlignedDataset& ds,
                                         const std::vector<int>& indices) {
  ArmModel model(cp.config, arm_from_tag(cp.arm_tag), static_cast<int>(cp.au_codes.size()), nullptr);
  model.restore(cp.backbone_weights, cp.head_weights);
  nn::Ctx ctx{false, nullptr};
  std::vector<LabelVector> out;
  out.reserve(indices.size());
  for (const auto& batch : make_batches(indices, cp.config.batch_size)) {
    nn::TensorF images = make_image_batch(ds, batch);
    if (model.heatmap_based()) {
      nn::TensorF pred = model.forward_heatmaps(images, ctx, ctx);
      for (int i = 0; i < pred.n(); ++i) {
        LabelVector lv(pred.c());
        for (int a = 0; a < pred.c(); ++a)
          lv[a] = pred.plane(i, a).template cast<double>().sum() > 0.0 ? 1 : 0;
        out.push_back(std::move(lv));
      }
    } else {
      nn::TensorF logits = model.forward_logits(images, ctx, ctx);
      for (int i = 0; i < logits.n(); ++i) {
        LabelVector lv(logits.c());
        for (int a = 0; a < logits.c(); ++a) {
          const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.at(i, a, 0, 0))));
          lv[a] = p > 0.5 ? 1 : 0;
        }
        out.push_back(std::move(lv));
      }
    }
  }
  return out;
}

LabelVector predict_labels(const Image8& image, const Landmarks68& landmarks, const Checkpoint& cp,
                           const AUTable& table) {
  AlignedDataset ds;
  ds.au_codes = table.au_codes();
  ds.input_size = cp.config.input_size();
  AlignedFace aligned = align_face(image, landmarks, ds.input_size);
  AlignedSample s;
  s.image = std::move(aligned.image);
  s.landmarks = aligned.landmarks;
  s.centers = compute_roi_centers(s.landmarks, table);
  s.labels.assign(ds.au_codes.size(), 0);
  ds.samples.push_back(std::move(s));
  return predict_dataset(cp, ds, {0})[0];
}

HeatmapStack predict_heatmaps(const Checkpoint& cp, const AlignedDataset& ds, int index) {
  ArmModel model(cp.config, arm_from_tag(cp.arm_tag), static_cast<int>(cp.au_codes.size()), nullptr);
  model.restore(cp.backbone_weights, cp.head_weights);
  if (!model.heatmap_based()) throw ValidationError("predict_heatmaps: the latent-code arm emits no heatmaps");
  nn::Ctx ctx{false, nullptr};
  nn::TensorF pred = model.forward_heatmaps(make_image_batch(ds, {index}), ctx, ctx);
  HeatmapStack stack;
  stack.au_codes = cp.au_codes;
  for (int a = 0; a < pred.c(); ++a) {
    Eigen::ArrayXXf m(pred.h(), pred.w());
    for (int y = 0; y < pred.h(); ++y)
      for (int x = 0; x < pred.w(); ++x) m(y, x) = pred.at(0, a, y, x);
    stack.maps.push_back(std::move(m));
  }
  return stack;
}

PretrainResult pretrain_reconstruction(const AlignedDataset& ds, const std::vector<int>& train_indices,
                                       const PretrainConfig& config) {
  if (train_indices.empty()) throw ValidationError("pretrain: empty training set");
  config.backbone.validate();
  if (ds.input_size != config.backbone.input_size())
    throw ValidationError("pretrain: dataset resolution does not match the backbone input size");

  BackboneF bb(config.backbone);
  RngEngine eng = make_engine(config.seed, {tag("init-backbone")});
  bb.init(eng);

  PretrainResult result;
  result.weights = snapshot_module<float>(bb, kBackbonePrefix);
  if (config.epochs == 0) return result;

  std::vector<nn::ParamRef<float>> params;
  bb.visit_params(kBackbonePrefix, nn::ParamVisitor<float>([&params](const nn::ParamRef<float>& r) {
                    if (r.kind == nn::ParamKind::kParam) params.push_back(r);
                  }));
  nn::AdamWOptions opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  nn::AdamW<float> opt(params, opt_cfg);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> order = train_indices;
    RngEngine order_eng = make_engine(config.seed, {tag("epoch-order"), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), order_eng);
    double epoch_acc = 0;
    long epoch_count = 0;
    for (const auto& batch : make_batches(order, config.batch_size)) {
      nn::TensorF images = make_image_batch(ds, batch);
      nn::Ctx ctx{true, nullptr};
      auto out = bb.forward(images, ctx);
      nn::TensorF grad;
      const double loss = nn::mse_loss(out.rgb, images, &grad);
      if (!std::isfinite(loss))
        throw TrainingFailure("pretraining diverged (non-finite loss); last good weights retained",
                              Checkpoint{.backbone_weights = result.weights});
      nn::zero_grads(opt.params());
      bb.backward({}, &grad);
      nn::clip_global_grad_norm(opt.params(), config.grad_clip);
      opt.step();
      result.step_loss.push_back(loss);
      epoch_acc += loss * static_cast<double>(batch.size());
      epoch_count += static_cast<long>(batch.size());
    }
    result.epoch_loss.push_back(epoch_acc / static_cast<double>(epoch_count));
    result.weights = snapshot_module<float>(bb, kBackbonePrefix);
  }
  return result;
}

double reconstruction_loss(const ArchiveMap& weights, const BackboneConfig& cfg, const AlignedDataset& ds,
                           const std::vector<int>& indices) {
  BackboneF bb(cfg);
  restore_module<float>(bb, weights, kBackbonePrefix);
  nn::Ctx ctx{false, nullptr};
  double total = 0;
  for (const auto& batch : make_batches(indices, 8)) {
    nn::TensorF images = make_image_batch(ds, batch);
    auto out = bb.forward(images, ctx);
    total += nn::mse_loss(out.rgb, images) * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(indices.size());
}

}  // namespace auheat
