#include "auheat/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "auheat/evaluate.hpp"
#include "auheat/synth.hpp"
#include "auheat/version.hpp"
#include "auheat/viz.hpp"

namespace auheat {

using json = nlohmann::json;

namespace {

// Guards an output directory against concurrent runs.
class OutDirLock {
 public:
  explicit OutDirLock(const std::filesystem::path& dir) : lock_path_(dir / ".auheat.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw ValidationError("output directory is locked by another run: " + dir.string() +
                            " (remove " + lock_path_.string() + " if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~OutDirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(lock_path_, ec);
    }
  }
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  int fd_ = -1;
};

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config_path;
  std::string out_dir;
};

struct ResolvedConfig {
  TrainConfig train;
  PretrainConfig pretrain;
  CorpusConfig corpus;
};

ResolvedConfig load_config(const GlobalOpts& g) {
  ResolvedConfig c;
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path);
    if (!f) throw ValidationError("cannot open config file: " + g.config_path);
    json j;
    try {
      f >> j;
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config file: invalid JSON: ") + e.what());
    }
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("pretrain")) c.pretrain = j.at("pretrain").get<PretrainConfig>();
    if (j.contains("corpus")) {
      const auto& jc = j.at("corpus");
      c.corpus.n_subjects = jc.value("n_subjects", c.corpus.n_subjects);
      c.corpus.frames_per_subject = jc.value("frames_per_subject", c.corpus.frames_per_subject);
      c.corpus.au_codes = jc.value("au_codes", c.corpus.au_codes);
      c.corpus.style = jc.value("style", c.corpus.style);
      c.corpus.activation_rate = jc.value("activation_rate", c.corpus.activation_rate);
      c.corpus.delta_px = jc.value("delta_px", c.corpus.delta_px);
      c.corpus.canvas = jc.value("canvas", c.corpus.canvas);
    }
  }
  if (g.seed_set) {
    c.train.seed = g.seed;
    c.pretrain.seed = g.seed;
    c.corpus.seed = g.seed;
  }
  return c;
}

void write_run_info(const std::filesystem::path& dir, const std::string& subcommand, const ResolvedConfig& cfg,
                    int argc, const char* const* argv) {
  json info;
  info["version"] = kVersion;
  info["subcommand"] = subcommand;
  json j_train = cfg.train;
  json j_pre = cfg.pretrain;
  info["config"] = {{"train", j_train}, {"pretrain", j_pre}};
  info["config"]["corpus"] = {{"n_subjects", cfg.corpus.n_subjects},
                              {"frames_per_subject", cfg.corpus.frames_per_subject},
                              {"au_codes", cfg.corpus.au_codes},
                              {"style", cfg.corpus.style},
                              {"seed", cfg.corpus.seed},
                              {"activation_rate", cfg.corpus.activation_rate},
                              {"delta_px", cfg.corpus.delta_px},
                              {"canvas", cfg.corpus.canvas}};
  info["seed"] = cfg.train.seed;
  json args = json::array();
  for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
  info["argv"] = args;
  const auto tmp = dir / "run_info.json.tmp";
  std::ofstream f(tmp);
  if (!f) throw RuntimeFailure("cannot write run_info.json in " + dir.string());
  f << info.dump(2) << "\n";
  f.close();
  std::filesystem::rename(tmp, dir / "run_info.json");
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<long> parse_long_list(const std::string& csv) {
  std::vector<long> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stol(item));
  }
  return out;
}

AUTable table_for(const Manifest& manifest, const std::string& table_path) {
  if (!table_path.empty()) return load_au_table(table_path);
  return default_au_table(manifest.au_codes);
}

std::map<std::string, double> load_reference_scores(const std::string& path) {
  std::map<std::string, double> out;
  if (path.empty()) return out;
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open reference-scores file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("reference scores: invalid JSON: ") + e.what());
  }
  for (const auto& [k, v] : j.items())
    if (v.is_number()) out[k] = v.get<double>();
  return out;
}

void print_report_summary(const EvalReport& r) {
  std::cout << render_report_table({r});
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"heatmap-regression facial action unit detection on style-generator features"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Base seed for all randomness")->each([&g](const std::string&) { g.seed_set = true; });
  app.add_option("--config", g.config_path, "JSON config file (flags override file values)");
  app.add_option("--out", g.out_dir, "Output directory");

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic face corpus");
  int s_subjects = 20, s_frames = 100, s_canvas = 0;
  std::string s_aus, s_style;
  double s_rate = -1, s_delta = -1;
  synth->add_option("--subjects", s_subjects, "Number of subjects");
  synth->add_option("--frames", s_frames, "Frames per subject");
  synth->add_option("--aus", s_aus, "Comma-separated AU codes (default 1,2,4,6,12,25)");
  synth->add_option("--style", s_style, "Domain style: A, B, or mix");
  synth->add_option("--activation-rate", s_rate, "Per-AU activation marginal (default 0.3)");
  synth->add_option("--delta", s_delta, "AU deformation magnitude in px (default 4)");
  synth->add_option("--canvas", s_canvas, "Canvas size in px (default 160)");

  // --- pretrain ---
  auto* pretrain = app.add_subcommand("pretrain", "Reconstruction-pretrain the backbone on a corpus");
  std::string p_manifest;
  int p_epochs = -1;
  double p_lr = -1;
  pretrain->add_option("--manifest", p_manifest, "Corpus directory or header.json path")->required();
  pretrain->add_option("--epochs", p_epochs, "Pretraining epochs");
  pretrain->add_option("--lr", p_lr, "Pretraining learning rate");

  // --- train ---
  auto* train = app.add_subcommand("train", "Train the detector on explicit train/val manifests");
  std::string t_train, t_val, t_backbone, t_table;
  int t_epochs = -1;
  double t_lr = -1, t_sigma = -1;
  train->add_option("--train-manifest", t_train)->required();
  train->add_option("--val-manifest", t_val)->required();
  train->add_option("--backbone", t_backbone, "Pretrained backbone weight archive directory");
  train->add_option("--au-table", t_table, "AU table config JSON (default: built-in table)");
  train->add_option("--epochs", t_epochs);
  train->add_option("--lr", t_lr);
  train->add_option("--sigma", t_sigma, "Heatmap sigma in px");

  // --- eval protocols ---
  std::string e_manifest, e_backbone, e_table, e_source, e_target, e_sizes, e_refs;
  int e_folds = 3;
  auto add_eval_common = [&](CLI::App* cmd) {
    cmd->add_option("--backbone", e_backbone, "Pretrained backbone weight archive directory");
    cmd->add_option("--au-table", e_table, "AU table config JSON");
    cmd->add_option("--folds", e_folds, "Fold count (default 3)");
    cmd->add_option("--reference-json", e_refs, "Reference scores JSON recorded as metadata");
  };
  auto* eval_within = app.add_subcommand("eval-within", "Within-domain subject-independent cross-validation");
  eval_within->add_option("--manifest", e_manifest)->required();
  add_eval_common(eval_within);

  auto* eval_cross = app.add_subcommand("eval-cross", "Cross-domain evaluation (train on source, test on target)");
  eval_cross->add_option("--source", e_source)->required();
  eval_cross->add_option("--target", e_target)->required();
  add_eval_common(eval_cross);

  auto* eval_eff = app.add_subcommand("eval-efficiency", "Data-efficiency curve over training subset sizes");
  eval_eff->add_option("--manifest", e_manifest)->required();
  eval_eff->add_option("--sizes", e_sizes, "Comma-separated subset sizes (default 100,1000,5000,10000)");
  add_eval_common(eval_eff);

  auto* ablate = app.add_subcommand("ablate", "Run one ablation arm of the comparison table");
  std::string a_mode;
  ablate->add_option("--mode", a_mode, "pyramid | upscale-concat | latent-code | drop-early | drop-middle | drop-late")
      ->required();
  ablate->add_option("--manifest", e_manifest, "Within-domain manifest");
  ablate->add_option("--source", e_source, "Cross-domain source manifest");
  ablate->add_option("--target", e_target, "Cross-domain target manifest");
  add_eval_common(ablate);

  // --- plot ---
  auto* plot = app.add_subcommand("plot", "Render ground-truth or predicted heatmaps for one manifest row");
  std::string pl_manifest, pl_checkpoint, pl_name = "heatmaps.png", pl_dump;
  int pl_row = 0;
  double pl_sigma = -1;
  plot->add_option("--manifest", pl_manifest)->required();
  plot->add_option("--row", pl_row, "Manifest row index");
  plot->add_option("--checkpoint", pl_checkpoint, "Checkpoint directory (omit for ground truth)");
  plot->add_option("--name", pl_name, "Output file name");
  plot->add_option("--dump", pl_dump, "Also dump raw float32 heatmaps to this file");
  plot->add_option("--sigma", pl_sigma, "Ground-truth sigma in px");
  plot->add_option("--au-table", e_table, "AU table config JSON");

  // --- report-table ---
  auto* table_cmd = app.add_subcommand("report-table", "Render saved reports as an aligned text table");
  std::vector<std::string> r_reports;
  table_cmd->add_option("--reports", r_reports, "Report JSON files")->required()->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ResolvedConfig cfg = load_config(g);

    auto need_out = [&]() -> std::filesystem::path {
      if (g.out_dir.empty()) throw ValidationError("--out is required for this subcommand");
      return g.out_dir;
    };

    if (app.got_subcommand(synth)) {
      const auto out = need_out();
      OutDirLock lock(out);
      if (synth->count("--subjects")) cfg.corpus.n_subjects = s_subjects;
      if (synth->count("--frames")) cfg.corpus.frames_per_subject = s_frames;
      if (!s_aus.empty()) cfg.corpus.au_codes = parse_int_list(s_aus);
      if (!s_style.empty()) cfg.corpus.style = s_style;
      if (s_rate >= 0) cfg.corpus.activation_rate = s_rate;
      if (s_delta >= 0) cfg.corpus.delta_px = s_delta;
      if (s_canvas > 0) cfg.corpus.canvas = s_canvas;
      write_run_info(out, "synth", cfg, argc, argv);
      Manifest m = generate_dataset(cfg.corpus, out);
      std::cout << "wrote " << m.rows.size() << " frames, " << cfg.corpus.n_subjects << " subjects -> " << out
                << "\n";
      return 0;
    }

    if (app.got_subcommand(pretrain)) {
      const auto out = need_out();
      OutDirLock lock(out);
      if (p_epochs >= 0) cfg.pretrain.epochs = p_epochs;
      if (p_lr > 0) cfg.pretrain.lr = p_lr;
      write_run_info(out, "pretrain", cfg, argc, argv);
      Manifest m = load_manifest(p_manifest);
      AUTable table = table_for(m, "");
      AlignedDataset ds = load_aligned_dataset(m, table, cfg.pretrain.backbone.input_size());
      std::vector<int> idx(ds.samples.size());
      std::iota(idx.begin(), idx.end(), 0);
      PretrainResult result = pretrain_reconstruction(ds, idx, cfg.pretrain);
      save_archive(out / "backbone", result.weights);
      json hist{{"step_loss", result.step_loss}, {"epoch_loss", result.epoch_loss}};
      std::ofstream hf(out / "pretrain_history.json");
      hf << hist.dump(2) << "\n";
      std::cout << "pretrained backbone -> " << (out / "backbone") << "\n";
      if (!result.epoch_loss.empty())
        std::cout << "reconstruction loss: first epoch " << result.epoch_loss.front() << ", last epoch "
                  << result.epoch_loss.back() << "\n";
      return 0;
    }

    if (app.got_subcommand(train)) {
      const auto out = need_out();
      OutDirLock lock(out);
      if (t_epochs >= 0) cfg.train.epochs = t_epochs;
      if (t_lr > 0) cfg.train.lr = t_lr;
      if (t_sigma > 0) cfg.train.sigma = t_sigma;
      write_run_info(out, "train", cfg, argc, argv);
      Manifest train_m = load_manifest(t_train);
      Manifest val_m = load_manifest(t_val);
      AUTable table = table_for(train_m, t_table);
      std::optional<ArchiveMap> backbone_init;
      if (!t_backbone.empty()) backbone_init = load_archive(t_backbone);
      try {
        Checkpoint cp = train_from_manifests(train_m, val_m, table, cfg.train, backbone_init ? &*backbone_init : nullptr);
        save_checkpoint(out / "checkpoint", cp);
        std::cout << "checkpoint -> " << (out / "checkpoint") << " (best epoch " << cp.history.best_epoch << ")\n";
      } catch (const TrainingFailure& e) {
        save_checkpoint(out / "checkpoint.last-good", e.checkpoint);
        throw;
      }
      return 0;
    }

    auto protocol_opts = [&](const Manifest& m) {
      ProtocolOptions opts;
      opts.train = cfg.train;
      opts.n_folds = e_folds;
      if (!e_backbone.empty()) opts.backbone_archive = e_backbone;
      opts.reference_scores = load_reference_scores(e_refs);
      (void)m;
      return opts;
    };

    if (app.got_subcommand(eval_within)) {
      const auto out = need_out();
      OutDirLock lock(out);
      write_run_info(out, "eval-within", cfg, argc, argv);
      Manifest m = load_manifest(e_manifest);
      AUTable table = table_for(m, e_table);
      EvalReport r = run_within_domain(m, table, protocol_opts(m));
      save_report(r, out / "report_within.json");
      print_report_summary(r);
      return 0;
    }

    if (app.got_subcommand(eval_cross)) {
      const auto out = need_out();
      OutDirLock lock(out);
      write_run_info(out, "eval-cross", cfg, argc, argv);
      Manifest src = load_manifest(e_source);
      Manifest tgt = load_manifest(e_target);
      AUTable table = table_for(src, e_table);
      EvalReport r = run_cross_domain(src, tgt, table, protocol_opts(src));
      save_report(r, out / "report_cross.json");
      print_report_summary(r);
      return 0;
    }

    if (app.got_subcommand(eval_eff)) {
      const auto out = need_out();
      OutDirLock lock(out);
      write_run_info(out, "eval-efficiency", cfg, argc, argv);
      Manifest m = load_manifest(e_manifest);
      AUTable table = table_for(m, e_table);
      std::vector<long> sizes = e_sizes.empty() ? std::vector<long>{100, 1000, 5000, 10000} : parse_long_list(e_sizes);
      auto reports = run_data_efficiency(m, table, sizes, protocol_opts(m));
      for (size_t i = 0; i < reports.size(); ++i)
        save_report(reports[i], out / ("report_efficiency_" + std::to_string(sizes[i]) + ".json"));
      std::cout << render_report_table(reports);
      return 0;
    }

    if (app.got_subcommand(ablate)) {
      const auto out = need_out();
      OutDirLock lock(out);
      write_run_info(out, "ablate", cfg, argc, argv);
      ArmSpec arm = ArmSpec::from_mode(a_mode);
      EvalReport r;
      if (!e_source.empty() && !e_target.empty()) {
        Manifest src = load_manifest(e_source);
        Manifest tgt = load_manifest(e_target);
        AUTable table = table_for(src, e_table);
        auto opts = protocol_opts(src);
        opts.arm = arm;
        r = run_cross_domain(src, tgt, table, opts);
      } else if (!e_manifest.empty()) {
        Manifest m = load_manifest(e_manifest);
        AUTable table = table_for(m, e_table);
        auto opts = protocol_opts(m);
        opts.arm = arm;
        r = run_within_domain(m, table, opts);
      } else {
        throw ValidationError("ablate: pass --manifest (within-domain) or --source and --target (cross-domain)");
      }
      save_report(r, out / "report_ablation.json");
      print_report_summary(r);
      return 0;
    }

    if (app.got_subcommand(plot)) {
      const auto out = need_out();
      OutDirLock lock(out);
      write_run_info(out, "plot", cfg, argc, argv);
      Manifest m = load_manifest(pl_manifest);
      if (pl_row < 0 || pl_row >= static_cast<int>(m.rows.size()))
        throw ValidationError("plot: row index out of range");
      AUTable table = table_for(m, e_table);
      const int input_size = cfg.train.input_size();
      AlignedDataset ds = load_aligned_dataset(m, table, input_size);

      HeatmapStack stack;
      if (pl_checkpoint.empty()) {
        const auto& s = ds.samples[pl_row];
        const double sigma = pl_sigma > 0 ? pl_sigma : cfg.train.effective_sigma();
        stack = encode_heatmaps(s.labels, s.centers, {sigma}, input_size, input_size);
        stack.au_codes = ds.au_codes;
      } else {
        Checkpoint cp = load_checkpoint(pl_checkpoint);
        stack = predict_heatmaps(cp, ds, pl_row);
      }
      render_heatmap_overlay(ds.samples[pl_row].image, stack, out / pl_name);
      if (!pl_dump.empty()) save_heatmaps(out / pl_dump, stack);
      std::cout << "wrote " << (out / pl_name) << "\n";
      return 0;
    }

    if (app.got_subcommand(table_cmd)) {
      std::vector<EvalReport> reports;
      for (const auto& p : r_reports) reports.push_back(load_report(p));
      const std::string text = render_report_table(reports);
      std::cout << text;
      if (!g.out_dir.empty()) {
        OutDirLock lock(g.out_dir);
        std::ofstream f(std::filesystem::path(g.out_dir) / "table.txt");
        f << text;
      }
      return 0;
    }

    throw ValidationError("no subcommand selected");
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace auheat
