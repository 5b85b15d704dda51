#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "auheat/geometry.hpp"
#include "auheat/heatmap.hpp"
#include "auheat/manifest.hpp"

namespace auheat {

using Rgb = std::array<std::uint8_t, 3>;

// Rendering palette and texture knobs that define a "domain".
struct DomainStyle {
  std::string name = "A";
  Rgb background{225, 214, 196};
  Rgb skin{247, 231, 209};
  Rgb stroke{70, 48, 35};
  Rgb lip{196, 100, 90};
  Rgb sclera{252, 252, 252};
  Rgb pupil{50, 35, 28};
  double stroke_width = 1.5;  // px
  double noise_amp = 3.0;     // additive uniform noise, 8-bit units
  bool per_frame_jitter = false;

  // "A", "B", or "mix" (broad distribution for pretraining).
  static DomainStyle preset(const std::string& name);
};

// Subject-level facial proportions, in canvas pixels.
struct SubjectGeometry {
  double cx = 80, cy = 84;
  double face_rx = 46, face_ry = 57;
  double eye_off = 21;   // horizontal eye-center offset from the midline
  double eye_y = 70;     // eye-center row
  double eye_rx = 8.5, eye_ry = 4.8;
  double brow_y = 58;    // brow baseline row
  double brow_len = 21, brow_arch = 3.0;
  double nose_tip_y = 91, nose_w = 13;
  double mouth_y = 112, mouth_w = 30, lip_h = 4.5;
};

// AU codes the renderer can depict as geometric deformations.
const std::vector<int>& renderable_au_codes();  // {1, 2, 4, 6, 12, 25}

struct SyntheticFaceParams {
  SubjectGeometry geometry;
  std::vector<int> au_codes;   // which AUs the activation vector covers
  LabelVector activations;     // same length as au_codes
  DomainStyle style;
  double rotation_deg = 0;     // per-frame in-plane rotation about the face center
  double scale = 1.0;          // per-frame scale jitter
  double shift_x = 0, shift_y = 0;
  double delta_px = 4.0;       // AU deformation magnitude
  std::uint64_t noise_seed = 0;
  int canvas = 160;
};

struct RenderedFace {
  Image8 image;
  Landmarks68 landmarks;
  LabelVector labels;
};

// Deterministic rendering; landmark positions are computed analytically from
// the deformed geometry, and every stroke passes through its landmarks.
// Throws ValidationError when the face does not fit the canvas or when an AU
// code has no renderable deformation.
RenderedFace render_face(const SyntheticFaceParams& params);

struct CorpusConfig {
  int n_subjects = 20;
  int frames_per_subject = 100;
  std::vector<int> au_codes = {1, 2, 4, 6, 12, 25};
  std::string style = "A";
  std::uint64_t seed = 0;
  double activation_rate = 0.3;  // independent per-AU marginal
  double delta_px = 4.0;
  int canvas = 160;
};

// Renders the corpus to out_dir/images/, writes header.json + rows.jsonl and
// a corpus_spec.json recording all generation parameters. Returns the
// manifest. Deterministic: per-frame randomness derives from
// (seed, subject, frame) only.
Manifest generate_dataset(const CorpusConfig& config, const std::filesystem::path& out_dir);

}  // namespace auheat
