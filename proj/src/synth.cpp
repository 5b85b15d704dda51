#include "auheat/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "auheat/errors.hpp"
#include "auheat/rng.hpp"

namespace auheat {

using json = nlohmann::json;
using Vec2 = Eigen::Vector2d;

const std::vector<int>& renderable_au_codes() {
  static const std::vector<int> codes = {1, 2, 4, 6, 12, 25};
  return codes;
}

DomainStyle DomainStyle::preset(const std::string& name) {
  DomainStyle s;
  s.name = name;
  if (name == "A") return s;  // defaults are style A
  if (name == "B") {
    s.background = {72, 84, 105};
    s.skin = {168, 182, 200};
    s.stroke = {15, 15, 20};
    s.lip = {120, 60, 110};
    s.sclera = {235, 240, 248};
    s.pupil = {10, 12, 18};
    s.stroke_width = 2.3;
    s.noise_amp = 9.0;
    return s;
  }
  if (name == "mix") {
    s.per_frame_jitter = true;
    return s;
  }
  throw ValidationError("unknown domain style: " + name + " (expected A, B, or mix)");
}

namespace {

// ---------------------------------------------------------------------------
// Rasterization helpers. Geometry lives in output-canvas coordinates; shapes
// are drawn on a 2x supersampled canvas and box-downsampled, so a point p
// maps to 2p + 0.5 (pixel centers at integer coordinates).
// ---------------------------------------------------------------------------

struct Raster {
  Image8 img;  // 2x canvas
  explicit Raster(int canvas, Rgb bg) : img(canvas * 2, canvas * 2) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) img.px(x, y)[c] = bg[c];
  }

  static Vec2 up(const Vec2& p) { return 2.0 * p + Vec2(0.5, 0.5); }

  void blend(int x, int y, const Rgb& color, double alpha) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height || alpha <= 0) return;
    std::uint8_t* px = img.px(x, y);
    for (int c = 0; c < 3; ++c)
      px[c] = static_cast<std::uint8_t>(std::lround(px[c] * (1.0 - alpha) + color[c] * alpha));
  }

  // Even-odd scanline polygon fill, hard edges (the supersample provides AA).
  void fill_polygon(const std::vector<Vec2>& poly_in, const Rgb& color) {
    std::vector<Vec2> poly;
    poly.reserve(poly_in.size());
    for (const auto& p : poly_in) poly.push_back(up(p));
    double ymin = 1e30, ymax = -1e30;
    for (const auto& p : poly) {
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    }
    std::vector<double> xs;
    for (int y = std::max(0, static_cast<int>(std::floor(ymin))); y <= std::min(img.height - 1, static_cast<int>(std::ceil(ymax))); ++y) {
      xs.clear();
      const double fy = y;
      for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        if ((a.y() <= fy && b.y() > fy) || (b.y() <= fy && a.y() > fy))
          xs.push_back(a.x() + (fy - a.y()) / (b.y() - a.y()) * (b.x() - a.x()));
      }
      std::sort(xs.begin(), xs.end());
      for (size_t i = 0; i + 1 < xs.size(); i += 2) {
        const int x0 = std::max(0, static_cast<int>(std::ceil(xs[i])));
        const int x1 = std::min(img.width - 1, static_cast<int>(std::floor(xs[i + 1])));
        for (int x = x0; x <= x1; ++x) blend(x, y, color, 1.0);
      }
    }
  }

  // Anti-aliased capsule stroke along consecutive points.
  void stroke_polyline(const std::vector<Vec2>& pts_in, double width, const Rgb& color, bool closed = false) {
    std::vector<Vec2> pts;
    pts.reserve(pts_in.size());
    for (const auto& p : pts_in) pts.push_back(up(p));
    const double r = width;  // at 2x scale, radius = width (diameter = 2*width = 2x of requested)
    const size_t n_seg = closed ? pts.size() : pts.size() - 1;
    for (size_t i = 0; i < n_seg; ++i) {
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % pts.size()];
      const Vec2 d = b - a;
      const double len2 = d.squaredNorm();
      const int x0 = static_cast<int>(std::floor(std::min(a.x(), b.x()) - r - 1));
      const int x1 = static_cast<int>(std::ceil(std::max(a.x(), b.x()) + r + 1));
      const int y0 = static_cast<int>(std::floor(std::min(a.y(), b.y()) - r - 1));
      const int y1 = static_cast<int>(std::ceil(std::max(a.y(), b.y()) + r + 1));
      for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) {
          const Vec2 p(x, y);
          double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
          const double dist = (p - (a + t * d)).norm();
          blend(x, y, color, std::clamp(r + 0.5 - dist, 0.0, 1.0));
        }
    }
  }

  void fill_disk(const Vec2& center_in, double radius, const Rgb& color) {
    const Vec2 c = up(center_in);
    const double r = radius * 2.0;
    for (int y = std::max(0, static_cast<int>(c.y() - r - 1)); y <= std::min(img.height - 1, static_cast<int>(c.y() + r + 1)); ++y)
      for (int x = std::max(0, static_cast<int>(c.x() - r - 1)); x <= std::min(img.width - 1, static_cast<int>(c.x() + r + 1)); ++x)
        blend(x, y, color, std::clamp(r + 0.5 - (Vec2(x, y) - c).norm(), 0.0, 1.0));
  }
};

// Catmull-Rom interpolation through the control points (passes through all).
std::vector<Vec2> catmull_rom(const std::vector<Vec2>& pts, int per_seg = 6) {
  if (pts.size() < 3) return pts;
  std::vector<Vec2> out;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2& p0 = pts[i == 0 ? 0 : i - 1];
    const Vec2& p1 = pts[i];
    const Vec2& p2 = pts[i + 1];
    const Vec2& p3 = pts[std::min(i + 2, pts.size() - 1)];
    for (int s = 0; s < per_seg; ++s) {
      const double t = static_cast<double>(s) / per_seg;
      const double t2 = t * t, t3 = t2 * t;
      out.push_back(0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                           (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3));
    }
  }
  out.push_back(pts.back());
  return out;
}

std::vector<Vec2> ellipse_points(const Vec2& c, double rx, double ry, int n, double deg0 = 0, double deg1 = 360) {
  std::vector<Vec2> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = (deg0 + (deg1 - deg0) * i / n) * M_PI / 180.0;
    out.emplace_back(c.x() + rx * std::cos(a), c.y() + ry * std::sin(a));
  }
  return out;
}

struct FaceLayout {
  Landmarks68 lm;
  Vec2 center;
  Vec2 left_pupil, right_pupil;
  double pupil_r = 2.0;
  double eye_ry_eff = 4.0;
  double lip_gap = 0.6;
  bool mouth_open = false;
};

int index_of(const std::vector<int>& codes, int au) {
  auto it = std::find(codes.begin(), codes.end(), au);
  return it == codes.end() ? -1 : static_cast<int>(it - codes.begin());
}

FaceLayout compute_layout(const SyntheticFaceParams& p) {
  const SubjectGeometry& g = p.geometry;
  auto active = [&](int au) {
    const int i = index_of(p.au_codes, au);
    return i >= 0 && p.activations[i] != 0;
  };
  const double d = p.delta_px;

  FaceLayout out;
  out.center = {g.cx, g.cy};
  Landmarks68& lm = out.lm;

  // Brows: 5 points each, arched; 17..21 runs outer->inner (image-left brow),
  // 22..26 inner->outer.
  double brow_dy_inner = 0, brow_dy_outer = 0, brow_dy_all = 0, brow_dx_in = 0;
  if (active(1)) brow_dy_inner -= d;
  if (active(2)) brow_dy_outer -= d;
  if (active(4)) {
    brow_dy_all += 0.75 * d;
    brow_dx_in = 0.4 * d;
  }
  for (int i = 0; i < 5; ++i) {
    const double t = -1.0 + 0.5 * i;  // outer -> inner for the left brow
    const double arch = g.brow_arch * (1.0 - t * t);
    const double inner_ramp = std::max(0.0, t);   // 1 at the inner end
    const double outer_ramp = std::max(0.0, -t);  // 1 at the outer end
    const double dy = brow_dy_all + brow_dy_inner * inner_ramp + brow_dy_outer * outer_ramp;
    const double lx = g.cx - g.eye_off + t * g.brow_len / 2.0;
    lm.row(17 + i) << lx + brow_dx_in, g.brow_y - arch + dy;
    const double rx = g.cx + g.eye_off - t * g.brow_len / 2.0;
    lm.row(26 - i) << rx - brow_dx_in, g.brow_y - arch + dy;
  }

  // Eyes: hexagon on the eye ellipse; 36/42 at 180deg, then 60deg steps.
  out.eye_ry_eff = active(6) ? std::max(g.eye_ry - 0.6 * d, 1.4) : g.eye_ry;
  out.left_pupil = {g.cx - g.eye_off, g.eye_y};
  out.right_pupil = {g.cx + g.eye_off, g.eye_y};
  out.pupil_r = std::max(1.2, 0.42 * out.eye_ry_eff);
  static const double eye_angles[6] = {180, 240, 300, 0, 60, 120};  // upper arc first
  for (int i = 0; i < 6; ++i) {
    const double a = eye_angles[i] * M_PI / 180.0;
    lm.row(36 + i) << out.left_pupil.x() + g.eye_rx * std::cos(a), g.eye_y + out.eye_ry_eff * std::sin(a);
    lm.row(42 + i) << out.right_pupil.x() + g.eye_rx * std::cos(a), g.eye_y + out.eye_ry_eff * std::sin(a);
  }

  // Nose bridge 27..30 and base row 31..35.
  const double nasion_y = g.eye_y - 1.0;
  for (int i = 0; i < 4; ++i) {
    const double t = i / 3.0;
    lm.row(27 + i) << g.cx, nasion_y + t * (g.nose_tip_y - nasion_y);
  }
  for (int i = 0; i < 5; ++i) {
    const double s = -1.0 + 0.5 * i;
    lm.row(31 + i) << g.cx + s * g.nose_w / 2.0, g.nose_tip_y + 2.0 + 0.12 * g.nose_w * (1.0 - std::abs(s));
  }

  // Mouth. Outer lip 48..59, inner lip 60..67.
  const double corner_dy = active(12) ? -d : 0.0;
  out.mouth_open = active(25);
  out.lip_gap = out.mouth_open ? std::max(1.5, 0.9 * d) : 0.6;
  const double hw = g.mouth_w / 2.0;
  auto outer_top_y = [&](double t) { return g.mouth_y - g.lip_h * (1.0 - t * t); };
  auto outer_bot_y = [&](double t) { return g.mouth_y + 1.15 * g.lip_h * (1.0 - t * t); };
  for (int i = 0; i <= 6; ++i) {
    const double t = -1.0 + i / 3.0;
    lm.row(48 + i) << g.cx + t * hw, outer_top_y(t);
  }
  for (int i = 1; i <= 5; ++i) {
    const double t = 1.0 - i / 3.0;
    lm.row(54 + i) << g.cx + t * hw, outer_bot_y(t);
  }
  lm.row(48).y() += corner_dy;  // AU12 moves exactly the two corner landmarks
  lm.row(54).y() += corner_dy;
  const double ihw = 0.8 * hw;
  lm.row(60) << g.cx - ihw, g.mouth_y;
  lm.row(64) << g.cx + ihw, g.mouth_y;
  for (int i = 0; i < 3; ++i) {
    const double t = -0.45 + 0.45 * i;
    lm.row(61 + i) << g.cx + t * ihw, g.mouth_y - out.lip_gap / 2.0;
    lm.row(65 + i) << g.cx - t * ihw, g.mouth_y + out.lip_gap / 2.0;
  }

  // Jaw 0..16 along the face ellipse, ear level down through the chin.
  const double sin0 = (g.eye_y - g.cy) / g.face_ry;  // negative: above center
  const double ear = std::asin(std::clamp(sin0, -1.0, 1.0)) * 180.0 / M_PI;
  const double a0 = 180.0 - ear;  // left ear; right ear at `ear` (negative)
  for (int i = 0; i <= 16; ++i) {
    // sweep left ear -> chin (90 deg at i=8) -> right ear
    const double a = (a0 - (a0 - ear) * i / 16.0) * M_PI / 180.0;
    lm.row(i) << g.cx + g.face_rx * std::cos(a), g.cy + g.face_ry * std::sin(a);
  }

  // Per-frame similarity jitter about the face center, rotation last.
  const double phi = p.rotation_deg * M_PI / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  for (int i = 0; i < 68; ++i) {
    Vec2 q = lm.row(i).transpose();
    q = rot * ((q - out.center) * p.scale) + out.center + Vec2(p.shift_x, p.shift_y);
    lm.row(i) = q.transpose();
  }
  auto xf = [&](const Vec2& q) { return Vec2(rot * ((q - out.center) * p.scale) + out.center + Vec2(p.shift_x, p.shift_y)); };
  out.left_pupil = xf(out.left_pupil);
  out.right_pupil = xf(out.right_pupil);
  out.pupil_r *= p.scale;
  return out;
}

std::vector<Vec2> rows_to_points(const Landmarks68& lm, int begin, int end) {  // inclusive range
  std::vector<Vec2> out;
  for (int i = begin; i <= end; ++i) out.push_back(lm.row(i).transpose());
  return out;
}

}  // namespace

RenderedFace render_face(const SyntheticFaceParams& p) {
  if (p.activations.size() != p.au_codes.size())
    throw ValidationError("render_face: activation vector length does not match the AU set");
  for (int au : p.au_codes)
    if (index_of(renderable_au_codes(), au) < 0)
      throw ValidationError("render_face: AU " + std::to_string(au) + " has no renderable deformation");

  const SubjectGeometry& g = p.geometry;
  const double margin = 4.0 + p.delta_px;
  const double extent = std::max(g.face_rx, g.face_ry) * p.scale + margin;
  if (g.cx - extent < 0 || g.cx + extent >= p.canvas || g.cy - extent < 0 || g.cy + extent >= p.canvas)
    throw ValidationError("render_face: face geometry out of canvas bounds");

  FaceLayout layout = compute_layout(p);
  const Landmarks68& lm = layout.lm;
  const DomainStyle& st = p.style;
  Raster ras(p.canvas, st.background);
  const double sw = st.stroke_width;

  // Face: fill then outline. The sampled ellipse matches the jaw landmarks.
  {
    const double phi = p.rotation_deg * M_PI / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    std::vector<Vec2> face = ellipse_points({g.cx, g.cy}, g.face_rx, g.face_ry, 72);
    for (auto& q : face) q = rot * ((q - layout.center) * p.scale) + layout.center + Vec2(p.shift_x, p.shift_y);
    ras.fill_polygon(face, st.skin);
    ras.stroke_polyline(face, sw, st.stroke, true);
  }

  // Brows.
  ras.stroke_polyline(catmull_rom(rows_to_points(lm, 17, 21)), sw * 1.3, st.stroke);
  ras.stroke_polyline(catmull_rom(rows_to_points(lm, 22, 26)), sw * 1.3, st.stroke);

  // Eyes: sclera fill, outline, pupil.
  for (int e = 0; e < 2; ++e) {
    std::vector<Vec2> eye = rows_to_points(lm, 36 + 6 * e, 41 + 6 * e);
    std::vector<Vec2> dense = catmull_rom({eye[0], eye[1], eye[2], eye[3], eye[4], eye[5], eye[0]}, 5);
    ras.fill_polygon(dense, st.sclera);
    ras.stroke_polyline(dense, sw * 0.9, st.stroke);
    ras.fill_disk(e == 0 ? layout.left_pupil : layout.right_pupil, layout.pupil_r, st.pupil);
  }

  // Nose.
  ras.stroke_polyline(rows_to_points(lm, 27, 30), sw * 0.9, st.stroke);
  ras.stroke_polyline(catmull_rom(rows_to_points(lm, 31, 35)), sw * 0.9, st.stroke);

  // Mouth: lip body fill, gap when open, outline strokes.
  {
    std::vector<Vec2> outer = rows_to_points(lm, 48, 59);
    std::vector<Vec2> outer_closed = outer;
    outer_closed.push_back(outer[0]);
    ras.fill_polygon(catmull_rom(outer_closed, 5), st.lip);
    if (layout.mouth_open) {
      std::vector<Vec2> inner = rows_to_points(lm, 60, 67);
      inner.push_back(inner[0]);
      ras.fill_polygon(catmull_rom(inner, 4), Rgb{25, 12, 14});
    } else {
      ras.stroke_polyline({lm.row(60).transpose(), lm.row(62).transpose(), lm.row(64).transpose()}, sw * 0.8, st.stroke);
    }
    ras.stroke_polyline(catmull_rom(outer_closed, 5), sw * 0.9, st.stroke);
  }

  RenderedFace out;
  out.image = downsample2x(ras.img);
  out.landmarks = lm;
  out.labels = p.activations;

  if (st.noise_amp > 0) {
    RngEngine noise_eng = make_engine(p.noise_seed, {tag("pixel-noise")});
    std::uniform_real_distribution<double> u(-st.noise_amp, st.noise_amp);
    for (auto& b : out.image.pixels) {
      const double v = b + u(noise_eng);
      b = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

Manifest generate_dataset(const CorpusConfig& config, const std::filesystem::path& out_dir) {
  if (config.n_subjects < 3) throw ValidationError("generate_dataset: need at least 3 subjects for fold protocols");
  if (config.frames_per_subject < 1) throw ValidationError("generate_dataset: frames_per_subject must be positive");
  for (int au : config.au_codes)
    if (index_of(renderable_au_codes(), au) < 0)
      throw ValidationError("generate_dataset: AU " + std::to_string(au) + " is not renderable");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw RuntimeFailure("generate_dataset: cannot create " + (out_dir / "images").string() + ": " + ec.message());

  Manifest manifest;
  manifest.au_codes = config.au_codes;
  manifest.frame_size = {config.canvas, config.canvas};
  manifest.root = out_dir;

  const int digits_s = config.n_subjects > 100 ? 3 : 2;
  for (int s = 0; s < config.n_subjects; ++s) {
    // Subject geometry comes from its own stream so frame order can't bleed in.
    RngEngine geng = make_engine(config.seed, {tag("subject-geometry"), static_cast<std::uint64_t>(s)});
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(geng); };
    SubjectGeometry g;
    g.cx = config.canvas / 2.0;
    g.cy = config.canvas * 0.525;
    g.face_rx = config.canvas * u(0.25, 0.32);
    g.face_ry = g.face_rx * u(1.15, 1.32);
    g.eye_off = g.face_rx * u(0.42, 0.52);
    g.eye_y = g.cy - g.face_ry * u(0.20, 0.30);
    g.eye_rx = g.face_rx * u(0.17, 0.22);
    g.eye_ry = g.eye_rx * u(0.50, 0.62);
    g.brow_y = g.eye_y - g.face_ry * u(0.14, 0.22);
    g.brow_len = g.eye_rx * u(2.2, 2.7);
    g.brow_arch = g.eye_rx * u(0.25, 0.45);
    g.nose_tip_y = g.cy + g.face_ry * u(0.10, 0.20);
    g.nose_w = g.eye_off * u(0.45, 0.62);
    g.mouth_y = g.cy + g.face_ry * u(0.48, 0.58);
    g.mouth_w = g.eye_off * u(1.35, 1.75);
    g.lip_h = g.face_ry * u(0.055, 0.085);

    char sid[16];
    std::snprintf(sid, sizeof(sid), "s%0*d", digits_s, s);

    for (int f = 0; f < config.frames_per_subject; ++f) {
      RngEngine feng = make_engine(config.seed, {tag("frame"), static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(f)});
      std::uniform_real_distribution<double> u01(0.0, 1.0);

      SyntheticFaceParams params;
      params.geometry = g;
      params.au_codes = config.au_codes;
      params.activations.resize(config.au_codes.size());
      for (size_t a = 0; a < config.au_codes.size(); ++a)
        params.activations[a] = u01(feng) < config.activation_rate ? 1 : 0;
      params.rotation_deg = std::uniform_real_distribution<double>(-6.0, 6.0)(feng);
      params.scale = std::uniform_real_distribution<double>(0.95, 1.05)(feng);
      params.shift_x = std::uniform_real_distribution<double>(-2.0, 2.0)(feng);
      params.shift_y = std::uniform_real_distribution<double>(-2.0, 2.0)(feng);
      params.delta_px = config.delta_px;
      params.canvas = config.canvas;
      params.noise_seed = mix_seed(config.seed, {tag("noise"), static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(f)});

      params.style = DomainStyle::preset(config.style);
      if (params.style.per_frame_jitter) {
        // Broad distribution: interpolate the A/B palettes with per-channel
        // jitter, from a dedicated stream so labels stay style-independent.
        RngEngine seng = make_engine(config.seed, {tag("style"), static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(f)});
        auto su = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(seng); };
        const DomainStyle a = DomainStyle::preset("A"), b = DomainStyle::preset("B");
        const double t = su(0.0, 1.0);
        auto lerp = [&](Rgb ca, Rgb cb) {
          Rgb r;
          for (int c = 0; c < 3; ++c)
            r[c] = static_cast<std::uint8_t>(std::clamp(ca[c] + (cb[c] - ca[c]) * t + su(-14.0, 14.0), 0.0, 255.0));
          return r;
        };
        params.style.background = lerp(a.background, b.background);
        params.style.skin = lerp(a.skin, b.skin);
        params.style.stroke = lerp(a.stroke, b.stroke);
        params.style.lip = lerp(a.lip, b.lip);
        params.style.sclera = lerp(a.sclera, b.sclera);
        params.style.pupil = lerp(a.pupil, b.pupil);
        params.style.stroke_width = su(1.2, 2.6);
        params.style.noise_amp = su(2.0, 10.0);
      }

      RenderedFace face = render_face(params);

      char fname[64];
      std::snprintf(fname, sizeof(fname), "images/%s_f%04d.png", sid, f);
      write_png(out_dir / fname, face.image);

      ManifestRow row;
      row.image = fname;
      row.subject = sid;
      row.landmarks = face.landmarks;
      for (size_t a = 0; a < config.au_codes.size(); ++a) row.labels[config.au_codes[a]] = face.labels[a];
      manifest.rows.push_back(std::move(row));
    }
  }

  save_manifest(out_dir, manifest);

  json spec;
  spec["n_subjects"] = config.n_subjects;
  spec["frames_per_subject"] = config.frames_per_subject;
  spec["au_codes"] = config.au_codes;
  spec["style"] = config.style;
  spec["seed"] = config.seed;
  spec["activation_rate"] = config.activation_rate;
  spec["delta_px"] = config.delta_px;
  spec["canvas"] = config.canvas;
  std::ofstream sf(out_dir / "corpus_spec.json");
  if (!sf) throw RuntimeFailure("generate_dataset: cannot write corpus_spec.json");
  sf << spec.dump(2) << "\n";

  return manifest;
}

}  // namespace auheat
