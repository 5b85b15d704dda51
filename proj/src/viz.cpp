#include "auheat/viz.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "auheat/errors.hpp"

namespace auheat {

namespace {

// 5x7 glyphs for captions ("AU" + digits), one bit per pixel.
const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> g = {
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
  };
  return g;
}

void draw_text(Image8& img, int x0, int y0, const std::string& text, std::array<std::uint8_t, 3> color) {
  int x = x0;
  for (char ch : text) {
    auto it = glyphs().find(ch);
    if (it != glyphs().end()) {
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c)
          if (it->second[r] & (1 << (4 - c))) {
            const int px = x + c, py = y0 + r;
            if (px >= 0 && py >= 0 && px < img.width && py < img.height) {
              img.px(px, py)[0] = color[0];
              img.px(px, py)[1] = color[1];
              img.px(px, py)[2] = color[2];
            }
          }
    }
    x += 6;
  }
}

}  // namespace

void render_heatmap_overlay(const Image8& image, const HeatmapStack& heatmaps, const std::filesystem::path& out_path) {
  if (heatmaps.n() == 0) throw ValidationError("render_heatmap_overlay: empty heatmap stack");
  if (heatmaps.height() != image.height || heatmaps.width() != image.width)
    throw ValidationError("render_heatmap_overlay: heatmap/image shape mismatch");

  const int n = heatmaps.n();
  const int pad = 4, caption_h = 12;
  const int panel_w = image.width, panel_h = image.height + caption_h;
  Image8 out(n * panel_w + (n + 1) * pad, panel_h + 2 * pad);
  std::fill(out.pixels.begin(), out.pixels.end(), static_cast<std::uint8_t>(32));

  for (int a = 0; a < n; ++a) {
    const int ox = pad + a * (panel_w + pad), oy = pad + caption_h;
    const auto& m = heatmaps.maps[a];
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const double v = std::clamp(static_cast<double>(m(y, x)), -1.0, 1.0);
        const double alpha = std::abs(v);
        const std::uint8_t overlay_r = v > 0 ? 255 : 0, overlay_b = v > 0 ? 0 : 255;
        const std::uint8_t* src = image.px(x, y);
        std::uint8_t* dst = out.px(ox + x, oy + y);
        dst[0] = static_cast<std::uint8_t>(std::lround(src[0] * (1 - alpha) + overlay_r * alpha));
        dst[1] = static_cast<std::uint8_t>(std::lround(src[1] * (1 - alpha)));
        dst[2] = static_cast<std::uint8_t>(std::lround(src[2] * (1 - alpha) + overlay_b * alpha));
      }
    const std::string caption =
        "AU" + std::to_string(a < static_cast<int>(heatmaps.au_codes.size()) ? heatmaps.au_codes[a] : a);
    draw_text(out, ox, pad + 2, caption, {235, 235, 235});
  }
  write_png(out_path, out);
}

}  // namespace auheat
