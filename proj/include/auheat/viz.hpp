#pragma once

#include <filesystem>

#include "auheat/heatmap.hpp"
#include "auheat/image.hpp"

namespace auheat {

// One captioned panel per AU: the face with a diverging red/blue overlay,
// alpha proportional to |value| (so +1 is pure red, -1 pure blue, 0 shows
// the bare face). Writes a PNG.
void render_heatmap_overlay(const Image8& image, const HeatmapStack& heatmaps, const std::filesystem::path& out_path);

}  // namespace auheat
