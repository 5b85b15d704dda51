#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "auheat/nn/tensor.hpp"

namespace auheat {

// Interleaved 8-bit RGB raster.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = width*height*3, row-major RGB

  Image8() = default;
  Image8(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  std::uint8_t* px(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const std::uint8_t* px(int x, int y) const { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  bool empty() const { return pixels.empty(); }
};

// Minimal PNG support: 8-bit RGB, non-interlaced. Deterministic output bytes.
std::vector<std::uint8_t> encode_png(const Image8& img);
Image8 decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

// 2x box downsample (both dimensions must be even).
Image8 downsample2x(const Image8& img);

// Warp with a 2x3 affine matrix mapping source coords -> destination coords.
// Bilinear sampling, clamp-to-edge.
Image8 warp_affine(const Image8& src, const Eigen::Matrix<double, 2, 3>& dst_from_src, int out_w, int out_h);

// [0,255] -> [0,1] float CHW tensor (single sample) and back.
nn::TensorF image_to_tensor(const Image8& img);
Image8 tensor_to_image(const nn::TensorF& t, int sample = 0);

}  // namespace auheat
