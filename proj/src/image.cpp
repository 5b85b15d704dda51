#include "auheat/image.hpp"

#include <algorithm>
#include <cmath>

#include "auheat/errors.hpp"

namespace auheat {

Image8 downsample2x(const Image8& img) {
  if (img.width % 2 || img.height % 2) throw ValidationError("downsample2x: odd dimensions");
  Image8 out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const int s = img.px(2 * x, 2 * y)[c] + img.px(2 * x + 1, 2 * y)[c] + img.px(2 * x, 2 * y + 1)[c] +
                      img.px(2 * x + 1, 2 * y + 1)[c];
        out.px(x, y)[c] = static_cast<std::uint8_t>((s + 2) / 4);
      }
  return out;
}

Image8 warp_affine(const Image8& src, const Eigen::Matrix<double, 2, 3>& dst_from_src, int out_w, int out_h) {
  // Invert the 2x3 to sample source positions for each output pixel.
  Eigen::Matrix2d a = dst_from_src.leftCols<2>();
  const double det = a.determinant();
  if (std::abs(det) < 1e-12) throw ValidationError("warp_affine: singular transform");
  Eigen::Matrix2d ainv = a.inverse();
  Eigen::Vector2d tinv = -ainv * dst_from_src.col(2);

  Image8 out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Eigen::Vector2d s = ainv * Eigen::Vector2d(x, y) + tinv;
      double sx = std::clamp(s.x(), 0.0, static_cast<double>(src.width - 1));
      double sy = std::clamp(s.y(), 0.0, static_cast<double>(src.height - 1));
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * src.px(x0, y0)[c] + fx * src.px(x1, y0)[c]) +
                         fy * ((1 - fx) * src.px(x0, y1)[c] + fx * src.px(x1, y1)[c]);
        out.px(x, y)[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

nn::TensorF image_to_tensor(const Image8& img) {
  nn::TensorF t(1, 3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    auto plane = t.plane(0, c);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) plane(y, x) = static_cast<float>(img.px(x, y)[c]) / 255.0f;
  }
  return t;
}

Image8 tensor_to_image(const nn::TensorF& t, int sample) {
  Image8 img(t.w(), t.h());
  for (int c = 0; c < 3; ++c) {
    auto plane = t.plane(sample, c);
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x)
        img.px(x, y)[c] = static_cast<std::uint8_t>(std::lround(std::clamp(plane(y, x) * 255.0f, 0.0f, 255.0f)));
  }
  return img;
}

}  // namespace auheat
