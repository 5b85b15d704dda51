#include "auheat/geometry.hpp"

#include <cmath>

#include "auheat/errors.hpp"

namespace auheat {

Eigen::Vector2d left_eye_center(const Landmarks68& lm) {
  return lm.block<6, 2>(36, 0).colwise().mean().transpose();
}

Eigen::Vector2d right_eye_center(const Landmarks68& lm) {
  return lm.block<6, 2>(42, 0).colwise().mean().transpose();
}

double inter_ocular_distance(const Landmarks68& lm) {
  return (right_eye_center(lm) - left_eye_center(lm)).norm();
}

bool landmarks_finite(const Landmarks68& lm) { return lm.allFinite(); }

Landmarks68 AlignmentTransform::apply(const Landmarks68& lm) const {
  Landmarks68 out;
  for (int i = 0; i < 68; ++i) {
    const Eigen::Vector2d p = lm.row(i).transpose();
    out.row(i) = apply(p).transpose();
  }
  return out;
}

AlignmentTransform AlignmentTransform::inverse() const {
  Eigen::Matrix2d a = matrix.leftCols<2>();
  const double det = a.determinant();
  if (std::abs(det) < 1e-15) throw ValidationError("AlignmentTransform: singular matrix has no inverse");
  AlignmentTransform inv;
  inv.matrix.leftCols<2>() = a.inverse();
  inv.matrix.col(2) = -a.inverse() * matrix.col(2);
  inv.out_size = out_size;
  return inv;
}

bool AlignmentTransform::is_identity(double tol) const {
  Eigen::Matrix<double, 2, 3> id;
  id << 1, 0, 0, 0, 1, 0;
  return (matrix - id).cwiseAbs().maxCoeff() <= tol;
}

AlignmentTransform alignment_for(const Landmarks68& landmarks, int out_size) {
  if (out_size < 32) throw ValidationError("align_face: out_size must be >= 32");
  if (!landmarks_finite(landmarks)) throw ValidationError("align_face: landmarks contain non-finite values");

  const Eigen::Vector2d le = left_eye_center(landmarks);
  const Eigen::Vector2d re = right_eye_center(landmarks);
  const Eigen::Vector2d d = re - le;
  if (d.norm() < 1e-9) throw ValidationError("align_face: degenerate landmarks (coincident eye centers)");

  const Eigen::Vector2d le_dst(kCanonicalLeftEyeX * out_size, kCanonicalEyeY * out_size);
  const Eigen::Vector2d re_dst(kCanonicalRightEyeX * out_size, kCanonicalEyeY * out_size);
  const Eigen::Vector2d e = re_dst - le_dst;

  // Unique similarity mapping (le, re) -> (le_dst, re_dst):
  //   [a -b; b a] p + t, with a + ib = (e_x + i e_y) / (d_x + i d_y).
  const double den = d.squaredNorm();
  const double a = (e.x() * d.x() + e.y() * d.y()) / den;
  const double b = (e.y() * d.x() - e.x() * d.y()) / den;

  AlignmentTransform t;
  t.matrix << a, -b, 0, b, a, 0;
  t.matrix.col(2) = le_dst - t.matrix.leftCols<2>() * le;
  t.out_size = out_size;
  return t;
}

AlignedFace align_face(const Image8& image, const Landmarks68& landmarks, int out_size) {
  AlignmentTransform t = alignment_for(landmarks, out_size);
  AlignedFace out;
  out.transform = t;
  out.landmarks = t.apply(landmarks);
  out.image = t.is_identity(1e-9) && image.width == out_size && image.height == out_size
                  ? image
                  : warp_affine(image, t.matrix, out_size, out_size);
  return out;
}

}  // namespace auheat
