#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "auheat/image.hpp"

namespace auheat {

// 68-point annotation, iBUG ordering: 0-16 jaw, 17-26 brows, 27-35 nose,
// 36-47 eyes, 48-67 lips. Row = (x, y) in pixels.
using Landmarks68 = Eigen::Matrix<double, 68, 2>;

Eigen::Vector2d left_eye_center(const Landmarks68& lm);   // image-left eye (36-41)
Eigen::Vector2d right_eye_center(const Landmarks68& lm);  // image-right eye (42-47)
double inter_ocular_distance(const Landmarks68& lm);

bool landmarks_finite(const Landmarks68& lm);

// Similarity (rotation + uniform scale + translation) from source-image
// pixels into a square aligned crop.
struct AlignmentTransform {
  Eigen::Matrix<double, 2, 3> matrix = (Eigen::Matrix<double, 2, 3>() << 1, 0, 0, 0, 1, 0).finished();
  int out_size = 0;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return matrix.leftCols<2>() * p + matrix.col(2); }
  Landmarks68 apply(const Landmarks68& lm) const;
  double scale() const { return matrix.col(0).norm(); }
  AlignmentTransform inverse() const;
  bool is_identity(double tol = 1e-12) const;
};

// Canonical eye anchors of the aligned frame, as fractions of the crop size.
inline constexpr double kCanonicalEyeY = 0.40;
inline constexpr double kCanonicalLeftEyeX = 0.35;
inline constexpr double kCanonicalRightEyeX = 0.65;

struct AlignedFace {
  Image8 image;
  Landmarks68 landmarks;
  AlignmentTransform transform;
};

// Eye-anchored similarity crop. The eye centers land exactly on the
// canonical anchors, so the eye line is horizontal in the output.
// Throws ValidationError when the eye centers coincide.
AlignedFace align_face(const Image8& image, const Landmarks68& landmarks, int out_size);

// Transform-only variant (used when only geometry is needed).
AlignmentTransform alignment_for(const Landmarks68& landmarks, int out_size);

}  // namespace auheat
