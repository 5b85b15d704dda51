#include <doctest.h>

#include <cmath>
#include <random>

#include "auheat/au_table.hpp"
#include "auheat/errors.hpp"
#include "auheat/geometry.hpp"

using namespace auheat;

namespace {

// Plausible hand-built 68-point layout; eye centers land exactly on the
// requested positions (the 6-point hexagon averages to its center).
Landmarks68 make_landmarks(double lex, double ley, double rex, double rey) {
  Landmarks68 lm = Landmarks68::Zero();
  const double exr = 8, eyr = 4;
  const double angles[6] = {180, 240, 300, 0, 60, 120};
  for (int i = 0; i < 6; ++i) {
    const double a = angles[i] * M_PI / 180.0;
    lm.row(36 + i) << lex + exr * std::cos(a), ley + eyr * std::sin(a);
    lm.row(42 + i) << rex + exr * std::cos(a), rey + eyr * std::sin(a);
  }
  const double cx = (lex + rex) / 2, cy = (ley + rey) / 2;
  const double iod = std::hypot(rex - lex, rey - ley);
  for (int i = 0; i <= 16; ++i) lm.row(i) << cx - 1.3 * iod + i * 2.6 * iod / 16.0, cy + 1.5 * iod;
  for (int i = 0; i < 5; ++i) {
    lm.row(17 + i) << lex - 10 + 5 * i, ley - 12;
    lm.row(22 + i) << rex - 10 + 5 * i, rey - 12;
  }
  for (int i = 0; i < 4; ++i) lm.row(27 + i) << cx, cy + 4 * i;
  for (int i = 0; i < 5; ++i) lm.row(31 + i) << cx - 6 + 3 * i, cy + 14;
  for (int i = 0; i < 12; ++i) lm.row(48 + i) << cx - 12 + 2 * i, cy + 24;
  for (int i = 0; i < 8; ++i) lm.row(60 + i) << cx - 8 + 2 * i, cy + 24;
  return lm;
}

Image8 gradient_image(int size) {
  Image8 img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      img.px(x, y)[0] = static_cast<std::uint8_t>(x * 255 / size);
      img.px(x, y)[1] = static_cast<std::uint8_t>(y * 255 / size);
      img.px(x, y)[2] = static_cast<std::uint8_t>((x + y) * 255 / (2 * size));
    }
  return img;
}

}  // namespace

TEST_SUITE("roi") {
  TEST_CASE("identity alignment leaves image and landmarks unchanged") {
    const int size = 160;
    Landmarks68 lm = make_landmarks(kCanonicalLeftEyeX * size, kCanonicalEyeY * size, kCanonicalRightEyeX * size,
                                    kCanonicalEyeY * size);
    Image8 img = gradient_image(size);
    AlignedFace out = align_face(img, lm, size);
    CHECK(out.transform.is_identity(1e-9));
    CHECK(out.image.pixels == img.pixels);
    CHECK((out.landmarks - lm).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("rotated input comes back with a horizontal eye line") {
    const int size = 160;
    Landmarks68 base = make_landmarks(56, 64, 104, 64);
    const double phi = 10.0 * M_PI / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    Landmarks68 rotated;
    const Eigen::Vector2d c(80, 80);
    for (int i = 0; i < 68; ++i) rotated.row(i) = (rot * (base.row(i).transpose() - c) + c).transpose();

    AlignedFace out = align_face(gradient_image(size), rotated, 128);
    const Eigen::Vector2d le = left_eye_center(out.landmarks);
    const Eigen::Vector2d re = right_eye_center(out.landmarks);
    CHECK(std::abs(le.y() - re.y()) < 0.1);
    // the inverse-rotation oracle: aligning the rotated landmarks must equal
    // aligning the originals
    AlignedFace ref = align_face(gradient_image(size), base, 128);
    CHECK((out.landmarks - ref.landmarks).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("coincident eye centers raise an alignment-degeneracy error") {
    Landmarks68 lm = make_landmarks(80, 64, 80, 64);
    CHECK_THROWS_AS(align_face(gradient_image(160), lm, 128), ValidationError);
  }

  TEST_CASE("out_size below the minimum is rejected") {
    Landmarks68 lm = make_landmarks(56, 64, 104, 64);
    CHECK_THROWS_AS(align_face(gradient_image(160), lm, 16), ValidationError);
  }

  TEST_CASE("single-point rule hits the landmark exactly") {
    Landmarks68 lm = make_landmarks(56, 64, 104, 64);
    AUTable t;
    t.entries.push_back({12, {CenterRule{{{21, 1.0}}, {0, 0}}, CenterRule{{{54, 1.0}}, {0, 0}}}});
    auto centers = compute_roi_centers(lm, t);
    CHECK((centers[0][0] - lm.row(21).transpose()).norm() == doctest::Approx(0.0));
    CHECK((centers[0][1] - lm.row(54).transpose()).norm() == doctest::Approx(0.0));
  }

  TEST_CASE("weighted rule averages landmarks") {
    Landmarks68 lm = make_landmarks(56, 64, 104, 64);
    lm.row(36) << 40, 60;
    lm.row(39) << 60, 60;
    AUTable t;
    t.entries.push_back({6, {CenterRule{{{36, 0.5}, {39, 0.5}}, {0, 0}}, CenterRule{{{42, 1.0}}, {0, 0}}}});
    auto centers = compute_roi_centers(lm, t);
    CHECK(centers[0][0].x() == doctest::Approx(50.0));
    CHECK(centers[0][0].y() == doctest::Approx(60.0));
  }

  TEST_CASE("mirrored rule pair gives mirrored centers") {
    // bilaterally symmetric landmarks about x = 80
    Landmarks68 lm = make_landmarks(56, 64, 104, 64);
    AUTable t;
    t.entries.push_back({1, {CenterRule{{{36, 1.0}}, {0, -0.15}}, CenterRule{{{45, 1.0}}, {0, -0.15}}}});
    auto centers = compute_roi_centers(lm, t);
    CHECK(centers[0][0].x() + centers[0][1].x() == doctest::Approx(160.0).epsilon(1e-9));
    CHECK(centers[0][0].y() == doctest::Approx(centers[0][1].y()).epsilon(1e-9));
  }

  TEST_CASE("roi centers are equivariant to similarity transforms") {
    Landmarks68 lm = make_landmarks(56, 64, 104, 64);
    AUTable table = default_au_table({1, 2, 4, 6, 12, 25});
    auto base = compute_roi_centers(lm, table);

    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
      const double phi = u(eng) * M_PI / 3, s = 0.5 + 0.4 * (u(eng) + 1);
      Eigen::Matrix2d a;
      a << s * std::cos(phi), -s * std::sin(phi), s * std::sin(phi), s * std::cos(phi);
      const Eigen::Vector2d tr(40 * u(eng), 40 * u(eng));
      Landmarks68 moved;
      for (int i = 0; i < 68; ++i) moved.row(i) = (a * lm.row(i).transpose() + tr).transpose();
      auto got = compute_roi_centers(moved, table);
      for (size_t i = 0; i < base.size(); ++i)
        for (int k = 0; k < 2; ++k) {
          const Eigen::Vector2d expect = a * base[i][k] + tr;
          CHECK((got[i][k] - expect).norm() < 1e-4);
        }
    }
  }

  TEST_CASE("default table follows the requested order") {
    AUTable t = default_au_table({1, 2, 4, 6, 12});
    CHECK(t.au_codes() == std::vector<int>{1, 2, 4, 6, 12});
    CHECK(default_au_table({}).size() == 0);
    CHECK_THROWS_AS(default_au_table({99}), ValidationError);
  }

  TEST_CASE("table config roundtrips bit-exactly") {
    AUTable t = default_au_table(supported_au_codes());
    const std::string a = au_table_to_json(t);
    AUTable back = au_table_from_json(a);
    CHECK(au_table_to_json(back) == a);
    CHECK(back.size() == t.size());
  }

  TEST_CASE("rules with bad weights are rejected") {
    AUTable t;
    t.entries.push_back({1, {CenterRule{{{21, 0.7}}, {0, 0}}, CenterRule{{{22, 1.0}}, {0, 0}}}});
    CHECK_THROWS_AS(t.validate(), ValidationError);
  }
}
