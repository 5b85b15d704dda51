#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "auheat/errors.hpp"
#include "auheat/heatmap.hpp"

using namespace auheat;

namespace {

RoiCenters two_centers(double x1, double y1, double x2, double y2) {
  return {{std::array<Eigen::Vector2d, 2>{Eigen::Vector2d(x1, y1), Eigen::Vector2d(x2, y2)}}};
}

}  // namespace

TEST_SUITE("heatmap") {
  TEST_CASE("peak clips to exactly +1/-1 at in-frame centers") {
    auto centers = two_centers(30, 40, 200, 200);
    HeatmapStack active = encode_heatmaps({1}, centers, {20.0}, 256, 256);
    CHECK(active.maps[0](40, 30) == 1.0f);
    HeatmapStack inactive = encode_heatmaps({0}, centers, {20.0}, 256, 256);
    CHECK(inactive.maps[0](40, 30) == -1.0f);
  }

  TEST_CASE("closed-form values at sigma and 2*sigma") {
    // second window far away so its contribution is ~exp(-400)
    auto centers = two_centers(60, 60, 450, 450);
    HeatmapStack m = encode_heatmaps({1}, centers, {20.0}, 512, 512);
    CHECK(std::abs(m.maps[0](60, 60) - 1.0) < 1e-6);                      // exp(0)
    CHECK(std::abs(m.maps[0](60, 80) - std::exp(-0.5)) < 1e-6);           // |p-c| = sigma
    CHECK(std::abs(m.maps[0](60, 100) - std::exp(-2.0)) < 1e-6);          // |p-c| = 2*sigma
    HeatmapStack neg = encode_heatmaps({0}, centers, {20.0}, 512, 512);
    CHECK(std::abs(neg.maps[0](100, 60) + std::exp(-2.0)) < 1e-6);
  }

  TEST_CASE("flipping a label negates the map exactly") {
    auto centers = two_centers(50, 70, 80, 60);
    HeatmapStack on = encode_heatmaps({1}, centers, {20.0}, 128, 128);
    HeatmapStack off = encode_heatmaps({0}, centers, {20.0}, 128, 128);
    CHECK(((on.maps[0] + off.maps[0]).abs() < 1e-12f).all());
  }

  TEST_CASE("values always stay inside [-1, 1]") {
    auto centers = two_centers(64, 64, 66, 64);  // overlapping windows
    HeatmapStack m = encode_heatmaps({1}, centers, {20.0}, 128, 128);
    CHECK(m.maps[0].maxCoeff() == 1.0f);
    CHECK(m.maps[0].minCoeff() >= -1.0f);
  }

  TEST_CASE("out-of-frame centers are flagged") {
    std::vector<std::pair<int, int>> flagged;
    encode_heatmaps({1}, two_centers(-5, 10, 60, 60), {20.0}, 128, 128, &flagged);
    REQUIRE(flagged.size() == 1);
    CHECK(flagged[0] == std::pair<int, int>{0, 0});
  }

  TEST_CASE("parameter errors") {
    CHECK_THROWS_AS(encode_heatmaps({1}, two_centers(1, 1, 2, 2), {0.0}, 64, 64), ValidationError);
    CHECK_THROWS_AS(encode_heatmaps({1, 0}, two_centers(1, 1, 2, 2), {20.0}, 64, 64), ValidationError);
  }

  TEST_CASE("decode ties resolve to inactive") {
    HeatmapStack z;
    z.maps.assign(3, Eigen::ArrayXXf::Zero(16, 16));
    CHECK(decode_labels(z) == LabelVector{0, 0, 0});
    z.maps[1].setConstant(1e-6f);
    CHECK(decode_labels(z) == LabelVector{0, 1, 0});
  }

  TEST_CASE("decode is invariant to positive scaling") {
    auto centers = two_centers(40, 40, 90, 90);
    HeatmapStack m = encode_heatmaps({1}, centers, {20.0}, 128, 128);
    HeatmapStack scaled = m;
    scaled.maps[0] *= 0.013f;
    CHECK(decode_labels(m) == decode_labels(scaled));
  }

  TEST_CASE("roundtrip over 1000 random label vectors") {
    std::mt19937_64 eng(123);
    std::bernoulli_distribution coin(0.4);
    std::uniform_real_distribution<double> pos(10.0, 117.0);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 8;
      LabelVector labels(n);
      RoiCenters centers;
      for (int i = 0; i < n; ++i) {
        labels[i] = coin(eng) ? 1 : 0;
        centers.push_back({Eigen::Vector2d(pos(eng), pos(eng)), Eigen::Vector2d(pos(eng), pos(eng))});
      }
      HeatmapStack m = encode_heatmaps(labels, centers, {20.0}, 128, 128);
      CHECK(decode_labels(m) == labels);
    }
  }

  TEST_CASE("mse basics") {
    auto centers = two_centers(40, 40, 90, 90);
    HeatmapStack a = encode_heatmaps({1}, centers, {20.0}, 64, 64);
    CHECK(heatmap_mse(a, a) == 0.0);
    HeatmapStack b = a;
    b.maps[0] += 0.5f;
    CHECK(heatmap_mse(a, b) == doctest::Approx(0.25).epsilon(1e-9));
  }

  TEST_CASE("mse of sign-flipped two-valued maps") {
    HeatmapStack t;
    t.maps.assign(1, Eigen::ArrayXXf::Zero(32, 32));
    // half the cells +1, quarter -1, quarter 0
    int idx = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x, ++idx) t.maps[0](y, x) = idx % 4 < 2 ? 1.0f : (idx % 4 == 2 ? -1.0f : 0.0f);
    HeatmapStack p = t;
    p.maps[0] = -p.maps[0];
    // direct-summation oracle
    double acc = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) acc += std::pow(p.maps[0](y, x) - t.maps[0](y, x), 2.0);
    CHECK(heatmap_mse(p, t) == doctest::Approx(acc / (32.0 * 32.0)).epsilon(1e-12));
    CHECK(heatmap_mse(p, t) == doctest::Approx(4.0 * 0.75).epsilon(1e-12));
  }

  TEST_CASE("mse shape mismatch is an arity error") {
    HeatmapStack a, b;
    a.maps.assign(1, Eigen::ArrayXXf::Zero(8, 8));
    b.maps.assign(2, Eigen::ArrayXXf::Zero(8, 8));
    CHECK_THROWS_AS(heatmap_mse(a, b), ValidationError);
  }

  TEST_CASE("default sigma scales with resolution") {
    CHECK(default_sigma_for(128) == doctest::Approx(20.0));
    CHECK(default_sigma_for(64) == doctest::Approx(10.0));
  }

  TEST_CASE("raw dump roundtrips") {
    auto centers = two_centers(20, 30, 50, 50);
    HeatmapStack m = encode_heatmaps({1}, centers, {12.0}, 64, 64);
    m.au_codes = {12};
    const auto path = std::filesystem::temp_directory_path() / "auheat_dump_test.f32";
    save_heatmaps(path, m);
    HeatmapStack back = load_heatmaps(path);
    REQUIRE(back.n() == 1);
    CHECK(back.au_codes == std::vector<int>{12});
    CHECK(((back.maps[0] - m.maps[0]).abs() == 0.0f).all());
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
  }
}
