#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "reference.hpp"
#include "salenc/geometry.hpp"

using namespace salenc;

TEST_CASE("corner and center-size forms round-trip") {
    Rng rng(17);
    for (int n = 0; n < 100; ++n) {
        const double x0 = rng.uniform(-50, 50), y0 = rng.uniform(-50, 50);
        const double x1 = x0 + rng.uniform(0.1, 80), y1 = y0 + rng.uniform(0.1, 80);
        const BBox b = BBox::from_corners(x0, y0, x1, y1);
        CHECK(std::abs(b.x0() - x0) < 1e-9);
        CHECK(std::abs(b.y0() - y0) < 1e-9);
        CHECK(std::abs(b.x1() - x1) < 1e-9);
        CHECK(std::abs(b.y1() - y1) < 1e-9);
        CHECK(b.valid());
    }
}

TEST_CASE("grid positions map to stride-centered image coordinates") {
    auto xy = grid_to_image_coords({0, 0, 0}, 8);
    CHECK(xy.first == 4.0);
    CHECK(xy.second == 4.0);
    xy = grid_to_image_coords({0, 1, 2}, 8);
    CHECK(xy.first == 12.0);
    CHECK(xy.second == 20.0);
    xy = grid_to_image_coords({2, 0, 0}, 32);
    CHECK(xy.first == 16.0);
    CHECK(xy.second == 16.0);
    CHECK_THROWS_AS(grid_to_image_coords({0, 0, 0}, 0), ContractError);
}

TEST_CASE("grid mapping is injective within a level") {
    std::set<std::pair<double, double>> seen;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            const auto xy = grid_to_image_coords({0, i, j}, 16);
            CHECK(seen.insert(xy).second);
        }
}

TEST_CASE("iou covers the degenerate and golden cases") {
    const BBox a{10, 10, 4, 4};
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    const BBox far_away{100, 100, 4, 4};
    CHECK(iou(a, far_away) == 0.0);
    const BBox edge_touching{14, 10, 4, 4};
    CHECK(iou(a, edge_touching) == 0.0);
    // half-overlapping congruent squares: inter 8, union 24
    const BBox half{12, 10, 4, 4};
    CHECK(iou(a, half) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(iou(half, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("unit boxes around grid cells have the documented overlaps") {
    const BBox at = unit_box({0, 3, 4});
    CHECK(at.x0() == 2.0);
    CHECK(at.y0() == 3.0);
    CHECK(at.x1() == 4.0);
    CHECK(at.y1() == 5.0);
    const BBox right = unit_box({0, 4, 4});
    const BBox diag = unit_box({0, 4, 5});
    CHECK(iou(at, right) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(iou(at, diag) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("nms keeps the best box and drops heavy overlaps") {
    std::vector<BBox> boxes{{10, 10, 4, 4}, {11, 10, 4, 4}, {30, 30, 4, 4}};
    std::vector<double> scores{0.9, 0.8, 0.7};
    // boxes 0 and 1 overlap with iou 3/5; the far box survives
    auto kept = nms(boxes, scores, 0.5);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == 0);
    CHECK(kept[1] == 2);
    // raising the threshold above their overlap keeps all three
    kept = nms(boxes, scores, 0.7);
    CHECK(kept.size() == 3);
}

TEST_CASE("nms with threshold at or above 1 never suppresses") {
    std::vector<BBox> boxes{{10, 10, 4, 4}, {10, 10, 4, 4}, {10, 10, 4, 4}};
    std::vector<double> scores{0.5, 0.9, 0.1};
    auto kept = nms(boxes, scores, 1.0);
    REQUIRE(kept.size() == 3);
    // ordered by descending score
    CHECK(kept[0] == 1);
    CHECK(kept[1] == 0);
    CHECK(kept[2] == 2);
}

TEST_CASE("nms score ties keep the earlier box first") {
    std::vector<BBox> boxes{{10, 10, 4, 4}, {50, 10, 4, 4}};
    std::vector<double> scores{0.5, 0.5};
    auto kept = nms(boxes, scores, 0.5);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == 0);
    CHECK(kept[1] == 1);
}

TEST_CASE("nms matches the argmax-scan oracle on random inputs") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + rng.uniform_int(0, 9);
        std::vector<BBox> boxes;
        std::vector<double> scores;
        for (int i = 0; i < n; ++i) {
            boxes.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(1, 8),
                             rng.uniform(1, 8)});
            scores.push_back(rng.uniform(0, 1));
        }
        const double threshold = rng.uniform(0.05, 0.95);
        const auto got = nms(boxes, scores, threshold);
        const auto expect = reference::nms(boxes, scores, threshold);
        REQUIRE(got.size() == expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
    }
}

TEST_CASE("nms validates its inputs") {
    std::vector<BBox> boxes{{10, 10, 4, 4}};
    std::vector<double> scores{0.5, 0.6};
    CHECK_THROWS_AS(nms(boxes, scores, 0.5), ContractError);
}
