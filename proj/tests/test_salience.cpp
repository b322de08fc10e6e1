#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "salenc/gradcheck.hpp"
#include "salenc/ops.hpp"
#include "salenc/salience.hpp"

using namespace salenc;

TEST_CASE("confidence is 1 at the center, 0 at corners and outside") {
    const BBox box{20, 30, 8, 12};
    CHECK(salience_confidence(20, 30, box) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(salience_confidence(24, 36, box) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(salience_confidence(16, 24, box) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(salience_confidence(24.001, 30, box) == 0.0);
    CHECK(salience_confidence(20, 36.5, box) == 0.0);
    CHECK(salience_confidence(200, 200, box) == 0.0);
}

TEST_CASE("confidence at an edge midpoint is 1 minus sqrt(1/2)") {
    const BBox box{20, 30, 8, 12};
    const double expect = 1.0 - std::sqrt(0.5);
    CHECK(salience_confidence(24, 30, box) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(salience_confidence(16, 30, box) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(salience_confidence(20, 24, box) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(salience_confidence(20, 36, box) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("confidence depends only on normalized offsets") {
    // dyadic offsets and scales keep the normalized offsets bitwise equal,
    // so the confidences must be bitwise equal too
    const BBox small{10, 10, 8, 4};
    for (double scale : {2.0, 4.0, 64.0, 0.5}) {
        const BBox big{80, 80, 8 * scale, 4 * scale};
        for (double fx : {0.0, 0.125, 0.25, -0.375, 0.5}) {
            for (double fy : {0.0, 0.25, -0.125, 0.5}) {
                const double a = salience_confidence(10 + fx * 8, 10 + fy * 4, small);
                const double b =
                    salience_confidence(80 + fx * 8 * scale, 80 + fy * 4 * scale, big);
                CHECK(a == b);
            }
        }
    }
}

TEST_CASE("confidence decreases monotonically away from the center") {
    const BBox box{0, 0, 10, 6};
    for (double dirx : {1.0, -0.3, 0.8}) {
        for (double diry : {0.5, 1.0, -0.7}) {
            double prev = salience_confidence(0, 0, box);
            for (int step = 1; step <= 8; ++step) {
                const double t = step / 20.0;
                const double cur = salience_confidence(dirx * 10 * t, diry * 6 * t, box);
                CHECK(cur <= prev);
                prev = cur;
            }
        }
    }
}

TEST_CASE("targets take the maximum over overlapping boxes") {
    const std::vector<LevelShape> shapes{{4, 4}};
    const std::vector<int> strides{8};
    // both boxes cover cell (1,1) at image coords (12,12)
    const BBox near{12, 12, 16, 16};
    const BBox off_center{14, 12, 16, 16};
    const auto both = build_salience_targets(shapes, strides, {near, off_center});
    const auto only_near = build_salience_targets(shapes, strides, {near});
    REQUIRE(both.size() == 1);
    const double expect = std::max(salience_confidence(12, 12, near),
                                   salience_confidence(12, 12, off_center));
    CHECK(both[0].at({0, 1, 1}) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(both[0].at({0, 1, 1}) >= only_near[0].at({0, 1, 1}));
}

TEST_CASE("target maps are zero outside every box and within [0,1]") {
    const std::vector<LevelShape> shapes{{8, 8}, {4, 4}};
    const std::vector<int> strides{8, 16};
    const BBox box{20, 20, 10, 10};
    const auto maps = build_salience_targets(shapes, strides, {box});
    REQUIRE(maps.size() == 2);
    for (std::size_t l = 0; l < maps.size(); ++l) {
        const LevelShape s = shapes[l];
        for (int i = 0; i < s.h; ++i)
            for (int j = 0; j < s.w; ++j) {
                const double v = maps[l].at({0, i, j});
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                const auto [x, y] = grid_to_image_coords({static_cast<int>(l), i, j}, strides[l]);
                if (std::abs(x - box.cx) > box.w / 2 || std::abs(y - box.cy) > box.h / 2)
                    CHECK(v == 0.0);
            }
    }
}

TEST_CASE("default scale intervals route sides to the documented levels") {
    const auto intervals = default_scale_intervals();
    REQUIRE(intervals.size() == 4);
    auto levels_of = [&intervals](double side) {
        std::vector<int> out;
        for (std::size_t l = 0; l < intervals.size(); ++l)
            if (intervals[l].contains(side)) out.push_back(static_cast<int>(l));
        return out;
    };
    CHECK(levels_of(100) == std::vector<int>{0, 1});
    CHECK(levels_of(300) == std::vector<int>{2, 3});
    CHECK(levels_of(64) == std::vector<int>{0});
    CHECK(levels_of(128) == std::vector<int>{0, 1});
    CHECK(levels_of(10000) == std::vector<int>{3});
}

TEST_CASE("stride-derived intervals reproduce the defaults and generalize") {
    const auto derived = scale_intervals_for({8, 16, 32, 64});
    const auto defaults = default_scale_intervals();
    REQUIRE(derived.size() == defaults.size());
    for (std::size_t l = 0; l < derived.size(); ++l) {
        CHECK(derived[l].lo == defaults[l].lo);
        CHECK(derived[l].hi == defaults[l].hi);
    }
    // three levels: every side length still lands in at least one interval
    const auto three = scale_intervals_for({8, 16, 32});
    REQUIRE(three.size() == 3);
    CHECK(three[0].lo == -1.0);
    CHECK(three[0].hi == 128.0);
    CHECK(three[1].lo == 64.0);
    CHECK(three[1].hi == 256.0);
    CHECK(three[2].lo == 128.0);
    CHECK(std::isinf(three[2].hi));
    CHECK_THROWS_AS(scale_intervals_for({}), ConfigError);
}

TEST_CASE("discrete targets mark a box only on its interval levels") {
    const std::vector<LevelShape> shapes{{32, 32}, {16, 16}, {8, 8}, {4, 4}};
    const std::vector<int> strides{8, 16, 32, 64};
    const BBox box{128, 128, 100, 90};  // max side 100 -> levels 0 and 1
    const auto maps = discrete_fg_targets(shapes, strides, {box}, default_scale_intervals());
    REQUIRE(maps.size() == 4);
    // the cell at the box center is marked where the interval matches
    CHECK(maps[0].at({0, 15, 15}) == 1.0);
    CHECK(maps[1].at({0, 7, 7}) == 1.0);
    CHECK(maps[2].at({0, 3, 3}) == 0.0);
    CHECK(maps[3].at({0, 1, 1}) == 0.0);
    for (const Tensor& m : maps)
        for (double v : m.data()) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("discrete targets reject a level/interval count mismatch") {
    const std::vector<LevelShape> shapes{{4, 4}, {2, 2}};
    const std::vector<int> strides{8, 16};
    std::vector<ScaleInterval> three{{-1, 128}, {64, 256}, {128, 512}};
    CHECK_THROWS_AS(discrete_fg_targets(shapes, strides, {}, three), ConfigError);
}

TEST_CASE("focal loss is zero for a perfect confident prediction") {
    const Tensor pred = Tensor::full({1, 1, 1}, 1.0);
    const Tensor target = Tensor::full({1, 1, 1}, 1.0);
    const Tensor loss = salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                            std::span<const Tensor>(&target, 1), FocalParams{});
    CHECK(loss.value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("focal loss golden at matched half confidence") {
    // p = 0.5*0.5 + 0.5*0.5 = 0.5; -0.25 * 0.5^2 * log(0.5) = 0.043321698...
    const Tensor pred = Tensor::full({1, 1, 1}, 0.5);
    const Tensor target = Tensor::full({1, 1, 1}, 0.5);
    const Tensor loss = salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                            std::span<const Tensor>(&target, 1), FocalParams{});
    CHECK(loss.value() == doctest::Approx(0.0433217).epsilon(1e-5));
    const double exact = -0.25 * 0.25 * std::log(0.5);
    CHECK(loss.value() == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("focal loss stays finite at a maximally wrong prediction") {
    const Tensor pred = Tensor::full({1, 1, 1}, 1.0);
    const Tensor target = Tensor::full({1, 1, 1}, 0.0);
    const Tensor loss = salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                            std::span<const Tensor>(&target, 1), FocalParams{});
    CHECK(std::isfinite(loss.value()));
    // p clamps to eps, so the loss approaches -alpha*log(eps)
    CHECK(loss.value() == doctest::Approx(-0.25 * std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("focal loss is a mean over positions and levels") {
    const Tensor one = Tensor::full({1, 1, 1}, 0.5);
    const Tensor many = Tensor::full({1, 3, 5}, 0.5);
    const Tensor loss_one = salience_focal_loss(std::span<const Tensor>(&one, 1),
                                                std::span<const Tensor>(&one, 1), FocalParams{});
    const Tensor loss_many = salience_focal_loss(std::span<const Tensor>(&many, 1),
                                                 std::span<const Tensor>(&many, 1), FocalParams{});
    CHECK(loss_one.value() == doctest::Approx(loss_many.value()).epsilon(1e-14));

    // two levels of identical values keep the same mean
    std::vector<Tensor> preds{one, many};
    const Tensor loss_two = salience_focal_loss(std::span<const Tensor>(preds.data(), 2),
                                                std::span<const Tensor>(preds.data(), 2),
                                                FocalParams{});
    CHECK(loss_two.value() == doctest::Approx(loss_one.value()).epsilon(1e-14));
}

TEST_CASE("the loss weight is applied by the caller, not the loss") {
    const Tensor pred = Tensor::full({1, 2, 2}, 0.3);
    const Tensor target = Tensor::full({1, 2, 2}, 0.8);
    FocalParams a;
    a.lambda = 2.0;
    FocalParams b;
    b.lambda = 7.0;
    const Tensor la = salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                          std::span<const Tensor>(&target, 1), a);
    const Tensor lb = salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                          std::span<const Tensor>(&target, 1), b);
    CHECK(la.value() == lb.value());
}

TEST_CASE("the loss rewards confidence on the target's side") {
    // p = pred*t + (1-pred)*(1-t) is linear in pred, so the loss decreases
    // toward pred=1 when t > 1/2, increases when t < 1/2, and is flat at t=1/2
    auto loss_at = [](double pred_v, double target_v) {
        const Tensor pred = Tensor::full({1, 1, 1}, pred_v);
        const Tensor target = Tensor::full({1, 1, 1}, target_v);
        return salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                   std::span<const Tensor>(&target, 1), FocalParams{})
            .value();
    };
    for (int k = 1; k < 99; ++k) {
        const double a = k / 100.0, b = (k + 1) / 100.0;
        CHECK(loss_at(b, 0.7) < loss_at(a, 0.7));
        CHECK(loss_at(b, 0.3) > loss_at(a, 0.3));
        CHECK(loss_at(b, 0.5) == doctest::Approx(loss_at(a, 0.5)).epsilon(1e-12));
    }
    // and the ordering flips exactly at the half-confidence target
    CHECK(loss_at(0.9, 0.8) < loss_at(0.9, 0.6));
}

TEST_CASE("focal loss gradient agrees with finite differences") {
    Rng rng(51);
    Tensor raw = Tensor::zeros({1, 2, 3});
    double* d = raw.mutable_data();
    for (int i = 0; i < raw.size(); ++i) d[i] = rng.normal() * 0.5;
    Tensor target = Tensor::zeros({1, 2, 3});
    double* t = target.mutable_data();
    for (int i = 0; i < target.size(); ++i) t[i] = rng.uniform(0.0, 1.0);

    std::vector<Tensor> params{raw};
    auto loss = [&](Tape&) {
        Tensor pred = sigmoid(params[0]);
        return salience_focal_loss(std::span<const Tensor>(&pred, 1),
                                   std::span<const Tensor>(&target, 1), FocalParams{});
    };
    Rng probe(13);
    auto report = finite_difference_check(loss, params, 6, probe);
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("focal parameter validation rejects bad settings") {
    FocalParams p;
    p.alpha = -0.1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = FocalParams{};
    p.gamma = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = FocalParams{};
    p.eps_clamp = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK_NOTHROW(FocalParams{}.validate());
}

TEST_CASE("loss rejects mismatched level counts") {
    const Tensor a = Tensor::full({1, 2, 2}, 0.5);
    std::vector<Tensor> preds{a, a};
    CHECK_THROWS_AS(salience_focal_loss(std::span<const Tensor>(preds.data(), 2),
                                        std::span<const Tensor>(&a, 1), FocalParams{}),
                    ContractError);
}
