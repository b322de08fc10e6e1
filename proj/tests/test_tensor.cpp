#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "reference.hpp"
#include "salenc/gradcheck.hpp"
#include "salenc/ops.hpp"
#include "salenc/tensor.hpp"

using namespace salenc;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(shape);
    double* d = t.mutable_data();
    for (int i = 0; i < t.size(); ++i) d[i] = rng.normal() * scale;
    return t;
}

}  // namespace

TEST_CASE("matmul matches a hand-computed product") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    CHECK(c.dim(0) == 2);
    CHECK(c.dim(1) == 2);
    CHECK(c.at({0, 0}) == doctest::Approx(58).epsilon(1e-14));
    CHECK(c.at({0, 1}) == doctest::Approx(64).epsilon(1e-14));
    CHECK(c.at({1, 0}) == doctest::Approx(139).epsilon(1e-14));
    CHECK(c.at({1, 1}) == doctest::Approx(154).epsilon(1e-14));
}

TEST_CASE("matmul gradient agrees with finite differences") {
    Rng rng(11);
    Tensor a = randn({4, 5}, rng);
    Tensor b = randn({5, 2}, rng);
    std::vector<Tensor> params{a, b};
    auto loss = [&](Tape&) { return sum_all(mul(matmul(params[0], params[1]),
                                                matmul(params[0], params[1]))); };
    Rng probe(3);
    auto report = finite_difference_check(loss, params, 10, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grouped convolution matches the nested-loop oracle") {
    Rng rng(21);
    const int c = 4, h = 5, w = 6, co = 8, groups = 2;
    Tensor input = randn({c, h, w}, rng);
    Tensor k3 = randn({co, c / groups, 3, 3}, rng);
    Tensor k1 = randn({co, c / groups, 1, 1}, rng);

    for (const Tensor& k : {k3, k1}) {
        Tensor out = grouped_conv2d(input, k, groups);
        auto expect = reference::grouped_conv2d(input.data(), c, h, w, k.data(), co, k.dim(2),
                                                k.dim(3), groups);
        REQUIRE(out.size() == static_cast<int>(expect.size()));
        for (int i = 0; i < out.size(); ++i)
            CHECK(std::abs(out.data()[static_cast<std::size_t>(i)] -
                           expect[static_cast<std::size_t>(i)]) < 1e-12);
    }
}

TEST_CASE("grouped convolution gradient agrees with finite differences") {
    Rng rng(22);
    Tensor input = randn({2, 3, 3}, rng);
    Tensor kernels = randn({4, 1, 3, 3}, rng);
    std::vector<Tensor> params{input, kernels};
    auto loss = [&](Tape&) {
        Tensor y = grouped_conv2d(params[0], params[1], 2);
        return sum_all(mul(y, y));
    };
    Rng probe(5);
    auto report = finite_difference_check(loss, params, 12, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("bilinear resize of a 2x2 ramp to 3x3") {
    Tensor x = Tensor::from_data({1, 2, 2}, {0, 1, 2, 3});
    Tensor y = bilinear_resize(x, 3, 3);
    const std::vector<double> expect{0, 0.5, 1, 1, 1.5, 2, 2, 2.5, 3};
    REQUIRE(y.size() == 9);
    for (int i = 0; i < 9; ++i)
        CHECK(y.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-14));
}

TEST_CASE("bilinear resize to the same size is the identity") {
    Rng rng(31);
    Tensor x = randn({3, 4, 7}, rng);
    Tensor y = bilinear_resize(x, 4, 7);
    for (int i = 0; i < x.size(); ++i)
        CHECK(y.data()[static_cast<std::size_t>(i)] == x.data()[static_cast<std::size_t>(i)]);
}

TEST_CASE("bilinear resize matches the oracle on random volumes") {
    Rng rng(32);
    for (auto [h, w, oh, ow] : {std::array<int, 4>{2, 2, 5, 5}, {4, 6, 3, 9}, {1, 5, 4, 2}}) {
        Tensor x = randn({2, h, w}, rng);
        Tensor y = bilinear_resize(x, oh, ow);
        auto expect = reference::bilinear_resize(x.data(), 2, h, w, oh, ow);
        REQUIRE(y.size() == static_cast<int>(expect.size()));
        for (int i = 0; i < y.size(); ++i)
            CHECK(y.data()[static_cast<std::size_t>(i)] ==
                  doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("bilinear resize gradient agrees with finite differences") {
    Rng rng(33);
    Tensor x = randn({2, 3, 4}, rng);
    std::vector<Tensor> params{x};
    auto loss = [&](Tape&) {
        Tensor y = bilinear_resize(params[0], 5, 7);
        return sum_all(mul(y, y));
    };
    Rng probe(6);
    auto report = finite_difference_check(loss, params, 24, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("backward of x*x at x=3 yields 6") {
    Tensor x = Tensor::scalar(3.0);
    Tape tape;
    tape.watch(x);
    Tensor y = mul(x, x);
    backward(tape, y);
    REQUIRE(x.has_grad());
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward of sum(sigmoid(x)) at zero yields 0.25 per element") {
    Tensor x = Tensor::zeros({2, 3});
    Tape tape;
    tape.watch(x);
    Tensor y = sum_all(sigmoid(x));
    backward(tape, y);
    REQUIRE(x.has_grad());
    for (double g : x.grad()) CHECK(g == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("finite differences confirm exact gradients of a linear map") {
    Rng rng(41);
    Tensor w = randn({3, 4}, rng);
    Tensor x = randn({2, 3}, rng);
    std::vector<Tensor> params{w, x};
    auto loss = [&](Tape&) { return sum_all(affine_const(matmul(params[1], params[0]), 2.5, 0.1)); };
    Rng probe(7);
    // linear, so any step size has zero truncation error; a large dyadic
    // step keeps the difference quotient clear of roundoff
    auto report = finite_difference_check(loss, params, 18, probe, 0.25);
    CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("finite differences pass through relu away from its kinks") {
    // preactivations are held away from zero so every probe stays one-sided
    Tensor w = Tensor::from_data({2, 2}, {1.0, -0.5, 0.25, 1.0});
    Tensor x = Tensor::from_data({1, 2}, {0.8, -0.6});
    {
        Tensor pre = matmul(x, w);
        for (int i = 0; i < pre.size(); ++i)
            REQUIRE(std::abs(pre.data()[static_cast<std::size_t>(i)]) > 1e-3);
    }
    std::vector<Tensor> params{w, x};
    auto loss = [&](Tape&) { return sum_all(relu(matmul(params[1], params[0]))); };
    Rng probe(8);
    auto report = finite_difference_check(loss, params, 6, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("a 10 percent corrupted gradient is flagged with relative error near 0.1") {
    Rng rng(42);
    Tensor a = randn({2, 3}, rng);
    Tensor b = randn({3, 2}, rng);
    std::vector<Tensor> params{a, b};
    auto loss = [&](Tape&) {
        Tensor y = matmul(params[0], params[1]);
        return sum_all(mul(y, y));
    };
    auto grads = tape_gradients(loss, params);
    grads[0][2] *= 1.1;
    Rng probe(9);
    // probing every coordinate guarantees the corrupted one is hit
    auto report = finite_difference_error_vs(grads, loss, params, 6, probe);
    CHECK(report.max_rel_err == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(report.worst_param == 0);
    CHECK(report.worst_elem == 2);
}

TEST_CASE("sigmoid is stable for large magnitude inputs") {
    Tensor x = Tensor::from_data({1, 2}, {800.0, -800.0});
    Tensor y = sigmoid(x);
    CHECK(y.data()[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y.data()[1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::isfinite(y.data()[1]));
}

TEST_CASE("softmax rows sum to one and match a direct evaluation") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 1000, 1001, 1002});
    Tensor y = softmax_rows(x);
    for (int r = 0; r < 2; ++r) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += y.at({r, c});
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    // both rows are shifted copies of each other, so the distributions match
    for (int c = 0; c < 3; ++c)
        CHECK(y.at({0, c}) == doctest::Approx(y.at({1, c})).epsilon(1e-12));
    const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    CHECK(y.at({0, 0}) == doctest::Approx(e1 / (e1 + e2 + e3)).epsilon(1e-12));
}

TEST_CASE("softmax gradient agrees with finite differences") {
    Rng rng(43);
    Tensor x = randn({3, 4}, rng);
    Tensor mix = randn({3, 4}, rng);
    std::vector<Tensor> params{x};
    auto loss = [&](Tape&) { return sum_all(mul(softmax_rows(params[0]), mix)); };
    Rng probe(10);
    auto report = finite_difference_check(loss, params, 12, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("clamp gradient passes inside the interval and blocks outside") {
    Tensor x = Tensor::from_data({1, 3}, {-2.0, 0.5, 2.0});
    Tape tape;
    tape.watch(x);
    Tensor y = sum_all(clamp(x, 0.0, 1.0));
    backward(tape, y);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("scatter_rows rejects duplicate indices and keeps other rows bitwise") {
    Rng rng(44);
    Tensor base = randn({4, 3}, rng);
    Tensor rows = randn({2, 3}, rng);
    CHECK_THROWS_AS(scatter_rows(base, {1, 1}, rows), ContractError);
    Tensor out = scatter_rows(base, {0, 2}, rows);
    for (int c = 0; c < 3; ++c) {
        CHECK(out.at({1, c}) == base.at({1, c}));
        CHECK(out.at({3, c}) == base.at({3, c}));
        CHECK(out.at({0, c}) == rows.at({0, c}));
        CHECK(out.at({2, c}) == rows.at({1, c}));
    }
}

TEST_CASE("gather and scatter gradients agree with finite differences") {
    Rng rng(45);
    Tensor base = randn({5, 3}, rng);
    Tensor rows = randn({2, 3}, rng);
    std::vector<Tensor> params{base, rows};
    auto loss = [&](Tape&) {
        Tensor s = scatter_rows(params[0], {4, 1}, params[1]);
        Tensor g = gather_rows(s, {0, 1, 4});
        return sum_all(mul(g, g));
    };
    Rng probe(11);
    auto report = finite_difference_check(loss, params, 15, probe);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("mixing tensors from two tapes is rejected") {
    Tensor a = Tensor::scalar(1.0);
    Tensor b = Tensor::scalar(2.0);
    Tape t1, t2;
    t1.watch(a);
    t2.watch(b);
    CHECK_THROWS_AS(add(a, b), ContractError);
}

TEST_CASE("constants record no nodes and receive no gradients") {
    Tensor a = Tensor::scalar(2.0);
    Tensor b = Tensor::scalar(3.0);
    {
        Tape tape;
        Tensor c = mul(a, b);  // no watched input, nothing recorded
        CHECK(tape.node_count() == 0);
        CHECK_FALSE(c.has_grad());
    }
    Tape tape;
    tape.watch(a);
    Tensor c = mul(a, b);
    Tensor l = sum_all(c);
    backward(tape, l);
    CHECK(a.grad()[0] == doctest::Approx(3.0));
    CHECK_FALSE(b.has_grad());
}

TEST_CASE("backward replays every node exactly once") {
    Rng rng(46);
    Tensor a = randn({3, 3}, rng);
    Tape tape;
    tape.watch(a);
    Tensor x = a;
    for (int i = 0; i < 5; ++i) x = relu(matmul(x, a));
    Tensor l = sum_all(x);
    const int nodes = tape.node_count();
    CHECK(nodes > 0);
    const std::size_t visited = backward(tape, l);
    CHECK(visited == static_cast<std::size_t>(nodes));
    CHECK(tape.backward_visits() == visited);
}

TEST_CASE("backward requires a scalar loss recorded on the tape") {
    Tensor a = Tensor::from_data({1, 2}, {1.0, 2.0});
    Tape tape;
    tape.watch(a);
    Tensor y = mul(a, a);
    CHECK_THROWS_AS(backward(tape, y), ContractError);  // not scalar
    Tensor detached = Tensor::scalar(1.0);
    CHECK_THROWS_AS(backward(tape, detached), ContractError);  // not on tape
}

TEST_CASE("mac accounting is exact for matmul") {
    reset_mac_count();
    Tensor a = Tensor::zeros({4, 5});
    Tensor b = Tensor::zeros({5, 7});
    matmul(a, b);
    CHECK(mac_count() == 4u * 5u * 7u);
    reset_mac_count();
}

TEST_CASE("identical seeds produce identical gradients bitwise") {
    auto run = [] {
        Rng rng(99);
        Tensor a = randn({4, 4}, rng);
        Tensor b = randn({4, 4}, rng);
        Tape tape;
        tape.watch(a);
        tape.watch(b);
        Tensor l = sum_all(sigmoid(matmul(a, b)));
        backward(tape, l);
        std::vector<double> out = a.grad();
        out.insert(out.end(), b.grad().begin(), b.grad().end());
        return out;
    };
    const auto g1 = run();
    const auto g2 = run();
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("elementwise op shape mismatches raise ShapeError") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), ShapeError);
}

TEST_CASE("reshape keeps data order and total size") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = reshape(a, {3, 2});
    CHECK(b.at({0, 0}) == 1);
    CHECK(b.at({2, 1}) == 6);
    CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("channel helpers round-trip between layouts") {
    Rng rng(47);
    Tensor x = randn({3, 2, 4}, rng);
    Tensor rows = channels_to_rows(x);
    CHECK(rows.dim(0) == 8);
    CHECK(rows.dim(1) == 3);
    // row r of the flattened form is the channel vector at cell r
    CHECK(rows.at({0, 0}) == x.at({0, 0, 0}));
    CHECK(rows.at({5, 2}) == x.at({2, 1, 1}));
    Tensor back = rows_to_channels(rows, 2, 4);
    for (int i = 0; i < x.size(); ++i)
        CHECK(back.data()[static_cast<std::size_t>(i)] == x.data()[static_cast<std::size_t>(i)]);
}

TEST_CASE("focal-style composite gradient survives a deep chain") {
    Rng rng(48);
    Tensor x = randn({2, 5}, rng, 0.5);
    std::vector<Tensor> params{x};
    auto loss = [&](Tape&) {
        Tensor p = clamp(sigmoid(params[0]), 1e-12, 1.0);
        Tensor term = mul(pow_const(affine_const(p, -1.0, 1.0), 2.0), log(p));
        return mean_all(affine_const(term, -0.25, 0.0));
    };
    Rng probe(12);
    auto report = finite_difference_check(loss, params, 10, probe);
    CHECK(report.max_rel_err < 1e-5);
}
