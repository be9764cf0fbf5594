#include <doctest.h>

#include <cmath>
#include <numbers>

#include "labelaug/errors.hpp"
#include "labelaug/graph.hpp"
#include "oracles.hpp"

using namespace labelaug;
using labelaug::testing::check_op;
using labelaug::testing::random_tensor;

namespace {

Tensor<double> conv_ones(std::size_t h, std::size_t w) {
    Graph<double> g;
    Var out = g.conv2d(g.constant(Tensor<double>({1, 1, h, w}, 1.0)), g.constant(Tensor<double>({1, 1, 3, 3}, 1.0)),
                       g.constant(Tensor<double>({1}, 0.0)));
    return g.value(out);
}

}  // namespace

TEST_CASE("conv2d of ones counts the in-bounds taps") {
    const auto y = conv_ones(3, 3);
    CHECK(y.at(0, 0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 0, 1) == 6.0);
    CHECK(y.at(0, 0, 1, 0) == 6.0);
    CHECK(y.at(0, 0, 2, 1) == 6.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 2, 2) == 4.0);
}

TEST_CASE("conv2d with zero weights yields the bias everywhere") {
    Rng rng(3);
    Graph<double> g;
    Tensor<double> b({2}, std::vector<double>{0.5, -1.25});
    Var out = g.conv2d(g.constant(random_tensor({2, 3, 4, 5}, rng)), g.constant(Tensor<double>({2, 3, 3, 3})),
                       g.constant(b));
    const auto& y = g.value(out);
    REQUIRE(y.shape() == Shape{2, 2, 4, 5});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t h = 0; h < 4; ++h)
                for (std::size_t w = 0; w < 5; ++w) CHECK(y.at(n, c, h, w) == b[c]);
}

TEST_CASE("conv2d rejects mismatched shapes") {
    Graph<double> g;
    Var x = g.constant(Tensor<double>({1, 2, 4, 4}));
    CHECK_THROWS_AS(g.conv2d(x, g.constant(Tensor<double>({1, 3, 3, 3})), g.constant(Tensor<double>({1}))),
                    ShapeError);
    CHECK_THROWS_AS(g.conv2d(x, g.constant(Tensor<double>({1, 2, 5, 5})), g.constant(Tensor<double>({1}))),
                    ShapeError);
    CHECK_THROWS_AS(g.conv2d(x, g.constant(Tensor<double>({1, 2, 3, 3})), g.constant(Tensor<double>({2}))),
                    ShapeError);
}

TEST_CASE("conv2d gradient matches central differences") {
    Rng rng(11);
    const auto r = check_op({random_tensor({1, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                             random_tensor({3}, rng)},
                            [](Graph<double>& g, std::span<const Var> in) { return g.conv2d(in[0], in[1], in[2]); },
                            rng);
    CHECK(r.grad.checked == 50 + 54 + 3);
    CHECK(r.grad.max_rel_err < 1e-6);
}

TEST_CASE("relu clamps negatives") {
    Graph<double> g;
    Var y = g.relu(g.leaf(Tensor<double>({3}, std::vector<double>{-1.0, 0.0, 2.0})));
    CHECK(g.value(y) == Tensor<double>({3}, std::vector<double>{0.0, 0.0, 2.0}));
}

TEST_CASE("maxpool2 routes the gradient to the winner") {
    Graph<double> g;
    Var x = g.leaf(Tensor<double>({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
    Var y = g.maxpool2(x);
    CHECK(g.value(y) == Tensor<double>({1, 1, 1, 1}, 4.0));
    g.backward(y);
    CHECK(g.grad(x) == Tensor<double>({1, 1, 2, 2}, std::vector<double>{0, 0, 0, 1}));
}

TEST_CASE("maxpool2 on ties picks the first cell") {
    Graph<double> g;
    Var x = g.leaf(Tensor<double>({1, 1, 2, 2}, 7.0));
    Var y = g.maxpool2(x);
    g.backward(y);
    CHECK(g.grad(x) == Tensor<double>({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0}));
    CHECK(g.nondifferentiability_margin() == 0.0);
}

TEST_CASE("maxpool2 needs even spatial size") {
    Graph<double> g;
    CHECK_THROWS_AS(g.maxpool2(g.leaf(Tensor<double>({1, 1, 3, 4}))), ShapeError);
}

TEST_CASE("upsample2 replicates") {
    Graph<double> g;
    Var y = g.upsample2(g.leaf(Tensor<double>({1, 1, 1, 1}, 5.0)));
    CHECK(g.value(y) == Tensor<double>({1, 1, 2, 2}, 5.0));
}

TEST_CASE("concat_channels stacks a before b") {
    Graph<double> g;
    Var a = g.leaf(Tensor<double>({1, 1, 1, 2}, std::vector<double>{1, 2}));
    Var b = g.leaf(Tensor<double>({1, 2, 1, 2}, std::vector<double>{3, 4, 5, 6}));
    Var y = g.concat_channels(a, b);
    CHECK(g.value(y) == Tensor<double>({1, 3, 1, 2}, std::vector<double>{1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_AS(g.concat_channels(a, g.leaf(Tensor<double>({1, 1, 2, 2}))), ShapeError);
}

TEST_CASE("gradients of the shape ops match central differences") {
    Rng rng(5);
    const auto relu = check_op({random_tensor({2, 2, 3, 3}, rng)},
                               [](Graph<double>& g, std::span<const Var> in) { return g.relu(in[0]); }, rng);
    CHECK(relu.grad.max_rel_err < 1e-6);
    const auto pool = check_op({random_tensor({1, 2, 4, 6}, rng)},
                               [](Graph<double>& g, std::span<const Var> in) { return g.maxpool2(in[0]); }, rng);
    CHECK(pool.grad.max_rel_err < 1e-6);
    const auto up = check_op({random_tensor({2, 1, 2, 3}, rng)},
                             [](Graph<double>& g, std::span<const Var> in) { return g.upsample2(in[0]); }, rng);
    CHECK(up.grad.max_rel_err < 1e-6);
    const auto cat = check_op(
        {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)},
        [](Graph<double>& g, std::span<const Var> in) { return g.concat_channels(in[0], in[1]); }, rng);
    CHECK(cat.grad.max_rel_err < 1e-6);
}

TEST_CASE("weighted bce single cells") {
    const std::vector<double> w2{2.0};
    {
        Graph<double> g;
        Var l = g.weighted_bce_with_logits(g.leaf(Tensor<double>({1, 1, 1, 1}, 0.0)), Tensor<double>({1, 1, 1, 1}, 1.0),
                                           BceWeights<double>::broadcast(1, w2));
        CHECK(g.value(l)[0] == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
    }
    for (double w : {0.5, 1.0, 3000.0}) {
        Graph<double> g;
        const std::vector<double> pw{w};
        Var l = g.weighted_bce_with_logits(g.leaf(Tensor<double>({1, 1, 1, 1}, 0.0)), Tensor<double>({1, 1, 1, 1}, 0.0),
                                           BceWeights<double>::broadcast(1, pw));
        CHECK(g.value(l)[0] == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
    }
}

TEST_CASE("weighted bce stays finite for large logits") {
    Graph<double> g;
    const std::vector<double> pw{10.0};
    Tensor<double> z({1, 1, 1, 2}, std::vector<double>{-800.0, 800.0});
    Tensor<double> y({1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
    Var l = g.weighted_bce_with_logits(g.leaf(z), y, BceWeights<double>::broadcast(1, pw));
    CHECK(g.value(l)[0] == doctest::Approx((10.0 * 800.0 + 800.0) / 2.0));
}

TEST_CASE("weighted bce gradient matches central differences") {
    Rng rng(17);
    Tensor<double> y({1, 2, 4, 4});
    for (auto& v : y.values()) v = rng.uniform01() < 0.3 ? 1.0 : 0.0;
    const std::vector<double> pw{3.0, 0.75};
    const auto w = BceWeights<double>::broadcast(1, pw);
    const auto r = check_op(
        {random_tensor({1, 2, 4, 4}, rng, 2.0)},
        [&](Graph<double>& g, std::span<const Var> in) { return g.weighted_bce_with_logits(in[0], y, w); }, rng);
    CHECK(r.grad.max_rel_err < 1e-6);
}

TEST_CASE("masked channels contribute nothing but keep the denominator") {
    Graph<double> g;
    Tensor<double> z({1, 2, 1, 1}, std::vector<double>{0.0, 0.0});
    Tensor<double> y({1, 2, 1, 1}, std::vector<double>{1.0, 1.0});
    const std::vector<double> pw{1.0, 1.0};
    auto w = BceWeights<double>::broadcast(1, pw);
    w.channel_mask[1] = 0.0;
    w.pos_weight[1] = 0.0;
    Var zl = g.leaf(z);
    Var l = g.weighted_bce_with_logits(zl, y, w);
    CHECK(g.value(l)[0] == doctest::Approx(std::numbers::ln2 / 2.0));
    g.backward(l);
    CHECK(g.grad(zl)[1] == 0.0);
}

TEST_CASE("weighted bce input validation") {
    const std::vector<double> pw{1.0};
    const auto w = BceWeights<double>::broadcast(1, pw);
    {
        Graph<double> g;
        CHECK_THROWS_AS(g.weighted_bce_with_logits(g.leaf(Tensor<double>({1, 1, 1, 1})),
                                                   Tensor<double>({1, 1, 1, 1}, 0.5), w),
                        DataError);
    }
    {
        Graph<double> g;
        CHECK_THROWS_AS(g.weighted_bce_with_logits(g.leaf(Tensor<double>({1, 1, 1, 1}, NAN)),
                                                   Tensor<double>({1, 1, 1, 1}), w),
                        NumericError);
    }
    {
        Graph<double> g;
        const std::vector<double> bad{0.0};
        CHECK_THROWS_AS(g.weighted_bce_with_logits(g.leaf(Tensor<double>({1, 1, 1, 1})), Tensor<double>({1, 1, 1, 1}),
                                                   BceWeights<double>::broadcast(1, bad)),
                        std::invalid_argument);
    }
}

TEST_CASE("tensor value construction checks the element count") {
    CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    Tensor<float> t({2}, std::vector<float>{1.0f, INFINITY});
    CHECK_FALSE(t.all_finite());
}
