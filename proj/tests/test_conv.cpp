#include "helpers.hpp"

using namespace tcif;

TEST_CASE("conv2d 1x1 unit kernel is the identity") {
    Rng rng(41);
    Tensor x = tt::random_tensor({2, 3, 5, 5}, rng);
    Tensor w({3, 3, 1, 1});
    for (int o = 0; o < 3; ++o) w.at({o, o, 0, 0}) = 1.0;
    Tensor y = conv2d(x, w, 1);
    CHECK(tt::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 on constant field with replicate pad") {
    const double c = 0.37;
    Tensor x = Tensor::full({1, 1, 6, 7}, c);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor y = conv2d(x, w, 1, PadMode::Replicate);
    CHECK(y.shape() == Shape{1, 1, 6, 7});
    CHECK(tt::max_abs_diff(y, Tensor::full({1, 1, 6, 7}, 9.0 * c)) < 1e-14);
}

TEST_CASE("conv2d output extents follow the stride arithmetic") {
    Tensor x({1, 1, 64, 64});
    Tensor w7({8, 1, 7, 7});
    CHECK(conv2d(x, w7, 4).shape() == Shape{1, 8, 16, 16});
    Tensor x2({1, 8, 16, 16});
    Tensor w3({16, 8, 3, 3});
    CHECK(conv2d(x2, w3, 2).shape() == Shape{1, 16, 8, 8});
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
    Tensor x({1, 1, 2, 2});
    Tensor w({1, 1, 7, 7});
    CHECK_THROWS_AS(conv2d(x, w, 1, PadMode::Zero, 0), DimensionError);
    CHECK_THROWS_AS(conv2d(x, w, 1, PadMode::Zero, 1), DimensionError);
    Tensor wbad({1, 2, 3, 3});
    CHECK_THROWS_AS(conv2d(x, wbad, 1), DimensionError);
}

TEST_CASE("conv2d gradient matches central differences") {
    Rng rng(43);
    Tensor x = tt::random_tensor({1, 2, 6, 6}, rng);
    Tensor w = tt::random_tensor({3, 2, 3, 3}, rng);
    for (PadMode mode : {PadMode::Zero, PadMode::Replicate}) {
        const double err = grad_check(
            [&](std::vector<Tensor>& xs) {
                Tensor y = conv2d(xs[0], xs[1], 1, mode);
                return sum_all(mul(y, y));
            },
            {x, w});
        CHECK(err < 1e-6);
    }
    // strided case
    const double err_s = grad_check(
        [&](std::vector<Tensor>& xs) {
            Tensor y = conv2d(xs[0], xs[1], 2, PadMode::Zero);
            return sum_all(mul(y, y));
        },
        {x, w});
    CHECK(err_s < 1e-6);
}

TEST_CASE("deconv2d then conv2d with a delta kernel is the identity") {
    Rng rng(47);
    Tensor x = tt::random_tensor({1, 1, 4, 4}, rng);
    Tensor w({1, 1, 2, 2});
    w.at({0, 0, 0, 0}) = 1.0;
    Tensor up = deconv2d(x, w, 2);
    CHECK(up.shape() == Shape{1, 1, 8, 8});
    Tensor back = conv2d(up, w, 2);
    CHECK(tt::max_abs_diff(back, x) == 0.0);
}

TEST_CASE("deconv2d doubles spatial extents at stride 2") {
    Tensor x({1, 4, 8, 8});
    Tensor w({4, 6, 2, 2});
    CHECK(deconv2d(x, w, 2).shape() == Shape{1, 6, 16, 16});
}

TEST_CASE("deconv2d gradient matches central differences") {
    Rng rng(53);
    const double err = grad_check(
        [&](std::vector<Tensor>& xs) {
            Tensor y = deconv2d(xs[0], xs[1], 2);
            return sum_all(mul(y, y));
        },
        {tt::random_tensor({1, 2, 4, 4}, rng), tt::random_tensor({2, 3, 2, 2}, rng)});
    CHECK(err < 1e-6);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
    // <conv(x), y> == <x, deconv(y)> for matching geometry
    Rng rng(59);
    Tensor w = tt::random_tensor({2, 3, 2, 2}, rng);
    Tensor y = tt::random_tensor({1, 2, 4, 4}, rng);
    Tensor xc = tt::random_tensor({1, 3, 8, 8}, rng);
    Tensor cx = conv2d(xc, w, 2, PadMode::Zero, 0);
    double lhs = 0.0;
    for (int64_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
    Tensor dy = deconv2d(y, w, 2);
    double rhs = 0.0;
    for (int64_t i = 0; i < dy.numel(); ++i) rhs += dy.data()[i] * xc.data()[i];
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("depthwise_conv2d delta kernel is identity, gradient checks") {
    Rng rng(61);
    Tensor x = tt::random_tensor({1, 3, 5, 5}, rng);
    Tensor w({3, 1, 3, 3});
    for (int c = 0; c < 3; ++c) w.at({c, 0, 1, 1}) = 1.0;
    CHECK(tt::max_abs_diff(depthwise_conv2d(x, w), x) == 0.0);

    const double err = grad_check(
        [&](std::vector<Tensor>& xs) {
            Tensor y = depthwise_conv2d(xs[0], xs[1], PadMode::Replicate);
            return sum_all(mul(y, y));
        },
        {tt::random_tensor({1, 2, 4, 4}, rng), tt::random_tensor({2, 1, 3, 3}, rng)});
    CHECK(err < 1e-6);
}

TEST_CASE("bilinear_upsample: constants, exact taps, gradient") {
    Tensor c = Tensor::full({1, 2, 3, 3}, 0.8);
    CHECK(tt::max_abs_diff(bilinear_upsample(c, 4), Tensor::full({1, 2, 12, 12}, 0.8)) <
          1e-14);

    Rng rng(67);
    Tensor x = tt::random_tensor({1, 1, 3, 3}, rng);
    CHECK(tt::max_abs_diff(bilinear_upsample(x, 1), x) == 0.0);

    Tensor ramp = Tensor::from({0.0, 1.0}, {1, 1, 1, 2});
    Tensor up = bilinear_upsample(ramp, 2);
    CHECK(up.at({0, 0, 0, 0}) == Catch::Approx(0.0));
    CHECK(up.at({0, 0, 0, 1}) == Catch::Approx(0.25));
    CHECK(up.at({0, 0, 0, 2}) == Catch::Approx(0.75));
    CHECK(up.at({0, 0, 0, 3}) == Catch::Approx(1.0));

    const double err = grad_check(
        [&](const Tensor& t) {
            Tensor y = bilinear_upsample(t, 2);
            return sum_all(mul(y, y));
        },
        tt::random_tensor({1, 2, 3, 4}, rng));
    CHECK(err < 1e-6);
}
