#include "helpers.hpp"

using namespace tcif;
using namespace tcif::nn;

namespace {

Tensor dyadic_tensor(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<double>(rng.uniform_int(-128, 128)) / 64.0;
    return t;
}

synth::Mask disk_mask(int64_t n, double radius) {
    synth::Mask m(static_cast<size_t>(n * n), 0);
    const double c = static_cast<double>(n - 1) / 2.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
            if (di * di + dj * dj <= radius * radius) m[static_cast<size_t>(i * n + j)] = 1;
        }
    return m;
}

}  // namespace

TEST_CASE("laplace_conv kills constants") {
    Tensor x = Tensor::full({2, 3, 6, 6}, 4.2);
    Tensor y = laplace_conv(x);
    CHECK(tt::max_abs_diff(y, Tensor::zeros({2, 3, 6, 6})) == 0.0);
}

TEST_CASE("laplace_conv of a step edge is supported on the two columns at the edge") {
    const int64_t n = 8;
    Tensor x({1, 1, n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = n / 2; j < n; ++j) x.at({0, 0, i, j}) = 1.0;
    Tensor y = laplace_conv(x);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            const double v = y.at({0, 0, i, j});
            if (j == n / 2 - 1 || j == n / 2)
                CHECK(v != 0.0);
            else
                CHECK(v == 0.0);
        }
}

TEST_CASE("laplace_conv equals the pmde stencil per channel") {
    Rng rng(113);
    Tensor x = dyadic_tensor({1, 2, 8, 8}, rng);
    Tensor y = laplace_conv(x);
    for (int64_t c = 0; c < 2; ++c) {
        pmde::PixelField f{8, 8,
                           std::vector<double>(x.data() + c * 64, x.data() + (c + 1) * 64),
                           pmde::Boundary::Replicate, 0.25};
        const auto lap = pmde::laplacian_5pt(f);
        for (int64_t i = 0; i < 8; ++i)
            for (int64_t j = 0; j < 8; ++j)
                CHECK(y.at({0, c, i, j}) == lap[static_cast<size_t>(i * 8 + j)]);
    }
}

TEST_CASE("tcbm_forward is the identity on constant input with zero biases") {
    Rng rng(127);
    TcbmParams p = TcbmParams::init(4, rng);
    Tensor x = Tensor::full({1, 4, 5, 5}, -0.7);
    Tensor y = tcbm_forward(x, p);
    CHECK(tt::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("tcbm_forward with h_step = 0 is the exact identity") {
    Rng rng(131);
    TcbmParams p = TcbmParams::init(4, rng);
    p.h_step.data()[0] = 0.0;
    Tensor x = tt::random_tensor({2, 4, 6, 6}, rng);
    Tensor y = tcbm_forward(x, p);
    CHECK(tt::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("tcbm gradient check") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed + 50);
        TcbmParams p = TcbmParams::init(2, rng);
        std::vector<Tensor> xs = {tt::random_tensor({1, 2, 6, 6}, rng),
                                  p.conv1_w, p.conv1_b, p.conv2_w, p.conv2_b, p.h_step};
        const double err = grad_check(
            [&](std::vector<Tensor>& vars) {
                Tensor y = tcbm_forward(vars[0], p);
                return sum_all(mul(y, y));
            },
            xs);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("tcbm branch responds more near the disk boundary than deep inside") {
    const int64_t n = 24;
    const synth::Mask disk = disk_mask(n, 8.0);
    const synth::Mask e1 = synth::erode_cross(disk, n, n);
    const synth::Mask deep =
        synth::erode_cross(synth::erode_cross(e1, n, n), n, n);  // >= 3 px inside
    synth::Mask near(disk.size());
    for (size_t i = 0; i < disk.size(); ++i) near[i] = disk[i] && !e1[i];

    int passes = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const int64_t C = 4;
        TcbmParams p = TcbmParams::init(C, rng);
        Tensor x({1, C, n, n});
        for (int64_t c = 0; c < C; ++c)
            for (size_t i = 0; i < disk.size(); ++i)
                x.data()[c * n * n + static_cast<int64_t>(i)] = disk[i];
        Tensor branch = tcbm_delta(x, p);
        double near_acc = 0.0, deep_acc = 0.0;
        int64_t near_n = 0, deep_n = 0;
        for (int64_t c = 0; c < C; ++c)
            for (size_t i = 0; i < disk.size(); ++i) {
                const double v = std::fabs(branch.data()[c * n * n + static_cast<int64_t>(i)]);
                if (near[i]) {
                    near_acc += v;
                    ++near_n;
                }
                if (deep[i]) {
                    deep_acc += v;
                    ++deep_n;
                }
            }
        REQUIRE(near_n > 0);
        REQUIRE(deep_n > 0);
        if (near_acc / static_cast<double>(near_n) > deep_acc / static_cast<double>(deep_n))
            ++passes;
    }
    CHECK(passes == 5);
}

TEST_CASE("laplace kernel is fixed and excluded from gradients") {
    Rng rng(137);
    TcbmParams p = TcbmParams::init(3, rng);
    CHECK_FALSE(p.laplace_kernel.requires_grad());
    const std::vector<double> before(p.laplace_kernel.data(),
                                     p.laplace_kernel.data() + p.laplace_kernel.numel());
    // run a traced forward/backward; the kernel must stay untouched
    Tensor x = tt::random_tensor({1, 3, 5, 5}, rng);
    x.set_requires_grad(true);
    x.ensure_grad();
    {
        Graph g;
        Tensor y = tcbm_forward(x, p);
        g.backward(sum_all(mul(y, y)));
    }
    const std::vector<double> after(p.laplace_kernel.data(),
                                    p.laplace_kernel.data() + p.laplace_kernel.numel());
    CHECK(before == after);
    CHECK_FALSE(p.laplace_kernel.has_grad());
    for (int64_t c = 0; c < 3; ++c) {
        const double* k = p.laplace_kernel.data() + c * 9;
        CHECK(k[0] == 0.0);
        CHECK(k[1] == 1.0);
        CHECK(k[2] == 0.0);
        CHECK(k[3] == 1.0);
        CHECK(k[4] == -4.0);
        CHECK(k[5] == 1.0);
        CHECK(k[6] == 0.0);
        CHECK(k[7] == 1.0);
        CHECK(k[8] == 0.0);
    }
}

TEST_CASE("tcbm param_count excludes the fixed kernel") {
    Rng rng(139);
    TcbmParams p = TcbmParams::init(4, rng);
    CHECK(p.param_count() == 2 * (4 * 4 * 9 + 4) + 1);
}
