#include "helpers.hpp"

using namespace tcif;

TEST_CASE("matmul identity and forced product") {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at({i, i}) = 1.0;
    Rng rng(7);
    Tensor x = tt::random_tensor({3, 4}, rng);
    Tensor y = matmul(eye, x);
    CHECK(tt::max_abs_diff(y, x) == 0.0);

    Tensor a = Tensor::from({1, 2, 3, 4}, {2, 2});
    Tensor b = Tensor::from({0, 1}, {2, 1});
    Tensor c = matmul(a, b);
    CHECK(c.at({0, 0}) == 2.0);
    CHECK(c.at({1, 0}) == 4.0);
}

TEST_CASE("matmul rejects mismatched inner extents") {
    Tensor a({2, 3}), b({4, 2});
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2, 3]") != std::string::npos);
        CHECK(msg.find("[4, 2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient matches central differences") {
    Rng rng(11);
    Tensor b = tt::random_tensor({5, 3}, rng);
    const double err = grad_check(
        [&](const Tensor& a) { return sum_all(mul(matmul(a, b), matmul(a, b))); },
        tt::random_tensor({4, 5}, rng));
    CHECK(err < 1e-6);

    Tensor a = tt::random_tensor({4, 5}, rng);
    const double err_b = grad_check(
        [&](const Tensor& w) { return sum_all(mul(matmul(a, w), matmul(a, w))); },
        tt::random_tensor({5, 3}, rng));
    CHECK(err_b < 1e-6);
}

TEST_CASE("softmax rows are normalized and shift invariant") {
    Tensor z({2, 5});
    Tensor s = softmax(z, 1);
    for (int j = 0; j < 5; ++j) CHECK(s.at({0, j}) == Catch::Approx(0.2).margin(1e-15));

    Rng rng(3);
    Tensor x = tt::random_tensor({4, 7}, rng, -3, 3);
    Tensor shifted = add_scalar(x, 100.0);
    CHECK(tt::max_abs_diff(softmax(x, 1), softmax(shifted, 1)) < 1e-12);

    Tensor p = softmax(x, 1);
    for (int i = 0; i < 4; ++i) {
        double row = 0.0;
        for (int j = 0; j < 7; ++j) row += p.at({i, j});
        CHECK(std::fabs(row - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax gradient") {
    Rng rng(5);
    Tensor w = tt::random_tensor({3, 6}, rng);
    const double err = grad_check(
        [&](const Tensor& x) { return sum_all(mul(softmax(x, 1), w)); },
        tt::random_tensor({3, 6}, rng, -2, 2));
    CHECK(err < 1e-6);
}

TEST_CASE("layer_norm zeroes constant tokens and matches moments") {
    Tensor gain = Tensor::full({6}, 1.0);
    Tensor bias({6});
    Tensor x = Tensor::full({2, 6}, 3.7);
    Tensor y = layer_norm(x, gain, bias);
    CHECK(tt::max_abs_diff(y, Tensor::zeros({2, 6})) < 1e-12);

    Rng rng(9);
    Tensor g2 = Tensor::full({8}, 1.5);
    Tensor b2 = Tensor::full({8}, -0.25);
    Tensor x2 = tt::random_tensor({4, 8}, rng, -2, 2);
    Tensor y2 = layer_norm(x2, g2, b2);
    for (int t = 0; t < 4; ++t) {
        double mean = 0.0, var = 0.0;
        for (int k = 0; k < 8; ++k) mean += y2.at({t, k});
        mean /= 8.0;
        for (int k = 0; k < 8; ++k) {
            const double d = y2.at({t, k}) - mean;
            var += d * d;
        }
        var /= 8.0;
        CHECK(mean == Catch::Approx(-0.25).margin(1e-10));
        CHECK(var == Catch::Approx(1.5 * 1.5).epsilon(1e-3));
    }
}

TEST_CASE("layer_norm gradient") {
    Rng rng(13);
    Tensor gain = tt::random_tensor({5}, rng, 0.5, 1.5);
    Tensor bias = tt::random_tensor({5}, rng, -0.2, 0.2);
    const double err = grad_check(
        [&](std::vector<Tensor>& xs) {
            Tensor y = layer_norm(xs[0], xs[1], xs[2]);
            return sum_all(mul(y, y));
        },
        {tt::random_tensor({3, 5}, rng), gain, bias});
    CHECK(err < 1e-5);
}

TEST_CASE("elementwise zero and identity cases") {
    Rng rng(17);
    Tensor x = tt::random_tensor({2, 3, 4}, rng);
    Tensor z = Tensor::zeros({2, 3, 4});

    CHECK(tt::max_abs_diff(add(x, z), x) == 0.0);
    CHECK(tt::max_abs_diff(sub(x, z), x) == 0.0);
    CHECK(tt::max_abs_diff(sub(x, x), z) == 0.0);
    CHECK(tt::max_abs_diff(mul(x, z), z) == 0.0);
    CHECK(tt::max_abs_diff(scalar_mul(x, 1.0), x) == 0.0);
    CHECK(tt::max_abs_diff(scalar_mul(x, 0.0), z) == 0.0);
    CHECK(tt::max_abs_diff(add_scalar(x, 0.0), x) == 0.0);

    CHECK(sigmoid(z).at({0, 0, 0}) == 0.5);
    CHECK(gelu(z).at({0, 0, 0}) == 0.0);

    // mul commutes, add commutes
    Tensor y = tt::random_tensor({2, 3, 4}, rng);
    CHECK(tt::max_abs_diff(mul(x, y), mul(y, x)) == 0.0);
    CHECK(tt::max_abs_diff(add(x, y), add(y, x)) == 0.0);

    CHECK(mean_all(Tensor::full({4, 4}, 2.5)).item() == 2.5);
    CHECK(sum_all(Tensor::full({2, 2}, 1.25)).item() == 5.0);
}

TEST_CASE("mean_reduce and broadcast ops") {
    Tensor x = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
    Tensor rows = mean_reduce(x, 1);
    CHECK(rows.at({0}) == 2.0);
    CHECK(rows.at({1}) == 5.0);
    Tensor cols = mean_reduce(x, 0);
    CHECK(cols.at({0}) == 2.5);
    CHECK(cols.at({1}) == 3.5);
    CHECK(cols.at({2}) == 4.5);

    Tensor b = Tensor::from({10, 20, 30}, {3});
    Tensor y = broadcast_add(x, b, 1);
    CHECK(y.at({0, 0}) == 11.0);
    CHECK(y.at({1, 2}) == 36.0);

    Tensor e = broadcast_axis(rows, 1, 4);
    CHECK(e.shape() == Shape{2, 4});
    CHECK(e.at({0, 3}) == 2.0);
    CHECK(e.at({1, 0}) == 5.0);
}

TEST_CASE("elementwise gradients over several seeds") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        Rng rng(seed);
        Tensor other = tt::random_tensor({3, 4}, rng);
        auto quad = [&](const Tensor& y) { return sum_all(mul(y, y)); };

        CHECK(grad_check([&](const Tensor& x) { return quad(add(x, other)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(sub(other, x)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(mul(x, other)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(scalar_mul(x, -1.7)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(sigmoid(x)); },
                         tt::random_tensor({3, 4}, rng, -2, 2)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(gelu(x)); },
                         tt::random_tensor({3, 4}, rng, -2, 2)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(mean_reduce(x, 1)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(broadcast_add(other, x, 1)); },
                         tt::random_tensor({4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(broadcast_axis(x, 0, 3)); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(permute(x, {1, 0})); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check([&](const Tensor& x) { return quad(reshape(x, {4, 3})); },
                         tt::random_tensor({3, 4}, rng)) < 1e-5);
        CHECK(grad_check(
                  [&](const Tensor& x) {
                      return div(sum_all(mul(x, x)), add_scalar(sum_all(sigmoid(x)), 1.0));
                  },
                  tt::random_tensor({3, 4}, rng)) < 1e-5);
    }
}

TEST_CASE("bmm matches per-slice matmul and its gradient") {
    Rng rng(23);
    Tensor a = tt::random_tensor({3, 2, 4}, rng);
    Tensor b = tt::random_tensor({3, 4, 5}, rng);
    Tensor c = bmm(a, b);
    for (int n = 0; n < 3; ++n) {
        Tensor an({2, 4}), bn({4, 5});
        std::copy(a.data() + n * 8, a.data() + n * 8 + 8, an.data());
        std::copy(b.data() + n * 20, b.data() + n * 20 + 20, bn.data());
        Tensor cn = matmul(an, bn);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(c.at({n, i, j}) == Catch::Approx(cn.at({i, j})).margin(1e-14));
    }
    const double err = grad_check(
        [&](std::vector<Tensor>& xs) {
            Tensor y = bmm(xs[0], xs[1]);
            return sum_all(mul(y, y));
        },
        {a, b});
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check trivial oracles") {
    Rng rng(29);
    // integer field and dyadic epsilon keep the linear case exact
    Tensor xi({4, 4});
    for (int64_t i = 0; i < xi.numel(); ++i)
        xi.data()[i] = static_cast<double>(rng.uniform_int(-8, 8));
    const double err_sum =
        grad_check([](const Tensor& x) { return sum_all(x); }, xi, 0.25);
    CHECK(err_sum < 1e-12);

    Tensor xg = xi.clone();
    xg.zero_grad();
    xg.set_requires_grad(true);
    xg.ensure_grad();
    {
        Graph g;
        g.backward(sum_all(xg));
    }
    for (int64_t i = 0; i < xg.numel(); ++i) CHECK(xg.grad()[i] == 1.0);

    Tensor at_zero({5});
    Tensor x0 = at_zero;
    x0.set_requires_grad(true);
    x0.ensure_grad();
    {
        Graph g;
        Tensor loss = sum_all(mul(x0, x0));
        g.backward(loss);
    }
    for (int i = 0; i < 5; ++i) CHECK(x0.grad()[i] == 0.0);
}

TEST_CASE("fan-out accumulates both contributions") {
    Tensor x = Tensor::full({3}, 2.0);
    x.set_requires_grad(true);
    x.ensure_grad();
    {
        Graph g;
        Tensor loss = add(sum_all(x), sum_all(x));
        g.backward(loss);
    }
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0);
}

TEST_CASE("forward passes are bitwise deterministic for a fixed seed") {
    auto run = [] {
        Rng rng(123);
        Tensor a = tt::random_tensor({6, 6}, rng);
        Tensor b = tt::random_tensor({6, 6}, rng);
        Tensor y = softmax(matmul(gelu(a), sigmoid(b)), 1);
        return std::vector<double>(y.data(), y.data() + y.numel());
    };
    const auto r1 = run();
    const auto r2 = run();
    CHECK(r1 == r2);
}

TEST_CASE("operations keep finite inputs finite") {
    Rng rng(31);
    Tensor x = tt::random_tensor({4, 4}, rng, -50, 50);
    CHECK(tt::all_finite(softmax(x, 1)));
    CHECK(tt::all_finite(sigmoid(x)));
    CHECK(tt::all_finite(gelu(x)));
    Tensor g = Tensor::full({4}, 1.0);
    Tensor b = Tensor::zeros({4});
    CHECK(tt::all_finite(layer_norm(x, g, b)));
}

TEST_CASE("tensor invariants and errors") {
    CHECK_THROWS_AS(Tensor::from({1, 2, 3}, {2, 2}), DimensionError);
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(t.item(), DimensionError);
    CHECK_THROWS_AS(add(Tensor({2, 2}), Tensor({2, 3})), DimensionError);

    // backward needs a scalar that depends on tracked tensors
    Graph g;
    Tensor plain = Tensor::full({1}, 1.0);
    CHECK_THROWS_AS(g.backward(plain), Error);
}
