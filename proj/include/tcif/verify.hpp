#pragma once

// Gradient verification suite: every differentiable primitive against
// central differences at 1e-5, composed blocks and the end-to-end
// network at 1e-4.

#include <iostream>

#include "tcif/gradcheck.hpp"
#include "tcif/network.hpp"

namespace tcif {

struct GradCheckEntry {
    std::string name;
    double worst = 0.0;
    double tolerance = 0.0;
    bool ok = false;
};

inline std::vector<GradCheckEntry> run_gradcheck_suite(int n_seeds = 3,
                                                       std::ostream* log = nullptr) {
    std::vector<GradCheckEntry> results;
    auto quad = [](const Tensor& y) { return sum_all(mul(y, y)); };

    auto record = [&](const std::string& name, double tol, auto&& fn) {
        GradCheckEntry e{name, 0.0, tol, false};
        for (int s = 1; s <= n_seeds; ++s)
            e.worst = std::max(e.worst, fn(static_cast<uint64_t>(s)));
        e.ok = e.worst < tol;
        if (log)
            *log << (e.ok ? "[ok]   " : "[FAIL] ") << e.name << "  max rel err "
                 << kv::format_f64(e.worst) << "  (tol " << kv::format_f64(tol) << ")\n";
        results.push_back(e);
    };

    const double ptol = 1e-5;

    record("add", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 4}, -1, 1, r);
        return grad_check([&](const Tensor& x) { return quad(add(x, o)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("sub", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 4}, -1, 1, r);
        return grad_check([&](const Tensor& x) { return quad(sub(o, x)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("mul", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 4}, -1, 1, r);
        return grad_check([&](const Tensor& x) { return quad(mul(x, o)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("mul_scalar_operand", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 4}, -1, 1, r);
        return grad_check(
            [&](std::vector<Tensor>& xs) { return quad(mul(o, xs[0])); },
            std::vector<Tensor>{Tensor::uniform({1}, 0.5, 1.5, r)});
    });
    record("div", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 4}, 0.5, 1.5, r);
        return grad_check([&](const Tensor& x) { return quad(div(x, o)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("scalar_mul", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(scalar_mul(x, -1.3)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("add_scalar", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(add_scalar(x, 0.7)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("sigmoid", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(sigmoid(x)); },
                          Tensor::uniform({3, 4}, -2, 2, r));
    });
    record("gelu", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(gelu(x)); },
                          Tensor::uniform({3, 4}, -2, 2, r));
    });
    record("sum_all", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return mul(sum_all(x), sum_all(x)); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("mean_reduce", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(mean_reduce(x, 1)); },
                          Tensor::uniform({2, 3, 4}, -1, 1, r));
    });
    record("broadcast_add", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({2, 3, 4}, -1, 1, r);
        return grad_check(
            [&](std::vector<Tensor>& xs) { return quad(broadcast_add(o, xs[0], 1)); },
            std::vector<Tensor>{Tensor::uniform({3}, -1, 1, r)});
    });
    record("broadcast_axis", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(broadcast_axis(x, 1, 3)); },
                          Tensor::uniform({2, 4}, -1, 1, r));
    });
    record("reshape", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(reshape(x, {4, 3})); },
                          Tensor::uniform({3, 4}, -1, 1, r));
    });
    record("permute", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check(
            [&](const Tensor& x) { return quad(permute(x, {2, 0, 1})); },
            Tensor::uniform({2, 3, 4}, -1, 1, r));
    });
    record("matmul", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor b = Tensor::uniform({5, 3}, -1, 1, r);
        return grad_check([&](const Tensor& a) { return quad(matmul(a, b)); },
                          Tensor::uniform({4, 5}, -1, 1, r));
    });
    record("bmm", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor b = Tensor::uniform({2, 4, 3}, -1, 1, r);
        return grad_check([&](const Tensor& a) { return quad(bmm(a, b)); },
                          Tensor::uniform({2, 3, 4}, -1, 1, r));
    });
    record("softmax", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor o = Tensor::uniform({3, 5}, -1, 1, r);
        return grad_check([&](const Tensor& x) { return sum_all(mul(softmax(x, 1), o)); },
                          Tensor::uniform({3, 5}, -2, 2, r));
    });
    record("layer_norm", ptol, [&](uint64_t s) {
        Rng r(s);
        Tensor g = Tensor::uniform({4}, 0.5, 1.5, r);
        Tensor b = Tensor::uniform({4}, -0.3, 0.3, r);
        return grad_check(
            [&](std::vector<Tensor>& xs) {
                return quad(layer_norm(xs[0], xs[1], xs[2], 1));
            },
            std::vector<Tensor>{Tensor::uniform({2, 4, 5}, -1, 1, r), g, b});
    });
    record("conv2d", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check(
            [&](std::vector<Tensor>& xs) {
                return quad(conv2d(xs[0], xs[1], 1, PadMode::Replicate));
            },
            std::vector<Tensor>{Tensor::uniform({1, 2, 5, 5}, -1, 1, r),
                                Tensor::uniform({3, 2, 3, 3}, -1, 1, r)});
    });
    record("deconv2d", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check(
            [&](std::vector<Tensor>& xs) { return quad(deconv2d(xs[0], xs[1], 2)); },
            std::vector<Tensor>{Tensor::uniform({1, 2, 4, 4}, -1, 1, r),
                                Tensor::uniform({2, 3, 2, 2}, -1, 1, r)});
    });
    record("depthwise_conv2d", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check(
            [&](std::vector<Tensor>& xs) {
                return quad(depthwise_conv2d(xs[0], xs[1], PadMode::Replicate));
            },
            std::vector<Tensor>{Tensor::uniform({1, 2, 4, 4}, -1, 1, r),
                                Tensor::uniform({2, 1, 3, 3}, -1, 1, r)});
    });
    record("bilinear_upsample", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check(
            [&](const Tensor& x) { return quad(bilinear_upsample(x, 2)); },
            Tensor::uniform({1, 2, 3, 3}, -1, 1, r));
    });
    record("grouped_shift", ptol, [&](uint64_t s) {
        Rng r(s);
        return grad_check([&](const Tensor& x) { return quad(nn::grouped_shift(x)); },
                          Tensor::uniform({1, 4, 4, 4}, -1, 1, r));
    });

    const double ctol = 1e-4;

    record("tcia_forward", ctol, [&](uint64_t s) {
        Rng r(s);
        nn::TciaParams p = nn::TciaParams::init(4, 1, r);
        std::vector<Tensor> vars = {Tensor::uniform({1, 4, 5, 5}, -1, 1, r),
                                    p.proj_q_w, p.proj_k_w, p.proj_v_w, p.proj_out_w,
                                    p.gamma};
        return grad_check(
            [&](std::vector<Tensor>& vs) { return quad(nn::tcia_forward(vs[0], p)); },
            vars);
    });
    record("tcbm_forward", ctol, [&](uint64_t s) {
        Rng r(s);
        nn::TcbmParams p = nn::TcbmParams::init(2, r);
        std::vector<Tensor> vars = {Tensor::uniform({1, 2, 6, 6}, -1, 1, r), p.conv1_w,
                                    p.conv2_w, p.h_step};
        return grad_check(
            [&](std::vector<Tensor>& vs) { return quad(nn::tcbm_forward(vs[0], p)); },
            vars);
    });
    record("tcit_block", ctol, [&](uint64_t s) {
        Rng r(s);
        nn::TcitBlockParams blk;
        blk.norm1 = nn::LayerNormParams::init(4);
        blk.norm2 = nn::LayerNormParams::init(4);
        blk.tcia = nn::TciaParams::init(4, 1, r);
        blk.tcbm = nn::TcbmParams::init(4, r);
        blk.ffn = nn::FfnParams::init(4, 2, r);
        std::vector<Tensor> vars = {Tensor::uniform({1, 4, 4, 4}, -1, 1, r),
                                    blk.tcia->gamma, blk.tcbm->h_step, blk.ffn.w1,
                                    blk.norm1.gain};
        return grad_check(
            [&](std::vector<Tensor>& vs) {
                return quad(nn::tcit_forward(vs[0], blk).y);
            },
            vars);
    });
    record("network_end_to_end_32", ctol, [&](uint64_t s) {
        nn::ModelConfig cfg;
        cfg.stage_channels = {8, 8, 8, 8};
        cfg.blocks_per_stage = {1, 1, 1, 1};
        cfg.heads_per_stage = {1, 1, 1, 1};
        cfg.ffn_expansion = 2;
        cfg.input_h = cfg.input_w = 32;
        nn::Model m(cfg, s);
        Rng r(s + 1000);
        Tensor img = Tensor::uniform({1, 1, 32, 32}, 0, 1, r);
        Tensor mask({1, 1, 32, 32}), boundary({1, 1, 32, 32});
        for (int64_t i = 0; i < 1024; ++i) {
            mask.data()[i] = r.uniform() < 0.1 ? 1.0 : 0.0;
            boundary.data()[i] = r.uniform() < 0.1 ? 1.0 : 0.0;
        }
        std::vector<Tensor> vars = {img};
        for (const auto& [name, t] : m.params())
            if (name == "enc1.blk0.tcia.gamma" || name == "enc2.blk0.tcbm.h_step" ||
                name == "head.main.w")
                vars.push_back(t);
        // wider stencil for the deep composition's noise floor
        return grad_check(
            [&](std::vector<Tensor>& vs) {
                nn::NetworkOutput out = m.forward(vs[0]);
                return nn::total_loss(out, mask, boundary);
            },
            vars, 3e-4);
    });

    return results;
}

inline bool gradcheck_suite_ok(const std::vector<GradCheckEntry>& results) {
    for (const GradCheckEntry& e : results)
        if (!e.ok) return false;
    return true;
}

}  // namespace tcif
