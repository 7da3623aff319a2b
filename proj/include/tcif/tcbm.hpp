#pragma once

// Boundary module: a residual conv block whose front end is a fixed
// per-channel 5-point Laplace stencil, scaled by a learnable step size.

#include "tcif/conv.hpp"

namespace tcif::nn {

namespace detail_tcbm {

// [[0,1,0],[1,-4,1],[0,1,0]] per channel, gradient-free
inline Tensor laplace_kernel(int64_t channels) {
    Tensor w({channels, 1, 3, 3});
    for (int64_t c = 0; c < channels; ++c) {
        double* k = w.data() + c * 9;
        k[1] = 1.0;
        k[3] = 1.0;
        k[4] = -4.0;
        k[5] = 1.0;
        k[7] = 1.0;
    }
    return w;
}

}  // namespace detail_tcbm

// Per-channel fixed Laplace stencil with replicate padding; matches the
// pmde solver's 5-point stencil channel by channel.
inline Tensor laplace_conv(const Tensor& x) {
    if (x.ndim() != 4)
        throw DimensionError("laplace_conv: need 4-d input, got " + shape_str(x.shape()));
    return depthwise_conv2d(x, detail_tcbm::laplace_kernel(x.dim(1)), PadMode::Replicate);
}

struct TcbmParams {
    Tensor conv1_w, conv1_b;  // 3x3, C -> C
    Tensor conv2_w, conv2_b;
    Tensor h_step;          // learnable scalar, init 1.0
    Tensor laplace_kernel;  // fixed, excluded from updates
    int64_t channels = 0;

    static TcbmParams init(int64_t channels, Rng& rng) {
        TcbmParams p;
        p.channels = channels;
        const double s = 1.0 / std::sqrt(static_cast<double>(channels * 9));
        p.conv1_w = Tensor::uniform({channels, channels, 3, 3}, -s, s, rng, true);
        p.conv1_b = Tensor({channels}, true);
        p.conv2_w = Tensor::uniform({channels, channels, 3, 3}, -s, s, rng, true);
        p.conv2_b = Tensor({channels}, true);
        p.h_step = Tensor::full({1}, 1.0);
        p.h_step.set_requires_grad(true);
        p.laplace_kernel = detail_tcbm::laplace_kernel(channels);
        return p;
    }

    int64_t param_count() const {
        return conv1_w.numel() + conv1_b.numel() + conv2_w.numel() + conv2_b.numel() +
               h_step.numel();
    }
};

// h_step * conv2(gelu(conv1(laplace(x)))) -- the update term alone.
inline Tensor tcbm_delta(const Tensor& x, const TcbmParams& p) {
    if (x.ndim() != 4 || x.dim(1) != p.channels)
        throw ConfigError("tcbm: input " + shape_str(x.shape()) +
                          " does not match configured channels " +
                          std::to_string(p.channels));
    Tensor lap = depthwise_conv2d(x, p.laplace_kernel, PadMode::Replicate);
    Tensor h = broadcast_add(conv2d(lap, p.conv1_w, 1, PadMode::Replicate), p.conv1_b, 1);
    h = gelu(h);
    h = broadcast_add(conv2d(h, p.conv2_w, 1, PadMode::Replicate), p.conv2_b, 1);
    return mul(h, p.h_step);
}

inline Tensor tcbm_forward(const Tensor& x, const TcbmParams& p) {
    return add(x, tcbm_delta(x, p));
}

}  // namespace tcif::nn
