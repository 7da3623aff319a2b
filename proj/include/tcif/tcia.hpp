#pragma once

// Thermal-conduction attention: a grouped spatial-shift stencil feeds
// height- and width-squeezed multi-head attentions whose fused output,
// scaled by a learnable diffusion coefficient, plays the role of the
// 5-point-stencil update term. The caller's residual completes the
// explicit step.

#include "tcif/ops.hpp"

namespace tcif::nn {

// Channels split into four contiguous groups, each shifted one pixel
// along its own axis direction (+row, -row, +col, -col), replicate
// border reads.
inline Tensor grouped_shift(const Tensor& x) {
    if (x.ndim() != 4)
        throw DimensionError("grouped_shift: need 4-d input, got " + shape_str(x.shape()));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C % 4 != 0)
        throw ConfigError("grouped_shift: channel count " + std::to_string(C) +
                          " not divisible by 4");
    static constexpr int64_t kDir[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    const int64_t group = C / 4;
    Tensor out({B, C, H, W});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            const int64_t di = kDir[c / group][0], dj = kDir[c / group][1];
            const double* xc = x.data() + (b * C + c) * H * W;
            double* oc = out.data() + (b * C + c) * H * W;
            for (int64_t i = 0; i < H; ++i) {
                const int64_t ii = std::clamp<int64_t>(i + di, 0, H - 1);
                for (int64_t j = 0; j < W; ++j) {
                    const int64_t jj = std::clamp<int64_t>(j + dj, 0, W - 1);
                    oc[i * W + j] = xc[ii * W + jj];
                }
            }
        }
    if (detail::tracing({&x})) {
        Tensor tx = x;
        detail::prepare_traced(out, {&tx});
        Graph::current()->record([tx, out, B, C, H, W, group]() mutable {
            const double* g = out.grad();
            for (int64_t b = 0; b < B; ++b)
                for (int64_t c = 0; c < C; ++c) {
                    const int64_t di = kDir[c / group][0], dj = kDir[c / group][1];
                    double* gx = tx.grad() + (b * C + c) * H * W;
                    const double* gc = g + (b * C + c) * H * W;
                    for (int64_t i = 0; i < H; ++i) {
                        const int64_t ii = std::clamp<int64_t>(i + di, 0, H - 1);
                        for (int64_t j = 0; j < W; ++j) {
                            const int64_t jj = std::clamp<int64_t>(j + dj, 0, W - 1);
                            gx[ii * W + jj] += gc[i * W + j];
                        }
                    }
                }
        });
    }
    return out;
}

// Directional neighbor minus center, per channel group. Summing the
// four groups of a channel-replicated input recovers the 5-point
// Laplacian.
inline Tensor stencil_term(const Tensor& x) { return sub(grouped_shift(x), x); }

enum class SqueezeAxis { Horizontal, Vertical };

// B x C x H x W -> B x L x C token sequence; horizontal averages over
// columns (L = H), vertical over rows (L = W).
inline Tensor axis_squeeze(const Tensor& x, SqueezeAxis axis) {
    if (x.ndim() != 4)
        throw DimensionError("axis_squeeze: need 4-d input, got " + shape_str(x.shape()));
    Tensor m = axis == SqueezeAxis::Horizontal ? mean_reduce(x, 3)   // [B,C,H]
                                               : mean_reduce(x, 2);  // [B,C,W]
    return permute(m, {0, 2, 1});
}

struct TciaParams {
    Tensor proj_q_w, proj_q_b;  // C -> C_qk
    Tensor proj_k_w, proj_k_b;
    Tensor proj_v_w, proj_v_b;  // C -> C_v
    Tensor proj_out_w, proj_out_b;  // C_v -> C
    Tensor gamma;                   // learnable scalar, init 0.2
    int64_t channels = 0, c_qk = 0, c_v = 0, heads = 1;

    static TciaParams init(int64_t channels, int64_t heads, Rng& rng,
                           int64_t c_qk = -1, int64_t c_v = -1) {
        if (c_qk < 0) c_qk = channels / 2;
        if (c_v < 0) c_v = channels / 2;
        if (channels % 4 != 0)
            throw ConfigError("tcia: channels " + std::to_string(channels) +
                              " not divisible by 4");
        if (heads < 1 || c_qk % heads != 0 || c_v % heads != 0)
            throw ConfigError("tcia: c_qk=" + std::to_string(c_qk) + " and c_v=" +
                              std::to_string(c_v) + " must be divisible by heads=" +
                              std::to_string(heads));
        TciaParams p;
        p.channels = channels;
        p.c_qk = c_qk;
        p.c_v = c_v;
        p.heads = heads;
        const double s = 1.0 / std::sqrt(static_cast<double>(channels));
        p.proj_q_w = Tensor::uniform({channels, c_qk}, -s, s, rng, true);
        p.proj_q_b = Tensor({c_qk}, true);
        p.proj_k_w = Tensor::uniform({channels, c_qk}, -s, s, rng, true);
        p.proj_k_b = Tensor({c_qk}, true);
        p.proj_v_w = Tensor::uniform({channels, c_v}, -s, s, rng, true);
        p.proj_v_b = Tensor({c_v}, true);
        const double so = 1.0 / std::sqrt(static_cast<double>(c_v));
        p.proj_out_w = Tensor::uniform({c_v, channels}, -so, so, rng, true);
        p.proj_out_b = Tensor({channels}, true);
        p.gamma = Tensor::full({1}, 0.2);
        p.gamma.set_requires_grad(true);
        return p;
    }

    int64_t param_count() const {
        return proj_q_w.numel() + proj_q_b.numel() + proj_k_w.numel() +
               proj_k_b.numel() + proj_v_w.numel() + proj_v_b.numel() +
               proj_out_w.numel() + proj_out_b.numel() + gamma.numel();
    }
};

inline int64_t param_count(const TciaParams& p) { return p.param_count(); }

// Attention probability maps, one row of weights per query token.
struct TciaTrace {
    Tensor attn_h;  // [B*heads, H, H]
    Tensor attn_v;  // [B*heads, W, W]
};

namespace detail_tcia {

// [B, L, C] -> [B*heads, L, C/heads]
inline Tensor split_heads(const Tensor& t, int64_t heads) {
    const int64_t B = t.dim(0), L = t.dim(1), C = t.dim(2);
    Tensor r = reshape(t, {B, L, heads, C / heads});
    r = permute(r, {0, 2, 1, 3});
    return reshape(r, {B * heads, L, C / heads});
}

// [B*heads, L, d] -> [B, L, heads*d]
inline Tensor merge_heads(const Tensor& t, int64_t batch, int64_t heads) {
    const int64_t L = t.dim(1), d = t.dim(2);
    Tensor r = reshape(t, {batch, heads, L, d});
    r = permute(r, {0, 2, 1, 3});
    return reshape(r, {batch, L, heads * d});
}

inline Tensor axial_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              int64_t heads, Tensor* attn_out) {
    const int64_t B = q.dim(0);
    const int64_t dq = q.dim(2) / heads;
    Tensor Q = split_heads(q, heads);
    Tensor K = split_heads(k, heads);
    Tensor V = split_heads(v, heads);
    Tensor scores = bmm(Q, permute(K, {0, 2, 1}));
    scores = scalar_mul(scores, 1.0 / std::sqrt(static_cast<double>(dq)));
    Tensor probs = softmax(scores, 2);
    if (attn_out) *attn_out = probs;
    return merge_heads(bmm(probs, V), B, heads);
}

// per-pixel linear map via [B*H*W, C] matmul
inline Tensor project(const Tensor& tokens, const Tensor& w, const Tensor& b) {
    return broadcast_add(matmul(tokens, w), b, 1);
}

}  // namespace detail_tcia

// Returns gamma * (fused axial attentions over the shift stencil); same
// shape as x. The residual "+ x" belongs to the enclosing block.
inline Tensor tcia_forward(const Tensor& x, const TciaParams& p,
                           TciaTrace* trace = nullptr) {
    if (x.ndim() != 4 || x.dim(1) != p.channels)
        throw ConfigError("tcia_forward: input " + shape_str(x.shape()) +
                          " does not match configured channels " +
                          std::to_string(p.channels));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);

    Tensor s = stencil_term(x);
    Tensor tokens = reshape(permute(s, {0, 2, 3, 1}), {B * H * W, C});
    Tensor q = reshape(detail_tcia::project(tokens, p.proj_q_w, p.proj_q_b), {B, H, W, p.c_qk});
    Tensor k = reshape(detail_tcia::project(tokens, p.proj_k_w, p.proj_k_b), {B, H, W, p.c_qk});
    Tensor v = reshape(detail_tcia::project(tokens, p.proj_v_w, p.proj_v_b), {B, H, W, p.c_v});

    // horizontal: H tokens, averaged over W; vertical: W tokens, over H
    Tensor qh = mean_reduce(q, 2), kh = mean_reduce(k, 2), vh = mean_reduce(v, 2);
    Tensor qv = mean_reduce(q, 1), kv = mean_reduce(k, 1), vv = mean_reduce(v, 1);

    Tensor oh = detail_tcia::axial_attention(qh, kh, vh, p.heads,
                                             trace ? &trace->attn_h : nullptr);
    Tensor ov = detail_tcia::axial_attention(qv, kv, vv, p.heads,
                                             trace ? &trace->attn_v : nullptr);

    Tensor map_h = broadcast_axis(permute(oh, {0, 2, 1}), 3, W);  // [B,C_v,H,W]
    Tensor map_v = broadcast_axis(permute(ov, {0, 2, 1}), 2, H);
    Tensor fused = add(map_h, map_v);

    Tensor out_tokens = reshape(permute(fused, {0, 2, 3, 1}), {B * H * W, p.c_v});
    Tensor out = detail_tcia::project(out_tokens, p.proj_out_w, p.proj_out_b);
    out = permute(reshape(out, {B, H, W, C}), {0, 3, 1, 2});
    return mul(out, p.gamma);
}

}  // namespace tcif::nn
