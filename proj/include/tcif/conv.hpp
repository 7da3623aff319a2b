#pragma once

// Spatial ops on B x C x H x W tensors: cross-correlation conv2d (im2col
// + matmul), its stride-matched transpose, depthwise convolution, and
// bilinear upsampling.

#include "tcif/ops.hpp"

namespace tcif {

enum class PadMode { Zero, Replicate };

namespace detail {

struct ConvGeom {
    int64_t C, H, W, kh, kw, stride, ph, pw, OH, OW;
    PadMode mode;
};

inline ConvGeom conv_geometry(const Shape& xs, const Shape& ws, int64_t stride,
                              PadMode mode, int64_t pad) {
    if (xs.size() != 4 || ws.size() != 4)
        throw DimensionError("conv2d: need 4-d input and kernel, got " +
                             shape_str(xs) + " and " + shape_str(ws));
    if (xs[1] != ws[1])
        throw DimensionError("conv2d: channel mismatch between input " +
                             shape_str(xs) + " and kernel " + shape_str(ws));
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    const int64_t kh = ws[2], kw = ws[3];
    int64_t ph = pad, pw = pad;
    if (pad < 0) {
        if (kh % 2 == 1 && kw % 2 == 1) {
            ph = kh / 2;
            pw = kw / 2;
        } else if (kh == stride && kw == stride) {
            ph = pw = 0;
        } else {
            throw ConfigError("conv2d: kernel must be odd or stride-matched "
                              "unless pad is given explicitly");
        }
    }
    const int64_t H = xs[2], W = xs[3];
    if (kh > H + 2 * ph || kw > W + 2 * pw)
        throw DimensionError("conv2d: kernel " + shape_str(ws) +
                             " larger than padded input " + shape_str(xs));
    ConvGeom g{xs[1], H, W, kh, kw, stride, ph, pw, 0, 0, mode};
    g.OH = (H + 2 * ph - kh) / stride + 1;
    g.OW = (W + 2 * pw - kw) / stride + 1;
    return g;
}

// col is [C*kh*kw, OH*OW] for one image
inline void im2col(const double* x, const ConvGeom& g, double* col) {
    const int64_t Q = g.OH * g.OW;
    for (int64_t c = 0; c < g.C; ++c) {
        const double* xc = x + c * g.H * g.W;
        for (int64_t u = 0; u < g.kh; ++u)
            for (int64_t v = 0; v < g.kw; ++v) {
                double* crow = col + ((c * g.kh + u) * g.kw + v) * Q;
                for (int64_t oi = 0; oi < g.OH; ++oi) {
                    int64_t ii = oi * g.stride - g.ph + u;
                    for (int64_t oj = 0; oj < g.OW; ++oj) {
                        int64_t jj = oj * g.stride - g.pw + v;
                        double val;
                        if (ii >= 0 && ii < g.H && jj >= 0 && jj < g.W) {
                            val = xc[ii * g.W + jj];
                        } else if (g.mode == PadMode::Replicate) {
                            const int64_t ci = std::clamp<int64_t>(ii, 0, g.H - 1);
                            const int64_t cj = std::clamp<int64_t>(jj, 0, g.W - 1);
                            val = xc[ci * g.W + cj];
                        } else {
                            val = 0.0;
                        }
                        crow[oi * g.OW + oj] = val;
                    }
                }
            }
    }
}

// scatter-add of a column matrix back onto the image grid
inline void col2im_acc(const double* col, const ConvGeom& g, double* x) {
    const int64_t Q = g.OH * g.OW;
    for (int64_t c = 0; c < g.C; ++c) {
        double* xc = x + c * g.H * g.W;
        for (int64_t u = 0; u < g.kh; ++u)
            for (int64_t v = 0; v < g.kw; ++v) {
                const double* crow = col + ((c * g.kh + u) * g.kw + v) * Q;
                for (int64_t oi = 0; oi < g.OH; ++oi) {
                    int64_t ii = oi * g.stride - g.ph + u;
                    for (int64_t oj = 0; oj < g.OW; ++oj) {
                        int64_t jj = oj * g.stride - g.pw + v;
                        if (ii >= 0 && ii < g.H && jj >= 0 && jj < g.W) {
                            xc[ii * g.W + jj] += crow[oi * g.OW + oj];
                        } else if (g.mode == PadMode::Replicate) {
                            const int64_t ci = std::clamp<int64_t>(ii, 0, g.H - 1);
                            const int64_t cj = std::clamp<int64_t>(jj, 0, g.W - 1);
                            xc[ci * g.W + cj] += crow[oi * g.OW + oj];
                        }
                    }
                }
            }
    }
}

}  // namespace detail

// Cross-correlation. Padding defaults to "same" for odd kernels and 0
// for stride-matched ones; pass `pad` >= 0 to override.
inline Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride = 1,
                     PadMode mode = PadMode::Zero, int64_t pad = -1) {
    const auto g = detail::conv_geometry(x.shape(), w.shape(), stride, mode, pad);
    const int64_t B = x.dim(0), O = w.dim(0);
    const int64_t CKK = g.C * g.kh * g.kw, Q = g.OH * g.OW;
    Tensor out({B, O, g.OH, g.OW});
    std::vector<double> col(static_cast<size_t>(CKK * Q));
    for (int64_t b = 0; b < B; ++b) {
        detail::im2col(x.data() + b * g.C * g.H * g.W, g, col.data());
        detail::mm_nn(w.data(), col.data(), out.data() + b * O * Q, O, CKK, Q);
    }
    if (detail::tracing({&x, &w})) {
        Tensor tx = x, tw = w;
        detail::prepare_traced(out, {&tx, &tw});
        Graph::current()->record([tx, tw, out, g, B, O, CKK, Q]() mutable {
            std::vector<double> col(static_cast<size_t>(CKK * Q));
            std::vector<double> dcol(static_cast<size_t>(CKK * Q));
            const double* gy = out.grad();
            for (int64_t b = 0; b < B; ++b) {
                const double* gyb = gy + b * O * Q;
                if (tw.requires_grad()) {
                    detail::im2col(tx.data() + b * g.C * g.H * g.W, g, col.data());
                    detail::mm_nt(gyb, col.data(), tw.grad(), O, Q, CKK);
                }
                if (tx.requires_grad()) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    detail::mm_tn(tw.data(), gyb, dcol.data(), CKK, O, Q);
                    detail::col2im_acc(dcol.data(), g, tx.grad() + b * g.C * g.H * g.W);
                }
            }
        });
    }
    return out;
}

// Transposed convolution, the exact adjoint of conv2d(., w, stride,
// zero pad 0). Kernel layout matches conv2d: w[O x C x kh x kw] maps O
// input channels back to C output channels.
inline Tensor deconv2d(const Tensor& x, const Tensor& w, int64_t stride = 2) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw DimensionError("deconv2d: need 4-d input and kernel, got " +
                             shape_str(x.shape()) + " and " + shape_str(w.shape()));
    if (x.dim(1) != w.dim(0))
        throw DimensionError("deconv2d: channel mismatch between input " +
                             shape_str(x.shape()) + " and kernel " + shape_str(w.shape()));
    const int64_t B = x.dim(0), O = w.dim(0), C = w.dim(1);
    const int64_t kh = w.dim(2), kw = w.dim(3), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H - 1) * stride + kh, OW = (W - 1) * stride + kw;
    // geometry of the conv this op transposes: input C x OH x OW, output H x W
    detail::ConvGeom g{C, OH, OW, kh, kw, stride, 0, 0, H, W, PadMode::Zero};
    const int64_t CKK = C * kh * kw, Q = H * W;
    Tensor out({B, C, OH, OW});
    std::vector<double> col(static_cast<size_t>(CKK * Q));
    for (int64_t b = 0; b < B; ++b) {
        std::fill(col.begin(), col.end(), 0.0);
        detail::mm_tn(w.data(), x.data() + b * O * Q, col.data(), CKK, O, Q);
        detail::col2im_acc(col.data(), g, out.data() + b * C * OH * OW);
    }
    if (detail::tracing({&x, &w})) {
        Tensor tx = x, tw = w;
        detail::prepare_traced(out, {&tx, &tw});
        Graph::current()->record([tx, tw, out, g, B, O, CKK, Q]() mutable {
            std::vector<double> colg(static_cast<size_t>(CKK * Q));
            const double* gy = out.grad();
            const int64_t ON = g.C * g.H * g.W;
            for (int64_t b = 0; b < B; ++b) {
                detail::im2col(gy + b * ON, g, colg.data());
                if (tx.requires_grad())
                    detail::mm_nn(tw.data(), colg.data(), tx.grad() + b * O * Q, O, CKK, Q);
                if (tw.requires_grad())
                    detail::mm_nt(tx.data() + b * O * Q, colg.data(), tw.grad(), O, Q, CKK);
            }
        });
    }
    return out;
}

// Per-channel convolution, kernel w[C x 1 x kh x kw].
inline Tensor depthwise_conv2d(const Tensor& x, const Tensor& w,
                               PadMode mode = PadMode::Zero, int64_t pad = -1) {
    if (x.ndim() != 4 || w.ndim() != 4 || w.dim(1) != 1 || x.dim(1) != w.dim(0))
        throw DimensionError("depthwise_conv2d: incompatible shapes " +
                             shape_str(x.shape()) + " and " + shape_str(w.shape()));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t kh = w.dim(2), kw = w.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("depthwise_conv2d: kernel extents must be odd");
    const int64_t ph = pad < 0 ? kh / 2 : pad, pw = pad < 0 ? kw / 2 : pad;
    Tensor out({B, C, H, W});
    auto sample = [&](const double* xc, int64_t ii, int64_t jj) -> double {
        if (ii >= 0 && ii < H && jj >= 0 && jj < W) return xc[ii * W + jj];
        if (mode == PadMode::Replicate)
            return xc[std::clamp<int64_t>(ii, 0, H - 1) * W +
                      std::clamp<int64_t>(jj, 0, W - 1)];
        return 0.0;
    };
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            const double* xc = x.data() + (b * C + c) * H * W;
            const double* wc = w.data() + c * kh * kw;
            double* oc = out.data() + (b * C + c) * H * W;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) {
                    double acc = 0.0;
                    for (int64_t u = 0; u < kh; ++u)
                        for (int64_t v = 0; v < kw; ++v)
                            acc += wc[u * kw + v] * sample(xc, i - ph + u, j - pw + v);
                    oc[i * W + j] = acc;
                }
        }
    if (detail::tracing({&x, &w})) {
        Tensor tx = x, tw = w;
        detail::prepare_traced(out, {&tx, &tw});
        Graph::current()->record([tx, tw, out, B, C, H, W, kh, kw, ph, pw, mode]() mutable {
            const double* g = out.grad();
            for (int64_t b = 0; b < B; ++b)
                for (int64_t c = 0; c < C; ++c) {
                    const double* xc = tx.data() + (b * C + c) * H * W;
                    const double* wc = tw.data() + c * kh * kw;
                    const double* gc = g + (b * C + c) * H * W;
                    for (int64_t i = 0; i < H; ++i)
                        for (int64_t j = 0; j < W; ++j) {
                            const double gv = gc[i * W + j];
                            for (int64_t u = 0; u < kh; ++u)
                                for (int64_t v = 0; v < kw; ++v) {
                                    int64_t ii = i - ph + u, jj = j - pw + v;
                                    bool inside = ii >= 0 && ii < H && jj >= 0 && jj < W;
                                    if (!inside && mode == PadMode::Replicate) {
                                        ii = std::clamp<int64_t>(ii, 0, H - 1);
                                        jj = std::clamp<int64_t>(jj, 0, W - 1);
                                        inside = true;
                                    }
                                    if (!inside) continue;
                                    if (tw.requires_grad())
                                        tw.grad()[c * kh * kw + u * kw + v] +=
                                            gv * xc[ii * W + jj];
                                    if (tx.requires_grad())
                                        tx.grad()[(b * C + c) * H * W + ii * W + jj] +=
                                            gv * wc[u * kw + v];
                                }
                        }
                }
        });
    }
    return out;
}

// Bilinear interpolation by an integer factor, half-pixel centers.
inline Tensor bilinear_upsample(const Tensor& x, int64_t factor) {
    if (x.ndim() != 4)
        throw DimensionError("bilinear_upsample: need 4-d input, got " +
                             shape_str(x.shape()));
    if (factor < 1) throw ConfigError("bilinear_upsample: factor must be >= 1");
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t OH = H * factor, OW = W * factor;
    Tensor out({B, C, OH, OW});

    struct Tap {
        int64_t lo, hi;
        double w_hi;
    };
    auto taps = [&](int64_t n, int64_t on) {
        std::vector<Tap> t(static_cast<size_t>(on));
        for (int64_t o = 0; o < on; ++o) {
            const double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
            double fl = std::floor(src);
            int64_t lo = static_cast<int64_t>(fl);
            double frac = src - fl;
            int64_t hi = lo + 1;
            lo = std::clamp<int64_t>(lo, 0, n - 1);
            hi = std::clamp<int64_t>(hi, 0, n - 1);
            t[static_cast<size_t>(o)] = {lo, hi, frac};
        }
        return t;
    };
    const auto ti = taps(H, OH);
    const auto tj = taps(W, OW);

    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* xp = x.data() + bc * H * W;
        double* op = out.data() + bc * OH * OW;
        for (int64_t i = 0; i < OH; ++i) {
            const Tap& a = ti[static_cast<size_t>(i)];
            for (int64_t j = 0; j < OW; ++j) {
                const Tap& b = tj[static_cast<size_t>(j)];
                const double top = xp[a.lo * W + b.lo] * (1.0 - b.w_hi) +
                                   xp[a.lo * W + b.hi] * b.w_hi;
                const double bot = xp[a.hi * W + b.lo] * (1.0 - b.w_hi) +
                                   xp[a.hi * W + b.hi] * b.w_hi;
                op[i * OW + j] = top * (1.0 - a.w_hi) + bot * a.w_hi;
            }
        }
    }
    if (detail::tracing({&x})) {
        Tensor tx = x;
        detail::prepare_traced(out, {&tx});
        auto pti = std::make_shared<std::vector<Tap>>(ti);
        auto ptj = std::make_shared<std::vector<Tap>>(tj);
        Graph::current()->record([tx, out, pti, ptj, B, C, H, W, OH, OW]() mutable {
            const double* g = out.grad();
            for (int64_t bc = 0; bc < B * C; ++bc) {
                double* gx = tx.grad() + bc * H * W;
                const double* gp = g + bc * OH * OW;
                for (int64_t i = 0; i < OH; ++i) {
                    const Tap& a = (*pti)[static_cast<size_t>(i)];
                    for (int64_t j = 0; j < OW; ++j) {
                        const Tap& b = (*ptj)[static_cast<size_t>(j)];
                        const double gv = gp[i * OW + j];
                        gx[a.lo * W + b.lo] += gv * (1.0 - a.w_hi) * (1.0 - b.w_hi);
                        gx[a.lo * W + b.hi] += gv * (1.0 - a.w_hi) * b.w_hi;
                        gx[a.hi * W + b.lo] += gv * a.w_hi * (1.0 - b.w_hi);
                        gx[a.hi * W + b.hi] += gv * a.w_hi * b.w_hi;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace tcif
