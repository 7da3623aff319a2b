#pragma once

// Differentiable primitives on dense tensors. Every op computes its
// forward result eagerly and, when a Graph is active and some input
// requires gradients, records a closure that accumulates adjoints into
// the inputs' grad buffers.

#include "tcif/core.hpp"

namespace tcif {

namespace detail {

// C[M x N] += A[M x K] * B[K x N]
inline void mm_nn(const double* A, const double* B, double* C, int64_t M,
                  int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        for (int64_t k = 0; k < K; ++k) {
            const double a = A[i * K + k];
            const double* brow = B + k * N;
            double* crow = C + i * N;
            for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

// C[M x N] += A[M x K] * B[N x K]^T
inline void mm_nt(const double* A, const double* B, double* C, int64_t M,
                  int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const double* arow = A + i * K;
        for (int64_t j = 0; j < N; ++j) {
            const double* brow = B + j * K;
            double acc = 0.0;
            for (int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            C[i * N + j] += acc;
        }
    }
}

// C[M x N] += A[K x M]^T * B[K x N]
inline void mm_tn(const double* A, const double* B, double* C, int64_t M,
                  int64_t K, int64_t N) {
    for (int64_t k = 0; k < K; ++k) {
        const double* arow = A + k * M;
        const double* brow = B + k * N;
        for (int64_t i = 0; i < M; ++i) {
            const double a = arow[i];
            double* crow = C + i * N;
            for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// outer/n/inner decomposition of a tensor around `axis`
struct AxisSplit {
    int64_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& shape, int axis) {
    const int nd = static_cast<int>(shape.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd)
        throw DimensionError("axis out of range for shape " + shape_str(shape));
    AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
    for (int d = 0; d < axis; ++d) s.outer *= shape[static_cast<size_t>(d)];
    for (int d = axis + 1; d < nd; ++d) s.inner *= shape[static_cast<size_t>(d)];
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise suite

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, n]() mutable {
            const double* g = out.grad();
            if (ta.requires_grad())
                for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i];
            if (tb.requires_grad())
                for (int64_t i = 0; i < n; ++i) tb.grad()[i] += g[i];
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, n]() mutable {
            const double* g = out.grad();
            if (ta.requires_grad())
                for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i];
            if (tb.requires_grad())
                for (int64_t i = 0; i < n; ++i) tb.grad()[i] -= g[i];
        });
    }
    return out;
}

// Same-shape product, or scaling when either operand has one element.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.numel() == 1 && b.numel() != 1) return mul(b, a);
    const bool scalar_b = b.numel() == 1;
    if (!scalar_b) detail::check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const int64_t n = a.numel();
    if (scalar_b) {
        const double s = b.data()[0];
        for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
    } else {
        for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    }
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, n, scalar_b]() mutable {
            const double* g = out.grad();
            if (scalar_b) {
                const double s = tb.data()[0];
                if (ta.requires_grad())
                    for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i] * s;
                if (tb.requires_grad()) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < n; ++i) acc += g[i] * ta.data()[i];
                    tb.grad()[0] += acc;
                }
            } else {
                if (ta.requires_grad())
                    for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i] * tb.data()[i];
                if (tb.requires_grad())
                    for (int64_t i = 0; i < n; ++i) tb.grad()[i] += g[i] * ta.data()[i];
            }
        });
    }
    return out;
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    const bool scalar_b = b.numel() == 1 && a.numel() != 1;
    if (!scalar_b) detail::check_same_shape(a, b, "div");
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i)
        out.data()[i] = a.data()[i] / b.data()[scalar_b ? 0 : i];
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, n, scalar_b]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) {
                const double bi = tb.data()[scalar_b ? 0 : i];
                if (ta.requires_grad()) ta.grad()[i] += g[i] / bi;
                if (tb.requires_grad())
                    tb.grad()[scalar_b ? 0 : i] -= g[i] * ta.data()[i] / (bi * bi);
            }
        });
    }
    return out;
}

inline Tensor scalar_mul(const Tensor& a, double c) {
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, n, c]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i] * c;
        });
    }
    return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + c;
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, n]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i];
        });
    }
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a.data()[i];
        out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x));
    }
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, n]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) {
                const double s = out.data()[i];
                ta.grad()[i] += g[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

// tanh-form smooth gelu; the adjoint differentiates the approximation
// itself, so gradient checks close exactly.
inline Tensor gelu(const Tensor& a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    Tensor out(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a.data()[i];
        out.data()[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, n]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) {
                const double x = ta.data()[i];
                const double u = kC * (x + kA * x * x * x);
                const double t = std::tanh(u);
                const double d = 0.5 * (1.0 + t) +
                                 0.5 * x * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
                ta.grad()[i] += g[i] * d;
            }
        });
    }
    return out;
}

inline Tensor sum_all(const Tensor& a) {
    Tensor out({1});
    const int64_t n = a.numel();
    // compensated summation; large reductions feed loss ratios, where
    // plain accumulation noise would dominate finite-difference checks
    double acc = 0.0, comp = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double y = a.data()[i] - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    out.data()[0] = acc;
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, n]() mutable {
            const double g = out.grad()[0];
            for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g;
        });
    }
    return out;
}

inline Tensor mean_all(const Tensor& a) {
    return scalar_mul(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

// Removes `axis`, averaging over it.
inline Tensor mean_reduce(const Tensor& a, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    const int nd = a.ndim();
    const int ax = axis < 0 ? axis + nd : axis;
    Shape oshape;
    for (int d = 0; d < nd; ++d)
        if (d != ax) oshape.push_back(a.dim(d));
    if (oshape.empty()) oshape.push_back(1);
    Tensor out(oshape);
    const double inv = 1.0 / static_cast<double>(sp.n);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            double acc = 0.0;
            for (int64_t k = 0; k < sp.n; ++k)
                acc += a.data()[(o * sp.n + k) * sp.inner + in];
            out.data()[o * sp.inner + in] = acc * inv;
        }
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, sp, inv]() mutable {
            const double* g = out.grad();
            for (int64_t o = 0; o < sp.outer; ++o)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    const double gv = g[o * sp.inner + in] * inv;
                    for (int64_t k = 0; k < sp.n; ++k)
                        ta.grad()[(o * sp.n + k) * sp.inner + in] += gv;
                }
        });
    }
    return out;
}

// Adds 1-D `b` along `axis` of `a` (bias add).
inline Tensor broadcast_add(const Tensor& a, const Tensor& b, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    if (b.ndim() != 1 || b.numel() != sp.n)
        throw DimensionError("broadcast_add: bias shape " + shape_str(b.shape()) +
                             " does not match axis extent " + std::to_string(sp.n) +
                             " of " + shape_str(a.shape()));
    Tensor out(a.shape());
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t k = 0; k < sp.n; ++k) {
            const double bv = b.data()[k];
            const int64_t base = (o * sp.n + k) * sp.inner;
            for (int64_t in = 0; in < sp.inner; ++in)
                out.data()[base + in] = a.data()[base + in] + bv;
        }
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, sp]() mutable {
            const double* g = out.grad();
            if (ta.requires_grad()) {
                const int64_t n = ta.numel();
                for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i];
            }
            if (tb.requires_grad())
                for (int64_t o = 0; o < sp.outer; ++o)
                    for (int64_t k = 0; k < sp.n; ++k) {
                        const int64_t base = (o * sp.n + k) * sp.inner;
                        double acc = 0.0;
                        for (int64_t in = 0; in < sp.inner; ++in) acc += g[base + in];
                        tb.grad()[k] += acc;
                    }
        });
    }
    return out;
}

// Inserts a new axis of extent n at position `dim`, replicating values.
inline Tensor broadcast_axis(const Tensor& a, int dim, int64_t n) {
    const int nd = a.ndim();
    if (dim < 0) dim += nd + 1;
    if (dim < 0 || dim > nd)
        throw DimensionError("broadcast_axis: position out of range for shape " +
                             shape_str(a.shape()));
    Shape oshape = a.shape();
    oshape.insert(oshape.begin() + dim, n);
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < dim; ++d) outer *= a.dim(d);
    for (int d = dim; d < nd; ++d) inner *= a.dim(d);
    Tensor out(oshape);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t k = 0; k < n; ++k)
            std::copy(a.data() + o * inner, a.data() + (o + 1) * inner,
                      out.data() + (o * n + k) * inner);
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, outer, inner, n]() mutable {
            const double* g = out.grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t k = 0; k < n; ++k) {
                    const double* gs = g + (o * n + k) * inner;
                    double* dst = ta.grad() + o * inner;
                    for (int64_t in = 0; in < inner; ++in) dst[in] += gs[in];
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape ops

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " +
                             shape_str(shape) + " changes element count");
    Tensor out(shape);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        const int64_t n = a.numel();
        Graph::current()->record([ta, out, n]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) ta.grad()[i] += g[i];
        });
    }
    return out;
}

inline Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    const int nd = a.ndim();
    if (static_cast<int>(perm.size()) != nd)
        throw DimensionError("permute: rank mismatch for shape " + shape_str(a.shape()));
    Shape oshape(static_cast<size_t>(nd));
    for (int d = 0; d < nd; ++d) oshape[static_cast<size_t>(d)] = a.dim(perm[static_cast<size_t>(d)]);
    std::vector<int64_t> istrides(static_cast<size_t>(nd), 1);
    for (int d = nd - 2; d >= 0; --d)
        istrides[static_cast<size_t>(d)] = istrides[static_cast<size_t>(d + 1)] * a.dim(d + 1);
    // stride of output dim d in the input's flat layout
    std::vector<int64_t> strides(static_cast<size_t>(nd));
    for (int d = 0; d < nd; ++d) strides[static_cast<size_t>(d)] = istrides[static_cast<size_t>(perm[static_cast<size_t>(d)])];

    Tensor out(oshape);
    const int64_t n = a.numel();
    std::vector<int64_t> src_index(static_cast<size_t>(n));
    {
        std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
        for (int64_t flat = 0; flat < n; ++flat) {
            int64_t src = 0;
            for (int d = 0; d < nd; ++d) src += idx[static_cast<size_t>(d)] * strides[static_cast<size_t>(d)];
            src_index[static_cast<size_t>(flat)] = src;
            out.data()[flat] = a.data()[src];
            for (int d = nd - 1; d >= 0; --d) {
                if (++idx[static_cast<size_t>(d)] < oshape[static_cast<size_t>(d)]) break;
                idx[static_cast<size_t>(d)] = 0;
            }
        }
    }
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        auto map = std::make_shared<std::vector<int64_t>>(std::move(src_index));
        Graph::current()->record([ta, out, map, n]() mutable {
            const double* g = out.grad();
            for (int64_t i = 0; i < n; ++i) ta.grad()[(*map)[static_cast<size_t>(i)]] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    Tensor out({M, N});
    detail::mm_nn(a.data(), b.data(), out.data(), M, K, N);
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, M, K, N]() mutable {
            const double* g = out.grad();
            if (ta.requires_grad()) detail::mm_nt(g, tb.data(), ta.grad(), M, N, K);
            if (tb.requires_grad()) detail::mm_tn(ta.data(), g, tb.grad(), K, M, N);
        });
    }
    return out;
}

// Batched matmul over a shared leading axis.
inline Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    const int64_t B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(2);
    Tensor out({B, M, N});
    for (int64_t n = 0; n < B; ++n)
        detail::mm_nn(a.data() + n * M * K, b.data() + n * K * N,
                      out.data() + n * M * N, M, K, N);
    if (detail::tracing({&a, &b})) {
        Tensor ta = a, tb = b;
        detail::prepare_traced(out, {&ta, &tb});
        Graph::current()->record([ta, tb, out, B, M, K, N]() mutable {
            const double* g = out.grad();
            for (int64_t n = 0; n < B; ++n) {
                const double* gn = g + n * M * N;
                if (ta.requires_grad())
                    detail::mm_nt(gn, tb.data() + n * K * N, ta.grad() + n * M * K, M, N, K);
                if (tb.requires_grad())
                    detail::mm_tn(ta.data() + n * M * K, gn, tb.grad() + n * K * N, K, M, N);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// normalizations

inline Tensor softmax(const Tensor& a, int axis) {
    const auto sp = detail::split_axis(a.shape(), axis);
    Tensor out(a.shape());
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int64_t k = 0; k < sp.n; ++k)
                mx = std::max(mx, a.data()[(o * sp.n + k) * sp.inner + in]);
            double denom = 0.0;
            for (int64_t k = 0; k < sp.n; ++k) {
                const int64_t ix = (o * sp.n + k) * sp.inner + in;
                const double e = std::exp(a.data()[ix] - mx);
                out.data()[ix] = e;
                denom += e;
            }
            const double inv = 1.0 / denom;
            for (int64_t k = 0; k < sp.n; ++k)
                out.data()[(o * sp.n + k) * sp.inner + in] *= inv;
        }
    if (detail::tracing({&a})) {
        Tensor ta = a;
        detail::prepare_traced(out, {&ta});
        Graph::current()->record([ta, out, sp]() mutable {
            const double* g = out.grad();
            for (int64_t o = 0; o < sp.outer; ++o)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    double dot = 0.0;
                    for (int64_t k = 0; k < sp.n; ++k) {
                        const int64_t ix = (o * sp.n + k) * sp.inner + in;
                        dot += g[ix] * out.data()[ix];
                    }
                    for (int64_t k = 0; k < sp.n; ++k) {
                        const int64_t ix = (o * sp.n + k) * sp.inner + in;
                        ta.grad()[ix] += out.data()[ix] * (g[ix] - dot);
                    }
                }
        });
    }
    return out;
}

// Normalizes each vector along `axis` to zero mean / unit variance,
// then applies per-position gain and bias.
inline Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                         int axis = -1, double eps = 1e-5) {
    const auto sp = detail::split_axis(a.shape(), axis);
    if (gain.numel() != sp.n || bias.numel() != sp.n)
        throw DimensionError("layer_norm: gain/bias shape " + shape_str(gain.shape()) +
                             "/" + shape_str(bias.shape()) + " must match axis extent " +
                             std::to_string(sp.n));
    Tensor out(a.shape());
    const int64_t tokens = sp.outer * sp.inner;
    std::vector<double> xhat(static_cast<size_t>(a.numel()));
    std::vector<double> inv_std(static_cast<size_t>(tokens));
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            double mean = 0.0;
            for (int64_t k = 0; k < sp.n; ++k)
                mean += a.data()[(o * sp.n + k) * sp.inner + in];
            mean /= static_cast<double>(sp.n);
            double var = 0.0;
            for (int64_t k = 0; k < sp.n; ++k) {
                const double d = a.data()[(o * sp.n + k) * sp.inner + in] - mean;
                var += d * d;
            }
            var /= static_cast<double>(sp.n);
            const double istd = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<size_t>(o * sp.inner + in)] = istd;
            for (int64_t k = 0; k < sp.n; ++k) {
                const int64_t ix = (o * sp.n + k) * sp.inner + in;
                const double xh = (a.data()[ix] - mean) * istd;
                xhat[static_cast<size_t>(ix)] = xh;
                out.data()[ix] = gain.data()[k] * xh + bias.data()[k];
            }
        }
    if (detail::tracing({&a, &gain, &bias})) {
        Tensor ta = a, tg = gain, tb = bias;
        detail::prepare_traced(out, {&ta, &tg, &tb});
        auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
        auto is = std::make_shared<std::vector<double>>(std::move(inv_std));
        Graph::current()->record([ta, tg, tb, out, sp, xh, is]() mutable {
            const double* g = out.grad();
            const double invn = 1.0 / static_cast<double>(sp.n);
            for (int64_t o = 0; o < sp.outer; ++o)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    const double istd = (*is)[static_cast<size_t>(o * sp.inner + in)];
                    double sum_gg = 0.0, sum_ggx = 0.0;
                    for (int64_t k = 0; k < sp.n; ++k) {
                        const int64_t ix = (o * sp.n + k) * sp.inner + in;
                        const double gg = g[ix] * tg.data()[k];
                        const double xv = (*xh)[static_cast<size_t>(ix)];
                        sum_gg += gg;
                        sum_ggx += gg * xv;
                        if (tg.requires_grad()) tg.grad()[k] += g[ix] * xv;
                        if (tb.requires_grad()) tb.grad()[k] += g[ix];
                    }
                    if (ta.requires_grad())
                        for (int64_t k = 0; k < sp.n; ++k) {
                            const int64_t ix = (o * sp.n + k) * sp.inner + in;
                            const double gg = g[ix] * tg.data()[k];
                            const double xv = (*xh)[static_cast<size_t>(ix)];
                            ta.grad()[ix] +=
                                istd * (gg - invn * sum_gg - xv * invn * sum_ggx);
                        }
                }
        });
    }
    return out;
}

}  // namespace tcif
