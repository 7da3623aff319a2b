#pragma once

// Central-difference verification of reverse-mode gradients. The
// numerical side runs pure forward passes, so it stays independent of
// the tape it is checking.

#include "tcif/core.hpp"

namespace tcif {

// f maps the given tensors to a scalar tensor. Every component of every
// tensor in xs is perturbed by +/- eps; returns the worst relative error
// between the tape gradient and (f(x+eps) - f(x-eps)) / 2 eps, with
// denominator max(|a|, |b|, 1e-8).
template <class F>
double grad_check(F&& f, std::vector<Tensor> xs, double eps = 1e-5) {
    for (Tensor& x : xs) {
        x.set_requires_grad(true);
        x.ensure_grad();
        x.zero_grad();
    }
    {
        Graph graph;
        Tensor y = f(xs);
        if (y.numel() != 1)
            throw DimensionError("grad_check: f must return a scalar, got shape " +
                                 shape_str(y.shape()));
        graph.backward(y);
    }
    double max_rel = 0.0;
    for (Tensor& x : xs) {
        const int64_t n = x.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double orig = x.data()[i];
            x.data()[i] = orig + eps;
            const double fp = f(xs).item();
            x.data()[i] = orig - eps;
            const double fm = f(xs).item();
            x.data()[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = x.grad()[i];
            const double denom =
                std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

template <class F>
double grad_check(F&& f, Tensor x, double eps = 1e-5) {
    return grad_check(
        [&](std::vector<Tensor>& xs) { return f(xs[0]); },
        std::vector<Tensor>{std::move(x)}, eps);
}

}  // namespace tcif
