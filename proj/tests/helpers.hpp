#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "tcif/tcif.hpp"

namespace tt {

inline tcif::Tensor random_tensor(tcif::Shape shape, tcif::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
    return tcif::Tensor::uniform(std::move(shape), lo, hi, rng);
}

inline double max_abs_diff(const tcif::Tensor& a, const tcif::Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

inline bool all_finite(const tcif::Tensor& t) {
    for (int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t.data()[i])) return false;
    return true;
}

}  // namespace tt
