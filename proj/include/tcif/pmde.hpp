#pragma once

// Explicit finite-difference solver for the source-free 2-D diffusion
// rule P <- P + gamma * lap5(P). Forward-time centered-space; the
// scheme is stable only for gamma <= 1/4, enforced as a hard
// precondition.

#include <filesystem>
#include <functional>

#include "tcif/imgio.hpp"

namespace tcif::pmde {

enum class Boundary { Replicate, Periodic, Zero };

inline const char* boundary_name(Boundary b) {
    switch (b) {
        case Boundary::Replicate: return "replicate";
        case Boundary::Periodic: return "periodic";
        case Boundary::Zero: return "zero";
    }
    return "?";
}

inline Boundary boundary_from_name(const std::string& s) {
    if (s == "replicate") return Boundary::Replicate;
    if (s == "periodic") return Boundary::Periodic;
    if (s == "zero") return Boundary::Zero;
    throw ConfigError("unknown boundary rule: " + s);
}

struct PixelField {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<double> values;
    Boundary boundary = Boundary::Replicate;
    double gamma = 0.25;

    static PixelField constant(int64_t h, int64_t w, double v,
                               Boundary b = Boundary::Replicate, double gamma = 0.25) {
        PixelField f{h, w, std::vector<double>(static_cast<size_t>(h * w), v), b, gamma};
        return f;
    }

    static PixelField impulse(int64_t h, int64_t w, int64_t ci, int64_t cj,
                              double amp = 1.0, Boundary b = Boundary::Replicate,
                              double gamma = 0.25) {
        PixelField f = constant(h, w, 0.0, b, gamma);
        f.values[static_cast<size_t>(ci * w + cj)] = amp;
        return f;
    }

    double at(int64_t i, int64_t j) const {
        return values[static_cast<size_t>(i * width + j)];
    }
    double& at(int64_t i, int64_t j) { return values[static_cast<size_t>(i * width + j)]; }
};

inline bool stability_bound(double gamma) { return gamma > 0.0 && gamma <= 0.25; }

// 5-point stencil N+S+E+W-4C under the field's boundary rule.
inline std::vector<double> laplacian_5pt(const PixelField& f) {
    const int64_t H = f.height, W = f.width;
    std::vector<double> out(static_cast<size_t>(H * W));
    auto sample = [&](int64_t i, int64_t j) -> double {
        if (i >= 0 && i < H && j >= 0 && j < W) return f.values[static_cast<size_t>(i * W + j)];
        switch (f.boundary) {
            case Boundary::Replicate:
                return f.values[static_cast<size_t>(std::clamp<int64_t>(i, 0, H - 1) * W +
                                                    std::clamp<int64_t>(j, 0, W - 1))];
            case Boundary::Periodic:
                return f.values[static_cast<size_t>(((i + H) % H) * W + (j + W) % W)];
            case Boundary::Zero:
                return 0.0;
        }
        return 0.0;
    };
    // paired axis sums keep the stencil exactly symmetric under 90-degree
    // rotation of the field
    for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j)
            out[static_cast<size_t>(i * W + j)] =
                (sample(i + 1, j) + sample(i - 1, j)) +
                (sample(i, j + 1) + sample(i, j - 1)) - 4.0 * f.at(i, j);
    return out;
}

inline PixelField step(const PixelField& f) {
    if (!stability_bound(f.gamma))
        throw StabilityError("explicit step requires 0 < gamma <= 0.25, got gamma=" +
                             std::to_string(f.gamma));
    const std::vector<double> lap = laplacian_5pt(f);
    PixelField out = f;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += f.gamma * lap[i];
    return out;
}

using FrameSink = std::function<void(int64_t t, const PixelField&)>;

// Runs `steps` explicit steps. With dump_every > 0 the sink sees the
// initial state (t = 0) and every dump_every-th step thereafter.
inline PixelField simulate(PixelField f, int64_t steps, int64_t dump_every = 0,
                           const FrameSink& sink = {}) {
    if (!stability_bound(f.gamma))
        throw StabilityError("simulate requires 0 < gamma <= 0.25, got gamma=" +
                             std::to_string(f.gamma));
    if (dump_every > 0 && sink) sink(0, f);
    for (int64_t t = 1; t <= steps; ++t) {
        f = step(f);
        if (dump_every > 0 && sink && t % dump_every == 0) sink(t, f);
    }
    return f;
}

// frame_{t:06}.pgm, min-max normalized per frame
inline FrameSink pgm_frame_sink(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    return [dir](int64_t t, const PixelField& f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06lld.pgm", static_cast<long long>(t));
        imgio::save_pgm(dir / name,
                        imgio::normalize_quantize(f.values, f.height, f.width));
    };
}

}  // namespace tcif::pmde
