#pragma once

// Deterministic synthetic infrared scenes: smooth low-frequency
// background plus noise, a few compact anisotropic Gaussian targets
// thresholded into the mask, optional dim clutter blobs, and the
// morphological-gradient boundary mask.

#include <filesystem>

#include "tcif/imgio.hpp"
#include "tcif/keyval.hpp"

namespace tcif::synth {

using Mask = std::vector<uint8_t>;  // 0/1, row-major

inline Mask dilate_cross(const Mask& m, int64_t h, int64_t w) {
    Mask out(m.size(), 0);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
            if (!m[static_cast<size_t>(i * w + j)]) continue;
            out[static_cast<size_t>(i * w + j)] = 1;
            if (i > 0) out[static_cast<size_t>((i - 1) * w + j)] = 1;
            if (i + 1 < h) out[static_cast<size_t>((i + 1) * w + j)] = 1;
            if (j > 0) out[static_cast<size_t>(i * w + j - 1)] = 1;
            if (j + 1 < w) out[static_cast<size_t>(i * w + j + 1)] = 1;
        }
    return out;
}

inline Mask erode_cross(const Mask& m, int64_t h, int64_t w) {
    Mask out(m.size(), 0);
    auto at = [&](int64_t i, int64_t j) -> uint8_t {
        if (i < 0 || i >= h || j < 0 || j >= w) return 0;
        return m[static_cast<size_t>(i * w + j)];
    };
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
            out[static_cast<size_t>(i * w + j)] =
                at(i, j) && at(i - 1, j) && at(i + 1, j) && at(i, j - 1) && at(i, j + 1);
    return out;
}

// 3x3-cross morphological gradient: dilation minus erosion.
inline Mask make_boundary(const Mask& mask, int64_t h, int64_t w) {
    Mask d = dilate_cross(mask, h, w);
    Mask e = erode_cross(mask, h, w);
    Mask out(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) out[i] = d[i] && !e[i];
    return out;
}

struct SynthConfig {
    int64_t height = 64, width = 64;
    int64_t min_targets = 1, max_targets = 3;
    double contrast_lo = 0.45, contrast_hi = 0.80;
    double bg_amplitude = 0.25;
    int64_t bg_cells = 5;  // coarse grid extent of the smooth field
    double noise_sigma = 0.05;
    int64_t area_lo = 4, area_hi = 60;
    double sigma_lo = 0.9, sigma_hi = 3.2;
    int64_t clutter_min = 0, clutter_max = 3;
    double clutter_amp_lo = 0.06, clutter_amp_hi = 0.15;
    double clutter_sigma_lo = 3.0, clutter_sigma_hi = 6.0;

    void validate() const {
        if (height < 16 || width < 16) throw ConfigError("scene size must be >= 16");
        if (min_targets < 0 || max_targets < min_targets)
            throw ConfigError("invalid target count range");
        if (contrast_lo <= noise_sigma)
            throw ConfigError("target contrast must exceed noise sigma");
        if (contrast_hi < contrast_lo) throw ConfigError("invalid contrast range");
        if (area_lo < 1 || area_hi < area_lo) throw ConfigError("invalid area range");
        if (sigma_lo <= 0 || sigma_hi < sigma_lo) throw ConfigError("invalid sigma range");
        if (bg_cells < 2) throw ConfigError("bg_cells must be >= 2");
    }

    void to_doc(kv::Doc& d) const {
        d.set_i64("synth", "height", height);
        d.set_i64("synth", "width", width);
        d.set_i64("synth", "min_targets", min_targets);
        d.set_i64("synth", "max_targets", max_targets);
        d.set_f64("synth", "contrast_lo", contrast_lo);
        d.set_f64("synth", "contrast_hi", contrast_hi);
        d.set_f64("synth", "bg_amplitude", bg_amplitude);
        d.set_i64("synth", "bg_cells", bg_cells);
        d.set_f64("synth", "noise_sigma", noise_sigma);
        d.set_i64("synth", "area_lo", area_lo);
        d.set_i64("synth", "area_hi", area_hi);
        d.set_f64("synth", "sigma_lo", sigma_lo);
        d.set_f64("synth", "sigma_hi", sigma_hi);
        d.set_i64("synth", "clutter_min", clutter_min);
        d.set_i64("synth", "clutter_max", clutter_max);
        d.set_f64("synth", "clutter_amp_lo", clutter_amp_lo);
        d.set_f64("synth", "clutter_amp_hi", clutter_amp_hi);
        d.set_f64("synth", "clutter_sigma_lo", clutter_sigma_lo);
        d.set_f64("synth", "clutter_sigma_hi", clutter_sigma_hi);
    }

    static SynthConfig from_doc(const kv::Doc& d) {
        SynthConfig c;
        c.height = d.get_i64_or("synth", "height", c.height);
        c.width = d.get_i64_or("synth", "width", c.width);
        c.min_targets = d.get_i64_or("synth", "min_targets", c.min_targets);
        c.max_targets = d.get_i64_or("synth", "max_targets", c.max_targets);
        c.contrast_lo = d.get_f64_or("synth", "contrast_lo", c.contrast_lo);
        c.contrast_hi = d.get_f64_or("synth", "contrast_hi", c.contrast_hi);
        c.bg_amplitude = d.get_f64_or("synth", "bg_amplitude", c.bg_amplitude);
        c.bg_cells = d.get_i64_or("synth", "bg_cells", c.bg_cells);
        c.noise_sigma = d.get_f64_or("synth", "noise_sigma", c.noise_sigma);
        c.area_lo = d.get_i64_or("synth", "area_lo", c.area_lo);
        c.area_hi = d.get_i64_or("synth", "area_hi", c.area_hi);
        c.sigma_lo = d.get_f64_or("synth", "sigma_lo", c.sigma_lo);
        c.sigma_hi = d.get_f64_or("synth", "sigma_hi", c.sigma_hi);
        c.clutter_min = d.get_i64_or("synth", "clutter_min", c.clutter_min);
        c.clutter_max = d.get_i64_or("synth", "clutter_max", c.clutter_max);
        c.clutter_amp_lo = d.get_f64_or("synth", "clutter_amp_lo", c.clutter_amp_lo);
        c.clutter_amp_hi = d.get_f64_or("synth", "clutter_amp_hi", c.clutter_amp_hi);
        c.clutter_sigma_lo = d.get_f64_or("synth", "clutter_sigma_lo", c.clutter_sigma_lo);
        c.clutter_sigma_hi = d.get_f64_or("synth", "clutter_sigma_hi", c.clutter_sigma_hi);
        return c;
    }
};

struct TargetMeta {
    double cx = 0, cy = 0;       // row, col center
    double sigma_x = 0, sigma_y = 0;
    double theta = 0;
    double amplitude = 0;
    int64_t area = 0;
};

struct SceneSample {
    int64_t height = 0, width = 0;
    std::vector<double> image;  // [0,1]
    Mask mask;
    Mask boundary;
    uint64_t seed = 0;
    std::vector<TargetMeta> targets;
};

namespace detail_synth {

// bilinear interpolation of a coarse cells x cells grid onto h x w
inline std::vector<double> smooth_field(int64_t h, int64_t w, int64_t cells,
                                        double amplitude, Rng& rng) {
    std::vector<double> grid(static_cast<size_t>(cells * cells));
    for (double& v : grid) v = rng.uniform(0.0, amplitude);
    std::vector<double> out(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h; ++i) {
        const double gi = h == 1 ? 0.0
                                 : static_cast<double>(i) / static_cast<double>(h - 1) *
                                       static_cast<double>(cells - 1);
        const int64_t i0 = std::min<int64_t>(static_cast<int64_t>(gi), cells - 2);
        const double fi = gi - static_cast<double>(i0);
        for (int64_t j = 0; j < w; ++j) {
            const double gj = w == 1 ? 0.0
                                     : static_cast<double>(j) / static_cast<double>(w - 1) *
                                           static_cast<double>(cells - 1);
            const int64_t j0 = std::min<int64_t>(static_cast<int64_t>(gj), cells - 2);
            const double fj = gj - static_cast<double>(j0);
            const double a = grid[static_cast<size_t>(i0 * cells + j0)];
            const double b = grid[static_cast<size_t>(i0 * cells + j0 + 1)];
            const double c = grid[static_cast<size_t>((i0 + 1) * cells + j0)];
            const double d = grid[static_cast<size_t>((i0 + 1) * cells + j0 + 1)];
            out[static_cast<size_t>(i * w + j)] =
                (a * (1 - fj) + b * fj) * (1 - fi) + (c * (1 - fj) + d * fj) * fi;
        }
    }
    return out;
}

struct Blob {
    double cx, cy, sx, sy, theta;

    // rotated anisotropic Gaussian, peak 1 at the center
    double intensity(double i, double j) const {
        const double di = i - cx, dj = j - cy;
        const double ct = std::cos(theta), st = std::sin(theta);
        const double u = ct * di + st * dj;
        const double v = -st * di + ct * dj;
        return std::exp(-0.5 * (u * u / (sx * sx) + v * v / (sy * sy)));
    }
};

}  // namespace detail_synth

// Pure function of (config, seed): identical inputs give bit-identical
// samples.
inline SceneSample generate(const SynthConfig& cfg, uint64_t seed) {
    cfg.validate();
    const int64_t H = cfg.height, W = cfg.width;
    Rng rng(seed);

    SceneSample s;
    s.height = H;
    s.width = W;
    s.seed = seed;
    s.image = detail_synth::smooth_field(H, W, cfg.bg_cells, cfg.bg_amplitude, rng);
    s.mask.assign(static_cast<size_t>(H * W), 0);

    // keep-out zone: existing mask dilated twice, so components stay
    // separated by at least two pixels
    Mask keepout(static_cast<size_t>(H * W), 0);
    const int64_t n_targets = rng.uniform_int(cfg.min_targets, cfg.max_targets);
    for (int64_t t = 0; t < n_targets; ++t) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            detail_synth::Blob blob;
            blob.sx = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
            blob.sy = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
            blob.theta = rng.uniform(0.0, 3.14159265358979323846);
            const double margin = 3.0 * std::max(blob.sx, blob.sy) + 1.0;
            if (2.0 * margin >= static_cast<double>(std::min(H, W))) continue;
            blob.cx = rng.uniform(margin, static_cast<double>(H - 1) - margin);
            blob.cy = rng.uniform(margin, static_cast<double>(W - 1) - margin);

            const int64_t r = static_cast<int64_t>(std::ceil(margin));
            const int64_t i0 = static_cast<int64_t>(blob.cx) - r,
                          i1 = static_cast<int64_t>(blob.cx) + r;
            const int64_t j0 = static_cast<int64_t>(blob.cy) - r,
                          j1 = static_cast<int64_t>(blob.cy) + r;
            std::vector<std::pair<int64_t, int64_t>> pixels;
            bool collide = false;
            for (int64_t i = std::max<int64_t>(0, i0); i <= std::min<int64_t>(H - 1, i1) && !collide; ++i)
                for (int64_t j = std::max<int64_t>(0, j0); j <= std::min<int64_t>(W - 1, j1); ++j)
                    if (blob.intensity(static_cast<double>(i), static_cast<double>(j)) >= 0.5) {
                        if (keepout[static_cast<size_t>(i * W + j)]) {
                            collide = true;
                            break;
                        }
                        pixels.emplace_back(i, j);
                    }
            if (collide) continue;
            const auto area = static_cast<int64_t>(pixels.size());
            if (area < cfg.area_lo || area > cfg.area_hi) continue;

            const double amp = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
            for (int64_t i = std::max<int64_t>(0, i0); i <= std::min<int64_t>(H - 1, i1); ++i)
                for (int64_t j = std::max<int64_t>(0, j0); j <= std::min<int64_t>(W - 1, j1); ++j)
                    s.image[static_cast<size_t>(i * W + j)] +=
                        amp * blob.intensity(static_cast<double>(i), static_cast<double>(j));
            for (auto [i, j] : pixels) s.mask[static_cast<size_t>(i * W + j)] = 1;
            keepout = dilate_cross(dilate_cross(s.mask, H, W), H, W);
            s.targets.push_back({blob.cx, blob.cy, blob.sx, blob.sy, blob.theta, amp, area});
            placed = true;
        }
        if (!placed)
            throw ConfigError("generate: could not place target " + std::to_string(t + 1) +
                              " of " + std::to_string(n_targets) +
                              "; configuration infeasible");
    }

    // dim clutter blobs, never overlapping the keep-out zone
    const int64_t n_clutter = rng.uniform_int(cfg.clutter_min, cfg.clutter_max);
    for (int64_t t = 0; t < n_clutter; ++t) {
        for (int attempt = 0; attempt < 50; ++attempt) {
            detail_synth::Blob blob;
            blob.sx = rng.uniform(cfg.clutter_sigma_lo, cfg.clutter_sigma_hi);
            blob.sy = rng.uniform(cfg.clutter_sigma_lo, cfg.clutter_sigma_hi);
            blob.theta = rng.uniform(0.0, 3.14159265358979323846);
            blob.cx = rng.uniform(0.0, static_cast<double>(H - 1));
            blob.cy = rng.uniform(0.0, static_cast<double>(W - 1));
            const int64_t r = static_cast<int64_t>(std::ceil(3.0 * std::max(blob.sx, blob.sy)));
            bool collide = false;
            for (int64_t i = std::max<int64_t>(0, static_cast<int64_t>(blob.cx) - r);
                 i <= std::min<int64_t>(H - 1, static_cast<int64_t>(blob.cx) + r) && !collide; ++i)
                for (int64_t j = std::max<int64_t>(0, static_cast<int64_t>(blob.cy) - r);
                     j <= std::min<int64_t>(W - 1, static_cast<int64_t>(blob.cy) + r); ++j)
                    if (blob.intensity(static_cast<double>(i), static_cast<double>(j)) >= 0.5 &&
                        keepout[static_cast<size_t>(i * W + j)]) {
                        collide = true;
                        break;
                    }
            if (collide) continue;
            const double amp = rng.uniform(cfg.clutter_amp_lo, cfg.clutter_amp_hi);
            for (int64_t i = std::max<int64_t>(0, static_cast<int64_t>(blob.cx) - r);
                 i <= std::min<int64_t>(H - 1, static_cast<int64_t>(blob.cx) + r); ++i)
                for (int64_t j = std::max<int64_t>(0, static_cast<int64_t>(blob.cy) - r);
                     j <= std::min<int64_t>(W - 1, static_cast<int64_t>(blob.cy) + r); ++j)
                    s.image[static_cast<size_t>(i * W + j)] +=
                        amp * blob.intensity(static_cast<double>(i), static_cast<double>(j));
            break;
        }
    }

    for (double& v : s.image) v = std::clamp(v + rng.normal() * cfg.noise_sigma, 0.0, 1.0);
    s.boundary = make_boundary(s.mask, H, W);
    return s;
}

// ---------------------------------------------------------------------------
// file I/O

inline void save_image(const std::filesystem::path& path, const std::vector<double>& img,
                       int64_t h, int64_t w) {
    imgio::save_gray(path, imgio::quantize(img, h, w));
}

inline std::vector<double> load_image(const std::filesystem::path& path, int64_t* h,
                                      int64_t* w) {
    imgio::GrayImage g = imgio::load_gray(path);
    if (h) *h = g.height;
    if (w) *w = g.width;
    return imgio::to_floats(g);
}

inline void save_mask(const std::filesystem::path& path, const Mask& m, int64_t h,
                      int64_t w) {
    imgio::GrayImage g{h, w, {}};
    g.pixels.resize(m.size());
    for (size_t i = 0; i < m.size(); ++i) g.pixels[i] = m[i] ? 255 : 0;
    imgio::save_gray(path, g);
}

inline Mask load_mask(const std::filesystem::path& path, int64_t* h, int64_t* w) {
    imgio::GrayImage g = imgio::load_gray(path);
    if (h) *h = g.height;
    if (w) *w = g.width;
    Mask m(g.pixels.size());
    for (size_t i = 0; i < m.size(); ++i) m[i] = g.pixels[i] >= 128 ? 1 : 0;
    return m;
}

struct DatasetEntry {
    int64_t id = 0;
    uint64_t seed = 0;
    int64_t n_targets = 0;
    std::string split;  // "train" | "test"
};

inline std::string sample_id(int64_t id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(id));
    return buf;
}

// Deterministic 80/20 (by default) shuffle-split of [0, n).
inline std::vector<std::string> split_labels(int64_t n, double train_ratio,
                                             uint64_t seed) {
    if (train_ratio < 0.0 || train_ratio > 1.0)
        throw ConfigError("split ratio must be in [0, 1]");
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(seed);
    for (int64_t i = n; i > 1; --i)
        std::swap(order[static_cast<size_t>(i - 1)],
                  order[static_cast<size_t>(rng.uniform_int(0, i - 1))]);
    const auto n_train = static_cast<int64_t>(std::llround(train_ratio * static_cast<double>(n)));
    std::vector<std::string> labels(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        labels[static_cast<size_t>(order[static_cast<size_t>(i)])] =
            i < n_train ? "train" : "test";
    return labels;
}

inline void write_dataset(const std::filesystem::path& dir, const SynthConfig& cfg,
                          const std::vector<SceneSample>& samples,
                          const std::vector<DatasetEntry>& entries) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    fs::create_directories(dir / "boundaries");
    for (size_t i = 0; i < samples.size(); ++i) {
        const SceneSample& s = samples[i];
        const std::string id = sample_id(entries[i].id);
        save_image(dir / "images" / (id + ".pgm"), s.image, s.height, s.width);
        save_mask(dir / "masks" / (id + ".png"), s.mask, s.height, s.width);
        save_mask(dir / "boundaries" / (id + ".png"), s.boundary, s.height, s.width);
    }
    std::ofstream mf(dir / "manifest.csv");
    if (!mf) throw Error("cannot write manifest.csv");
    mf << "id,seed,n_targets,split\n";
    for (const DatasetEntry& e : entries)
        mf << sample_id(e.id) << "," << e.seed << "," << e.n_targets << "," << e.split
           << "\n";
    kv::Doc doc;
    cfg.to_doc(doc);
    doc.save((dir / "synth_config.txt").string());
}

inline std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.csv");
    if (!mf) throw Error("cannot open manifest.csv in " + dir.string());
    std::vector<DatasetEntry> entries;
    std::string line;
    std::getline(mf, line);  // header
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        DatasetEntry e;
        std::istringstream is(line);
        std::string field;
        std::getline(is, field, ',');
        e.id = std::stoll(field);
        std::getline(is, field, ',');
        e.seed = std::stoull(field);
        std::getline(is, field, ',');
        e.n_targets = std::stoll(field);
        std::getline(is, e.split, ',');
        entries.push_back(std::move(e));
    }
    return entries;
}

inline SynthConfig read_synth_config(const std::filesystem::path& dir) {
    return SynthConfig::from_doc(kv::Doc::load((dir / "synth_config.txt").string()));
}

}  // namespace tcif::synth
