#include "helpers.hpp"

using namespace tcif;
using namespace tcif::synth;

namespace {

// independent per-pixel morphology: boundary = dilation && !erosion
Mask brute_force_boundary(const Mask& m, int64_t h, int64_t w) {
    auto at = [&](int64_t i, int64_t j) -> int {
        if (i < 0 || i >= h || j < 0 || j >= w) return 0;
        return m[static_cast<size_t>(i * w + j)];
    };
    Mask out(m.size(), 0);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
            int dil = 0, ero = 1;
            const int64_t ni[5] = {i, i - 1, i + 1, i, i};
            const int64_t nj[5] = {j, j, j, j - 1, j + 1};
            for (int k = 0; k < 5; ++k) {
                if (at(ni[k], nj[k])) dil = 1;
                if (!at(ni[k], nj[k])) ero = 0;
            }
            out[static_cast<size_t>(i * w + j)] = dil && !ero;
        }
    return out;
}

}  // namespace

TEST_CASE("make_boundary of a single pixel is the 5-pixel cross") {
    Mask m(49, 0);
    m[3 * 7 + 3] = 1;
    Mask b = make_boundary(m, 7, 7);
    int64_t count = 0;
    for (uint8_t v : b) count += v;
    CHECK(count == 5);
    CHECK(b[3 * 7 + 3] == 1);
    CHECK(b[2 * 7 + 3] == 1);
    CHECK(b[4 * 7 + 3] == 1);
    CHECK(b[3 * 7 + 2] == 1);
    CHECK(b[3 * 7 + 4] == 1);
}

TEST_CASE("make_boundary of a solid square matches the brute-force oracle") {
    Mask m(100, 0);
    for (int64_t i = 3; i < 7; ++i)
        for (int64_t j = 3; j < 7; ++j) m[static_cast<size_t>(i * 10 + j)] = 1;
    CHECK(make_boundary(m, 10, 10) == brute_force_boundary(m, 10, 10));
}

TEST_CASE("make_boundary of an empty mask is empty") {
    Mask m(64, 0);
    Mask b = make_boundary(m, 8, 8);
    for (uint8_t v : b) CHECK(v == 0);
}

TEST_CASE("make_boundary matches the oracle on random masks") {
    Rng rng(307);
    for (int trial = 0; trial < 50; ++trial) {
        Mask m(12 * 12);
        for (auto& v : m) v = rng.uniform() < 0.35 ? 1 : 0;
        CHECK(make_boundary(m, 12, 12) == brute_force_boundary(m, 12, 12));
    }
}

TEST_CASE("generate with zero targets yields empty masks") {
    SynthConfig cfg;
    cfg.min_targets = cfg.max_targets = 0;
    SceneSample s = generate(cfg, 42);
    for (uint8_t v : s.mask) CHECK(v == 0);
    for (uint8_t v : s.boundary) CHECK(v == 0);
    CHECK(s.targets.empty());
}

TEST_CASE("generate is a pure function of config and seed") {
    SynthConfig cfg;
    SceneSample a = generate(cfg, 1234);
    SceneSample b = generate(cfg, 1234);
    CHECK(a.image == b.image);
    CHECK(a.mask == b.mask);
    CHECK(a.boundary == b.boundary);
    SceneSample c = generate(cfg, 1235);
    CHECK(a.image != c.image);
}

TEST_CASE("generated target areas stay within the configured range") {
    SynthConfig cfg;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SceneSample s = generate(cfg, seed);
        REQUIRE(static_cast<int64_t>(s.targets.size()) >= cfg.min_targets);
        REQUIRE(static_cast<int64_t>(s.targets.size()) <= cfg.max_targets);
        for (const TargetMeta& t : s.targets) {
            CHECK(t.area >= cfg.area_lo);
            CHECK(t.area <= cfg.area_hi);
        }
        // per-component areas from the actual mask
        metrics::BinaryMask bm{s.height, s.width, s.mask};
        int32_t n = 0;
        const auto labels = metrics::connected_components(bm, 8, &n);
        CHECK(n == static_cast<int32_t>(s.targets.size()));
        std::vector<int64_t> areas(static_cast<size_t>(n), 0);
        for (int32_t l : labels)
            if (l) areas[static_cast<size_t>(l - 1)] += 1;
        for (int64_t a : areas) {
            CHECK(a >= cfg.area_lo);
            CHECK(a <= cfg.area_hi);
        }
    }
}

TEST_CASE("boundary invariants hold for generated scenes") {
    SynthConfig cfg;
    for (uint64_t seed = 200; seed < 220; ++seed) {
        SceneSample s = generate(cfg, seed);
        const Mask dil = dilate_cross(s.mask, s.height, s.width);
        const Mask ero = erode_cross(s.mask, s.height, s.width);
        for (size_t i = 0; i < s.boundary.size(); ++i) {
            if (s.boundary[i]) CHECK(dil[i] == 1);
            CHECK_FALSE(bool(s.boundary[i] && ero[i]));
        }
    }
}

TEST_CASE("image values stay in [0,1] and targets are locally bright") {
    SynthConfig cfg;
    SceneSample s = generate(cfg, 77);
    for (double v : s.image) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("infeasible configurations are refused") {
    SynthConfig cfg;
    cfg.noise_sigma = 0.5;  // above contrast_lo
    CHECK_THROWS_AS(generate(cfg, 1), ConfigError);

    SynthConfig cramped;
    cramped.height = cramped.width = 16;
    cramped.max_targets = cramped.min_targets = 40;  // cannot fit
    CHECK_THROWS_AS(generate(cramped, 1), ConfigError);
}

TEST_CASE("image and mask files round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tcif_synth_io";
    fs::create_directories(dir);
    SynthConfig cfg;
    SceneSample s = generate(cfg, 5);

    // 8-bit-quantized image data round-trips exactly
    save_image(dir / "img.pgm", s.image, s.height, s.width);
    int64_t h = 0, w = 0;
    const auto back = load_image(dir / "img.pgm", &h, &w);
    CHECK(h == s.height);
    CHECK(w == s.width);
    for (size_t i = 0; i < back.size(); ++i) {
        const double q = static_cast<double>(imgio::quantize8(s.image[i])) / 255.0;
        CHECK(back[i] == q);
    }
    // quantized data is a fixed point of save/load
    save_image(dir / "img2.pgm", back, h, w);
    CHECK(load_image(dir / "img2.pgm", nullptr, nullptr) == back);

    for (const char* name : {"m.png", "m.pgm"}) {
        save_mask(dir / name, s.mask, s.height, s.width);
        CHECK(load_mask(dir / name, &h, &w) == s.mask);
    }
    fs::remove_all(dir);
}

TEST_CASE("split produces a deterministic 80/20 partition") {
    const auto labels = split_labels(200, 0.8, 9);
    int64_t train = 0, test = 0;
    for (const std::string& s : labels) (s == "train" ? train : test) += 1;
    CHECK(train == 160);
    CHECK(test == 40);
    CHECK(labels == split_labels(200, 0.8, 9));
    CHECK(labels != split_labels(200, 0.8, 10));
}

TEST_CASE("dataset directory round-trips manifest and config") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tcif_synth_ds";
    fs::remove_all(dir);
    SynthConfig cfg;
    cfg.max_targets = 2;
    std::vector<SceneSample> samples;
    std::vector<DatasetEntry> entries;
    const auto labels = split_labels(6, 0.8, 3);
    for (int64_t i = 0; i < 6; ++i) {
        SceneSample s = generate(cfg, 1000 + static_cast<uint64_t>(i));
        entries.push_back({i, s.seed, static_cast<int64_t>(s.targets.size()),
                           labels[static_cast<size_t>(i)]});
        samples.push_back(std::move(s));
    }
    write_dataset(dir, cfg, samples, entries);
    CHECK(fs::exists(dir / "images" / "000000.pgm"));
    CHECK(fs::exists(dir / "masks" / "000005.png"));
    CHECK(fs::exists(dir / "boundaries" / "000003.png"));

    const auto back = read_manifest(dir);
    REQUIRE(back.size() == 6);
    for (size_t i = 0; i < 6; ++i) {
        CHECK(back[i].id == entries[i].id);
        CHECK(back[i].seed == entries[i].seed);
        CHECK(back[i].n_targets == entries[i].n_targets);
        CHECK(back[i].split == entries[i].split);
    }
    const SynthConfig cback = read_synth_config(dir);
    CHECK(cback.max_targets == 2);

    // regeneration from the manifest reproduces the stored masks
    const Mask m0 = load_mask(dir / "masks" / "000000.png", nullptr, nullptr);
    CHECK(m0 == generate(cback, back[0].seed).mask);
    fs::remove_all(dir);
}
