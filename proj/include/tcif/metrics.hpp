#pragma once

// Detection metrics: pooled IoU, per-sample-averaged nIoU, and the
// object-level Pd / Fa pair with centroid-matched connected components.

#include <filesystem>
#include <fstream>

#include "tcif/data_synth.hpp"
#include "tcif/network.hpp"

namespace tcif::metrics {

struct BinaryMask {
    int64_t height = 0, width = 0;
    std::vector<uint8_t> data;  // 0/1
};

// sigmoid(logit) > threshold; accepts [H,W] or [1,1,H,W] logits
inline BinaryMask binarize(const Tensor& logits, double threshold = 0.5) {
    int64_t h, w;
    if (logits.ndim() == 2) {
        h = logits.dim(0);
        w = logits.dim(1);
    } else if (logits.ndim() == 4 && logits.dim(0) == 1 && logits.dim(1) == 1) {
        h = logits.dim(2);
        w = logits.dim(3);
    } else {
        throw DimensionError("binarize: need [H,W] or [1,1,H,W] logits, got " +
                             shape_str(logits.shape()));
    }
    // p > thr  <=>  logit > log(thr/(1-thr))
    const double cut = std::log(threshold / (1.0 - threshold));
    BinaryMask m{h, w, std::vector<uint8_t>(static_cast<size_t>(h * w))};
    for (int64_t i = 0; i < h * w; ++i) m.data[static_cast<size_t>(i)] = logits.data()[i] > cut;
    return m;
}

// Two-pass union-find labeling; labels are 1..count in scan order.
inline std::vector<int32_t> connected_components(const BinaryMask& m, int connectivity,
                                                 int32_t* count) {
    if (connectivity != 4 && connectivity != 8)
        throw ConfigError("connected_components: connectivity must be 4 or 8");
    const int64_t H = m.height, W = m.width;
    std::vector<int32_t> label(static_cast<size_t>(H * W), 0);
    std::vector<int32_t> parent{0};
    auto find = [&](int32_t a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    };
    auto unite = [&](int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    };
    for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j) {
            if (!m.data[static_cast<size_t>(i * W + j)]) continue;
            int32_t neigh[4];
            int nn = 0;
            if (i > 0 && label[static_cast<size_t>((i - 1) * W + j)])
                neigh[nn++] = label[static_cast<size_t>((i - 1) * W + j)];
            if (j > 0 && label[static_cast<size_t>(i * W + j - 1)])
                neigh[nn++] = label[static_cast<size_t>(i * W + j - 1)];
            if (connectivity == 8) {
                if (i > 0 && j > 0 && label[static_cast<size_t>((i - 1) * W + j - 1)])
                    neigh[nn++] = label[static_cast<size_t>((i - 1) * W + j - 1)];
                if (i > 0 && j + 1 < W && label[static_cast<size_t>((i - 1) * W + j + 1)])
                    neigh[nn++] = label[static_cast<size_t>((i - 1) * W + j + 1)];
            }
            if (nn == 0) {
                parent.push_back(static_cast<int32_t>(parent.size()));
                label[static_cast<size_t>(i * W + j)] = static_cast<int32_t>(parent.size() - 1);
            } else {
                int32_t mn = neigh[0];
                for (int k = 1; k < nn; ++k) mn = std::min(mn, neigh[k]);
                label[static_cast<size_t>(i * W + j)] = mn;
                for (int k = 0; k < nn; ++k) unite(mn, neigh[k]);
            }
        }
    // compress to dense labels in first-appearance order
    std::vector<int32_t> remap(parent.size(), 0);
    int32_t next = 0;
    for (auto& l : label) {
        if (!l) continue;
        const int32_t root = find(l);
        if (!remap[static_cast<size_t>(root)]) remap[static_cast<size_t>(root)] = ++next;
        l = remap[static_cast<size_t>(root)];
    }
    if (count) *count = next;
    return label;
}

struct Component {
    int64_t size = 0;
    double centroid_i = 0, centroid_j = 0;
};

inline std::vector<Component> component_stats(const std::vector<int32_t>& labels,
                                              int32_t count, int64_t h, int64_t w) {
    std::vector<Component> comps(static_cast<size_t>(count));
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
            const int32_t l = labels[static_cast<size_t>(i * w + j)];
            if (!l) continue;
            Component& c = comps[static_cast<size_t>(l - 1)];
            c.size += 1;
            c.centroid_i += static_cast<double>(i);
            c.centroid_j += static_cast<double>(j);
        }
    for (Component& c : comps) {
        c.centroid_i /= static_cast<double>(c.size);
        c.centroid_j /= static_cast<double>(c.size);
    }
    return comps;
}

struct SampleCounts {
    int64_t tp = 0;            // true-positive pixels
    int64_t t = 0;             // ground-truth positive pixels
    int64_t p = 0;             // predicted positive pixels
    int64_t gt_targets = 0;
    int64_t matched = 0;       // detected GT targets
    int64_t false_pixels = 0;  // pixels of unmatched predicted components
    int64_t total_pixels = 0;
};

struct MetricReport {
    double iou = 0.0;
    double niou = 0.0;
    double pd = 0.0;
    double fa = 0.0;
    int64_t n_samples = 0;
    bool pd_degenerate = false;  // no GT target anywhere in the set
    std::vector<SampleCounts> per_sample;
};

namespace detail_metrics {

inline void check_pair(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw DimensionError("metrics: prediction " + std::to_string(pred.height) + "x" +
                             std::to_string(pred.width) + " vs ground truth " +
                             std::to_string(gt.height) + "x" + std::to_string(gt.width));
}

inline SampleCounts sample_counts(const BinaryMask& pred, const BinaryMask& gt,
                                  double match_dist) {
    check_pair(pred, gt);
    SampleCounts sc;
    sc.total_pixels = pred.height * pred.width;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        sc.p += pred.data[i];
        sc.t += gt.data[i];
        sc.tp += pred.data[i] && gt.data[i];
    }
    int32_t n_gt = 0, n_pred = 0;
    const auto gl = connected_components(gt, 8, &n_gt);
    const auto pl = connected_components(pred, 8, &n_pred);
    const auto gc = component_stats(gl, n_gt, gt.height, gt.width);
    const auto pc = component_stats(pl, n_pred, pred.height, pred.width);
    sc.gt_targets = n_gt;

    // one-to-one greedy by centroid distance
    struct Pair {
        double dist;
        int32_t g, p;
    };
    std::vector<Pair> pairs;
    for (int32_t g = 0; g < n_gt; ++g)
        for (int32_t p = 0; p < n_pred; ++p) {
            const double di = gc[static_cast<size_t>(g)].centroid_i - pc[static_cast<size_t>(p)].centroid_i;
            const double dj = gc[static_cast<size_t>(g)].centroid_j - pc[static_cast<size_t>(p)].centroid_j;
            const double d = std::sqrt(di * di + dj * dj);
            if (d <= match_dist) pairs.push_back({d, g, p});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.g != b.g) return a.g < b.g;
        return a.p < b.p;
    });
    std::vector<bool> g_used(static_cast<size_t>(n_gt)), p_used(static_cast<size_t>(n_pred));
    for (const Pair& pr : pairs) {
        if (g_used[static_cast<size_t>(pr.g)] || p_used[static_cast<size_t>(pr.p)]) continue;
        g_used[static_cast<size_t>(pr.g)] = true;
        p_used[static_cast<size_t>(pr.p)] = true;
        sc.matched += 1;
    }
    for (int32_t p = 0; p < n_pred; ++p)
        if (!p_used[static_cast<size_t>(p)]) sc.false_pixels += pc[static_cast<size_t>(p)].size;
    return sc;
}

}  // namespace detail_metrics

inline MetricReport compute_report(const std::vector<BinaryMask>& preds,
                                   const std::vector<BinaryMask>& gts,
                                   double match_dist = 3.0) {
    if (preds.size() != gts.size())
        throw DimensionError("metrics: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(gts.size()) +
                             " ground truths");
    MetricReport r;
    r.n_samples = static_cast<int64_t>(preds.size());
    int64_t sum_tp = 0, sum_t = 0, sum_p = 0, sum_gt = 0, sum_matched = 0;
    int64_t sum_false = 0, sum_pixels = 0;
    double niou_acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        SampleCounts sc = detail_metrics::sample_counts(preds[i], gts[i], match_dist);
        sum_tp += sc.tp;
        sum_t += sc.t;
        sum_p += sc.p;
        sum_gt += sc.gt_targets;
        sum_matched += sc.matched;
        sum_false += sc.false_pixels;
        sum_pixels += sc.total_pixels;
        const int64_t uni = sc.t + sc.p - sc.tp;
        niou_acc += uni == 0 ? 1.0 : static_cast<double>(sc.tp) / static_cast<double>(uni);
        r.per_sample.push_back(sc);
    }
    const int64_t pooled_union = sum_t + sum_p - sum_tp;
    r.iou = pooled_union == 0 ? 1.0
                              : static_cast<double>(sum_tp) / static_cast<double>(pooled_union);
    r.niou = preds.empty() ? 0.0 : niou_acc / static_cast<double>(preds.size());
    if (sum_gt == 0) {
        r.pd = 1.0;
        r.pd_degenerate = true;
    } else {
        r.pd = static_cast<double>(sum_matched) / static_cast<double>(sum_gt);
    }
    r.fa = sum_pixels == 0 ? 0.0
                           : static_cast<double>(sum_false) / static_cast<double>(sum_pixels);
    return r;
}

inline double iou(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts) {
    return compute_report(preds, gts).iou;
}

inline double niou(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts) {
    return compute_report(preds, gts).niou;
}

inline std::pair<double, double> pd_fa(const std::vector<BinaryMask>& preds,
                                       const std::vector<BinaryMask>& gts,
                                       double match_dist = 3.0,
                                       bool* degenerate = nullptr) {
    MetricReport r = compute_report(preds, gts, match_dist);
    if (degenerate) *degenerate = r.pd_degenerate;
    return {r.pd, r.fa};
}

inline BinaryMask from_mask(const synth::Mask& m, int64_t h, int64_t w) {
    return BinaryMask{h, w, m};
}

// Runs the model over a sample set and scores the thresholded main head.
inline MetricReport evaluate(const nn::Model& model,
                             const std::vector<synth::SceneSample>& samples,
                             double match_dist = 3.0) {
    std::vector<BinaryMask> preds, gts;
    preds.reserve(samples.size());
    gts.reserve(samples.size());
    for (const synth::SceneSample& s : samples) {
        Tensor img = Tensor::from(s.image, {1, 1, s.height, s.width});
        nn::NetworkOutput out = model.forward(img);
        preds.push_back(binarize(out.main_logits));
        gts.push_back(from_mask(s.mask, s.height, s.width));
    }
    return compute_report(preds, gts, match_dist);
}

inline void write_report_csv(const std::filesystem::path& path, const MetricReport& r) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << "metric,value\n";
    f << "iou," << kv::format_f64(r.iou) << "\n";
    f << "niou," << kv::format_f64(r.niou) << "\n";
    f << "pd," << kv::format_f64(r.pd) << "\n";
    f << "fa," << kv::format_f64(r.fa) << "\n";
    f << "n_samples," << r.n_samples << "\n";
    f << "sample,tp,t,p,gt_targets,matched,false_pixels\n";
    for (size_t i = 0; i < r.per_sample.size(); ++i) {
        const SampleCounts& s = r.per_sample[i];
        f << i << "," << s.tp << "," << s.t << "," << s.p << "," << s.gt_targets << ","
          << s.matched << "," << s.false_pixels << "\n";
    }
}

// Fa shown in 1e-6 units, the usual reporting convention.
inline std::string format_report(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "samples %lld\n"
                  "  IoU   %.4f\n"
                  "  nIoU  %.4f\n"
                  "  Pd    %.4f%s\n"
                  "  Fa    %.3f x 1e-6\n",
                  static_cast<long long>(r.n_samples), r.iou, r.niou, r.pd,
                  r.pd_degenerate ? " (no GT targets in set)" : "", r.fa * 1e6);
    return buf;
}

}  // namespace tcif::metrics
