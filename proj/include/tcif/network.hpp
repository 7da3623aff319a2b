#pragma once

// Four-stage encoder of TCIT blocks (axial conduction attention in
// parallel with the boundary conv branch), a three-deconvolution
// decoder with additive skip fusion, segmentation heads, compound Dice
// loss, AdaGrad training, and checkpoint I/O.

#include <array>
#include <optional>

#include "tcif/keyval.hpp"
#include "tcif/tcbm.hpp"
#include "tcif/tcia.hpp"

namespace tcif::nn {

struct ModelConfig {
    std::array<int64_t, 4> stage_channels{16, 32, 64, 128};
    std::array<int64_t, 4> blocks_per_stage{2, 2, 2, 2};
    std::array<int64_t, 4> heads_per_stage{1, 2, 4, 8};
    static constexpr std::array<int64_t, 4> stage_strides{4, 2, 2, 2};
    int64_t ffn_expansion = 4;
    int64_t input_h = 64, input_w = 64;
    bool use_tcia = true;
    bool use_tcbm = true;

    void validate() const {
        if (input_h % 32 != 0 || input_w % 32 != 0)
            throw ConfigError("input size " + std::to_string(input_h) + "x" +
                              std::to_string(input_w) + " must be divisible by 32");
        for (int s = 0; s < 4; ++s) {
            const int64_t c = stage_channels[static_cast<size_t>(s)];
            const int64_t h = heads_per_stage[static_cast<size_t>(s)];
            if (c % 4 != 0)
                throw ConfigError("stage " + std::to_string(s + 1) + " channels " +
                                  std::to_string(c) + " not divisible by 4");
            if (h < 1 || (c / 2) % h != 0)
                throw ConfigError("stage " + std::to_string(s + 1) + " channels " +
                                  std::to_string(c) + " incompatible with " +
                                  std::to_string(h) + " heads");
            if (blocks_per_stage[static_cast<size_t>(s)] < 1)
                throw ConfigError("blocks_per_stage must be >= 1");
        }
        if (ffn_expansion < 1) throw ConfigError("ffn_expansion must be >= 1");
    }

    void to_doc(kv::Doc& d) const {
        d.set("model", "stage_channels",
              kv::format_i64_list({stage_channels.begin(), stage_channels.end()}));
        d.set("model", "blocks_per_stage",
              kv::format_i64_list({blocks_per_stage.begin(), blocks_per_stage.end()}));
        d.set("model", "heads_per_stage",
              kv::format_i64_list({heads_per_stage.begin(), heads_per_stage.end()}));
        d.set_i64("model", "ffn_expansion", ffn_expansion);
        d.set_i64("model", "input_h", input_h);
        d.set_i64("model", "input_w", input_w);
        d.set_bool("model", "use_tcia", use_tcia);
        d.set_bool("model", "use_tcbm", use_tcbm);
    }

    static ModelConfig from_doc(const kv::Doc& d) {
        ModelConfig c;
        auto arr4 = [&](const char* key, std::array<int64_t, 4>& dst) {
            if (const std::string* v = d.find("model", key)) {
                const auto list = kv::parse_i64_list(*v);
                if (list.size() != 4)
                    throw ConfigError(std::string("model.") + key + " needs 4 entries");
                std::copy(list.begin(), list.end(), dst.begin());
            }
        };
        arr4("stage_channels", c.stage_channels);
        arr4("blocks_per_stage", c.blocks_per_stage);
        arr4("heads_per_stage", c.heads_per_stage);
        c.ffn_expansion = d.get_i64_or("model", "ffn_expansion", c.ffn_expansion);
        c.input_h = d.get_i64_or("model", "input_h", c.input_h);
        c.input_w = d.get_i64_or("model", "input_w", c.input_w);
        c.use_tcia = d.get_bool_or("model", "use_tcia", c.use_tcia);
        c.use_tcbm = d.get_bool_or("model", "use_tcbm", c.use_tcbm);
        return c;
    }
};

struct LayerNormParams {
    Tensor gain, bias;

    static LayerNormParams init(int64_t channels) {
        LayerNormParams p;
        p.gain = Tensor::full({channels}, 1.0);
        p.gain.set_requires_grad(true);
        p.bias = Tensor({channels}, true);
        return p;
    }
};

struct FfnParams {
    Tensor w1, b1, w2, b2;

    static FfnParams init(int64_t channels, int64_t expansion, Rng& rng) {
        FfnParams p;
        const int64_t hidden = channels * expansion;
        const double s1 = 1.0 / std::sqrt(static_cast<double>(channels));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        p.w1 = Tensor::uniform({channels, hidden}, -s1, s1, rng, true);
        p.b1 = Tensor({hidden}, true);
        p.w2 = Tensor::uniform({hidden, channels}, -s2, s2, rng, true);
        p.b2 = Tensor({channels}, true);
        return p;
    }
};

struct TcitBlockParams {
    LayerNormParams norm1, norm2;
    std::optional<TciaParams> tcia;
    std::optional<TcbmParams> tcbm;
    FfnParams ffn;
};

inline Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor tokens = reshape(permute(x, {0, 2, 3, 1}), {B * H * W, C});
    Tensor h = gelu(broadcast_add(matmul(tokens, p.w1), p.b1, 1));
    Tensor out = broadcast_add(matmul(h, p.w2), p.b2, 1);
    return permute(reshape(out, {B, H, W, C}), {0, 3, 1, 2});
}

struct TcitOut {
    Tensor y;
    std::optional<Tensor> tcia_delta;  // gamma-scaled attention term
    std::optional<Tensor> tcbm_delta;  // h_step-scaled boundary term
};

// Pre-norm block: u = x + tcia(norm1 x) + (tcbm(norm1 x) - norm1 x),
// y = u + ffn(norm2 u). Disabled branches drop their term entirely.
inline TcitOut tcit_forward(const Tensor& x, const TcitBlockParams& blk) {
    TcitOut out;
    Tensor u = x;
    if (blk.tcia || blk.tcbm) {
        Tensor n1 = layer_norm(x, blk.norm1.gain, blk.norm1.bias, 1);
        if (blk.tcia) {
            out.tcia_delta = tcia_forward(n1, *blk.tcia);
            u = add(u, *out.tcia_delta);
        }
        if (blk.tcbm) {
            out.tcbm_delta = tcbm_delta(n1, *blk.tcbm);
            u = add(u, *out.tcbm_delta);
        }
    }
    Tensor n2 = layer_norm(u, blk.norm2.gain, blk.norm2.bias, 1);
    out.y = add(u, ffn_forward(n2, blk.ffn));
    return out;
}

// x + depthwise 3x3 of x; resolution-agnostic positional coding.
inline Tensor position_code(const Tensor& x, const Tensor& dw_weight) {
    return add(x, depthwise_conv2d(x, dw_weight, PadMode::Zero));
}

struct NetworkOutput {
    Tensor main_logits;          // B x 1 x H x W
    Tensor aux_body_logits;      // TCIA-branch head
    Tensor aux_boundary_logits;  // TCBM-branch head
};

struct ForwardTrace {
    std::vector<Tensor> encoder_stages;  // 4 maps, coarse to coarser
    std::vector<Tensor> decoder_stages;  // 3 maps, coarse to fine
};

class Model {
public:
    Model(ModelConfig cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        int64_t in_ch = 1;
        for (int s = 0; s < 4; ++s) {
            const int64_t c = cfg_.stage_channels[static_cast<size_t>(s)];
            const int64_t k = s == 0 ? 7 : 3;
            Stage st;
            const double se = 1.0 / std::sqrt(static_cast<double>(in_ch * k * k));
            st.embed_w = Tensor::uniform({c, in_ch, k, k}, -se, se, rng, true);
            st.embed_b = Tensor({c}, true);
            const std::string sp = "enc" + std::to_string(s + 1);
            reg(sp + ".embed.w", st.embed_w);
            reg(sp + ".embed.b", st.embed_b);
            const double sd = 1.0 / std::sqrt(9.0);
            st.pos_w = Tensor::uniform({c, 1, 3, 3}, -sd, sd, rng, true);
            reg(sp + ".pos.w", st.pos_w);
            for (int64_t b = 0; b < cfg_.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
                TcitBlockParams blk;
                blk.norm1 = LayerNormParams::init(c);
                blk.norm2 = LayerNormParams::init(c);
                if (cfg_.use_tcia)
                    blk.tcia = TciaParams::init(c, cfg_.heads_per_stage[static_cast<size_t>(s)], rng);
                if (cfg_.use_tcbm) blk.tcbm = TcbmParams::init(c, rng);
                blk.ffn = FfnParams::init(c, cfg_.ffn_expansion, rng);
                const std::string bp = sp + ".blk" + std::to_string(b);
                reg(bp + ".norm1.gain", blk.norm1.gain);
                reg(bp + ".norm1.bias", blk.norm1.bias);
                if (blk.tcia) {
                    reg(bp + ".tcia.q.w", blk.tcia->proj_q_w);
                    reg(bp + ".tcia.q.b", blk.tcia->proj_q_b);
                    reg(bp + ".tcia.k.w", blk.tcia->proj_k_w);
                    reg(bp + ".tcia.k.b", blk.tcia->proj_k_b);
                    reg(bp + ".tcia.v.w", blk.tcia->proj_v_w);
                    reg(bp + ".tcia.v.b", blk.tcia->proj_v_b);
                    reg(bp + ".tcia.out.w", blk.tcia->proj_out_w);
                    reg(bp + ".tcia.out.b", blk.tcia->proj_out_b);
                    reg(bp + ".tcia.gamma", blk.tcia->gamma);
                }
                if (blk.tcbm) {
                    reg(bp + ".tcbm.conv1.w", blk.tcbm->conv1_w);
                    reg(bp + ".tcbm.conv1.b", blk.tcbm->conv1_b);
                    reg(bp + ".tcbm.conv2.w", blk.tcbm->conv2_w);
                    reg(bp + ".tcbm.conv2.b", blk.tcbm->conv2_b);
                    reg(bp + ".tcbm.h_step", blk.tcbm->h_step);
                }
                reg(bp + ".norm2.gain", blk.norm2.gain);
                reg(bp + ".norm2.bias", blk.norm2.bias);
                reg(bp + ".ffn.w1", blk.ffn.w1);
                reg(bp + ".ffn.b1", blk.ffn.b1);
                reg(bp + ".ffn.w2", blk.ffn.w2);
                reg(bp + ".ffn.b2", blk.ffn.b2);
                st.blocks.push_back(std::move(blk));
            }
            stages_.push_back(std::move(st));
            in_ch = c;
        }
        // decoder: stage4 -> 3 -> 2 -> 1 channel widths, stride-2 deconvs
        for (int d = 0; d < 3; ++d) {
            const int64_t from = cfg_.stage_channels[static_cast<size_t>(3 - d)];
            const int64_t to = cfg_.stage_channels[static_cast<size_t>(2 - d)];
            const double sd = 1.0 / std::sqrt(static_cast<double>(from * 4));
            dec_w_[static_cast<size_t>(d)] = Tensor::uniform({from, to, 2, 2}, -sd, sd, rng, true);
            dec_b_[static_cast<size_t>(d)] = Tensor({to}, true);
            const double sa = 1.0 / std::sqrt(static_cast<double>(to));
            align_w_[static_cast<size_t>(d)] = Tensor::uniform({to, to, 1, 1}, -sa, sa, rng, true);
            align_b_[static_cast<size_t>(d)] = Tensor({to}, true);
            const std::string dp = "dec" + std::to_string(3 - d);
            reg(dp + ".deconv.w", dec_w_[static_cast<size_t>(d)]);
            reg(dp + ".deconv.b", dec_b_[static_cast<size_t>(d)]);
            reg(dp + ".align.w", align_w_[static_cast<size_t>(d)]);
            reg(dp + ".align.b", align_b_[static_cast<size_t>(d)]);
        }
        const int64_t c1 = cfg_.stage_channels[0], c4 = cfg_.stage_channels[3];
        const double sh = 1.0 / std::sqrt(static_cast<double>(c1));
        head_w_ = Tensor::uniform({1, c1, 1, 1}, -sh, sh, rng, true);
        head_b_ = Tensor({1}, true);
        reg("head.main.w", head_w_);
        reg("head.main.b", head_b_);
        const double sx = 1.0 / std::sqrt(static_cast<double>(c4));
        aux_body_w_ = Tensor::uniform({1, c4, 1, 1}, -sx, sx, rng, true);
        aux_body_b_ = Tensor({1}, true);
        aux_bnd_w_ = Tensor::uniform({1, c4, 1, 1}, -sx, sx, rng, true);
        aux_bnd_b_ = Tensor({1}, true);
        reg("head.body.w", aux_body_w_);
        reg("head.body.b", aux_body_b_);
        reg("head.boundary.w", aux_bnd_w_);
        reg("head.boundary.b", aux_bnd_b_);
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }

    int64_t count_params() const {
        int64_t n = 0;
        for (const auto& [name, t] : params_) n += t.numel();
        return n;
    }

    NetworkOutput forward(const Tensor& image, ForwardTrace* trace = nullptr) const {
        if (image.ndim() != 4 || image.dim(1) != 1)
            throw DimensionError("forward: need B x 1 x H x W input, got " +
                                 shape_str(image.shape()));
        const int64_t H = image.dim(2), W = image.dim(3);
        if (H % 32 != 0 || W % 32 != 0)
            throw ConfigError("forward: input " + std::to_string(H) + "x" +
                              std::to_string(W) + " not divisible by 32");
        const int64_t B = image.dim(0);

        std::vector<Tensor> enc;
        Tensor x = image;
        Tensor body_acc, bnd_acc;
        for (int s = 0; s < 4; ++s) {
            const Stage& st = stages_[static_cast<size_t>(s)];
            const int64_t stride = ModelConfig::stage_strides[static_cast<size_t>(s)];
            x = broadcast_add(conv2d(x, st.embed_w, stride, PadMode::Zero), st.embed_b, 1);
            x = position_code(x, st.pos_w);
            const bool last = s == 3;
            if (last) {
                body_acc = Tensor({B, cfg_.stage_channels[3], x.dim(2), x.dim(3)});
                bnd_acc = Tensor({B, cfg_.stage_channels[3], x.dim(2), x.dim(3)});
            }
            for (const TcitBlockParams& blk : st.blocks) {
                TcitOut o = tcit_forward(x, blk);
                if (last && o.tcia_delta) body_acc = add(body_acc, *o.tcia_delta);
                if (last && o.tcbm_delta) bnd_acc = add(bnd_acc, *o.tcbm_delta);
                x = o.y;
            }
            enc.push_back(x);
            if (trace) trace->encoder_stages.push_back(x);
        }

        Tensor d = enc[3];
        for (int i = 0; i < 3; ++i) {
            d = broadcast_add(deconv2d(d, dec_w_[static_cast<size_t>(i)], 2),
                              dec_b_[static_cast<size_t>(i)], 1);
            Tensor skip = broadcast_add(
                conv2d(enc[static_cast<size_t>(2 - i)], align_w_[static_cast<size_t>(i)], 1,
                       PadMode::Zero, 0),
                align_b_[static_cast<size_t>(i)], 1);
            d = add(d, skip);
            if (trace) trace->decoder_stages.push_back(d);
        }

        NetworkOutput out;
        Tensor up = bilinear_upsample(d, 4);
        out.main_logits =
            broadcast_add(conv2d(up, head_w_, 1, PadMode::Zero, 0), head_b_, 1);
        const int64_t aux_factor = H / enc[3].dim(2);
        Tensor body = broadcast_add(conv2d(body_acc, aux_body_w_, 1, PadMode::Zero, 0),
                                    aux_body_b_, 1);
        out.aux_body_logits = bilinear_upsample(body, aux_factor);
        Tensor bnd = broadcast_add(conv2d(bnd_acc, aux_bnd_w_, 1, PadMode::Zero, 0),
                                   aux_bnd_b_, 1);
        out.aux_boundary_logits = bilinear_upsample(bnd, aux_factor);
        return out;
    }

    const std::vector<TcitBlockParams>& stage_blocks(int s) const {
        return stages_[static_cast<size_t>(s)].blocks;
    }

private:
    struct Stage {
        Tensor embed_w, embed_b;
        Tensor pos_w;
        std::vector<TcitBlockParams> blocks;
    };

    void reg(std::string name, Tensor& t) {
        t.set_requires_grad(true);
        params_.emplace_back(std::move(name), t);
    }

    ModelConfig cfg_;
    std::vector<Stage> stages_;
    std::array<Tensor, 3> dec_w_, dec_b_, align_w_, align_b_;
    Tensor head_w_, head_b_, aux_body_w_, aux_body_b_, aux_bnd_w_, aux_bnd_b_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

// ---------------------------------------------------------------------------
// losses

// Soft Dice over the whole batch: 1 - (2 sum(xy) + eps)/(sum x + sum y + eps),
// x = sigmoid(logits).
inline Tensor dice_loss(const Tensor& pred_logits, const Tensor& target_mask,
                        double eps = 1.0) {
    detail::check_same_shape(pred_logits, target_mask, "dice_loss");
    for (int64_t i = 0; i < target_mask.numel(); ++i) {
        const double v = target_mask.data()[i];
        if (v != 0.0 && v != 1.0)
            throw ConfigError("dice_loss: target mask must be binary, found " +
                              std::to_string(v));
    }
    Tensor p = sigmoid(pred_logits);
    Tensor inter = sum_all(mul(p, target_mask));
    Tensor denom = add_scalar(add(sum_all(p), sum_all(target_mask)), eps);
    Tensor ratio = div(add_scalar(scalar_mul(inter, 2.0), eps), denom);
    return add_scalar(scalar_mul(ratio, -1.0), 1.0);
}

struct LossComponents {
    double seg = 0.0, tb = 0.0, ib = 0.0, total = 0.0;
};

// L = dice(main, mask) + dice(boundary head, boundary mask) + dice(body
// head, mask), unit weights.
inline Tensor total_loss(const NetworkOutput& out, const Tensor& mask,
                         const Tensor& boundary_mask,
                         LossComponents* comps = nullptr) {
    Tensor l_seg = dice_loss(out.main_logits, mask);
    Tensor l_tb = dice_loss(out.aux_boundary_logits, boundary_mask);
    Tensor l_ib = dice_loss(out.aux_body_logits, mask);
    Tensor total = add(add(l_seg, l_tb), l_ib);
    if (comps) {
        comps->seg = l_seg.item();
        comps->tb = l_tb.item();
        comps->ib = l_ib.item();
        comps->total = total.item();
    }
    return total;
}

// ---------------------------------------------------------------------------
// optimization

class AdaGrad {
public:
    explicit AdaGrad(double lr = 0.05, double weight_decay = 0.0004, double eps = 1e-10)
        : lr_(lr), wd_(weight_decay), eps_(eps) {}

    void step(std::vector<std::pair<std::string, Tensor>>& params) {
        if (acc_.empty()) {
            acc_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i)
                acc_[i].assign(static_cast<size_t>(params[i].second.numel()), 0.0);
        }
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& p = params[i].second;
            const double* g = p.grad();
            double* a = acc_[i].data();
            double* w = p.data();
            const int64_t n = p.numel();
            for (int64_t j = 0; j < n; ++j) {
                a[j] += g[j] * g[j];
                w[j] -= lr_ * g[j] / (std::sqrt(a[j]) + eps_);
                w[j] -= lr_ * wd_ * w[j];  // decoupled decay
            }
        }
    }

    static void zero_grad(std::vector<std::pair<std::string, Tensor>>& params) {
        for (auto& [name, t] : params) t.zero_grad();
    }

    double lr() const { return lr_; }
    double weight_decay() const { return wd_; }

private:
    double lr_, wd_, eps_;
    std::vector<std::vector<double>> acc_;
};

struct TrainSample {
    Tensor image;     // H x W in [0,1]
    Tensor mask;      // H x W binary
    Tensor boundary;  // H x W binary
};

inline Tensor stack_batch(const std::vector<TrainSample>& samples,
                          const std::vector<size_t>& idx, size_t begin, size_t end,
                          Tensor TrainSample::* field) {
    const Tensor& first = samples[idx[begin]].*field;
    const int64_t H = first.dim(0), W = first.dim(1);
    Tensor out({static_cast<int64_t>(end - begin), 1, H, W});
    for (size_t i = begin; i < end; ++i) {
        const Tensor& t = samples[idx[i]].*field;
        if (t.dim(0) != H || t.dim(1) != W)
            throw DimensionError("stack_batch: mixed sample sizes");
        std::copy(t.data(), t.data() + H * W,
                  out.data() + static_cast<int64_t>(i - begin) * H * W);
    }
    return out;
}

inline LossComponents train_step(Model& model, AdaGrad& opt, const Tensor& images,
                                 const Tensor& masks, const Tensor& boundaries) {
    LossComponents comps;
    {
        Graph graph;
        NetworkOutput out = model.forward(images);
        Tensor loss = total_loss(out, masks, boundaries, &comps);
        graph.backward(loss);
    }
    opt.step(model.params());
    AdaGrad::zero_grad(model.params());
    return comps;
}

struct FitConfig {
    int64_t epochs = 60;
    int64_t batch_size = 4;
    double lr = 0.05;
    double weight_decay = 0.0004;
    uint64_t seed = 0;
};

struct EpochLoss {
    double seg = 0.0, tb = 0.0, ib = 0.0, total = 0.0;
};

using EpochCallback = std::function<void(int64_t epoch, const EpochLoss&)>;

inline std::vector<EpochLoss> fit(Model& model, const std::vector<TrainSample>& train,
                                  const FitConfig& fc, const EpochCallback& cb = {}) {
    if (train.empty()) throw ConfigError("fit: empty training set");
    AdaGrad opt(fc.lr, fc.weight_decay);
    AdaGrad::zero_grad(model.params());
    Rng rng(fc.seed);
    std::vector<size_t> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<EpochLoss> curve;
    for (int64_t e = 0; e < fc.epochs; ++e) {
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<size_t>(
                                      rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
        EpochLoss el;
        size_t seen = 0;
        for (size_t b = 0; b < idx.size(); b += static_cast<size_t>(fc.batch_size)) {
            const size_t end = std::min(idx.size(), b + static_cast<size_t>(fc.batch_size));
            Tensor images = stack_batch(train, idx, b, end, &TrainSample::image);
            Tensor masks = stack_batch(train, idx, b, end, &TrainSample::mask);
            Tensor bnds = stack_batch(train, idx, b, end, &TrainSample::boundary);
            LossComponents c = train_step(model, opt, images, masks, bnds);
            const double w = static_cast<double>(end - b);
            el.seg += c.seg * w;
            el.tb += c.tb * w;
            el.ib += c.ib * w;
            el.total += c.total * w;
            seen += end - b;
        }
        const double inv = 1.0 / static_cast<double>(seen);
        el.seg *= inv;
        el.tb *= inv;
        el.ib *= inv;
        el.total *= inv;
        curve.push_back(el);
        if (cb) cb(e, el);
    }
    return curve;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& curve) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << "epoch,l_seg,l_tb,l_ib,total\n";
    for (size_t e = 0; e < curve.size(); ++e)
        f << e << "," << kv::format_f64(curve[e].seg) << "," << kv::format_f64(curve[e].tb)
          << "," << kv::format_f64(curve[e].ib) << "," << kv::format_f64(curve[e].total)
          << "\n";
}

// ---------------------------------------------------------------------------
// checkpoints
//
// "TCIF" | u32 version | u32 config length | config text |
// per parameter in declaration order:
//   u32 name length | name | u32 extent count | u64 extents | f64 values
// Integers and doubles are little-endian.

namespace detail_ckpt {

template <class T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_raw(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw Error("truncated checkpoint");
    return v;
}

}  // namespace detail_ckpt

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Model& model) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f.write("TCIF", 4);
    detail_ckpt::write_raw<uint32_t>(f, kCheckpointVersion);
    kv::Doc doc;
    model.config().to_doc(doc);
    const std::string cfg = doc.to_text();
    detail_ckpt::write_raw<uint32_t>(f, static_cast<uint32_t>(cfg.size()));
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    for (const auto& [name, t] : model.params()) {
        detail_ckpt::write_raw<uint32_t>(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail_ckpt::write_raw<uint32_t>(f, static_cast<uint32_t>(t.shape().size()));
        for (int64_t d : t.shape())
            detail_ckpt::write_raw<uint64_t>(f, static_cast<uint64_t>(d));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * 8));
    }
    if (!f) throw Error("write failed: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "TCIF")
        throw Error(path + " is not a TCIF checkpoint");
    const uint32_t version = detail_ckpt::read_raw<uint32_t>(f);
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version));
    const uint32_t cfg_len = detail_ckpt::read_raw<uint32_t>(f);
    std::string cfg_text(cfg_len, '\0');
    f.read(cfg_text.data(), cfg_len);
    if (!f) throw Error("truncated checkpoint config");
    Model model(ModelConfig::from_doc(kv::Doc::parse(cfg_text)), 0);
    for (auto& [name, t] : model.params()) {
        const uint32_t nlen = detail_ckpt::read_raw<uint32_t>(f);
        std::string pname(nlen, '\0');
        f.read(pname.data(), nlen);
        if (!f || pname != name)
            throw Error("checkpoint parameter mismatch: expected '" + name + "', got '" +
                        pname + "'");
        const uint32_t rank = detail_ckpt::read_raw<uint32_t>(f);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<int64_t>(detail_ckpt::read_raw<uint64_t>(f));
        if (shape != t.shape())
            throw Error("checkpoint shape mismatch for '" + name + "': " +
                        shape_str(shape) + " vs " + shape_str(t.shape()));
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * 8));
        if (!f) throw Error("truncated checkpoint payload at '" + name + "'");
    }
    f.peek();
    if (!f.eof()) throw Error("trailing bytes in checkpoint " + path);
    return model;
}

}  // namespace tcif::nn
