// tcif: synthetic-scene generation, training, evaluation, inference,
// diffusion simulation, and gradient verification in one binary.
//
// Exit codes: 0 success, 1 usage error, 2 config/precondition error,
// 3 verification failure.

#include <CLI11.hpp>

#include "tcif/tcif.hpp"
#include "tcif/verify.hpp"

namespace fs = std::filesystem;
using namespace tcif;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerification = 3;

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
};

kv::Doc load_config(const std::string& path) {
    if (path.empty()) return kv::Doc{};
    return kv::Doc::load(path);
}

uint64_t sample_seed(uint64_t run_seed, int64_t index) {
    // distinct, deterministic per-sample streams
    return run_seed * 1000003ull + static_cast<uint64_t>(index);
}

std::vector<synth::SceneSample> load_split(const fs::path& data_dir,
                                           const std::string& split) {
    const synth::SynthConfig cfg = synth::read_synth_config(data_dir);
    std::vector<synth::SceneSample> out;
    for (const synth::DatasetEntry& e : synth::read_manifest(data_dir))
        if (split.empty() || e.split == split)
            out.push_back(synth::generate(cfg, e.seed));
    if (out.empty())
        throw ConfigError("no '" + split + "' samples in " + data_dir.string());
    return out;
}

std::vector<nn::TrainSample> to_train_samples(const std::vector<synth::SceneSample>& in) {
    std::vector<nn::TrainSample> out;
    out.reserve(in.size());
    for (const synth::SceneSample& s : in) {
        nn::TrainSample t;
        t.image = Tensor::from(s.image, {s.height, s.width});
        t.mask = Tensor::from(std::vector<double>(s.mask.begin(), s.mask.end()),
                              {s.height, s.width});
        t.boundary = Tensor::from(std::vector<double>(s.boundary.begin(), s.boundary.end()),
                                  {s.height, s.width});
        out.push_back(std::move(t));
    }
    return out;
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir, int64_t n,
              double train_ratio) {
    kv::Doc doc = load_config(common.config_path);
    synth::SynthConfig cfg = synth::SynthConfig::from_doc(doc);
    cfg.validate();
    std::vector<synth::SceneSample> samples;
    std::vector<synth::DatasetEntry> entries;
    const auto labels = synth::split_labels(n, train_ratio, common.seed);
    for (int64_t i = 0; i < n; ++i) {
        synth::SceneSample s = synth::generate(cfg, sample_seed(common.seed, i));
        entries.push_back({i, s.seed, static_cast<int64_t>(s.targets.size()),
                           labels[static_cast<size_t>(i)]});
        samples.push_back(std::move(s));
    }
    synth::write_dataset(out_dir, cfg, samples, entries);

    kv::Doc resolved;
    cfg.to_doc(resolved);
    resolved.set_i64("run", "n", n);
    resolved.set_i64("run", "seed", static_cast<int64_t>(common.seed));
    resolved.set_f64("run", "train_ratio", train_ratio);
    resolved.save((fs::path(out_dir) / "run_config.txt").string());
    std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
    return kExitOk;
}

struct TrainOpts {
    std::string data_dir, out_dir;
    int64_t epochs = 60;
    int64_t batch_size = 4;
    double lr = 0.05;
    double weight_decay = 0.0004;
    bool no_tcia = false;
    bool no_tcbm = false;
    bool quiet = false;
};

int cmd_train(const CommonOpts& common, const TrainOpts& t) {
    kv::Doc doc = load_config(common.config_path);
    nn::ModelConfig mc = nn::ModelConfig::from_doc(doc);
    const synth::SynthConfig sc = synth::read_synth_config(t.data_dir);
    mc.input_h = sc.height;
    mc.input_w = sc.width;
    if (t.no_tcia) mc.use_tcia = false;
    if (t.no_tcbm) mc.use_tcbm = false;
    mc.validate();

    const auto train = to_train_samples(load_split(t.data_dir, "train"));
    nn::Model model(mc, common.seed);
    std::cout << "model parameters: " << model.count_params() << "\n";

    nn::FitConfig fc;
    fc.epochs = t.epochs;
    fc.batch_size = t.batch_size;
    fc.lr = t.lr;
    fc.weight_decay = t.weight_decay;
    fc.seed = common.seed;

    fs::create_directories(t.out_dir);
    const auto curve =
        nn::fit(model, train, fc, [&](int64_t e, const nn::EpochLoss& el) {
            if (!t.quiet)
                std::cout << "epoch " << e << "  seg " << el.seg << "  tb " << el.tb
                          << "  ib " << el.ib << "  total " << el.total << "\n";
        });

    nn::write_loss_csv((fs::path(t.out_dir) / "loss.csv").string(), curve);
    nn::save_checkpoint((fs::path(t.out_dir) / "checkpoint.ckpt").string(), model);

    kv::Doc resolved;
    mc.to_doc(resolved);
    sc.to_doc(resolved);
    resolved.set_f64("optim", "lr", fc.lr);
    resolved.set_f64("optim", "weight_decay", fc.weight_decay);
    resolved.set_i64("optim", "batch_size", fc.batch_size);
    resolved.set_i64("optim", "epochs", fc.epochs);
    resolved.set_i64("run", "seed", static_cast<int64_t>(common.seed));
    resolved.set("run", "data_dir", t.data_dir);
    resolved.set_i64("run", "param_count", model.count_params());
    resolved.save((fs::path(t.out_dir) / "config_resolved.txt").string());
    std::cout << "final loss " << curve.back().total << "; wrote " << t.out_dir << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir,
             const std::string& out_dir, const std::string& split, double match_dist) {
    nn::Model model = nn::load_checkpoint(ckpt);
    const auto scenes = load_split(data_dir, split);
    const metrics::MetricReport report = metrics::evaluate(model, scenes, match_dist);
    std::cout << metrics::format_report(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        metrics::write_report_csv(fs::path(out_dir) / "report.csv", report);
        kv::Doc resolved;
        resolved.set("run", "checkpoint", ckpt);
        resolved.set("run", "data_dir", data_dir);
        resolved.set("run", "split", split);
        resolved.set_f64("run", "match_dist", match_dist);
        resolved.save((fs::path(out_dir) / "eval_config.txt").string());
    }
    return kExitOk;
}

void dump_stage_maps(const std::vector<Tensor>& stages, const std::string& prefix,
                     bool encoder) {
    for (size_t i = 0; i < stages.size(); ++i) {
        const Tensor& t = stages[i];
        const int64_t C = t.dim(1), H = t.dim(2), W = t.dim(3);
        std::vector<double> mean(static_cast<size_t>(H * W), 0.0);
        for (int64_t c = 0; c < C; ++c)
            for (int64_t p = 0; p < H * W; ++p)
                mean[static_cast<size_t>(p)] += t.data()[c * H * W + p];
        for (double& v : mean) v /= static_cast<double>(C);
        const std::string name = encoder ? "enc" + std::to_string(i + 1)
                                         : "dec" + std::to_string(3 - i);
        imgio::save_pgm(prefix + "_" + name + ".pgm",
                        imgio::normalize_quantize(mean, H, W));
    }
}

int cmd_infer(const std::string& ckpt, const std::string& image_path,
              const std::string& out_prefix) {
    nn::Model model = nn::load_checkpoint(ckpt);
    int64_t h = 0, w = 0;
    const auto img = synth::load_image(image_path, &h, &w);
    Tensor input = Tensor::from(img, {1, 1, h, w});
    nn::ForwardTrace trace;
    const nn::NetworkOutput out = model.forward(input, &trace);

    auto prob_image = [&](const Tensor& logits) {
        std::vector<double> p(static_cast<size_t>(h * w));
        for (int64_t i = 0; i < h * w; ++i)
            p[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-logits.data()[i]));
        return p;
    };
    imgio::save_pgm(out_prefix + "_main.pgm",
                    imgio::quantize(prob_image(out.main_logits), h, w));
    imgio::save_pgm(out_prefix + "_body.pgm",
                    imgio::quantize(prob_image(out.aux_body_logits), h, w));
    imgio::save_pgm(out_prefix + "_boundary.pgm",
                    imgio::quantize(prob_image(out.aux_boundary_logits), h, w));
    const metrics::BinaryMask mask = metrics::binarize(out.main_logits);
    synth::save_mask(out_prefix + "_mask.png", mask.data, h, w);
    dump_stage_maps(trace.encoder_stages, out_prefix, true);
    dump_stage_maps(trace.decoder_stages, out_prefix, false);

    kv::Doc resolved;
    resolved.set("run", "checkpoint", ckpt);
    resolved.set("run", "image", image_path);
    resolved.save(out_prefix + "_config.txt");
    std::cout << "wrote " << out_prefix << "_{main,body,boundary}.pgm, _mask.png and "
              << "stage maps\n";
    return kExitOk;
}

struct SimOpts {
    double gamma = 0.25;
    int64_t size = 64;
    int64_t steps = 1000;
    std::string boundary = "replicate";
    std::string out_dir;
    int64_t dump_every = 0;
    std::string init = "impulse";
};

int cmd_simulate(const CommonOpts& common, const SimOpts& s) {
    pmde::PixelField field;
    const pmde::Boundary b = pmde::boundary_from_name(s.boundary);
    if (s.init == "impulse") {
        field = pmde::PixelField::impulse(s.size, s.size, s.size / 2, s.size / 2, 1.0, b,
                                          s.gamma);
    } else if (s.init == "random") {
        field = pmde::PixelField::constant(s.size, s.size, 0.0, b, s.gamma);
        Rng rng(common.seed);
        for (double& v : field.values) v = rng.uniform();
    } else {
        throw ConfigError("unknown init '" + s.init + "' (impulse|random)");
    }
    pmde::FrameSink sink;
    if (!s.out_dir.empty() && s.dump_every > 0) sink = pmde::pgm_frame_sink(s.out_dir);
    const pmde::PixelField final_field =
        pmde::simulate(field, s.steps, s.dump_every, sink);

    double total = 0.0, mx = final_field.values[0], mn = final_field.values[0];
    for (double v : final_field.values) {
        total += v;
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    std::cout << "steps " << s.steps << "  gamma " << s.gamma << "  boundary "
              << s.boundary << "\n"
              << "final sum " << kv::format_f64(total) << "  min " << kv::format_f64(mn)
              << "  max " << kv::format_f64(mx) << "\n";
    if (!s.out_dir.empty()) {
        fs::create_directories(s.out_dir);
        imgio::save_pgm(fs::path(s.out_dir) / "final.pgm",
                        imgio::normalize_quantize(final_field.values, s.size, s.size));
        kv::Doc resolved;
        resolved.set_f64("run", "gamma", s.gamma);
        resolved.set_i64("run", "size", s.size);
        resolved.set_i64("run", "steps", s.steps);
        resolved.set("run", "boundary", s.boundary);
        resolved.set_i64("run", "dump_every", s.dump_every);
        resolved.set("run", "init", s.init);
        resolved.set_i64("run", "seed", static_cast<int64_t>(common.seed));
        resolved.save((fs::path(s.out_dir) / "sim_config.txt").string());
    }
    return kExitOk;
}

int cmd_gradcheck(int n_seeds) {
    const auto results = run_gradcheck_suite(n_seeds, &std::cout);
    if (!gradcheck_suite_ok(results)) {
        std::cout << "gradient verification FAILED\n";
        return kExitVerification;
    }
    std::cout << "all gradient checks passed\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermal-conduction-inspired infrared small target detection"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    int64_t synth_n = 200;
    double train_ratio = 0.8;
    synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();
    synth_cmd->add_option("--n", synth_n, "number of scenes");
    synth_cmd->add_option("--train-ratio", train_ratio, "train split fraction");
    synth_cmd->add_option("--seed", common.seed, "generation + split seed");
    synth_cmd->add_option("--config", common.config_path, "config file ([synth] section)");

    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
    TrainOpts topts;
    train_cmd->add_option("--data", topts.data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", topts.out_dir, "run output directory")->required();
    train_cmd->add_option("--epochs", topts.epochs, "training epochs");
    train_cmd->add_option("--batch-size", topts.batch_size, "batch size");
    train_cmd->add_option("--lr", topts.lr, "learning rate");
    train_cmd->add_option("--weight-decay", topts.weight_decay, "decoupled weight decay");
    train_cmd->add_flag("--no-tcia", topts.no_tcia, "disable the attention branch");
    train_cmd->add_flag("--no-tcbm", topts.no_tcbm, "disable the boundary branch");
    train_cmd->add_flag("--quiet", topts.quiet, "suppress per-epoch output");
    train_cmd->add_option("--seed", common.seed, "weight init + shuffle seed");
    train_cmd->add_option("--config", common.config_path, "config file ([model] section)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt, eval_data, eval_out, eval_split = "test";
    double match_dist = 3.0;
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "report output directory");
    eval_cmd->add_option("--split", eval_split, "manifest split to score");
    eval_cmd->add_option("--match-dist", match_dist, "centroid match radius, px");

    auto* infer_cmd = app.add_subcommand("infer", "run a checkpoint on one image");
    std::string infer_ckpt, image_path, out_prefix;
    infer_cmd->add_option("--ckpt", infer_ckpt, "checkpoint path")->required();
    infer_cmd->add_option("--image", image_path, "input image (pgm or png)")->required();
    infer_cmd->add_option("--out-prefix", out_prefix, "output file prefix")->required();

    auto* sim_cmd = app.add_subcommand("simulate", "run the explicit diffusion solver");
    SimOpts sopts;
    sim_cmd->add_option("--gamma", sopts.gamma, "diffusion coefficient (<= 0.25)");
    sim_cmd->add_option("--size", sopts.size, "field extent");
    sim_cmd->add_option("--steps", sopts.steps, "number of steps");
    sim_cmd->add_option("--boundary", sopts.boundary, "replicate|periodic|zero");
    sim_cmd->add_option("--out", sopts.out_dir, "frame output directory");
    sim_cmd->add_option("--dump-every", sopts.dump_every, "frame dump period");
    sim_cmd->add_option("--init", sopts.init, "impulse|random");
    sim_cmd->add_option("--seed", common.seed, "seed for random init");

    auto* grad_cmd = app.add_subcommand("gradcheck", "verify gradients against "
                                                     "central differences");
    int gc_seeds = 3;
    grad_cmd->add_option("--seeds", gc_seeds, "seeds per check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(common, synth_out, synth_n, train_ratio);
        if (train_cmd->parsed()) return cmd_train(common, topts);
        if (eval_cmd->parsed())
            return cmd_eval(ckpt, eval_data, eval_out, eval_split, match_dist);
        if (infer_cmd->parsed()) return cmd_infer(infer_ckpt, image_path, out_prefix);
        if (sim_cmd->parsed()) return cmd_simulate(common, sopts);
        if (grad_cmd->parsed()) return cmd_gradcheck(gc_seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}
