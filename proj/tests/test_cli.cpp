#include <cstdlib>
#include <fstream>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "tcif_cli_out.txt";
    const std::string cmd = std::string(TCIF_CLI_PATH) + " " + args + " > " +
                            out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out);
    std::ostringstream os;
    os << f.rdbuf();
    r.output = os.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

const fs::path kWork = fs::temp_directory_path() / "tcif_cli_suite";

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("--bogus").exit_code == 1);
    CHECK(run_cli("train").exit_code == 1);                 // missing required flags
    CHECK(run_cli("synth --out /tmp/x --negative").exit_code == 1);  // unknown flag
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("simulate refuses unstable gamma with a config error") {
    const RunResult r = run_cli("simulate --gamma 0.3 --size 16 --steps 5");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("gamma") != std::string::npos);
}

TEST_CASE("simulate dumps frames and conserves the total") {
    fs::remove_all(kWork / "sim");
    const RunResult r = run_cli("simulate --gamma 0.25 --size 32 --steps 100 "
                                "--dump-every 50 --out " +
                                (kWork / "sim").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(kWork / "sim" / "frame_000000.pgm"));
    CHECK(fs::exists(kWork / "sim" / "frame_000050.pgm"));
    CHECK(fs::exists(kWork / "sim" / "frame_000100.pgm"));
    CHECK(fs::exists(kWork / "sim" / "final.pgm"));
    CHECK(fs::exists(kWork / "sim" / "sim_config.txt"));
    CHECK(r.output.find("final sum 1") != std::string::npos);
}

TEST_CASE("synth then train then eval then infer completes end to end") {
    fs::remove_all(kWork / "pipe");
    const std::string ds = (kWork / "pipe" / "ds").string();
    const std::string run = (kWork / "pipe" / "run").string();

    RunResult r = run_cli("synth --out " + ds + " --n 12 --seed 3");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(fs::path(ds) / "manifest.csv"));
    CHECK(fs::exists(fs::path(ds) / "synth_config.txt"));
    CHECK(fs::exists(fs::path(ds) / "images" / "000000.pgm"));

    // a tiny model config keeps this fast
    const fs::path cfg_path = kWork / "pipe" / "model.txt";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[model]\nstage_channels = 8,8,8,8\nblocks_per_stage = 1,1,1,1\n"
               "heads_per_stage = 1,1,1,1\nffn_expansion = 2\n";
    }
    r = run_cli("train --data " + ds + " --out " + run + " --epochs 2 --seed 5 " +
                "--config " + cfg_path.string() + " --quiet");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(fs::path(run) / "checkpoint.ckpt"));
    CHECK(fs::exists(fs::path(run) / "loss.csv"));
    CHECK(fs::exists(fs::path(run) / "config_resolved.txt"));

    const std::string ckpt = (fs::path(run) / "checkpoint.ckpt").string();
    r = run_cli("eval --ckpt " + ckpt + " --data " + ds + " --out " + run + "/eval");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("IoU") != std::string::npos);
    CHECK(fs::exists(fs::path(run) / "eval" / "report.csv"));

    r = run_cli("infer --ckpt " + ckpt + " --image " + ds + "/images/000000.pgm "
                "--out-prefix " + run + "/pred");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(fs::path(run) / "pred_main.pgm"));
    CHECK(fs::exists(fs::path(run) / "pred_body.pgm"));
    CHECK(fs::exists(fs::path(run) / "pred_boundary.pgm"));
    CHECK(fs::exists(fs::path(run) / "pred_mask.png"));
    CHECK(fs::exists(fs::path(run) / "pred_enc1.pgm"));
    CHECK(fs::exists(fs::path(run) / "pred_enc4.pgm"));
    CHECK(fs::exists(fs::path(run) / "pred_dec1.pgm"));
}

TEST_CASE("identical seeded runs produce identical artifacts") {
    fs::remove_all(kWork / "repro");
    const std::string ds = (kWork / "repro" / "ds").string();
    REQUIRE(run_cli("synth --out " + ds + " --n 8 --seed 11").exit_code == 0);

    const fs::path cfg_path = kWork / "repro" / "model.txt";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[model]\nstage_channels = 8,8,8,8\nblocks_per_stage = 1,1,1,1\n"
               "heads_per_stage = 1,1,1,1\nffn_expansion = 2\n";
    }
    const std::string base = "train --data " + ds + " --epochs 2 --seed 9 --config " +
                             cfg_path.string() + " --quiet --out ";
    REQUIRE(run_cli(base + (kWork / "repro" / "a").string()).exit_code == 0);
    REQUIRE(run_cli(base + (kWork / "repro" / "b").string()).exit_code == 0);
    CHECK(slurp(kWork / "repro" / "a" / "checkpoint.ckpt") ==
          slurp(kWork / "repro" / "b" / "checkpoint.ckpt"));
    CHECK(slurp(kWork / "repro" / "a" / "loss.csv") ==
          slurp(kWork / "repro" / "b" / "loss.csv"));

    // same dataset twice as well
    const std::string ds2 = (kWork / "repro" / "ds2").string();
    REQUIRE(run_cli("synth --out " + ds2 + " --n 8 --seed 11").exit_code == 0);
    CHECK(slurp(fs::path(ds) / "images" / "000003.pgm") ==
          slurp(fs::path(ds2) / "images" / "000003.pgm"));
    CHECK(slurp(fs::path(ds) / "manifest.csv") == slurp(fs::path(ds2) / "manifest.csv"));
}

TEST_CASE("eval on a missing checkpoint is a config error") {
    CHECK(run_cli("eval --ckpt /nonexistent.ckpt --data /nonexistent").exit_code == 2);
}

TEST_CASE("train on a missing dataset is a config error") {
    CHECK(run_cli("train --data /nonexistent_ds --out /tmp/tcif_nope").exit_code == 2);
}
