// Process-level checks of the command-line surface: exit codes, artifact
// layout, idempotence, and cross-artifact consistency.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#ifndef SPIKENAS_CLI_PATH
#define SPIKENAS_CLI_PATH "spikenas"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string out_file = (fs::temp_directory_path() / "spikenas_cli_out.txt").string();
    const std::string cmd = std::string(SPIKENAS_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream f(out_file);
    std::ostringstream os;
    os << f.rdbuf();
    return {WEXITSTATUS(status), os.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// smallest meaningful run: 1 cell, 4 channels, 16 images
const char* kTinyFlags =
    " --macro.layers 1 --macro.init_channels 4 --search.epochs 1 --search.batch_size 8"
    " --search.seed 7 --data.synth_classes 2 --data.synth_per_class 8 --data.synth_size 8"
    " --retrain.epochs 1 --retrain.batch_size 8 --retrain.init_channels 4 --retrain.layers 1";

fs::path fresh_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

double parse_field(const std::string& text, const std::string& key) {
    const auto pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size()));
}

}  // namespace

TEST_CASE("cli: usage and config errors exit with 2, leaving no artifacts") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("bogus-subcommand").exit_code == 2);
    CHECK(run_cli("search").exit_code == 2);  // --out is required

    fs::path out = fresh_dir("cli_noart");
    auto r = run_cli("search --out " + out.string() + " --data.format raw");
    CHECK(r.exit_code == 2);  // data.path required for raw
    CHECK(r.output.find("data.path") != std::string::npos);
    CHECK_FALSE(fs::exists(out));

    auto r2 = run_cli("search --out " + out.string() + " --data.format raw --data.path /nonexistent.ssds");
    CHECK(r2.exit_code == 2);
    CHECK_FALSE(fs::exists(out));

    auto r3 = run_cli("search --out " + out.string() + " --search.epochs nonsense");
    CHECK(r3.exit_code == 2);

    auto r4 = run_cli("eval --checkpoint /nonexistent.ckpt --out " + out.string());
    CHECK(r4.exit_code == 2);
}

TEST_CASE("cli: search writes the documented artifact set and is deterministic") {
    fs::path out1 = fresh_dir("cli_search1");
    fs::path out2 = fresh_dir("cli_search2");
    auto r1 = run_cli("search --out " + out1.string() + kTinyFlags);
    REQUIRE(r1.exit_code == 0);
    for (const char* f : {"config.txt", "genotype.txt", "genotype.dot", "history.csv", "nos.csv"})
        CHECK(fs::exists(out1 / f));
    CHECK(fs::exists(out1 / "checkpoints" / "search.ckpt"));

    auto r2 = run_cli("search --out " + out2.string() + kTinyFlags);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(out1 / "genotype.txt") == slurp(out2 / "genotype.txt"));
    CHECK(slurp(out1 / "history.csv") == slurp(out2 / "history.csv"));

    // provenance shows flag overrides
    const std::string cfg = slurp(out1 / "config.txt");
    CHECK(cfg.find("search.epochs = 1  # flag") != std::string::npos);
    CHECK(cfg.find("retrain.w_lr = 0.0025  # default") != std::string::npos);

    SUBCASE("derive reproduces the searched genotype from the checkpoint") {
        fs::path dout = fresh_dir("cli_derive");
        auto rd = run_cli("derive --checkpoint " + (out1 / "checkpoints" / "search.ckpt").string() +
                          " --out " + dout.string());
        REQUIRE(rd.exit_code == 0);
        CHECK(slurp(dout / "genotype.txt") == slurp(out1 / "genotype.txt"));
    }

    SUBCASE("retrain, eval, and spikes agree on the held-out metrics") {
        fs::path rout = fresh_dir("cli_retrain");
        auto rr = run_cli("retrain --genotype " + (out1 / "genotype.txt").string() + " --out " +
                          rout.string() + kTinyFlags);
        REQUIRE(rr.exit_code == 0);
        CHECK(fs::exists(rout / "history.csv"));
        CHECK(fs::exists(rout / "checkpoints" / "retrain.ckpt"));

        fs::path eout = fresh_dir("cli_eval");
        auto re = run_cli("eval --checkpoint " + (rout / "checkpoints" / "retrain.ckpt").string() +
                          " --out " + eout.string());
        REQUIRE(re.exit_code == 0);
        const double eval_acc = parse_field(slurp(eout / "eval.txt"), "accuracy ");

        // final history row's val accuracy equals the eval report
        std::ifstream hf(rout / "history.csv");
        std::string line, last;
        std::getline(hf, line);  // header
        while (std::getline(hf, line))
            if (!line.empty()) last = line;
        std::istringstream ls(last);
        std::string cell;
        for (int i = 0; i < 6; ++i) std::getline(ls, cell, ',');  // val_acc is column 6
        CHECK(eval_acc == doctest::Approx(std::stod(cell)).epsilon(1e-9));

        fs::path sout = fresh_dir("cli_spikes");
        auto rs = run_cli("spikes --checkpoint " + (rout / "checkpoints" / "retrain.ckpt").string() +
                          " --out " + sout.string());
        REQUIRE(rs.exit_code == 0);
        const std::string nos = slurp(sout / "nos.csv");
        CHECK(nos.find("cell_0,eval") != std::string::npos);
        CHECK(nos.find("classifier,eval") != std::string::npos);
    }
}

TEST_CASE("cli: gradcheck command passes and reports a table") {
    auto r = run_cli("gradcheck --trials 2");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("conv2d") != std::string::npos);
    CHECK(r.output.find("pass") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
}
