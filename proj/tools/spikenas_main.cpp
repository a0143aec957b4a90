// Operator surface: search, derive, retrain, eval, spikes, gradcheck.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "spikenas/checkpoint.hpp"
#include "spikenas/config.hpp"
#include "spikenas/gradcheck_suite.hpp"
#include "spikenas/loss.hpp"

namespace fs = std::filesystem;
using namespace spikenas;

namespace {

struct FlagCapture {
    std::map<std::string, std::string> kv;
    std::string config_path;
};

// Every config key becomes a --key flag on the subcommand.
void attach_config_flags(CLI::App* cmd, FlagCapture& cap) {
    cmd->add_option("--config", cap.config_path, "key = value config file");
    static const RunConfig defaults = RunConfig::defaults();
    for (const auto& [key, value] : defaults.values()) {
        const std::string name = "--" + key;
        cmd->add_option_function<std::string>(
               name, [&cap, key = key](const std::string& v) { cap.kv[key] = v; })
            ->expected(1);
    }
}

RunConfig resolve_config(const FlagCapture& cap) {
    RunConfig cfg = RunConfig::defaults();
    if (!cap.config_path.empty()) cfg.apply_file(cap.config_path);
    for (const auto& [k, v] : cap.kv) cfg.set_flag(k, v);
    return cfg;
}

void print_epoch(const EpochRecord& r) {
    std::printf(
        "epoch %3lld  lr %.6f  train loss %.4f acc %.4f  val loss %.4f acc %.4f  nos %llu/%llu\n",
        (long long)r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc,
        (unsigned long long)r.nos_train_total, (unsigned long long)r.nos_val_total);
    std::fflush(stdout);
}

std::string nos_csv(const TrainHistory& history) {
    std::string out = "slot,name,scope,spikes\n";
    if (history.epochs.empty()) return out;
    const EpochRecord& last = history.epochs.back();
    auto slot_name = [&](std::size_t i) {
        return i + 1 == last.nos_train.size() ? std::string("classifier")
                                              : "cell_" + std::to_string(i);
    };
    for (std::size_t i = 0; i < last.nos_train.size(); ++i)
        out += std::to_string(i) + "," + slot_name(i) + ",train," +
               std::to_string(last.nos_train[i]) + "\n";
    for (std::size_t i = 0; i < last.nos_val.size(); ++i)
        out += std::to_string(i) + "," + slot_name(i) + ",validation," +
               std::to_string(last.nos_val[i]) + "\n";
    return out;
}

std::string nos_csv_eval(const SpikeLedger& ledger) {
    std::string out = "slot,name,scope,spikes,capacity\n";
    for (std::size_t i = 0; i < ledger.per_cell.size(); ++i) {
        const std::string name =
            i + 1 == ledger.per_cell.size() ? "classifier" : "cell_" + std::to_string(i);
        out += std::to_string(i) + "," + name + ",eval," + std::to_string(ledger.per_cell[i]) +
               "," + std::to_string(ledger.capacity[i]) + "\n";
    }
    return out;
}

void prepare_out_dir(const std::string& out) {
    fs::create_directories(out);
    fs::create_directories(out + "/checkpoints");
}

int cmd_search(const FlagCapture& cap, const std::string& out) {
    RunConfig cfg = resolve_config(cap);
    SearchConfig sc = cfg.search_config();
    ImageDataset data = cfg.load_data();
    MacroConfig macro = cfg.macro_config(data.classes, data.channels, false);

    prepare_out_dir(out);
    Network<train_real> supernet(macro, nullptr, sc.seed);
    std::printf("searching: %lld cells, %lld channels, T=%lld, %lld epochs, seed %llu\n",
                (long long)macro.layers, (long long)macro.init_channels,
                (long long)macro.time_window, (long long)sc.epochs,
                (unsigned long long)sc.seed);
    SearchResult result = run_search(supernet, data, sc, print_epoch);

    write_file_atomic(out + "/config.txt", cfg.echo());
    write_file_atomic(out + "/genotype.txt", result.genotype.to_text());
    write_file_atomic(out + "/genotype.dot", result.genotype.to_dot());
    write_file_atomic(out + "/history.csv", result.history.to_csv());
    write_file_atomic(out + "/nos.csv", nos_csv(result.history));
    Checkpoint ck = make_checkpoint(supernet.store(), cfg.echo(), "");
    save_checkpoint(ck, out + "/checkpoints/search.ckpt", int(sizeof(train_real)));
    std::printf("genotype written to %s/genotype.txt\n", out.c_str());
    return 0;
}

int cmd_derive(const std::string& ckpt_path, const std::string& out) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    auto an = ck.blobs.find("alpha.normal");
    auto ar = ck.blobs.find("alpha.reduction");
    if (an == ck.blobs.end() || ar == ck.blobs.end())
        throw ConfigError("derive: checkpoint has no architecture parameters (not a search checkpoint)");
    RunConfig cfg = RunConfig::defaults();
    cfg.apply_file_text(ck.config_echo, "checkpoint config");
    const int nodes = int(cfg.get_int("macro.nodes"));

    auto to_matrix = [&](const CheckpointBlob& blob) {
        AlphaMatrix m(std::size_t(blob.shape.n));
        for (dim_t e = 0; e < blob.shape.n; ++e)
            for (int o = 0; o < kNumCandidates; ++o)
                m[std::size_t(e)][std::size_t(o)] = blob.data[std::size_t(e * kNumCandidates + o)];
        return m;
    };
    Genotype g = derive_genotype(to_matrix(an->second), to_matrix(ar->second), nodes);
    g.channels = cfg.get_int("macro.init_channels");
    g.layers = cfg.get_int("macro.layers");
    g.attention = cfg.get("macro.attention");

    fs::create_directories(out);
    write_file_atomic(out + "/genotype.txt", g.to_text());
    write_file_atomic(out + "/genotype.dot", g.to_dot());
    std::printf("derived genotype written to %s/genotype.txt\n", out.c_str());
    return 0;
}

int cmd_retrain(const std::string& genotype_path, const FlagCapture& cap,
                const std::string& out) {
    RunConfig cfg = resolve_config(cap);
    Genotype g = Genotype::from_text(read_file(genotype_path));
    RetrainConfig rc = cfg.retrain_config();
    ImageDataset data = cfg.load_data();
    MacroConfig macro = cfg.macro_config(data.classes, data.channels, true);

    prepare_out_dir(out);
    Network<train_real> net(macro, &g, rc.seed);
    std::printf("retraining genotype %s: %lld cells, %lld channels, %lld epochs, seed %llu\n",
                genotype_path.c_str(), (long long)macro.layers, (long long)macro.init_channels,
                (long long)rc.epochs, (unsigned long long)rc.seed);
    TrainHistory history = run_retrain(net, data, rc, print_epoch);

    write_file_atomic(out + "/config.txt", cfg.echo());
    write_file_atomic(out + "/genotype.txt", g.to_text());
    write_file_atomic(out + "/history.csv", history.to_csv());
    write_file_atomic(out + "/nos.csv", nos_csv(history));
    Checkpoint ck = make_checkpoint(net.store(), cfg.echo(), g.to_text());
    save_checkpoint(ck, out + "/checkpoints/retrain.ckpt", int(sizeof(train_real)));
    if (!history.epochs.empty())
        std::printf("final val accuracy %.4f\n", history.epochs.back().val_acc);
    return 0;
}

struct EvalSetup {
    RunConfig cfg = RunConfig::defaults();
    std::unique_ptr<Network<train_real>> net;
    std::unique_ptr<BatchStream<train_real>> stream;
};

// Rebuilds the network and the held-out evaluation stream a checkpoint was
// trained against: the retrain-stage 5:1 split for discrete checkpoints,
// the search-stage 1:1 split for supernet checkpoints, with normalization
// statistics from the training partition (or the sidecar file).
EvalSetup setup_eval(const std::string& ckpt_path, const FlagCapture& cap) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    EvalSetup s;
    s.cfg.apply_file_text(ck.config_echo, "checkpoint config");
    if (!cap.config_path.empty()) s.cfg.apply_file(cap.config_path);
    for (const auto& [k, v] : cap.kv) s.cfg.set_flag(k, v);
    ImageDataset data = s.cfg.load_data();

    const bool discrete = !ck.genotype_text.empty();
    Genotype g;
    if (discrete) g = Genotype::from_text(ck.genotype_text);
    MacroConfig macro = s.cfg.macro_config(data.classes, data.channels, discrete);
    s.net = std::make_unique<Network<train_real>>(macro, discrete ? &g : nullptr,
                                                  /*seed=*/1);
    restore_params(s.net->store(), ck);

    SplitPlan plan;
    plan.stage = discrete ? SplitPlan::Stage::retrain : SplitPlan::Stage::search;
    plan.seed = discrete ? s.cfg.retrain_config().seed : s.cfg.search_config().seed;
    auto [train_ds, val_ds] = split(data, plan);
    const ChannelStats stats =
        s.cfg.has_stats_override() ? s.cfg.stats_override() : compute_channel_stats(train_ds);
    const dim_t batch = discrete ? s.cfg.retrain_config().batch_size
                                 : s.cfg.search_config().batch_size;
    const std::uint64_t stream_seed = (discrete ? plan.seed ^ 0x62 : plan.seed ^ 0x52);
    s.stream = std::make_unique<BatchStream<train_real>>(std::move(val_ds), stats, batch,
                                                         stream_seed, true);
    return s;
}

int cmd_eval(const std::string& ckpt_path, const FlagCapture& cap, const std::string& out) {
    EvalSetup s = setup_eval(ckpt_path, cap);
    EvalResult r = evaluate(*s.net, *s.stream);
    fs::create_directories(out);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "accuracy %.6f\nloss %.6f\nspikes_total %llu\nimages %lld\n", r.acc, r.loss,
                  (unsigned long long)r.ledger.total, (long long)s.stream->images_per_epoch());
    write_file_atomic(out + "/eval.txt", buf);
    write_file_atomic(out + "/nos.csv", nos_csv_eval(r.ledger));
    std::printf("%s", buf);
    return 0;
}

int cmd_spikes(const std::string& ckpt_path, const FlagCapture& cap, const std::string& out) {
    EvalSetup s = setup_eval(ckpt_path, cap);
    EvalResult r = evaluate(*s.net, *s.stream);
    fs::create_directories(out);
    write_file_atomic(out + "/nos.csv", nos_csv_eval(r.ledger));
    std::printf("spikes_total %llu over %lld images (per-cell breakdown in %s/nos.csv)\n",
                (unsigned long long)r.ledger.total, (long long)s.stream->images_per_epoch(),
                out.c_str());
    return 0;
}

int cmd_gradcheck(int trials, std::uint64_t seed) {
    auto results = run_gradcheck_suite(trials, seed);
    bool all = true;
    std::printf("%-22s %12s %12s  %s\n", "primitive", "max_rel_err", "tolerance", "status");
    for (const auto& c : results) {
        std::printf("%-22s %12.3e %12.0e  %s\n", c.name.c_str(), c.max_rel_err, c.tolerance,
                    c.pass ? "pass" : "FAIL");
        all = all && c.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"differentiable architecture search for spiking networks"};
    app.require_subcommand(1);

    FlagCapture search_cap, retrain_cap, eval_cap, spikes_cap;
    std::string search_out, derive_ckpt, derive_out, retrain_genotype, retrain_out, eval_ckpt,
        eval_out, spikes_ckpt, spikes_out;
    int gc_trials = 100;
    std::uint64_t gc_seed = 2024;

    auto* search = app.add_subcommand("search", "run bilevel architecture search");
    search->add_option("--out", search_out, "output directory")->required();
    attach_config_flags(search, search_cap);

    auto* derive = app.add_subcommand("derive", "derive a genotype from a search checkpoint");
    derive->add_option("--checkpoint", derive_ckpt)->required();
    derive->add_option("--out", derive_out)->required();

    auto* retrain = app.add_subcommand("retrain", "train a fixed genotype from scratch");
    retrain->add_option("--genotype", retrain_genotype)->required();
    retrain->add_option("--out", retrain_out)->required();
    attach_config_flags(retrain, retrain_cap);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its held-out split");
    eval->add_option("--checkpoint", eval_ckpt)->required();
    eval->add_option("--out", eval_out)->required();
    attach_config_flags(eval, eval_cap);

    auto* spikes = app.add_subcommand("spikes", "write the per-cell spike-count report");
    spikes->add_option("--checkpoint", spikes_ckpt)->required();
    spikes->add_option("--out", spikes_out)->required();
    attach_config_flags(spikes, spikes_cap);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every primitive");
    gradcheck->add_option("--trials", gc_trials);
    gradcheck->add_option("--seed", gc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (search->parsed()) return cmd_search(search_cap, search_out);
        if (derive->parsed()) return cmd_derive(derive_ckpt, derive_out);
        if (retrain->parsed()) return cmd_retrain(retrain_genotype, retrain_cap, retrain_out);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_cap, eval_out);
        if (spikes->parsed()) return cmd_spikes(spikes_ckpt, spikes_cap, spikes_out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_trials, gc_seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
