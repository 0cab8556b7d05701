#include "specattn/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "specattn/bench.hpp"
#include "specattn/detector.hpp"
#include "specattn/io.hpp"

namespace specattn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
    unsigned threads = 0;
    std::string out;
};

// Hyperparameter flags shared by train and bench; unset flags keep the config value.
struct TrainFlags {
    std::optional<int> epochs, steps, mc, batch;
    std::optional<double> lr, sigma;
    std::optional<std::uint64_t> seed;
    std::string config_file;

    void add(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "training config JSON (keys mirror TrainConfig)");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--steps", steps, "glimpses per episode T");
        cmd->add_option("--mc", mc, "Monte Carlo rollouts per record M");
        cmd->add_option("--batch", batch, "records per mini-batch");
        cmd->add_option("--lr", lr, "SGD learning rate");
        cmd->add_option("--sigma", sigma, "location policy standard deviation");
        cmd->add_option("--train-seed", seed, "initialization/sampling seed");
    }

    reinforce::TrainConfig resolve(unsigned threads) const {
        reinforce::TrainConfig c;
        if (!config_file.empty()) c = io::train_config_from_json(io::read_json(config_file));
        if (epochs) c.epochs = *epochs;
        if (steps) c.steps_T = *steps;
        if (mc) c.mc_samples_M = *mc;
        if (batch) c.batch_size = *batch;
        if (lr) c.lr = *lr;
        if (sigma) c.loc_sigma = *sigma;
        if (seed) c.seed = *seed;
        c.threads = threads;
        c.validate();
        return c;
    }
};

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ParameterError("");
        return v;
    } catch (...) {
        throw ParameterError("invalid SNR '" + s + "'");
    }
}

fs::path out_dir(const Globals& g) {
    if (!g.out.empty()) return g.out;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "out";
}

void write_resolved(const fs::path& dir, const std::string& command, json settings, const Globals& g) {
    settings["command"] = command;
    settings["threads"] = g.threads;
    io::write_json(dir / "config.json", settings);
}

json train_json(const reinforce::TrainConfig& c) { return io::to_json(c); }

// Manifest scenario names map onto bench tasks; anything else is evaluated
// as Scenario I for the per-carrier table.
bench::Task task_for_manifest(const io::Manifest& m) {
    try {
        return bench::task_from_string(m.scenario);
    } catch (const ParameterError&) {
        return bench::Task::ScenarioI;
    }
}

int cmd_synth(const Globals& g, const std::string& scenario, std::size_t n_train, std::size_t n_test,
              std::uint64_t seed, const std::string& snr) {
    bench::BenchConfig bc;
    bc.task = bench::task_from_string(scenario);
    bc.snr_db = parse_snr(snr);
    io::Manifest m;
    m.scenario = bench::to_string(bc.task);
    m.master_seed = seed;
    m.plan = bench::plan_for(bc);
    m.data = sigsynth::generate_dataset(m.plan, n_train, n_test, seed);
    const fs::path dir = out_dir(g);
    io::write_manifest(dir / "manifest.json", m);
    write_resolved(dir, "synth",
                   {{"scenario", m.scenario}, {"train", n_train}, {"test", n_test}, {"seed", seed}, {"snr_db", snr}},
                   g);
    std::cout << "wrote " << (dir / "manifest.json").string() << " (" << n_train + n_test << " records)\n";
    return kExitOk;
}

struct ScfArgs {
    std::string manifest, record, scheme = "BPSK", snr = "5";
    double carrier_hz = 300e6;
    double symbol_rate_hz = kSymbolRateHz;
    std::uint64_t seed = 1;
    std::size_t max_lag = 32;
    bool circular = false;
};

sigsynth::SceneSpec scene_from_args(const ScfArgs& a) {
    sigsynth::SceneSpec scene;
    const double snr = parse_snr(a.snr);
    scene.noise_floor_snr_db = snr;
    scene.noise_seed = derive_seed(a.seed, 99);
    if (a.scheme != "none") {
        sigsynth::SignalSpec s;
        s.scheme = sigsynth::modulation_from_string(a.scheme);
        s.carrier_hz = a.carrier_hz;
        s.symbol_rate_hz = a.symbol_rate_hz;
        s.snr_db = snr;
        s.seed = a.seed;
        sigsynth::validate(s, kSampleRateHz);
        if (s.scheme == sigsynth::Modulation::BPSK) scene.target = s;
        else scene.background.push_back(s);
    }
    return scene;
}

sigsynth::SceneSpec resolve_scene(const ScfArgs& a, json& settings) {
    if (!a.manifest.empty()) {
        if (a.record.empty()) throw ParameterError("--manifest requires --record");
        const auto m = io::read_manifest(a.manifest);
        settings["manifest"] = a.manifest;
        settings["record"] = a.record;
        return io::find_record(m, a.record).scene;
    }
    settings["scheme"] = a.scheme;
    settings["carrier_hz"] = a.carrier_hz;
    settings["symbol_rate_hz"] = a.symbol_rate_hz;
    settings["snr_db"] = a.snr;
    settings["seed"] = a.seed;
    return scene_from_args(a);
}

int cmd_scf(const Globals& g, const ScfArgs& a) {
    json settings;
    const auto scene = resolve_scene(a, settings);
    cyclo::ScfConfig cfg;
    cfg.max_lag = a.max_lag;
    cfg.circular = a.circular;
    cfg.validate();
    const auto [x, label] = sigsynth::compose_scene(scene, kSampleRateHz, cfg.window_n);
    const auto grid = cyclo::scf_full(x, cfg);
    const fs::path dir = out_dir(g);
    io::write_grid_csv(dir / "scf.csv", grid);
    io::write_grid_pgm(dir / "scf.pgm", grid);
    settings["scf"] = io::to_json(cfg);
    settings["label"] = label;
    write_resolved(dir, "scf", settings, g);
    std::cout << "wrote " << (dir / "scf.csv").string() << " and " << (dir / "scf.pgm").string() << "\n";
    return kExitOk;
}

int cmd_iq(const Globals& g, const ScfArgs& a) {
    json settings;
    const auto scene = resolve_scene(a, settings);
    const auto [x, label] = sigsynth::compose_scene(scene);
    const fs::path dir = out_dir(g);
    io::write_raw_iq(dir / "signal.cf32", x);
    settings["label"] = label;
    write_resolved(dir, "iq", settings, g);
    std::cout << "wrote " << (dir / "signal.cf32").string() << "\n";
    return kExitOk;
}

int cmd_train(const Globals& g, const std::string& manifest_path, const TrainFlags& flags) {
    const auto cfg = flags.resolve(g.threads);
    const auto m = io::read_manifest(manifest_path);
    const cyclo::ScfConfig scf;
    const auto train_grids = bench::grid_dataset(m.data.train, scf, cfg.threads);
    const auto test_grids = bench::grid_dataset(m.data.test, scf, cfg.threads);
    const fs::path dir = out_dir(g);
    write_resolved(dir, "train", {{"manifest", manifest_path}, {"train", train_json(cfg)}, {"scf", io::to_json(scf)}},
                   g);
    const json meta = {{"train", train_json(cfg)}, {"scf", io::to_json(scf)}, {"manifest", manifest_path}};

    try {
        const auto result = reinforce::train(train_grids, &test_grids, cfg, [](const reinforce::CurvePoint& p,
                                                                              const attnnet::ModelParams&) {
            std::cout << "epoch " << p.epoch << " reward " << p.mean_reward << " train " << p.train_acc << " test "
                      << p.test_acc << "\n";
        });
        io::write_checkpoint(dir / "checkpoint.bin", result.selected);
        io::write_checkpoint(dir / "final.bin", result.params);
        json meta_out = meta;
        meta_out["selected_epoch"] = result.selected_epoch;
        io::write_json(dir / "checkpoint.json", meta_out);
        io::write_text(dir / "curve.csv", bench::curve_csv(result.curve));
        std::cout << "wrote " << (dir / "checkpoint.bin").string() << " (epoch " << result.selected_epoch << ")\n";
        return kExitOk;
    } catch (const reinforce::TrainingDiverged& e) {
        io::write_checkpoint(dir / "checkpoint.bin", e.last_good);
        json meta_out = meta;
        meta_out["diverged_after_epoch"] = e.epoch;
        io::write_json(dir / "checkpoint.json", meta_out);
        std::cerr << "error: " << e.what() << "; last good checkpoint kept\n";
        return kExitRuntime;
    }
}

int cmd_eval(const Globals& g, const std::string& manifest_path, const std::string& checkpoint,
             const std::string& split, const std::string& trace_mode) {
    const auto params = io::read_checkpoint(checkpoint);
    const auto m = io::read_manifest(manifest_path);
    bench::BenchConfig bc;
    bc.task = task_for_manifest(m);
    bc.n_train = m.data.train.size();
    bc.n_test = m.data.test.size();
    bc.data_seed = m.master_seed;
    bc.snr_db = m.plan.snr_db;
    const fs::path meta_path = fs::path(checkpoint).replace_extension(".json");
    if (fs::exists(meta_path)) {
        const auto meta = io::read_json(meta_path);
        if (meta.contains("train")) bc.train = io::train_config_from_json(meta.at("train"));
        if (meta.contains("scf")) bc.scf = io::scf_config_from_json(meta.at("scf"));
    }
    bc.train.threads = g.threads;
    if (split != "train" && split != "test") throw ParameterError("--split must be train or test");
    sigsynth::Dataset eval_set;
    eval_set.test = split == "train" ? m.data.train : m.data.test;
    const auto rep = bench::evaluate(bc, params, eval_set);

    const fs::path dir = out_dir(g);
    io::write_text(dir / "report.txt", bench::summary_text(rep));
    io::write_text(dir / "records.csv", bench::records_csv(rep));
    io::write_text(dir / "per_carrier.csv", bench::per_carrier_csv(rep));
    if (trace_mode != "none") {
        const auto grids = bench::grid_dataset(eval_set.test, bc.scf, g.threads);
        const auto mode = trace_mode == "stochastic" ? detector::DetectMode::stochastic(bc.train.seed)
                                                     : detector::DetectMode::greedy();
        io::write_text(dir / "trace.csv", bench::trace_csv(detector::attention_trace(params, grids, bc.train, mode)));
    }
    write_resolved(dir, "eval",
                   {{"manifest", manifest_path},
                    {"checkpoint", checkpoint},
                    {"split", split},
                    {"trace", trace_mode},
                    {"train", train_json(bc.train)},
                    {"scf", io::to_json(bc.scf)}},
                   g);
    std::cout << bench::summary_text(rep);
    return kExitOk;
}

int cmd_bench(const Globals& g, const std::string& task, std::size_t n_train, std::size_t n_test,
              std::uint64_t data_seed, const std::string& snr, bool baseline, int baseline_epochs,
              const TrainFlags& flags) {
    bench::BenchConfig bc;
    bc.task = bench::task_from_string(task);
    bc.n_train = n_train;
    bc.n_test = n_test;
    if (n_train == 0 || n_test == 0) throw ParameterError("dataset counts must be positive");
    bc.data_seed = data_seed;
    bc.snr_db = parse_snr(snr);
    bc.train = flags.resolve(g.threads);
    bc.with_baseline = baseline || bc.task == bench::Task::ScenarioII;
    bc.baseline.epochs = baseline_epochs;
    bc.baseline.seed = bc.train.seed;

    const fs::path dir = out_dir(g);
    write_resolved(dir, "bench", bench::to_json(bc), g);
    const auto rep = bench::run(bc);
    io::write_text(dir / "report.txt", bench::summary_text(rep));
    io::write_text(dir / "per_carrier.csv", bench::per_carrier_csv(rep));
    io::write_text(dir / "records.csv", bench::records_csv(rep));
    io::write_text(dir / "curve.csv", bench::curve_csv(rep.curve));
    io::write_checkpoint(dir / "checkpoint.bin", rep.params);
    io::write_json(dir / "checkpoint.json", {{"train", train_json(bc.train)}, {"scf", io::to_json(bc.scf)}});
    std::cout << bench::summary_text(rep);
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Spectral-attention cyclostationary signal detector"};
    app.name("specattn");
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "worker threads (0 = all cores); results do not depend on it");
    app.add_option("--out", g.out, std::string("output directory (default: $") + kOutDirEnv + " or ./out)");

    auto* synth = app.add_subcommand("synth", "generate a dataset manifest");
    std::string scenario = "I", snr = "5";
    std::size_t n_train = 800, n_test = 200;
    std::uint64_t seed = 7;
    synth->add_option("--scenario", scenario, "I, II or pair")->capture_default_str();
    synth->add_option("--train", n_train, "training records")->capture_default_str();
    synth->add_option("--test", n_test, "test records")->capture_default_str();
    synth->add_option("--seed", seed, "master seed")->capture_default_str();
    synth->add_option("--snr", snr, "SNR in dB, or inf")->capture_default_str();

    ScfArgs scf_args;
    auto add_scene = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", scf_args.manifest, "dataset manifest");
        cmd->add_option("--record", scf_args.record, "record id within the manifest");
        cmd->add_option("--scheme", scf_args.scheme, "BPSK, QPSK, FSK2, FSK4 or none")->capture_default_str();
        cmd->add_option("--carrier", scf_args.carrier_hz, "carrier frequency in Hz")->capture_default_str();
        cmd->add_option("--symbol-rate", scf_args.symbol_rate_hz, "symbol rate in Hz")->capture_default_str();
        cmd->add_option("--snr", scf_args.snr, "SNR in dB, or inf")->capture_default_str();
        cmd->add_option("--seed", scf_args.seed, "signal seed")->capture_default_str();
    };
    auto* scf = app.add_subcommand("scf", "render the SCF grid as CSV and PGM");
    add_scene(scf);
    scf->add_option("--max-lag", scf_args.max_lag, "lag window half-width")->capture_default_str();
    scf->add_flag("--circular", scf_args.circular, "circular lag indexing");
    auto* iq = app.add_subcommand("iq", "export a received window as raw float32 IQ");
    add_scene(iq);

    std::string manifest, checkpoint, split = "test", trace = "greedy";
    TrainFlags flags;
    auto* train = app.add_subcommand("train", "train the attention policy");
    train->add_option("--manifest", manifest, "dataset manifest")->required();
    flags.add(train);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
    eval->add_option("--manifest", manifest, "dataset manifest")->required();
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--split", split, "train or test")->capture_default_str();
    eval->add_option("--trace", trace, "attention scatter: greedy, stochastic or none")->capture_default_str();

    auto* bench_cmd = app.add_subcommand("bench", "run a benchmark task end to end");
    std::string task = "scenario-i";
    bool baseline = false;
    int baseline_epochs = bench::BaselineConfig{}.epochs;
    bench_cmd->add_option("--task", task, "scenario-i, scenario-ii or pair")->capture_default_str();
    bench_cmd->add_option("--train", n_train, "training records")->capture_default_str();
    bench_cmd->add_option("--test", n_test, "test records")->capture_default_str();
    bench_cmd->add_option("--seed", seed, "dataset seed")->capture_default_str();
    bench_cmd->add_option("--snr", snr, "SNR in dB, or inf")->capture_default_str();
    bench_cmd->add_flag("--baseline", baseline, "also train the full-grid baseline");
    bench_cmd->add_option("--baseline-epochs", baseline_epochs, "baseline epochs")->capture_default_str();
    flags.add(bench_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(g, scenario, n_train, n_test, seed, snr);
        if (*scf) return cmd_scf(g, scf_args);
        if (*iq) return cmd_iq(g, scf_args);
        if (*train) return cmd_train(g, manifest, flags);
        if (*eval) return cmd_eval(g, manifest, checkpoint, split, trace);
        if (*bench_cmd)
            return cmd_bench(g, task, n_train, n_test, seed, snr, baseline, baseline_epochs, flags);
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"specattn"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace specattn::cli
