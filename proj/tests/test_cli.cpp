#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "specattn/cli.hpp"
#include "specattn/io.hpp"

using namespace specattn;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "specattn_cli_test" / name;
    fs::remove_all(dir);
    return dir;
}

int run(std::vector<std::string> args) { return cli::run(args); }

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}) == cli::kExitUsage);
    CHECK(run({"frobnicate"}) == cli::kExitUsage);
    CHECK(run({"--out", fresh("u").string(), "synth", "--train", "0"}) == cli::kExitUsage);
    CHECK(run({"--out", fresh("u").string(), "synth", "--scenario", "IV"}) == cli::kExitUsage);
    CHECK(run({"train"}) == cli::kExitUsage);
    CHECK(run({"--help"}) == cli::kExitOk);
}

TEST_CASE("synth writes identical manifests for identical arguments") {
    const auto a = fresh("synth_a"), b = fresh("synth_b");
    for (const auto& d : {a, b})
        REQUIRE(run({"--out", d.string(), "synth", "--scenario", "I", "--train", "8", "--test", "4", "--seed", "7"}) ==
                cli::kExitOk);
    CHECK(io::read_text(a / "manifest.json") == io::read_text(b / "manifest.json"));
    const auto m = io::read_manifest(a / "manifest.json");
    CHECK(m.data.train.size() + m.data.test.size() == 12);
    const auto cfg = io::read_json(a / "config.json");
    CHECK(cfg.at("command") == "synth");
    CHECK(cfg.at("seed") == 7);
}

TEST_CASE("output directory falls back to the environment") {
    const auto d = fresh("env_out");
    ::setenv(cli::kOutDirEnv, d.string().c_str(), 1);
    CHECK(run({"synth", "--train", "2", "--test", "2"}) == cli::kExitOk);
    ::unsetenv(cli::kOutDirEnv);
    CHECK(fs::exists(d / "manifest.json"));
}

TEST_CASE("scf renders") {
    const auto dark = fresh("scf_zero");
    REQUIRE(run({"--out", dark.string(), "scf", "--scheme", "none", "--snr", "inf"}) == cli::kExitOk);
    const std::string pgm = io::read_text(dark / "scf.pgm");
    const std::string header = "P5\n64 64\n255\n";
    REQUIRE(pgm.size() == header.size() + 4096);
    CHECK(pgm.find_first_not_of('\0', header.size()) == std::string::npos);

    const auto bright = fresh("scf_bpsk");
    REQUIRE(run({"--out", bright.string(), "scf", "--scheme", "BPSK", "--carrier", "300e6", "--snr", "5"}) ==
            cli::kExitOk);
    const std::string img = io::read_text(bright / "scf.pgm");
    std::size_t best = 0;
    unsigned char best_v = 0;
    for (std::size_t k = 1; k < 64; ++k)
        for (std::size_t m = 0; m < 64; ++m) {
            const auto v = static_cast<unsigned char>(img[header.size() + k * 64 + m]);
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
    CHECK((best == 30 || best == 34));
    CHECK(fs::exists(bright / "scf.csv"));

    const auto missing = fresh("scf_missing");
    REQUIRE(run({"--out", missing.string(), "synth", "--train", "2", "--test", "2"}) == cli::kExitOk);
    CHECK(run({"--out", missing.string(), "scf", "--manifest", (missing / "manifest.json").string(), "--record",
               "train-000099"}) == cli::kExitRuntime);
    CHECK(run({"--out", missing.string(), "scf", "--manifest", (missing / "manifest.json").string(), "--record",
               "train-000001"}) == cli::kExitOk);
}

TEST_CASE("iq export") {
    const auto d = fresh("iq");
    REQUIRE(run({"--out", d.string(), "iq", "--scheme", "QPSK"}) == cli::kExitOk);
    CHECK(io::read_raw_iq(d / "signal.cf32").size() == kWindowN);
}

TEST_CASE("train and eval") {
    const auto data = fresh("train_data");
    REQUIRE(run({"--out", data.string(), "synth", "--train", "8", "--test", "4", "--seed", "3"}) == cli::kExitOk);
    const auto manifest = (data / "manifest.json").string();
    const auto a = fresh("train_a"), b = fresh("train_b");
    REQUIRE(run({"--out", a.string(), "--threads", "1", "train", "--manifest", manifest, "--epochs", "2", "--mc",
                 "2"}) == cli::kExitOk);
    REQUIRE(run({"--out", b.string(), "--threads", "2", "train", "--manifest", manifest, "--epochs", "2", "--mc",
                 "2"}) == cli::kExitOk);
    CHECK(io::read_text(a / "checkpoint.bin") == io::read_text(b / "checkpoint.bin"));
    CHECK(io::read_text(a / "curve.csv") == io::read_text(b / "curve.csv"));
    const std::string curve = io::read_text(a / "curve.csv");
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);
    CHECK(io::read_json(a / "config.json").at("train").at("epochs") == 2);

    const auto e = fresh("eval");
    REQUIRE(run({"--out", e.string(), "eval", "--manifest", manifest, "--checkpoint",
                 (a / "checkpoint.bin").string()}) == cli::kExitOk);
    CHECK(fs::exists(e / "report.txt"));
    CHECK(fs::exists(e / "trace.csv"));
    const std::string recs = io::read_text(e / "records.csv");
    CHECK(std::count(recs.begin(), recs.end(), '\n') == 5);

    std::string ck = io::read_text(a / "checkpoint.bin");
    ck[0] = '?';
    io::write_text(e / "broken.bin", ck);
    CHECK(run({"--out", e.string(), "eval", "--manifest", manifest, "--checkpoint", (e / "broken.bin").string()}) ==
          cli::kExitRuntime);
    CHECK(run({"--out", e.string(), "eval", "--manifest", manifest, "--checkpoint",
               (a / "checkpoint.bin").string(), "--split", "dev"}) == cli::kExitUsage);
}
