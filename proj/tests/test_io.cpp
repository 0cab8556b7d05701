#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "specattn/io.hpp"
#include "support/netchecks.hpp"

using namespace specattn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "specattn_io_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("FNV-1a digest") {
    CHECK(io::digest("") == "cbf29ce484222325");
    CHECK(io::digest("a") == "af63dc4c8601ec8c");
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto p = netchecks::random_params(9);
    const auto path = scratch("ck.bin");
    io::write_checkpoint(path, p);
    CHECK(io::read_checkpoint(path) == p);
    CHECK(io::encode_checkpoint(io::decode_checkpoint(io::encode_checkpoint(p))) == io::encode_checkpoint(p));
}

TEST_CASE("corrupted checkpoints are rejected") {
    const std::string good = io::encode_checkpoint(netchecks::random_params(10));
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(io::decode_checkpoint(bad_magic), DataError);
    std::string bad_version = good;
    bad_version[8] = 9;
    CHECK_THROWS_AS(io::decode_checkpoint(bad_version), DataError);
    CHECK_THROWS_AS(io::decode_checkpoint(good.substr(0, good.size() - 1)), DataError);
    CHECK_THROWS_AS(io::decode_checkpoint(good + "x"), DataError);
    CHECK_THROWS_AS(io::read_checkpoint(scratch("missing.bin")), DataError);
}

TEST_CASE("dataset manifest round trip") {
    io::Manifest m;
    m.scenario = "scenario-ii";
    m.master_seed = 5;
    m.plan = sigsynth::plan_for(sigsynth::Scenario::II);
    m.data = sigsynth::generate_dataset(m.plan, 20, 6, 5);
    m.data.test[0].scene.noise_floor_snr_db = INFINITY;
    const auto path = scratch("manifest.json");
    io::write_manifest(path, m);
    const auto back = io::read_manifest(path);
    CHECK(back.data.train == m.data.train);
    CHECK(back.data.test == m.data.test);
    CHECK(back.master_seed == 5);
    CHECK(back.plan.negatives == m.plan.negatives);
    CHECK(&io::find_record(back, "test-000002") != nullptr);
    CHECK_THROWS_AS(io::find_record(back, "test-999999"), DataError);

    auto j = io::to_json(m);
    j["train"][0]["label"] = 1 - j["train"][0]["label"].get<int>();
    CHECK_THROWS_AS(io::manifest_from_json(j), DataError);
    j = io::to_json(m);
    j["version"] = 99;
    CHECK_THROWS_AS(io::manifest_from_json(j), DataError);
}

TEST_CASE("training config file") {
    reinforce::TrainConfig c;
    c.lr = 0.125;
    c.epochs = 7;
    c.seed = 99;
    CHECK(io::train_config_from_json(io::to_json(c)) == c);
    CHECK(io::train_config_from_json(nlohmann::json::object()) == reinforce::TrainConfig{});
    CHECK_THROWS_AS(io::train_config_from_json({{"learning_rate", 1.0}}), DataError);
    CHECK_THROWS_AS(io::train_config_from_json({{"steps_T", 0}}), ParameterError);
    cyclo::ScfConfig s;
    s.circular = true;
    s.method = cyclo::ScfMethod::Direct;
    const auto s2 = io::scf_config_from_json(io::to_json(s));
    CHECK(s2.circular);
    CHECK(s2.method == cyclo::ScfMethod::Direct);
}

TEST_CASE("grid exports") {
    cyclo::ScfGrid g;
    g.alpha_bins = 2;
    g.f_bins = 3;
    g.magnitudes = {0.0, 0.5, 1.0, 2.0, 0.25, 1e-3};
    io::write_grid_csv(scratch("g.csv"), g);
    CHECK(io::read_text(scratch("g.csv")) == "0,0.5,1\n2,0.25,0.001\n");
    io::write_grid_pgm(scratch("g.pgm"), g);
    const std::string pgm = io::read_text(scratch("g.pgm"));
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(pgm.size() == header.size() + 6);
    CHECK(pgm.substr(0, header.size()) == header);
    const auto px = [&](int i) { return static_cast<unsigned char>(pgm[header.size() + static_cast<std::size_t>(i)]); };
    CHECK(px(0) == 0);
    CHECK(px(1) == 128);
    CHECK(px(2) == 255);
    CHECK(px(3) == 255);
    CHECK(px(4) == 64);
}

TEST_CASE("raw IQ round trip") {
    sigsynth::IqSignal x;
    for (int n = 0; n < 100; ++n) x.samples.push_back({std::sin(n * 0.1), std::cos(n * 0.3)});
    io::write_raw_iq(scratch("x.cf32"), x);
    CHECK(fs::file_size(scratch("x.cf32")) == 800);
    const auto y = io::read_raw_iq(scratch("x.cf32"));
    REQUIRE(y.size() == 100);
    for (int n = 0; n < 100; ++n) CHECK(std::abs(y.samples[static_cast<std::size_t>(n)] - x.samples[static_cast<std::size_t>(n)]) < 1e-7);
    CHECK(y.sample_rate_hz == x.sample_rate_hz);
}
