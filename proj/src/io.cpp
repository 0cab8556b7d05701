#include "specattn/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace specattn::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string digest(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const sigsynth::SignalSpec& s) {
    return json{{"scheme", sigsynth::to_string(s.scheme)},
                {"carrier_hz", s.carrier_hz},
                {"symbol_rate_hz", s.symbol_rate_hz},
                {"snr_db", s.snr_db},
                {"seed", s.seed}};
}

sigsynth::SignalSpec signal_from_json(const json& j) {
    sigsynth::SignalSpec s;
    s.scheme = sigsynth::modulation_from_string(j.at("scheme").get<std::string>());
    s.carrier_hz = j.at("carrier_hz").get<double>();
    s.symbol_rate_hz = j.at("symbol_rate_hz").get<double>();
    s.snr_db = j.at("snr_db").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

namespace {

// JSON has no infinity; encode it as a string.
json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double parse_number_or_inf(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw DataError("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

}  // namespace

json to_json(const sigsynth::DatasetRecord& r) {
    json bg = json::array();
    for (const auto& b : r.scene.background) bg.push_back(to_json(b));
    json target = nullptr;
    if (r.scene.target) target = to_json(*r.scene.target);
    auto signal = [](const sigsynth::SignalSpec& s) {
        json j = to_json(s);
        j["snr_db"] = number_or_inf(s.snr_db);
        return j;
    };
    for (std::size_t i = 0; i < r.scene.background.size(); ++i) bg[i] = signal(r.scene.background[i]);
    if (r.scene.target) target = signal(*r.scene.target);
    return json{{"id", r.id},
                {"label", r.label},
                {"seed", r.seed},
                {"noise_floor_snr_db", number_or_inf(r.scene.noise_floor_snr_db)},
                {"noise_seed", r.scene.noise_seed},
                {"target", target},
                {"background", bg}};
}

sigsynth::DatasetRecord record_from_json(const json& j) {
    auto signal = [](const json& s) {
        json copy = s;
        const double snr = parse_number_or_inf(s.at("snr_db"));
        copy["snr_db"] = 0.0;
        auto spec = signal_from_json(copy);
        spec.snr_db = snr;
        return spec;
    };
    sigsynth::DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.label = j.at("label").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scene.noise_floor_snr_db = parse_number_or_inf(j.at("noise_floor_snr_db"));
    r.scene.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    if (!j.at("target").is_null()) r.scene.target = signal(j.at("target"));
    for (const auto& b : j.at("background")) r.scene.background.push_back(signal(b));
    if (r.label != (r.scene.target ? 1 : 0)) throw DataError("record " + r.id + ": label disagrees with scene");
    return r;
}

json to_json(const sigsynth::DatasetPlan& p) {
    json neg = json::array();
    for (auto m : p.negatives) neg.push_back(sigsynth::to_string(m));
    return json{{"layout", p.layout == sigsynth::DatasetPlan::Layout::SingleSignal ? "single" : "congested"},
                {"negatives", neg},
                {"carriers_hz", p.carriers_hz},
                {"snr_db", number_or_inf(p.snr_db)},
                {"symbol_rate_hz", p.symbol_rate_hz}};
}

sigsynth::DatasetPlan plan_from_json(const json& j) {
    sigsynth::DatasetPlan p;
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "single") p.layout = sigsynth::DatasetPlan::Layout::SingleSignal;
    else if (layout == "congested") p.layout = sigsynth::DatasetPlan::Layout::Congested;
    else throw DataError("unknown layout '" + layout + "'");
    p.negatives.clear();
    for (const auto& m : j.at("negatives")) p.negatives.push_back(sigsynth::modulation_from_string(m.get<std::string>()));
    p.carriers_hz = j.at("carriers_hz").get<std::vector<double>>();
    p.snr_db = parse_number_or_inf(j.at("snr_db"));
    p.symbol_rate_hz = j.at("symbol_rate_hz").get<double>();
    return p;
}

json to_json(const Manifest& m) {
    json train = json::array(), test = json::array();
    for (const auto& r : m.data.train) train.push_back(to_json(r));
    for (const auto& r : m.data.test) test.push_back(to_json(r));
    return json{{"format", "specattn-dataset"},
                {"version", kManifestVersion},
                {"scenario", m.scenario},
                {"master_seed", m.master_seed},
                {"sample_rate_hz", m.sample_rate_hz},
                {"window_n", m.window_n},
                {"plan", to_json(m.plan)},
                {"train", train},
                {"test", test}};
}

Manifest manifest_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "specattn-dataset") throw DataError("not a dataset manifest");
        if (j.at("version").get<int>() != kManifestVersion)
            throw DataError("unsupported manifest version " + std::to_string(j.at("version").get<int>()));
        Manifest m;
        m.scenario = j.at("scenario").get<std::string>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        m.window_n = j.at("window_n").get<std::size_t>();
        m.plan = plan_from_json(j.at("plan"));
        for (const auto& r : j.at("train")) m.data.train.push_back(record_from_json(r));
        for (const auto& r : j.at("test")) m.data.test.push_back(record_from_json(r));
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    } catch (const ParameterError& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

void write_manifest(const fs::path& path, const Manifest& m) { write_json(path, to_json(m)); }

Manifest read_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

const sigsynth::DatasetRecord& find_record(const Manifest& m, const std::string& id) {
    for (const auto* split : {&m.data.train, &m.data.test})
        for (const auto& r : *split)
            if (r.id == id) return r;
    throw DataError("no record with id '" + id + "'");
}

json to_json(const reinforce::TrainConfig& c) {
    return json{{"steps_T", c.steps_T},   {"mc_samples_M", c.mc_samples_M}, {"lr", c.lr},
                {"loc_sigma", c.loc_sigma}, {"epochs", c.epochs},           {"batch_size", c.batch_size},
                {"seed", c.seed}};
}

reinforce::TrainConfig train_config_from_json(const json& j) {
    reinforce::TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "steps_T") c.steps_T = value.get<int>();
            else if (key == "mc_samples_M") c.mc_samples_M = value.get<int>();
            else if (key == "lr") c.lr = value.get<double>();
            else if (key == "loc_sigma") c.loc_sigma = value.get<double>();
            else if (key == "epochs") c.epochs = value.get<int>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else throw DataError("unknown training key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed training config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const cyclo::ScfConfig& c) {
    return json{{"window_n", c.window_n},
                {"f_bins", c.f_bins},
                {"alpha_bins", c.alpha_bins},
                {"max_lag", c.max_lag},
                {"circular", c.circular},
                {"normalize", c.normalize},
                {"method", c.method == cyclo::ScfMethod::Direct ? "direct" : "folded"}};
}

cyclo::ScfConfig scf_config_from_json(const json& j) {
    cyclo::ScfConfig c;
    try {
        c.window_n = j.value("window_n", c.window_n);
        c.f_bins = j.value("f_bins", c.f_bins);
        c.alpha_bins = j.value("alpha_bins", c.alpha_bins);
        c.max_lag = j.value("max_lag", c.max_lag);
        c.circular = j.value("circular", c.circular);
        c.normalize = j.value("normalize", c.normalize);
        const auto method = j.value("method", std::string("folded"));
        if (method == "direct") c.method = cyclo::ScfMethod::Direct;
        else if (method == "folded") c.method = cyclo::ScfMethod::Folded;
        else throw DataError("unknown SCF method '" + method + "'");
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed SCF config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view b) : bytes_(b) {}
    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw DataError("checkpoint truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const attnnet::ModelParams& params) {
    params.check_shapes();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    std::uint32_t count = 0;
    params.for_each([&](const std::string&, const attnnet::Matrix&) { ++count; });
    put<std::uint32_t>(out, count);
    params.for_each([&](const std::string& name, const attnnet::Matrix& m) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    });
    return out;
}

attnnet::ModelParams decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
        throw DataError("not a checkpoint (bad magic)");
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto count = in.get<std::uint32_t>();
    attnnet::ModelParams p = attnnet::ModelParams::zeros();
    std::uint32_t expected = 0;
    p.for_each([&](const std::string&, attnnet::Matrix&) { ++expected; });
    if (count != expected) throw DataError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                                           std::to_string(expected));
    p.for_each([&](const std::string& name, attnnet::Matrix& m) {
        const auto len = in.get<std::uint32_t>();
        const auto stored = in.take(len);
        if (stored != name) throw DataError("checkpoint tensor '" + std::string(stored) + "', expected '" + name + "'");
        const auto rows = in.get<std::uint64_t>();
        const auto cols = in.get<std::uint64_t>();
        if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols()))
            throw DataError("checkpoint tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.get<double>();
    });
    if (!in.done()) throw DataError("trailing bytes after checkpoint");
    return p;
}

void write_checkpoint(const fs::path& path, const attnnet::ModelParams& params) {
    write_text(path, encode_checkpoint(params));
}

attnnet::ModelParams read_checkpoint(const fs::path& path) { return decode_checkpoint(read_text(path)); }

void write_grid_csv(const fs::path& path, const cyclo::ScfGrid& grid) {
    std::string out;
    char buf[32];
    for (std::size_t k = 0; k < grid.alpha_bins; ++k) {
        for (std::size_t m = 0; m < grid.f_bins; ++m) {
            std::snprintf(buf, sizeof buf, "%.17g", grid.at(k, m));
            if (m) out += ',';
            out += buf;
        }
        out += '\n';
    }
    write_text(path, out);
}

void write_grid_pgm(const fs::path& path, const cyclo::ScfGrid& grid) {
    std::string out = "P5\n" + std::to_string(grid.f_bins) + " " + std::to_string(grid.alpha_bins) + "\n255\n";
    for (std::size_t k = 0; k < grid.alpha_bins; ++k)
        for (std::size_t m = 0; m < grid.f_bins; ++m) {
            const double v = std::clamp(grid.at(k, m), 0.0, 1.0);
            out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
        }
    write_text(path, out);
}

void write_raw_iq(const fs::path& path, const sigsynth::IqSignal& signal) {
    std::string out;
    out.reserve(signal.size() * 8);
    for (const auto& s : signal.samples) {
        put<float>(out, static_cast<float>(s.real()));
        put<float>(out, static_cast<float>(s.imag()));
    }
    write_text(path, out);
    write_json(fs::path(path.string() + ".json"),
               json{{"sample_rate_hz", signal.sample_rate_hz}, {"n", signal.size()}, {"format", "cf32le"}});
}

sigsynth::IqSignal read_raw_iq(const fs::path& path) {
    const json meta = read_json(fs::path(path.string() + ".json"));
    const std::string bytes = read_text(path);
    sigsynth::IqSignal sig;
    sig.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    const auto n = meta.at("n").get<std::size_t>();
    if (bytes.size() != n * 8) throw DataError("raw IQ size does not match sidecar");
    Reader in(bytes);
    sig.samples.resize(n);
    for (auto& s : sig.samples) {
        const float re = in.get<float>();
        const float im = in.get<float>();
        s = {re, im};
    }
    return sig;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace specattn::io
