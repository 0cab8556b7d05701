#include "specattn/sigsynth.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace specattn::sigsynth {

std::string to_string(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return "BPSK";
        case Modulation::QPSK: return "QPSK";
        case Modulation::FSK2: return "FSK2";
        case Modulation::FSK4: return "FSK4";
    }
    return "?";
}

Modulation modulation_from_string(const std::string& s) {
    if (s == "BPSK" || s == "bpsk") return Modulation::BPSK;
    if (s == "QPSK" || s == "qpsk") return Modulation::QPSK;
    if (s == "FSK2" || s == "fsk2" || s == "2FSK" || s == "2fsk") return Modulation::FSK2;
    if (s == "FSK4" || s == "fsk4" || s == "4FSK" || s == "4fsk") return Modulation::FSK4;
    throw ParameterError("unknown modulation '" + s + "'");
}

int modulation_order(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return 2;
        case Modulation::QPSK: return 4;
        case Modulation::FSK2: return 2;
        case Modulation::FSK4: return 4;
    }
    return 0;
}

std::string to_string(Scenario s) { return s == Scenario::I ? "I" : "II"; }

Scenario scenario_from_string(const std::string& s) {
    if (s == "I" || s == "1") return Scenario::I;
    if (s == "II" || s == "2") return Scenario::II;
    throw ParameterError("unknown scenario '" + s + "'");
}

void validate(const SignalSpec& spec, double sample_rate_hz) {
    if (!(sample_rate_hz > 0.0)) throw ParameterError("sample rate must be positive");
    if (!(spec.carrier_hz > 0.0) || !(spec.carrier_hz < sample_rate_hz / 2.0))
        throw ParameterError("carrier " + std::to_string(spec.carrier_hz) +
                             " Hz outside (0, Nyquist)");
    if (!(spec.symbol_rate_hz > 0.0) || !(spec.symbol_rate_hz < spec.carrier_hz))
        throw ParameterError("symbol rate must be positive and below the carrier");
}

namespace {

struct Timing {
    double phase0;          // carrier phase, rad
    double offset_samples;  // symbol timing offset in [0, samples_per_symbol)
};

Timing draw_timing(const SignalSpec& spec, double sample_rate_hz) {
    Rng rng(derive_seed(spec.seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sps = sample_rate_hz / spec.symbol_rate_hz;
    Timing t;
    t.phase0 = kTwoPi * u(rng);
    t.offset_samples = std::floor(sps * u(rng));
    return t;
}

std::size_t symbol_index(std::size_t n, const Timing& t, double sps) {
    return static_cast<std::size_t>(std::floor((static_cast<double>(n) + t.offset_samples) / sps));
}

}  // namespace

std::size_t symbols_needed(const SignalSpec& spec, double sample_rate_hz, std::size_t n) {
    if (n == 0) return 0;
    const Timing t = draw_timing(spec, sample_rate_hz);
    return symbol_index(n - 1, t, sample_rate_hz / spec.symbol_rate_hz) + 1;
}

IqSignal modulate_symbols(const SignalSpec& spec, std::span<const int> symbols,
                          double sample_rate_hz, std::size_t n) {
    if (n == 0) throw ParameterError("window length must be positive");
    validate(spec, sample_rate_hz);
    const int order = modulation_order(spec.scheme);
    const double sps = sample_rate_hz / spec.symbol_rate_hz;
    const Timing timing = draw_timing(spec, sample_rate_hz);
    if (symbols.size() < symbol_index(n - 1, timing, sps) + 1)
        throw ParameterError("symbol stream too short for window");
    for (int s : symbols)
        if (s < 0 || s >= order) throw ParameterError("symbol index out of range");

    const double w_c = kTwoPi * spec.carrier_hz / sample_rate_hz;
    IqSignal out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(n);

    switch (spec.scheme) {
        case Modulation::BPSK:
        case Modulation::QPSK: {
            for (std::size_t i = 0; i < n; ++i) {
                const int s = symbols[symbol_index(i, timing, sps)];
                const double sym_phase = spec.scheme == Modulation::BPSK
                                             ? (s == 0 ? 0.0 : kPi)
                                             : kPi / 4.0 + kPi / 2.0 * s;
                out.samples[i] = std::polar(1.0, w_c * static_cast<double>(i) + timing.phase0 + sym_phase);
            }
            break;
        }
        case Modulation::FSK2:
        case Modulation::FSK4: {
            // Continuous-phase FSK, tone spacing equal to the symbol rate.
            const double spacing = kTwoPi * spec.symbol_rate_hz / sample_rate_hz;
            double excess = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                out.samples[i] = std::polar(1.0, w_c * static_cast<double>(i) + timing.phase0 + excess);
                const int s = symbols[symbol_index(i, timing, sps)];
                excess += (static_cast<double>(2 * s) - (order - 1)) * spacing / 2.0;
                excess = std::remainder(excess, kTwoPi);
            }
            break;
        }
    }
    return out;
}

IqSignal modulate(const SignalSpec& spec, double sample_rate_hz, std::size_t n) {
    if (n == 0) throw ParameterError("window length must be positive");
    validate(spec, sample_rate_hz);
    const std::size_t count = symbols_needed(spec, sample_rate_hz, n);
    Rng rng(derive_seed(spec.seed, 2));
    std::uniform_int_distribution<int> pick(0, modulation_order(spec.scheme) - 1);
    std::vector<int> symbols(count);
    for (auto& s : symbols) s = pick(rng);
    return modulate_symbols(spec, symbols, sample_rate_hz, n);
}

IqSignal add_noise(const IqSignal& signal, double noise_power, std::uint64_t seed) {
    if (signal.empty()) throw ParameterError("empty signal");
    IqSignal out = signal;
    if (noise_power <= 0.0) return out;
    Rng rng(derive_seed(seed, 3));
    std::normal_distribution<double> g(0.0, std::sqrt(noise_power / 2.0));
    for (auto& s : out.samples) {
        const double re = g(rng);
        const double im = g(rng);
        s += std::complex<double>(re, im);
    }
    return out;
}

IqSignal add_awgn(const IqSignal& signal, double snr_db, std::uint64_t seed) {
    if (signal.empty()) throw ParameterError("empty signal");
    if (std::isinf(snr_db) && snr_db > 0) return signal;
    return add_noise(signal, mean_power(signal) * std::pow(10.0, -snr_db / 10.0), seed);
}

std::pair<IqSignal, int> compose_scene(const SceneSpec& scene, double sample_rate_hz, std::size_t n) {
    if (n == 0) throw ParameterError("window length must be positive");
    std::vector<std::complex<double>> analytic(n, {0.0, 0.0});
    auto accumulate = [&](const SignalSpec& spec) {
        const IqSignal part = modulate(spec, sample_rate_hz, n);
        // Both levels infinite (noiseless scene at nominal power): unit gain.
        const double rel = spec.snr_db - scene.noise_floor_snr_db;
        const double gain = std::isnan(rel) ? 1.0 : std::pow(10.0, rel / 20.0);
        for (std::size_t i = 0; i < n; ++i) analytic[i] += gain * part.samples[i];
    };
    for (const auto& b : scene.background) accumulate(b);
    if (scene.target) accumulate(*scene.target);

    // Real-valued channel: sqrt(2) * Re{.} keeps each component at unit power.
    IqSignal rx;
    rx.sample_rate_hz = sample_rate_hz;
    rx.samples.resize(n);
    const double root2 = std::sqrt(2.0);
    for (std::size_t i = 0; i < n; ++i) rx.samples[i] = {root2 * analytic[i].real(), 0.0};

    const int label = scene.target ? 1 : 0;
    const bool noiseless = std::isinf(scene.noise_floor_snr_db) && scene.noise_floor_snr_db > 0;
    if (noiseless) return {std::move(rx), label};
    return {add_noise(rx, std::pow(10.0, -scene.noise_floor_snr_db / 10.0), scene.noise_seed), label};
}

DatasetPlan plan_for(Scenario scenario, double snr_db) {
    DatasetPlan plan;
    plan.layout = scenario == Scenario::I ? DatasetPlan::Layout::SingleSignal
                                          : DatasetPlan::Layout::Congested;
    plan.snr_db = snr_db;
    return plan;
}

namespace {

DatasetRecord make_record(const DatasetPlan& plan, std::uint64_t record_seed, int label,
                          std::string id) {
    Rng rng(derive_seed(record_seed, 7));
    auto pick_carrier = [&] {
        std::uniform_int_distribution<std::size_t> u(0, plan.carriers_hz.size() - 1);
        return plan.carriers_hz[u(rng)];
    };
    int next_signal = 0;
    auto make_signal = [&](Modulation m) {
        SignalSpec s;
        s.scheme = m;
        s.carrier_hz = pick_carrier();
        s.symbol_rate_hz = plan.symbol_rate_hz;
        s.snr_db = plan.snr_db;
        s.seed = derive_seed(record_seed, 10 + next_signal++);
        return s;
    };

    DatasetRecord rec;
    rec.id = std::move(id);
    rec.seed = record_seed;
    rec.label = label;
    rec.scene.noise_floor_snr_db = plan.snr_db;
    rec.scene.noise_seed = derive_seed(record_seed, 99);

    if (plan.layout == DatasetPlan::Layout::SingleSignal) {
        if (label == 1) {
            rec.scene.target = make_signal(Modulation::BPSK);
        } else if (!plan.negatives.empty()) {
            std::uniform_int_distribution<std::size_t> u(0, plan.negatives.size() - 1);
            rec.scene.background.push_back(make_signal(plan.negatives[u(rng)]));
        }
    } else {
        std::vector<Modulation> pool = plan.negatives;
        std::uniform_int_distribution<std::size_t> count_dist(0, std::min<std::size_t>(2, pool.size()));
        const std::size_t count = count_dist(rng);
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> u(0, pool.size() - 1);
            const std::size_t j = u(rng);
            rec.scene.background.push_back(make_signal(pool[j]));
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
        }
        if (label == 1) rec.scene.target = make_signal(Modulation::BPSK);
    }
    return rec;
}

std::vector<DatasetRecord> make_split(const DatasetPlan& plan, std::size_t count,
                                      std::uint64_t master_seed, std::uint64_t split,
                                      const char* prefix) {
    std::vector<DatasetRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s-%06zu", prefix, i);
        out.push_back(make_record(plan, derive_seed(master_seed, split, i),
                                  i % 2 == 0 ? 1 : 0, id));
    }
    return out;
}

}  // namespace

Dataset generate_dataset(const DatasetPlan& plan, std::size_t n_train, std::size_t n_test,
                         std::uint64_t master_seed) {
    if (n_train == 0 || n_test == 0) throw ParameterError("dataset counts must be positive");
    if (plan.carriers_hz.empty()) throw ParameterError("dataset plan has no carriers");
    if (plan.layout == DatasetPlan::Layout::Congested && plan.negatives.empty())
        throw ParameterError("congested layout needs a background pool");
    Dataset d;
    d.train = make_split(plan, n_train, master_seed, 0, "train");
    d.test = make_split(plan, n_test, master_seed, 1, "test");
    return d;
}

Dataset generate_dataset(Scenario scenario, std::size_t n_train, std::size_t n_test,
                         std::uint64_t master_seed, double snr_db) {
    return generate_dataset(plan_for(scenario, snr_db), n_train, n_test, master_seed);
}

double mean_power(const IqSignal& signal) {
    if (signal.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : signal.samples) acc += std::norm(s);
    return acc / static_cast<double>(signal.size());
}

}  // namespace specattn::sigsynth
