#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specattn/common.hpp"

namespace specattn::sigsynth {

enum class Modulation { BPSK, QPSK, FSK2, FSK4 };

std::string to_string(Modulation m);
Modulation modulation_from_string(const std::string& s);

/// Number of constellation points / tones.
int modulation_order(Modulation m);

struct SignalSpec {
    Modulation scheme = Modulation::BPSK;
    double carrier_hz = 300e6;
    double symbol_rate_hz = kSymbolRateHz;
    double snr_db = kDefaultSnrDb;  // relative to the scene noise floor
    std::uint64_t seed = 0;

    bool operator==(const SignalSpec&) const = default;
};

struct IqSignal {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = kSampleRateHz;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct SceneSpec {
    std::vector<SignalSpec> background;
    std::optional<SignalSpec> target;
    double noise_floor_snr_db = kDefaultSnrDb;
    std::uint64_t noise_seed = 0;

    std::size_t signal_count() const { return background.size() + (target ? 1 : 0); }
    bool operator==(const SceneSpec&) const = default;
};

struct DatasetRecord {
    std::string id;
    SceneSpec scene;
    int label = 0;
    std::uint64_t seed = 0;

    bool operator==(const DatasetRecord&) const = default;
};

enum class Scenario { I, II };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// Validates carrier/symbol-rate bounds; throws ParameterError.
void validate(const SignalSpec& spec, double sample_rate_hz);

/// Analytic (complex) waveform for an explicit symbol stream. Symbols are
/// constellation/tone indices in [0, order). Rectangular pulses, random
/// carrier phase and symbol timing derived from spec.seed.
IqSignal modulate_symbols(const SignalSpec& spec, std::span<const int> symbols,
                          double sample_rate_hz, std::size_t n);

/// Number of symbols modulate_symbols consumes for an n-sample window.
std::size_t symbols_needed(const SignalSpec& spec, double sample_rate_hz, std::size_t n);

/// Unit-power analytic waveform with symbols drawn from spec.seed.
IqSignal modulate(const SignalSpec& spec, double sample_rate_hz = kSampleRateHz,
                  std::size_t n = kWindowN);

/// Adds circular complex Gaussian noise with the given absolute power.
IqSignal add_noise(const IqSignal& signal, double noise_power, std::uint64_t seed);

/// Adds noise scaled to the measured signal power. snr_db = +inf is a no-op.
IqSignal add_awgn(const IqSignal& signal, double snr_db, std::uint64_t seed);

/// Received window: real passband projection of all components plus AWGN.
std::pair<IqSignal, int> compose_scene(const SceneSpec& scene,
                                       double sample_rate_hz = kSampleRateHz,
                                       std::size_t n = kWindowN);

/// Shape of the negative/positive scenes a dataset draws from.
struct DatasetPlan {
    enum class Layout { SingleSignal, Congested };
    Layout layout = Layout::SingleSignal;
    // Schemes used for label-0 scenes (SingleSignal) or the background pool
    // (Congested). Empty list with SingleSignal means label-0 scenes are noise only.
    std::vector<Modulation> negatives = {Modulation::QPSK, Modulation::FSK2, Modulation::FSK4};
    std::vector<double> carriers_hz = {kCarriersHz[0], kCarriersHz[1], kCarriersHz[2], kCarriersHz[3]};
    double snr_db = kDefaultSnrDb;
    double symbol_rate_hz = kSymbolRateHz;
};

DatasetPlan plan_for(Scenario scenario, double snr_db = kDefaultSnrDb);

struct Dataset {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> test;
};

Dataset generate_dataset(const DatasetPlan& plan, std::size_t n_train, std::size_t n_test,
                         std::uint64_t master_seed);

Dataset generate_dataset(Scenario scenario, std::size_t n_train, std::size_t n_test,
                         std::uint64_t master_seed, double snr_db = kDefaultSnrDb);

/// Mean |x[n]|^2.
double mean_power(const IqSignal& signal);

}  // namespace specattn::sigsynth
