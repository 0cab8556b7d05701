#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specattn/cyclo.hpp"
#include "specattn/detector.hpp"
#include "specattn/reinforce.hpp"
#include "specattn/sigsynth.hpp"

namespace specattn::bench {

/// Supervised full-grid reference: 2x2 mean pool (64x64 -> 32x32), one
/// 256-unit ReLU layer, logistic output; cross-entropy, plain mini-batch SGD.
struct BaselineConfig {
    int epochs = 60;
    double lr = 0.05;
    int batch_size = 16;
    int hidden = 256;
    std::uint64_t seed = 1;
};

enum class Task { ScenarioI, ScenarioII, PairBpskFsk4 };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct BenchConfig {
    Task task = Task::ScenarioI;
    std::size_t n_train = 800;
    std::size_t n_test = 200;
    std::uint64_t data_seed = 7;
    double snr_db = kDefaultSnrDb;
    reinforce::TrainConfig train;
    cyclo::ScfConfig scf;
    bool with_baseline = false;
    BaselineConfig baseline;
};

/// Dataset plan a task draws from.
sigsynth::DatasetPlan plan_for(const BenchConfig& config);

nlohmann::json to_json(const BenchConfig& c);
BenchConfig bench_config_from_json(const nlohmann::json& j);

/// Labelled grids for a list of records, computed in parallel.
reinforce::GridDataset grid_dataset(const std::vector<sigsynth::DatasetRecord>& records,
                                    const cyclo::ScfConfig& scf, unsigned threads);

/// The carrier a record's accuracy is attributed to: the target's carrier,
/// else the first background signal's; nullopt for noise-only scenes.
std::optional<double> reference_carrier(const sigsynth::DatasetRecord& r);

struct CarrierAccuracy {
    double carrier_hz = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;
};

struct RecordResult {
    std::string id;
    int label = 0;
    detector::DetectionReport report;
};

struct BenchReport {
    Task task = Task::ScenarioI;
    std::vector<CarrierAccuracy> per_carrier;
    double overall_accuracy = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> baseline_accuracy;
    double mean_bins_fraction = 0.0;  // patch bins / full-grid bins, averaged over test detections
    double mean_cell_fraction = 0.0;  // distinct attended cells / 64, averaged
    std::size_t max_bins_computed = 0;
    std::size_t max_patches_computed = 0;
    std::size_t baseline_bins_per_decision = 0;
    int selected_epoch = 0;
    std::string config_digest;
    std::vector<reinforce::CurvePoint> curve;
    std::vector<RecordResult> records;
    attnnet::ModelParams params;
};

/// Generates the task's dataset, trains, and evaluates greedy detections on the
/// test split through the signal path (patches computed on demand).
BenchReport run(const BenchConfig& config);

/// Evaluation only, with given parameters.
BenchReport evaluate(const BenchConfig& config, const attnnet::ModelParams& params,
                     const sigsynth::Dataset& data);

BenchReport run_scenario_i(BenchConfig config);
BenchReport run_scenario_ii(BenchConfig config);
/// BPSK vs 4FSK at 300 MHz; returns the report (overall_accuracy is the task accuracy).
BenchReport classify_pair_task(BenchConfig config);

struct BaselineResult {
    double test_accuracy = 0.0;
    double train_accuracy = 0.0;
};

/// 1024-dimensional pooled features of a 64x64 grid.
Eigen::VectorXd pooled_features(const cyclo::ScfGrid& grid);

BaselineResult baseline_full_scf(const reinforce::GridDataset& train, const reinforce::GridDataset& test,
                                 const BaselineConfig& config);

std::string summary_text(const BenchReport& r);
std::string per_carrier_csv(const BenchReport& r);
std::string records_csv(const BenchReport& r);
std::string curve_csv(const std::vector<reinforce::CurvePoint>& curve);
std::string trace_csv(const std::vector<detector::TracePoint>& trace);

}  // namespace specattn::bench
