#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "specattn/attnnet.hpp"
#include "specattn/cyclo.hpp"
#include "specattn/reinforce.hpp"
#include "specattn/sigsynth.hpp"

namespace specattn::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'A', 'T', 'T', 'N', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr int kManifestVersion = 1;

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string digest(std::string_view text);

json to_json(const sigsynth::SignalSpec& s);
sigsynth::SignalSpec signal_from_json(const json& j);
json to_json(const sigsynth::DatasetRecord& r);
sigsynth::DatasetRecord record_from_json(const json& j);
json to_json(const sigsynth::DatasetPlan& p);
sigsynth::DatasetPlan plan_from_json(const json& j);

/// Dataset manifest: scene specifications and seeds, not samples.
struct Manifest {
    std::string scenario;  // "I", "II" or a custom name
    std::uint64_t master_seed = 0;
    sigsynth::DatasetPlan plan;
    sigsynth::Dataset data;
    double sample_rate_hz = kSampleRateHz;
    std::size_t window_n = kWindowN;
};

json to_json(const Manifest& m);
Manifest manifest_from_json(const json& j);
void write_manifest(const fs::path& path, const Manifest& m);
Manifest read_manifest(const fs::path& path);

/// Finds a record by id in either split; throws DataError when absent.
const sigsynth::DatasetRecord& find_record(const Manifest& m, const std::string& id);

json to_json(const reinforce::TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
reinforce::TrainConfig train_config_from_json(const json& j);
json to_json(const cyclo::ScfConfig& c);
cyclo::ScfConfig scf_config_from_json(const json& j);

/// Binary checkpoint: magic, u32 version, u32 tensor count, then per tensor
/// u32 name length, name bytes, u64 rows, u64 cols, rows*cols little-endian
/// f64 in row-major order.
void write_checkpoint(const fs::path& path, const attnnet::ModelParams& params);
attnnet::ModelParams read_checkpoint(const fs::path& path);
std::string encode_checkpoint(const attnnet::ModelParams& params);
attnnet::ModelParams decode_checkpoint(std::string_view bytes);

void write_grid_csv(const fs::path& path, const cyclo::ScfGrid& grid);
/// 8-bit binary PGM, row = alpha bin, pixel = round(255 * min(1, value)).
void write_grid_pgm(const fs::path& path, const cyclo::ScfGrid& grid);

/// Interleaved little-endian float32 I/Q plus a JSON sidecar at path + ".json".
void write_raw_iq(const fs::path& path, const sigsynth::IqSignal& signal);
sigsynth::IqSignal read_raw_iq(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace specattn::io
