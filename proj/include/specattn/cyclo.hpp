#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "specattn/common.hpp"
#include "specattn/sigsynth.hpp"

namespace specattn::cyclo {

using sigsynth::IqSignal;
using cplx = std::complex<double>;

/// How grid bins are evaluated. Direct sums the cyclic autocorrelation
/// separately for every cyclic frequency and is the reference; Folded reduces
/// each lag product modulo the alpha-grid period once and is exact on the grid.
enum class ScfMethod { Direct, Folded };

struct ScfConfig {
    std::size_t window_n = kWindowN;
    std::size_t f_bins = 64;      // f in [-pi, pi), resolution 2*pi/f_bins
    std::size_t alpha_bins = 64;  // alpha in [0, 2*pi), resolution 2*pi/alpha_bins
    std::size_t max_lag = 32;
    bool circular = false;  // wrap x[n - l] around the window instead of zero-padding
    bool normalize = true;  // divide by the alpha = 0 maximum
    ScfMethod method = ScfMethod::Folded;

    double f_resolution() const { return kTwoPi / static_cast<double>(f_bins); }
    double alpha_resolution() const { return kTwoPi / static_cast<double>(alpha_bins); }
    double f_center(std::size_t m) const { return -kPi + f_resolution() * static_cast<double>(m); }
    double alpha_center(std::size_t k) const { return alpha_resolution() * static_cast<double>(k); }
    void validate() const;
};

// Attention lattice: 8x8 cells over the (alpha, f) grid, each cell sampled at
// 4x4 points (every second bin).
inline constexpr int kCellsPerAxis = 8;
inline constexpr int kPatchSide = 4;
inline constexpr int kPatchSize = kPatchSide * kPatchSide;
inline constexpr int kPatchStride = 2;

struct GridCell {
    int row = 0;  // alpha cell
    int col = 0;  // f cell

    auto operator<=>(const GridCell&) const = default;
};

/// Magnitudes indexed [alpha_bin][f_bin], row-major.
struct ScfGrid {
    std::size_t alpha_bins = 0;
    std::size_t f_bins = 0;
    std::vector<double> magnitudes;
    double scale = 1.0;  // raw = magnitudes * scale
    std::vector<double> alpha_axis;
    std::vector<double> f_axis;

    double at(std::size_t alpha_bin, std::size_t f_bin) const {
        return magnitudes[alpha_bin * f_bins + f_bin];
    }
};

struct ScfPatch {
    std::array<double, kPatchSize> values{};
    GridCell cell;
};

/// (alpha_bin, f_bin) of patch sample (i, j) inside `cell`.
std::pair<std::size_t, std::size_t> patch_point(const GridCell& cell, int i, int j);

bool valid_cell(const GridCell& cell, int cells_per_axis = kCellsPerAxis);

/// Finite-N cyclic autocorrelation at an arbitrary cyclic frequency for lags
/// lag_lo..lag_hi (inclusive). Direct evaluation.
std::vector<cplx> caf(const IqSignal& signal, double alpha, int lag_lo, int lag_hi,
                      bool circular = false, std::size_t window_n = kWindowN);

/// Truncated lag-domain transform of caf over [-max_lag, max_lag].
cplx scf_point(const IqSignal& signal, double alpha, double f, std::size_t max_lag,
               bool circular = false, std::size_t window_n = kWindowN);

/// |SCF| over the whole grid.
ScfGrid scf_full(const IqSignal& signal, const ScfConfig& config = {});

/// Lag-windowed autocorrelation PSD magnitude on the f grid (unnormalized).
std::vector<double> psd(const IqSignal& signal, const ScfConfig& config = {});

/// Sixteen SCF samples for one attention cell.
ScfPatch scf_patch(const IqSignal& signal, const GridCell& cell, const ScfConfig& config = {});

/// Extracts the patch for `cell` from a precomputed grid.
ScfPatch patch_from_grid(const ScfGrid& grid, const GridCell& cell);

/// Per-signal patch engine with a per-cell cache and evaluation counters.
/// Patches equal the corresponding scf_full entries bit-for-bit.
class PatchEvaluator {
public:
    PatchEvaluator(const IqSignal& signal, ScfConfig config);
    ~PatchEvaluator();
    PatchEvaluator(PatchEvaluator&&) noexcept;
    PatchEvaluator& operator=(PatchEvaluator&&) noexcept;

    const ScfPatch& patch(const GridCell& cell);

    /// SCF bins evaluated for patches (16 per distinct cell).
    std::size_t bins_computed() const { return bins_computed_; }
    /// Bins of the alpha = 0 row evaluated for normalization (0 when disabled).
    std::size_t normalization_bins() const { return normalization_bins_; }
    std::size_t patches_computed() const { return cache_.size(); }
    double normalization();

    struct Engine;

private:
    std::unique_ptr<Engine> engine_;
    std::map<GridCell, ScfPatch> cache_;
    std::optional<double> norm_;
    std::size_t bins_computed_ = 0;
    std::size_t normalization_bins_ = 0;
};

/// Sum of squared magnitudes of each cell's full 8x8 block, indexed [row][col].
std::vector<double> cell_energy(const ScfGrid& grid);

}  // namespace specattn::cyclo
