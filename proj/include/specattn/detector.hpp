#pragma once

#include <cstdint>
#include <vector>

#include "specattn/cyclo.hpp"
#include "specattn/reinforce.hpp"
#include "specattn/sigsynth.hpp"

namespace specattn::detector {

using reinforce::Sampling;

struct DetectMode {
    Sampling sampling = Sampling::Greedy;
    std::uint64_t seed = 0;

    static DetectMode greedy() { return {Sampling::Greedy, 0}; }
    static DetectMode stochastic(std::uint64_t seed) { return {Sampling::Stochastic, seed}; }
};

struct DetectionReport {
    int decision = 0;
    double class_prob = 0.5;
    std::vector<cyclo::GridCell> attended_cells;      // one per step, in order
    std::vector<Eigen::Vector2d> attended_locations;  // continuous, x = f axis, y = alpha axis
    std::size_t patches_computed = 0;
    std::size_t scf_bins_computed = 0;   // 16 per distinct attended cell
    std::size_t normalization_bins = 0;  // alpha = 0 row, when normalizing
    std::size_t full_grid_bins = 0;      // alpha_bins * f_bins

    double cell_fraction() const;  // distinct attended cells / all cells
    double bin_fraction() const;   // scf_bins_computed / full_grid_bins
};

/// Runs one T-step episode on the received window, evaluating SCF only at
/// attended cells. The patch cache lives for this call only.
DetectionReport detect(const attnnet::ModelParams& params, const sigsynth::IqSignal& signal,
                       const reinforce::TrainConfig& config, DetectMode mode = DetectMode::greedy(),
                       const cyclo::ScfConfig& scf = {});

/// Attended location mapped to the SCF plane.
struct TracePoint {
    std::size_t episode = 0;
    int step = 0;
    double f = 0.0;      // rad/sample, [-pi, pi)
    double alpha = 0.0;  // rad/sample, [0, 2*pi)
    cyclo::GridCell cell;
};

/// Normalized location -> (f, alpha).
std::pair<double, double> to_scf_plane(const Eigen::Vector2d& loc);

/// T points per record. Episode i uses seed derive_seed(mode.seed, i) when stochastic.
std::vector<TracePoint> attention_trace(const attnnet::ModelParams& params,
                                        const reinforce::GlimpseDataset& data,
                                        const reinforce::TrainConfig& config,
                                        DetectMode mode = DetectMode::greedy());

/// Cells of the 8x8 lattice ranked by descending energy of `grid`; ties by index.
std::vector<cyclo::GridCell> top_energy_cells(const cyclo::ScfGrid& grid, std::size_t count);

/// Element-wise mean of equally sized grids.
cyclo::ScfGrid mean_grid(const std::vector<const cyclo::ScfGrid*>& grids);

/// Fraction of trace points falling in the top-`count` energy cells of the
/// class-mean grid of their own record's class.
double attention_concentration(const std::vector<TracePoint>& trace, const reinforce::GridDataset& data,
                               std::size_t count = 8);

/// Pearson chi-square statistic of cell counts against the uniform distribution
/// over all 64 cells, and its upper-tail p-value (63 degrees of freedom).
struct UniformityTest {
    double chi2 = 0.0;
    double p_value = 1.0;
};
UniformityTest uniformity_test(const std::vector<TracePoint>& trace);

}  // namespace specattn::detector
