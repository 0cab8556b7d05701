#include "specattn/detector.hpp"

#include <algorithm>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace specattn::detector {

double DetectionReport::cell_fraction() const {
    const double cells = static_cast<double>(cyclo::kCellsPerAxis * cyclo::kCellsPerAxis);
    return static_cast<double>(patches_computed) / cells;
}

double DetectionReport::bin_fraction() const {
    return full_grid_bins == 0 ? 0.0
                               : static_cast<double>(scf_bins_computed) / static_cast<double>(full_grid_bins);
}

DetectionReport detect(const attnnet::ModelParams& params, const sigsynth::IqSignal& signal,
                       const reinforce::TrainConfig& config, DetectMode mode, const cyclo::ScfConfig& scf) {
    cyclo::PatchEvaluator ev(signal, scf);
    reinforce::EvaluatorSource source(ev);
    // The label only feeds the reward, which detection does not report.
    const reinforce::Episode ep = reinforce::rollout(params, source, 0, config, mode.seed, mode.sampling);

    DetectionReport r;
    r.decision = ep.predicted;
    r.class_prob = ep.class_prob;
    for (const auto& st : ep.steps) {
        r.attended_cells.push_back(st.cell);
        r.attended_locations.push_back(st.location);
    }
    r.patches_computed = ev.patches_computed();
    r.scf_bins_computed = ev.bins_computed();
    r.normalization_bins = ev.normalization_bins();
    r.full_grid_bins = scf.alpha_bins * scf.f_bins;
    return r;
}

std::pair<double, double> to_scf_plane(const Eigen::Vector2d& loc) {
    return {loc.x() * kPi, (loc.y() + 1.0) * kPi};
}

std::vector<TracePoint> attention_trace(const attnnet::ModelParams& params,
                                        const reinforce::GlimpseDataset& data,
                                        const reinforce::TrainConfig& config, DetectMode mode) {
    const std::size_t n = data.size();
    std::vector<std::vector<TracePoint>> per(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
        auto src = data.source(i);
        const auto ep = reinforce::rollout(params, *src, data.label(i), config, derive_seed(mode.seed, i),
                                           mode.sampling);
        for (std::size_t t = 0; t < ep.steps.size(); ++t) {
            const auto [f, a] = to_scf_plane(ep.steps[t].location);
            per[i].push_back({i, static_cast<int>(t) + 1, f, a, ep.steps[t].cell});
        }
    });
    std::vector<TracePoint> out;
    out.reserve(n * static_cast<std::size_t>(config.steps_T));
    for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<cyclo::GridCell> top_energy_cells(const cyclo::ScfGrid& grid, std::size_t count) {
    const auto energy = cyclo::cell_energy(grid);
    std::vector<std::size_t> idx(energy.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });
    idx.resize(std::min(count, idx.size()));
    std::vector<cyclo::GridCell> cells;
    for (auto i : idx)
        cells.push_back({static_cast<int>(i) / cyclo::kCellsPerAxis, static_cast<int>(i) % cyclo::kCellsPerAxis});
    return cells;
}

cyclo::ScfGrid mean_grid(const std::vector<const cyclo::ScfGrid*>& grids) {
    if (grids.empty()) throw ParameterError("no grids to average");
    cyclo::ScfGrid out = *grids.front();
    std::fill(out.magnitudes.begin(), out.magnitudes.end(), 0.0);
    out.scale = 1.0;
    for (const auto* g : grids) {
        if (g->magnitudes.size() != out.magnitudes.size()) throw ParameterError("grid sizes differ");
        for (std::size_t k = 0; k < out.magnitudes.size(); ++k) out.magnitudes[k] += g->magnitudes[k];
    }
    for (auto& v : out.magnitudes) v /= static_cast<double>(grids.size());
    return out;
}

double attention_concentration(const std::vector<TracePoint>& trace, const reinforce::GridDataset& data,
                               std::size_t count) {
    if (trace.empty()) return 0.0;
    std::vector<cyclo::GridCell> top[2];
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<const cyclo::ScfGrid*> members;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.label(i) == cls) members.push_back(&data.grid(i));
        if (!members.empty()) top[cls] = top_energy_cells(mean_grid(members), count);
    }
    std::size_t hits = 0;
    for (const auto& p : trace) {
        const auto& cells = top[data.label(p.episode)];
        if (std::find(cells.begin(), cells.end(), p.cell) != cells.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trace.size());
}

UniformityTest uniformity_test(const std::vector<TracePoint>& trace) {
    constexpr int kCells = cyclo::kCellsPerAxis * cyclo::kCellsPerAxis;
    std::vector<double> counts(kCells, 0.0);
    for (const auto& p : trace) counts[static_cast<std::size_t>(p.cell.row * cyclo::kCellsPerAxis + p.cell.col)] += 1;
    const double expected = static_cast<double>(trace.size()) / kCells;
    UniformityTest t;
    if (expected <= 0.0) return t;
    for (double c : counts) t.chi2 += (c - expected) * (c - expected) / expected;
    t.p_value = boost::math::gamma_q((kCells - 1) / 2.0, t.chi2 / 2.0);
    return t;
}

}  // namespace specattn::detector
