#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "specattn/attnnet.hpp"
#include "specattn/cyclo.hpp"

namespace specattn::reinforce {

using attnnet::Matrix;
using attnnet::ModelParams;
using cyclo::GridCell;
using Patch = std::array<double, cyclo::kPatchSize>;

struct TrainConfig {
    int steps_T = 5;
    int mc_samples_M = 10;
    double lr = 0.05;
    double loc_sigma = 0.15;  // normalized location units
    int epochs = 200;
    int batch_size = 16;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0 = all cores; results do not depend on it

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

enum class Sampling { Stochastic, Greedy };

/// Supplies the observation for any attention cell of one episode.
class GlimpseSource {
public:
    virtual ~GlimpseSource() = default;
    virtual int cells_per_axis() const = 0;
    virtual Patch glimpse(const GridCell& cell) = 0;
};

/// Glimpses read from a precomputed SCF grid.
class GridSource final : public GlimpseSource {
public:
    explicit GridSource(const cyclo::ScfGrid& grid) : grid_(&grid) {}
    int cells_per_axis() const override { return cyclo::kCellsPerAxis; }
    Patch glimpse(const GridCell& cell) override;

private:
    const cyclo::ScfGrid* grid_;
};

/// Glimpses computed on demand from the signal.
class EvaluatorSource final : public GlimpseSource {
public:
    explicit EvaluatorSource(cyclo::PatchEvaluator& ev) : ev_(&ev) {}
    int cells_per_axis() const override { return cyclo::kCellsPerAxis; }
    Patch glimpse(const GridCell& cell) override { return ev_->patch(cell).values; }

private:
    cyclo::PatchEvaluator* ev_;
};

/// Indexed collection of labelled episodes-to-be.
class GlimpseDataset {
public:
    virtual ~GlimpseDataset() = default;
    virtual std::size_t size() const = 0;
    virtual int label(std::size_t i) const = 0;
    virtual std::unique_ptr<GlimpseSource> source(std::size_t i) const = 0;
};

class GridDataset final : public GlimpseDataset {
public:
    GridDataset(std::vector<cyclo::ScfGrid> grids, std::vector<int> labels);
    std::size_t size() const override { return grids_.size(); }
    int label(std::size_t i) const override { return labels_[i]; }
    std::unique_ptr<GlimpseSource> source(std::size_t i) const override;
    const cyclo::ScfGrid& grid(std::size_t i) const { return grids_[i]; }
    const std::vector<int>& labels() const { return labels_; }

private:
    std::vector<cyclo::ScfGrid> grids_;
    std::vector<int> labels_;
};

/// Maps a location in [-1, 1]^2 (x = f axis, y = alpha axis) to its cell.
GridCell snap_to_cell(const Eigen::Vector2d& loc, int cells_per_axis);
/// Normalized coordinates of a cell's center.
Eigen::Vector2d cell_center(const GridCell& cell, int cells_per_axis);

struct Step {
    Eigen::Vector2d sample;    // raw draw (unclamped); log-density is evaluated here
    Eigen::Vector2d location;  // executed location, clamped to [-1, 1]^2
    GridCell cell;
    Patch patch{};
    Eigen::Vector2d loc_mean;  // policy mean produced after this step
    double baseline = 0.0;
    double class_prob = 0.5;
};

struct Episode {
    int cells_per_axis = cyclo::kCellsPerAxis;
    std::vector<Step> steps;
    double class_prob = 0.5;  // at t = T
    int predicted = 0;
    int label = 0;
    std::vector<double> rewards;  // r_t
    std::vector<double> returns;  // R_t
};

/// Terminal reward: r_T = 1 iff the decision is correct; R_t = sum_{tau >= t} r_tau.
void reward(Episode& episode);

/// One T-step episode. The first location is uniform over [-1,1]^2
/// (Stochastic) or the lattice center (Greedy); later ones are drawn from
/// N(loc_mean_{t-1}, sigma^2 I) or set to the mean.
Episode rollout(const ModelParams& params, GlimpseSource& source, int label, const TrainConfig& config,
                std::uint64_t seed, Sampling mode = Sampling::Stochastic);

/// Which loss terms contribute to a gradient.
enum Terms : unsigned {
    kReinforce = 1u,
    kBaseline = 2u,
    kClassification = 4u,
    kAllTerms = 7u,
};

struct GradEstimate {
    ModelParams grad = ModelParams::zeros();
    double mean_reward = 0.0;
    double baseline_mse = 0.0;
    double classification_loss = 0.0;
    std::size_t episodes = 0;
};

/// Monte Carlo estimate of the loss gradient over `indices` of `data`:
/// M rollouts per record, averaged over M and the batch.
GradEstimate grad_estimate(const ModelParams& params, const GlimpseDataset& data,
                           std::span<const std::size_t> indices, const TrainConfig& config,
                           std::uint64_t seed, unsigned terms = kAllTerms);

/// Per-episode seed used by grad_estimate for record slot `slot`, sample `m`.
std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t slot, int m);

/// Episodes with fixed actions, used to evaluate the surrogate loss at
/// perturbed parameters. Each episode replays its recorded cells, patches and
/// raw samples; the return R and the weights (R - b_t) of the policy term are
/// held at their recorded values.
struct FrozenEpisode {
    Episode episode;
    std::vector<double> advantage;  // R - b_t as recorded
};

FrozenEpisode freeze(const Episode& e);

/// Surrogate loss of frozen episodes:
/// -sum_t log pi(a_t) adv_t + (1/T) sum_t (R - b_t)^2 + BCE(p_T, y), averaged.
double surrogate_loss(const ModelParams& params, std::span<const FrozenEpisode> episodes,
                      const TrainConfig& config, unsigned terms = kAllTerms);

/// Analytic gradient of surrogate_loss.
ModelParams surrogate_gradient(const ModelParams& params, std::span<const FrozenEpisode> episodes,
                               const TrainConfig& config, unsigned terms = kAllTerms);

/// theta - lr * grad. Throws ParameterError on shape mismatch.
ModelParams sgd_update(const ModelParams& params, const GradEstimate& grad, double lr);
void sgd_update_inplace(ModelParams& params, const ModelParams& grad, double lr);

struct CurvePoint {
    int epoch = 0;
    double mean_reward = 0.0;
    double train_acc = 0.0;
    double test_acc = -1.0;  // negative when no test split was given
    double loss = 0.0;
};

struct TrainResult {
    ModelParams params;           // after the last epoch
    ModelParams selected;         // epoch with the highest greedy train accuracy (earliest on ties)
    int selected_epoch = 0;
    std::vector<CurvePoint> curve;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, ModelParams last_good, int epoch)
        : std::runtime_error(what), last_good(std::move(last_good)), epoch(epoch) {}
    ModelParams last_good;
    int epoch;
};

using EpochCallback = std::function<void(const CurvePoint&, const ModelParams&)>;

/// Shuffled mini-batch training with grad_estimate + sgd_update. Accuracies in
/// the curve use greedy episodes.
TrainResult train(const GlimpseDataset& train_data, const GlimpseDataset* test_data,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Decisions for every record.
struct Evaluation {
    std::vector<int> predicted;
    std::vector<double> class_prob;
    double accuracy = 0.0;
};

Evaluation evaluate(const ModelParams& params, const GlimpseDataset& data, const TrainConfig& config,
                    Sampling mode = Sampling::Greedy, std::uint64_t seed = 0);

}  // namespace specattn::reinforce
