#pragma once

// Enumerable toy environment: a 2x2 attention lattice with fixed patches and
// T = 2, so the policy takes exactly one location action. The first location
// is uniform over [-1, 1]^2, hence each cell has probability 1/4; the second
// cell's probability under N(mu, sigma^2 I) is a product of normal CDFs
// (clamping to [-1, 1] never changes the sign of a coordinate).

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "specattn/reinforce.hpp"

namespace toy {

using namespace specattn;
using reinforce::Patch;

inline constexpr int kSide = 2;
inline constexpr int kCells = kSide * kSide;

class Source final : public reinforce::GlimpseSource {
public:
    explicit Source(const std::array<Patch, kCells>& p) : patches_(p) {}
    int cells_per_axis() const override { return kSide; }
    Patch glimpse(const cyclo::GridCell& c) override { return patches_[static_cast<std::size_t>(c.row * kSide + c.col)]; }

private:
    std::array<Patch, kCells> patches_;
};

class Dataset final : public reinforce::GlimpseDataset {
public:
    std::vector<std::array<Patch, kCells>> patches;
    std::vector<int> labels;

    std::size_t size() const override { return labels.size(); }
    int label(std::size_t i) const override { return labels[i]; }
    std::unique_ptr<reinforce::GlimpseSource> source(std::size_t i) const override {
        return std::make_unique<Source>(patches[i]);
    }
};

inline Dataset make_dataset(std::uint64_t seed, int label = 1, double scale = 3.0) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Dataset d;
    d.patches.emplace_back();
    for (auto& p : d.patches.back())
        for (auto& v : p) v = n(rng);
    d.labels.push_back(label);
    return d;
}

inline reinforce::TrainConfig config(double sigma = 0.5) {
    reinforce::TrainConfig c;
    c.steps_T = 2;
    c.loc_sigma = sigma;
    c.mc_samples_M = 1000;
    c.threads = 1;
    return c;
}

inline cyclo::GridCell cell(int k) { return {k / kSide, k % kSide}; }

struct StepOut {
    Eigen::MatrixXd h;
    attnnet::HeadOutputs out;
};

// One network step from hidden state h on cell k, mirroring the rollout path.
inline StepOut step(const attnnet::ModelParams& p, const Eigen::MatrixXd& h, const Patch& patch, int k) {
    Eigen::MatrixXd P(cyclo::kPatchSize, 1), L(2, 1);
    for (int i = 0; i < cyclo::kPatchSize; ++i) P(i, 0) = patch[static_cast<std::size_t>(i)];
    L.col(0) = reinforce::cell_center(cell(k), kSide);
    const auto v = attnnet::encode_value(p, P);
    const auto s = attnnet::encode_location(p, L);
    const auto f = attnnet::fuse(p, v, s);
    StepOut o;
    o.h = attnnet::rnn_step(p, h, f);
    o.out = attnnet::heads(p, o.h);
    return o;
}

inline double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(second cell = k | mean mu). x selects the column, y the row.
inline double cell_prob(const Eigen::Vector2d& mu, double sigma, int k) {
    const double px = phi(mu.x() / sigma), py = phi(mu.y() / sigma);
    const int row = k / kSide, col = k % kSide;
    return (col == 1 ? px : 1.0 - px) * (row == 1 ? py : 1.0 - py);
}

struct Table {
    std::array<std::array<double, kCells>, kCells> reward{};  // [c1][c2]
    std::array<std::array<double, kCells>, kCells> margin{};  // |p_T - 0.5|
    std::array<Eigen::Vector2d, kCells> mu;                   // policy mean after c1
};

inline Table enumerate(const attnnet::ModelParams& p, const std::array<Patch, kCells>& patches, int label) {
    Table t;
    const Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(attnnet::kHiddenDim, 1);
    for (int c1 = 0; c1 < kCells; ++c1) {
        const auto s1 = step(p, h0, patches[static_cast<std::size_t>(c1)], c1);
        t.mu[static_cast<std::size_t>(c1)] = s1.out.loc_mean.col(0);
        for (int c2 = 0; c2 < kCells; ++c2) {
            const auto s2 = step(p, s1.h, patches[static_cast<std::size_t>(c2)], c2);
            const double prob = s2.out.class_prob(0, 0);
            t.reward[c1][c2] = ((prob > 0.5 ? 1 : 0) == label) ? 1.0 : 0.0;
            t.margin[c1][c2] = std::abs(prob - 0.5);
        }
    }
    return t;
}

// F(theta') = E[R] with the action distribution at theta' and rewards frozen at theta.
inline double surrogate(const attnnet::ModelParams& p, const std::array<Patch, kCells>& patches,
                        const Table& frozen, double sigma) {
    const Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(attnnet::kHiddenDim, 1);
    double f = 0.0;
    for (int c1 = 0; c1 < kCells; ++c1) {
        const auto s1 = step(p, h0, patches[static_cast<std::size_t>(c1)], c1);
        const Eigen::Vector2d mu = s1.out.loc_mean.col(0);
        for (int c2 = 0; c2 < kCells; ++c2) f += 0.25 * cell_prob(mu, sigma, c2) * frozen.reward[c1][c2];
    }
    return f;
}

inline double expected_reward(const Table& t, double sigma) {
    double f = 0.0;
    for (int c1 = 0; c1 < kCells; ++c1)
        for (int c2 = 0; c2 < kCells; ++c2) f += 0.25 * cell_prob(t.mu[c1], sigma, c2) * t.reward[c1][c2];
    return f;
}

struct Coord {
    std::string tensor;
    Eigen::Index row = 0, col = 0;
};

inline double& at(attnnet::ModelParams& p, const Coord& c) {
    double* out = nullptr;
    p.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
        if (name == c.tensor) out = &m(c.row, c.col);
    });
    return *out;
}

inline double at(const attnnet::ModelParams& p, const Coord& c) {
    double out = 0.0;
    p.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
        if (name == c.tensor) out = m(c.row, c.col);
    });
    return out;
}

// Exact expectation of the policy-gradient loss term, -dE[R]/dtheta, by
// central differences of the enumerated surrogate.
inline double exact_reinforce_grad(const attnnet::ModelParams& p, const std::array<Patch, kCells>& patches,
                                   const Table& frozen, double sigma, const Coord& c, double h = 1e-5) {
    attnnet::ModelParams q = p;
    at(q, c) = at(p, c) + h;
    const double up = surrogate(q, patches, frozen, sigma);
    at(q, c) = at(p, c) - h;
    const double dn = surrogate(q, patches, frozen, sigma);
    return -(up - dn) / (2.0 * h);
}

struct McResult {
    std::vector<double> mean, se;
    double mean_reward = 0.0;
};

// Mean and batch-means standard error of grad_estimate over `batches` calls of
// M episodes each, for the given coordinates.
inline McResult monte_carlo(const attnnet::ModelParams& p, const Dataset& d, const reinforce::TrainConfig& cfg,
                            const std::vector<Coord>& coords, int batches, std::uint64_t seed,
                            unsigned terms = reinforce::kReinforce) {
    const std::size_t idx[] = {0};
    std::vector<std::vector<double>> samples(coords.size());
    McResult r;
    for (int b = 0; b < batches; ++b) {
        const auto g = reinforce::grad_estimate(p, d, idx, cfg, derive_seed(seed, static_cast<std::uint64_t>(b)), terms);
        for (std::size_t k = 0; k < coords.size(); ++k) samples[k].push_back(at(g.grad, coords[k]));
        r.mean_reward += g.mean_reward / batches;
    }
    for (const auto& s : samples) {
        double m = 0.0, v = 0.0;
        for (double x : s) m += x;
        m /= static_cast<double>(s.size());
        for (double x : s) v += (x - m) * (x - m);
        v /= static_cast<double>(s.size() - 1);
        r.mean.push_back(m);
        r.se.push_back(std::sqrt(v / static_cast<double>(s.size())));
    }
    return r;
}

}  // namespace toy
