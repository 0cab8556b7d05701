#pragma once

// Finite-difference checks of every sub-network and of the frozen-episode
// loss, on small random instances.

#include <map>

#include "gradcheck.hpp"
#include "specattn/reinforce.hpp"

namespace netchecks {

using namespace specattn;
using attnnet::Matrix;
using attnnet::ModelParams;
using gradcheck::random_matrix;
using gradcheck::Worst;

// Random parameters with non-zero biases so every path is exercised.
inline ModelParams random_params(std::uint64_t seed) {
    ModelParams p = attnnet::init_params(seed);
    std::uint64_t k = 0;
    p.for_each([&](const std::string&, Matrix& m) {
        if (m.cols() == 1) m = random_matrix(m.rows(), 1, derive_seed(seed, ++k), 0.1);
    });
    return p;
}

inline double weighted(const Matrix& out, const Matrix& w) { return (out.array() * w.array()).sum(); }

inline Worst merge(std::initializer_list<Worst> ws) {
    Worst all;
    for (const auto& w : ws) {
        all.checked += w.checked;
        if (w.err >= all.err) {
            all.err = w.err;
            all.where = w.where;
        }
    }
    return all;
}

inline Worst value_encoder(std::uint64_t seed, int batch = 3) {
    const ModelParams p = random_params(seed);
    const Matrix x = random_matrix(attnnet::kInputDim, batch, derive_seed(seed, 1));
    const Matrix w = random_matrix(attnnet::kValueDim, batch, derive_seed(seed, 2));
    Matrix pre;
    attnnet::encode_value(p, x, &pre);
    ModelParams g = ModelParams::zeros();
    attnnet::encode_value_backward(p, x, pre, w, g);
    return gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return weighted(attnnet::encode_value(q, x), w); },
        {"value_encoder.weight", "value_encoder.bias"}, 12, derive_seed(seed, 3));
}

inline Worst location_encoder(std::uint64_t seed, int batch = 3) {
    const ModelParams p = random_params(seed);
    const Matrix x = random_matrix(2, batch, derive_seed(seed, 1), 0.5);
    const Matrix w = random_matrix(attnnet::kLocationDim, batch, derive_seed(seed, 2));
    Matrix pre;
    attnnet::encode_location(p, x, &pre);
    ModelParams g = ModelParams::zeros();
    attnnet::encode_location_backward(p, x, pre, w, g);
    return gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return weighted(attnnet::encode_location(q, x), w); },
        {"loc_encoder.weight", "loc_encoder.bias"}, 12, derive_seed(seed, 3));
}

inline Worst fusion(std::uint64_t seed, int batch = 2) {
    const ModelParams p = random_params(seed);
    const Matrix v = random_matrix(attnnet::kValueDim, batch, derive_seed(seed, 1)).cwiseAbs();
    const Matrix s = random_matrix(attnnet::kLocationDim, batch, derive_seed(seed, 2)).cwiseAbs();
    const Matrix w = random_matrix(attnnet::kFusedDim, batch, derive_seed(seed, 3));
    Matrix pre;
    attnnet::fuse(p, v, s, &pre);
    ModelParams g = ModelParams::zeros();
    const auto [dv, ds] = attnnet::fuse_backward(p, v, s, pre, w, g);
    const Worst wp = gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return weighted(attnnet::fuse(q, v, s), w); },
        {"fusion.weight", "fusion.bias"}, 12, derive_seed(seed, 4));
    const Worst wv = gradcheck::check_input(v, dv, [&](const Matrix& x) { return weighted(attnnet::fuse(p, x, s), w); },
                                            "dv");
    const Worst ws = gradcheck::check_input(s, ds, [&](const Matrix& x) { return weighted(attnnet::fuse(p, v, x), w); },
                                            "ds");
    return merge({wp, wv, ws});
}

inline Worst recurrent(std::uint64_t seed, int batch = 2) {
    const ModelParams p = random_params(seed);
    const Matrix hp = random_matrix(attnnet::kHiddenDim, batch, derive_seed(seed, 1), 0.5);
    const Matrix f = random_matrix(attnnet::kFusedDim, batch, derive_seed(seed, 2)).cwiseAbs();
    const Matrix w = random_matrix(attnnet::kHiddenDim, batch, derive_seed(seed, 3));
    const Matrix h = attnnet::rnn_step(p, hp, f);
    ModelParams g = ModelParams::zeros();
    const auto [dh, df] = attnnet::rnn_step_backward(p, hp, f, h, w, g);
    const Worst wp = gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return weighted(attnnet::rnn_step(q, hp, f), w); },
        {"rnn_core.weight_hh", "rnn_core.weight_fh", "rnn_core.bias"}, 12, derive_seed(seed, 4));
    const Worst wh = gradcheck::check_input(
        hp, dh, [&](const Matrix& x) { return weighted(attnnet::rnn_step(p, x, f), w); }, "dh_prev");
    const Worst wf = gradcheck::check_input(
        f, df, [&](const Matrix& x) { return weighted(attnnet::rnn_step(p, hp, x), w); }, "df");
    return merge({wp, wh, wf});
}

inline Worst output_heads(std::uint64_t seed, int batch = 3) {
    const ModelParams p = random_params(seed);
    const Matrix h = random_matrix(attnnet::kHiddenDim, batch, derive_seed(seed, 1), 0.5).array().tanh().matrix();
    const Matrix a = random_matrix(2, batch, derive_seed(seed, 2));
    const Matrix b = random_matrix(1, batch, derive_seed(seed, 3));
    const Matrix c = random_matrix(1, batch, derive_seed(seed, 4));
    auto loss = [&](const ModelParams& q, const Matrix& hh) {
        const auto o = attnnet::heads(q, hh);
        const Matrix logit = (o.class_prob.array() / (1.0 - o.class_prob.array())).log().matrix();
        return weighted(o.loc_mean, a) + weighted(logit, b) + weighted(o.baseline, c);
    };
    ModelParams g = ModelParams::zeros();
    const Matrix dh = attnnet::heads_backward(p, h, attnnet::heads(p, h), a, b, c, g);
    const Worst wp = gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return loss(q, h); },
        {"loc_head.weight", "loc_head.bias", "class_head.weight", "class_head.bias", "baseline_head.weight",
         "baseline_head.bias"},
        8, derive_seed(seed, 5));
    const Worst wh = gradcheck::check_input(h, dh, [&](const Matrix& x) { return loss(p, x); }, "dh");
    return merge({wp, wh});
}

// Random-patch source on the full 8x8 lattice.
class NoiseSource final : public reinforce::GlimpseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}
    int cells_per_axis() const override { return cyclo::kCellsPerAxis; }
    reinforce::Patch glimpse(const cyclo::GridCell& c) override {
        Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(c.row), static_cast<std::uint64_t>(c.col)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        reinforce::Patch p;
        for (auto& v : p) v = u(rng);
        return p;
    }

private:
    std::uint64_t seed_;
};

// Frozen-action episode loss with all terms against its analytic gradient.
inline Worst episode_loss(std::uint64_t seed, int episodes = 3, int per_tensor = 4) {
    const ModelParams p = random_params(seed);
    reinforce::TrainConfig cfg;
    cfg.steps_T = 3;
    cfg.threads = 1;
    std::vector<reinforce::FrozenEpisode> frozen;
    for (int e = 0; e < episodes; ++e) {
        NoiseSource src(derive_seed(seed, 100 + static_cast<std::uint64_t>(e)));
        auto ep = reinforce::rollout(p, src, e % 2, cfg, derive_seed(seed, 200 + static_cast<std::uint64_t>(e)));
        frozen.push_back(reinforce::freeze(ep));
    }
    const ModelParams g = reinforce::surrogate_gradient(p, frozen, cfg);
    return gradcheck::check_params(
        p, g, [&](const ModelParams& q) { return reinforce::surrogate_loss(q, frozen, cfg); }, {}, per_tensor,
        derive_seed(seed, 7));
}

}  // namespace netchecks
