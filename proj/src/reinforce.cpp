#include "specattn/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "specattn/common.hpp"

namespace specattn::reinforce {

void TrainConfig::validate() const {
    if (steps_T < 1) throw ParameterError("steps_T must be at least 1");
    if (mc_samples_M < 1) throw ParameterError("mc_samples_M must be at least 1");
    if (!(loc_sigma > 0.0)) throw ParameterError("loc_sigma must be positive");
    if (!(lr >= 0.0)) throw ParameterError("lr must be non-negative");
    if (epochs < 0) throw ParameterError("epochs must be non-negative");
    if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
}

Patch GridSource::glimpse(const GridCell& cell) { return cyclo::patch_from_grid(*grid_, cell).values; }

GridDataset::GridDataset(std::vector<cyclo::ScfGrid> grids, std::vector<int> labels)
    : grids_(std::move(grids)), labels_(std::move(labels)) {
    if (grids_.size() != labels_.size()) throw ParameterError("grid/label count mismatch");
}

std::unique_ptr<GlimpseSource> GridDataset::source(std::size_t i) const {
    return std::make_unique<GridSource>(grids_[i]);
}

GridCell snap_to_cell(const Eigen::Vector2d& loc, int cells_per_axis) {
    auto index = [&](double v) {
        const double u = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * cells_per_axis;
        return std::clamp(static_cast<int>(std::floor(u)), 0, cells_per_axis - 1);
    };
    return GridCell{index(loc.y()), index(loc.x())};
}

Eigen::Vector2d cell_center(const GridCell& cell, int cells_per_axis) {
    const double k = static_cast<double>(cells_per_axis);
    return {-1.0 + (2.0 * cell.col + 1.0) / k, -1.0 + (2.0 * cell.row + 1.0) / k};
}

void reward(Episode& e) {
    const std::size_t T = e.steps.size();
    e.rewards.assign(T, 0.0);
    e.returns.assign(T, 0.0);
    if (T == 0) return;
    e.rewards[T - 1] = e.predicted == e.label ? 1.0 : 0.0;
    double acc = 0.0;
    for (std::size_t t = T; t-- > 0;) {
        acc += e.rewards[t];
        e.returns[t] = acc;
    }
}

std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t slot, int m) {
    return derive_seed(batch_seed, slot, static_cast<std::uint64_t>(m));
}

namespace {

using attnnet::HeadOutputs;

// Forward activations of a batch of episodes; column e is episode e.
struct Trace {
    std::vector<Matrix> patches, locs, v, v_pre, s, s_pre, f, f_pre, h;  // h[0] = h_0
    std::vector<HeadOutputs> out;  // out[t-1] after step t
};

// Runs (or replays) a batch of episodes. When `replay` is non-null each
// episode re-executes the recorded cells, patches and samples.
std::vector<Episode> run_batch(const ModelParams& params, std::span<GlimpseSource* const> sources,
                               std::span<const int> labels, const TrainConfig& config,
                               std::span<const std::uint64_t> seeds, Sampling mode,
                               std::span<const FrozenEpisode> replay, Trace* trace) {
    const int T = config.steps_T;
    const std::size_t B = replay.empty() ? sources.size() : replay.size();
    std::vector<Episode> eps(B);
    std::vector<Rng> rngs;
    std::vector<Eigen::Vector2d> sample(B), location(B);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (std::size_t e = 0; e < B; ++e) {
        eps[e].label = replay.empty() ? labels[e] : replay[e].episode.label;
        eps[e].cells_per_axis = replay.empty() ? sources[e]->cells_per_axis() : replay[e].episode.cells_per_axis;
        eps[e].steps.reserve(static_cast<std::size_t>(T));
        if (!replay.empty()) continue;
        rngs.emplace_back(seeds[e]);
        if (mode == Sampling::Stochastic) {
            const double x = uni(rngs[e]);
            const double y = uni(rngs[e]);
            sample[e] = {x, y};
        } else {
            sample[e] = {0.0, 0.0};
        }
        location[e] = sample[e];
    }

    Matrix h = Matrix::Zero(attnnet::kHiddenDim, static_cast<Eigen::Index>(B));
    if (trace) *trace = Trace{};
    if (trace) trace->h.push_back(h);

    Matrix P(cyclo::kPatchSize, static_cast<Eigen::Index>(B));
    Matrix Lc(2, static_cast<Eigen::Index>(B));
    for (int t = 1; t <= T; ++t) {
        for (std::size_t e = 0; e < B; ++e) {
            Step st;
            if (!replay.empty()) {
                const Step& rec = replay[e].episode.steps[static_cast<std::size_t>(t - 1)];
                st.sample = rec.sample;
                st.location = rec.location;
                st.cell = rec.cell;
                st.patch = rec.patch;
            } else {
                st.sample = sample[e];
                st.location = location[e];
                st.cell = snap_to_cell(st.location, eps[e].cells_per_axis);
                st.patch = sources[e]->glimpse(st.cell);
            }
            const Eigen::Vector2d center = cell_center(st.cell, eps[e].cells_per_axis);
            for (int i = 0; i < cyclo::kPatchSize; ++i)
                P(i, static_cast<Eigen::Index>(e)) = st.patch[static_cast<std::size_t>(i)];
            Lc.col(static_cast<Eigen::Index>(e)) = center;
            eps[e].steps.push_back(st);
        }
        Matrix v_pre, s_pre, f_pre;
        Matrix v = attnnet::encode_value(params, P, &v_pre);
        Matrix s = attnnet::encode_location(params, Lc, &s_pre);
        Matrix f = attnnet::fuse(params, v, s, &f_pre);
        h = attnnet::rnn_step(params, h, f);
        HeadOutputs out = attnnet::heads(params, h);

        for (std::size_t e = 0; e < B; ++e) {
            Step& st = eps[e].steps.back();
            const auto c = static_cast<Eigen::Index>(e);
            st.loc_mean = out.loc_mean.col(c);
            st.baseline = out.baseline(0, c);
            st.class_prob = out.class_prob(0, c);
            if (t < T && replay.empty()) {
                if (mode == Sampling::Stochastic) {
                    const double zx = gauss(rngs[e]);
                    const double zy = gauss(rngs[e]);
                    sample[e] = st.loc_mean + config.loc_sigma * Eigen::Vector2d(zx, zy);
                } else {
                    sample[e] = st.loc_mean;
                }
                location[e] = sample[e].cwiseMax(-1.0).cwiseMin(1.0);
            }
        }
        if (trace) {
            trace->patches.push_back(P);
            trace->locs.push_back(Lc);
            trace->v.push_back(std::move(v));
            trace->v_pre.push_back(std::move(v_pre));
            trace->s.push_back(std::move(s));
            trace->s_pre.push_back(std::move(s_pre));
            trace->f.push_back(std::move(f));
            trace->f_pre.push_back(std::move(f_pre));
            trace->h.push_back(h);
            trace->out.push_back(std::move(out));
        }
    }

    for (auto& ep : eps) {
        ep.class_prob = ep.steps.back().class_prob;
        ep.predicted = ep.class_prob > 0.5 ? 1 : 0;
        reward(ep);
    }
    return eps;
}

// Backpropagates the weighted surrogate loss through a traced batch.
// advantages[e][t] multiplies the policy term of the action drawn after step t+1.
void backprop(const ModelParams& params, const Trace& tr, const std::vector<Episode>& eps,
              const std::vector<std::vector<double>>& advantages, std::span<const double> weights,
              const TrainConfig& config, unsigned terms, ModelParams& grad) {
    const int T = config.steps_T;
    const auto B = static_cast<Eigen::Index>(eps.size());
    const double inv_var = 1.0 / (config.loc_sigma * config.loc_sigma);
    Matrix dh_next = Matrix::Zero(attnnet::kHiddenDim, B);
    for (int t = T; t >= 1; --t) {
        const auto ti = static_cast<std::size_t>(t - 1);
        const HeadOutputs& out = tr.out[ti];
        Matrix d_mu = Matrix::Zero(2, B);
        Matrix d_base = Matrix::Zero(1, B);
        Matrix d_logit = Matrix::Zero(1, B);
        for (Eigen::Index e = 0; e < B; ++e) {
            const auto& ep = eps[static_cast<std::size_t>(e)];
            const double w = weights[static_cast<std::size_t>(e)];
            const double R = ep.returns[0];
            if ((terms & kReinforce) && t < T) {
                const Eigen::Vector2d a = ep.steps[ti + 1].sample;
                const Eigen::Vector2d mu = out.loc_mean.col(e);
                d_mu.col(e) = -w * advantages[static_cast<std::size_t>(e)][ti] * inv_var * (a - mu);
            }
            if (terms & kBaseline) d_base(0, e) = -w * 2.0 * (R - out.baseline(0, e)) / T;
            if ((terms & kClassification) && t == T)
                d_logit(0, e) = w * (out.class_prob(0, e) - static_cast<double>(ep.label));
        }
        Matrix dh = attnnet::heads_backward(params, tr.h[ti + 1], out, d_mu, d_logit, d_base, grad);
        dh += dh_next;
        auto [dh_prev, df] = attnnet::rnn_step_backward(params, tr.h[ti], tr.f[ti], tr.h[ti + 1], dh, grad);
        auto [dv, ds] = attnnet::fuse_backward(params, tr.v[ti], tr.s[ti], tr.f_pre[ti], df, grad);
        attnnet::encode_value_backward(params, tr.patches[ti], tr.v_pre[ti], dv, grad);
        attnnet::encode_location_backward(params, tr.locs[ti], tr.s_pre[ti], ds, grad);
        dh_next = std::move(dh_prev);
    }
}

double bce(double p, int y) {
    const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double baseline_mse(const Episode& e) {
    double acc = 0.0;
    for (std::size_t t = 0; t < e.steps.size(); ++t) {
        const double d = e.returns[t] - e.steps[t].baseline;
        acc += d * d;
    }
    return acc / static_cast<double>(e.steps.size());
}

std::vector<std::vector<double>> live_advantages(const std::vector<Episode>& eps) {
    std::vector<std::vector<double>> adv(eps.size());
    for (std::size_t e = 0; e < eps.size(); ++e)
        for (std::size_t t = 0; t < eps[e].steps.size(); ++t)
            adv[e].push_back(eps[e].returns[t] - eps[e].steps[t].baseline);
    return adv;
}

}  // namespace

Episode rollout(const ModelParams& params, GlimpseSource& source, int label, const TrainConfig& config,
                std::uint64_t seed, Sampling mode) {
    config.validate();
    GlimpseSource* src[] = {&source};
    const int labels[] = {label};
    const std::uint64_t seeds[] = {seed};
    return run_batch(params, src, labels, config, seeds, mode, {}, nullptr).front();
}

GradEstimate grad_estimate(const ModelParams& params, const GlimpseDataset& data,
                           std::span<const std::size_t> indices, const TrainConfig& config,
                           std::uint64_t seed, unsigned terms) {
    config.validate();
    if (indices.empty()) throw ParameterError("empty batch");
    const std::size_t n = indices.size();
    const int M = config.mc_samples_M;
    const double w = 1.0 / (static_cast<double>(M) * static_cast<double>(n));

    struct Slot {
        ModelParams grad;
        double reward = 0.0, mse = 0.0, cls = 0.0;
    };
    std::vector<Slot> slots(n);
    // One chunk per record; the reduction below runs in record order, so the
    // result is independent of the worker count.
    parallel_for(n, config.threads, [&](std::size_t i) {
        const std::size_t rec = indices[i];
        std::vector<std::unique_ptr<GlimpseSource>> owned;
        std::vector<GlimpseSource*> srcs;
        std::vector<int> labels;
        std::vector<std::uint64_t> seeds;
        for (int m = 0; m < M; ++m) {
            owned.push_back(data.source(rec));
            srcs.push_back(owned.back().get());
            labels.push_back(data.label(rec));
            seeds.push_back(episode_seed(seed, i, m));
        }
        Trace tr;
        auto eps = run_batch(params, srcs, labels, config, seeds, Sampling::Stochastic, {}, &tr);
        Slot& slot = slots[i];
        slot.grad = ModelParams::zeros();
        const std::vector<double> weights(static_cast<std::size_t>(M), w);
        backprop(params, tr, eps, live_advantages(eps), weights, config, terms, slot.grad);
        for (const auto& e : eps) {
            slot.reward += e.returns[0];
            slot.mse += baseline_mse(e);
            slot.cls += bce(e.class_prob, e.label);
        }
    });

    GradEstimate g;
    g.episodes = n * static_cast<std::size_t>(M);
    for (const auto& s : slots) {
        g.grad += s.grad;
        g.mean_reward += s.reward;
        g.baseline_mse += s.mse;
        g.classification_loss += s.cls;
    }
    const double inv = 1.0 / static_cast<double>(g.episodes);
    g.mean_reward *= inv;
    g.baseline_mse *= inv;
    g.classification_loss *= inv;
    return g;
}

FrozenEpisode freeze(const Episode& e) {
    FrozenEpisode f;
    f.episode = e;
    for (std::size_t t = 0; t < e.steps.size(); ++t) f.advantage.push_back(e.returns[t] - e.steps[t].baseline);
    return f;
}

double surrogate_loss(const ModelParams& params, std::span<const FrozenEpisode> episodes,
                      const TrainConfig& config, unsigned terms) {
    config.validate();
    if (episodes.empty()) return 0.0;
    auto eps = run_batch(params, {}, {}, config, {}, Sampling::Stochastic, episodes, nullptr);
    const int T = config.steps_T;
    const double inv_var = 1.0 / (config.loc_sigma * config.loc_sigma);
    double total = 0.0;
    for (std::size_t e = 0; e < eps.size(); ++e) {
        const Episode& ep = eps[e];
        const Episode& rec = episodes[e].episode;
        const double R = rec.returns[0];
        double l = 0.0;
        if (terms & kReinforce)
            for (int t = 0; t + 1 < T; ++t) {
                const Eigen::Vector2d d = rec.steps[static_cast<std::size_t>(t + 1)].sample -
                                          ep.steps[static_cast<std::size_t>(t)].loc_mean;
                const double logp = -0.5 * inv_var * d.squaredNorm();
                l -= logp * episodes[e].advantage[static_cast<std::size_t>(t)];
            }
        if (terms & kBaseline) {
            double mse = 0.0;
            for (const auto& st : ep.steps) mse += (R - st.baseline) * (R - st.baseline);
            l += mse / T;
        }
        if (terms & kClassification) l += bce(ep.class_prob, rec.label);
        total += l;
    }
    return total / static_cast<double>(eps.size());
}

ModelParams surrogate_gradient(const ModelParams& params, std::span<const FrozenEpisode> episodes,
                               const TrainConfig& config, unsigned terms) {
    config.validate();
    ModelParams grad = ModelParams::zeros();
    if (episodes.empty()) return grad;
    Trace tr;
    auto eps = run_batch(params, {}, {}, config, {}, Sampling::Stochastic, episodes, &tr);
    // R is the recorded return, not the replayed decision.
    std::vector<std::vector<double>> adv;
    for (std::size_t e = 0; e < eps.size(); ++e) {
        eps[e].returns = episodes[e].episode.returns;
        eps[e].label = episodes[e].episode.label;
        adv.push_back(episodes[e].advantage);
    }
    const std::vector<double> weights(eps.size(), 1.0 / static_cast<double>(eps.size()));
    backprop(params, tr, eps, adv, weights, config, terms, grad);
    return grad;
}

void sgd_update_inplace(ModelParams& params, const ModelParams& grad, double lr) {
    grad.check_shapes();
    params.check_shapes();
    ModelParams step = grad;
    step *= -lr;
    params += step;
}

ModelParams sgd_update(const ModelParams& params, const GradEstimate& grad, double lr) {
    ModelParams out = params;
    sgd_update_inplace(out, grad.grad, lr);
    return out;
}

Evaluation evaluate(const ModelParams& params, const GlimpseDataset& data, const TrainConfig& config,
                    Sampling mode, std::uint64_t seed) {
    Evaluation ev;
    const std::size_t n = data.size();
    ev.predicted.assign(n, 0);
    ev.class_prob.assign(n, 0.5);
    parallel_for(n, config.threads, [&](std::size_t i) {
        auto src = data.source(i);
        const Episode e = rollout(params, *src, data.label(i), config, derive_seed(seed, i), mode);
        ev.predicted[i] = e.predicted;
        ev.class_prob[i] = e.class_prob;
    });
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += ev.predicted[i] == data.label(i) ? 1 : 0;
    ev.accuracy = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
    return ev;
}

TrainResult train(const GlimpseDataset& train_data, const GlimpseDataset* test_data,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_data.size() == 0) throw ParameterError("empty training set");
    TrainResult result;
    result.params = attnnet::init_params(config.seed);
    result.selected = result.params;
    double best_acc = -1.0;
    Rng shuffle_rng(derive_seed(config.seed, 0x5eed));
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double reward_sum = 0.0, loss_sum = 0.0;
        std::size_t count = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += bs, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + bs);
            std::span<const std::size_t> batch(order.data() + start, stop - start);
            const GradEstimate g = grad_estimate(result.params, train_data, batch, config,
                                                 derive_seed(config.seed, static_cast<std::uint64_t>(epoch),
                                                             batch_index));
            if (!g.grad.all_finite() || !std::isfinite(g.baseline_mse + g.classification_loss))
                throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch),
                                       result.params, epoch - 1);
            sgd_update_inplace(result.params, g.grad, config.lr);
            const double w = static_cast<double>(batch.size());
            reward_sum += g.mean_reward * w;
            loss_sum += (g.baseline_mse + g.classification_loss) * w;
            count += batch.size();
        }
        CurvePoint pt;
        pt.epoch = epoch;
        pt.mean_reward = reward_sum / static_cast<double>(count);
        pt.loss = loss_sum / static_cast<double>(count);
        pt.train_acc = evaluate(result.params, train_data, config).accuracy;
        if (test_data) pt.test_acc = evaluate(result.params, *test_data, config).accuracy;
        result.curve.push_back(pt);
        if (pt.train_acc > best_acc) {
            best_acc = pt.train_acc;
            result.selected = result.params;
            result.selected_epoch = epoch;
        }
        if (on_epoch) on_epoch(pt, result.params);
    }
    return result;
}

}  // namespace specattn::reinforce
