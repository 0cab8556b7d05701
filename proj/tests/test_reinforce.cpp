#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "specattn/reinforce.hpp"
#include "support/netchecks.hpp"
#include "support/toy_env.hpp"

using namespace specattn;
using namespace specattn::reinforce;

namespace {

// Labels do not depend on the glimpses.
class ConstDataset final : public GlimpseDataset {
public:
    explicit ConstDataset(std::size_t n, int label_value = 1) : n_(n), label_(label_value) {}
    std::size_t size() const override { return n_; }
    int label(std::size_t) const override { return label_; }
    std::unique_ptr<GlimpseSource> source(std::size_t i) const override {
        (void)i;
        return std::make_unique<netchecks::NoiseSource>(1000);
    }

private:
    std::size_t n_;
    int label_;
};

TrainConfig small(unsigned threads = 1) {
    TrainConfig c;
    c.threads = threads;
    c.mc_samples_M = 3;
    c.batch_size = 4;
    return c;
}

}  // namespace

TEST_CASE("terminal reward") {
    Episode e;
    e.steps.resize(5);
    e.label = 1;
    e.predicted = 1;
    reward(e);
    CHECK(e.rewards == std::vector<double>{0, 0, 0, 0, 1});
    CHECK(e.returns == std::vector<double>(5, 1.0));
    e.predicted = 0;
    reward(e);
    CHECK(e.returns == std::vector<double>(5, 0.0));
}

TEST_CASE("location snapping") {
    CHECK(snap_to_cell({-1.0, -1.0}, 8) == cyclo::GridCell{0, 0});
    CHECK(snap_to_cell({1.0, 1.0}, 8) == cyclo::GridCell{7, 7});
    CHECK(snap_to_cell({0.3, -0.3}, 8) == cyclo::GridCell{2, 5});  // y -> row, x -> col
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) CHECK(snap_to_cell(cell_center({r, c}, 8), 8) == cyclo::GridCell{r, c});
}

TEST_CASE("rollout shape and determinism") {
    const auto p = netchecks::random_params(5);
    const auto cfg = small();
    netchecks::NoiseSource src(3);
    const auto a = rollout(p, src, 1, cfg, 99);
    const auto b = rollout(p, src, 1, cfg, 99);
    REQUIRE(a.steps.size() == 5);
    std::set<cyclo::GridCell> cells;
    for (std::size_t t = 0; t < 5; ++t) {
        CHECK(a.steps[t].cell == b.steps[t].cell);
        CHECK(a.steps[t].sample == b.steps[t].sample);
        CHECK(a.steps[t].location.cwiseAbs().maxCoeff() <= 1.0);
        cells.insert(a.steps[t].cell);
    }
    CHECK(cells.size() <= 5);
    CHECK(a.class_prob == b.class_prob);
    CHECK(a.predicted == (a.class_prob > 0.5 ? 1 : 0));
    const auto g = rollout(p, src, 1, cfg, 1, Sampling::Greedy);
    CHECK(g.steps[0].location == Eigen::Vector2d(0.0, 0.0));
    for (std::size_t t = 1; t < 5; ++t)
        CHECK(g.steps[t].sample == g.steps[t - 1].loc_mean);
}

TEST_CASE("a saturated class head always detects") {
    auto p = netchecks::random_params(6);
    p.cls_w.setZero();
    p.cls_b(0, 0) = 10.0;
    netchecks::NoiseSource src(4);
    for (std::uint64_t s = 0; s < 10; ++s) CHECK(rollout(p, src, 0, small(), s).predicted == 1);
}

TEST_CASE("SGD update") {
    const auto p = netchecks::random_params(7);
    GradEstimate g;
    CHECK(sgd_update(p, g, 0.1) == p);
    g.grad = netchecks::random_params(8);
    CHECK(sgd_update(p, g, 0.0) == p);
    GradEstimate one;
    one.grad.fusion_w(3, 4) = 2.5;
    const auto q = sgd_update(p, one, 0.1);
    CHECK(q.fusion_w(3, 4) == p.fusion_w(3, 4) - 0.1 * 2.5);
    ModelParams diff = q;
    diff.fusion_w(3, 4) = p.fusion_w(3, 4);
    CHECK(diff == p);
    GradEstimate bad;
    bad.grad.rnn_b = attnnet::Matrix::Zero(3, 1);
    CHECK_THROWS_AS(sgd_update(p, bad, 0.1), ParameterError);
}

TEST_CASE("frozen-episode loss gradient matches central differences") {
    const auto w = netchecks::episode_loss(11);
    INFO(w.where);
    CHECK(w.checked > 40);
    CHECK(w.err < 1e-4);
}

TEST_CASE("perfect baseline leaves only the classification term") {
    auto p = netchecks::random_params(12);
    p.cls_w.setZero();
    p.cls_b(0, 0) = 4.0;  // always predicts 1, which is correct below
    p.base_w.setZero();
    p.base_b(0, 0) = 1.0;  // b_t = R_t = 1
    const ConstDataset data(3, 1);
    const std::size_t idx[] = {0, 1, 2};
    const auto cfg = small();
    const auto pg = grad_estimate(p, data, idx, cfg, 5, kReinforce | kBaseline);
    ModelParams zero = ModelParams::zeros();
    CHECK(pg.grad == zero);
    const auto all = grad_estimate(p, data, idx, cfg, 5, kAllTerms);
    const auto cls = grad_estimate(p, data, idx, cfg, 5, kClassification);
    CHECK(all.grad == cls.grad);
}

TEST_CASE("classification gradient is exactly independent of the baseline") {
    auto p = netchecks::random_params(13);
    const ConstDataset data(4, 0);
    const std::size_t idx[] = {0, 1, 2, 3};
    const auto a = grad_estimate(p, data, idx, small(), 8, kClassification);
    p.base_b(0, 0) += 3.7;
    const auto b = grad_estimate(p, data, idx, small(), 8, kClassification);
    CHECK(a.grad == b.grad);
}

TEST_CASE("gradient estimates do not depend on the worker count") {
    const auto p = netchecks::random_params(14);
    const ConstDataset data(6, 1);
    const std::size_t idx[] = {5, 0, 3, 2};
    const auto a = grad_estimate(p, data, idx, small(1), 21);
    const auto b = grad_estimate(p, data, idx, small(4), 21);
    CHECK(a.grad == b.grad);
    CHECK(a.mean_reward == b.mean_reward);
}

TEST_CASE("toy environment: policy-gradient mean matches enumeration") {
    const auto data = toy::make_dataset(3);
    const auto p = netchecks::random_params(15);
    auto cfg = toy::config();
    const auto table = toy::enumerate(p, data.patches[0], 1);
    std::vector<toy::Coord> coords = {{"loc_head.bias", 0, 0}, {"loc_head.bias", 1, 0}};
    const auto mc = toy::monte_carlo(p, data, cfg, coords, 20, 77);
    CHECK(mc.mean_reward == doctest::Approx(toy::expected_reward(table, cfg.loc_sigma)).epsilon(0.03));
    for (std::size_t k = 0; k < coords.size(); ++k) {
        const double exact = toy::exact_reinforce_grad(p, data.patches[0], table, cfg.loc_sigma, coords[k]);
        INFO(coords[k].tensor, " exact ", exact, " mc ", mc.mean[k], " se ", mc.se[k]);
        CHECK(std::abs(mc.mean[k] - exact) < 3.0 * mc.se[k]);
    }
}

TEST_CASE("toy environment: shifting the baseline keeps the policy-gradient mean") {
    const auto data = toy::make_dataset(4);
    auto p = netchecks::random_params(16);
    const auto cfg = toy::config();
    const auto table = toy::enumerate(p, data.patches[0], 1);
    const toy::Coord c{"loc_head.bias", 0, 0};
    const double exact = toy::exact_reinforce_grad(p, data.patches[0], table, cfg.loc_sigma, c);
    p.base_b(0, 0) += 0.8;
    const auto mc = toy::monte_carlo(p, data, cfg, {c}, 20, 78);
    INFO("exact ", exact, " mc ", mc.mean[0], " se ", mc.se[0]);
    CHECK(std::abs(mc.mean[0] - exact) < 3.0 * mc.se[0]);
}

TEST_CASE("degenerate all-positive dataset is learned within five epochs") {
    const ConstDataset data(32, 1);
    auto cfg = small();
    cfg.epochs = 5;
    const auto r = train(data, nullptr, cfg);
    REQUIRE(r.curve.size() == 5);
    CHECK(r.curve.back().train_acc == 1.0);
    CHECK(r.curve.back().test_acc < 0.0);
}

TEST_CASE("training is reproducible and thread-count independent") {
    const ConstDataset data(12, 0);
    auto cfg = small(1);
    cfg.epochs = 2;
    const auto a = train(data, nullptr, cfg);
    const auto b = train(data, nullptr, cfg);
    cfg.threads = 3;
    const auto c = train(data, nullptr, cfg);
    CHECK(a.params == b.params);
    CHECK(a.params == c.params);
    CHECK(a.selected_epoch >= 1);
}

TEST_CASE("divergence aborts with the last good parameters") {
    const ConstDataset data(8, 0);
    auto cfg = small();
    cfg.epochs = 50;
    cfg.lr = 1e200;
    try {
        train(data, nullptr, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.last_good.all_finite());
        CHECK(e.epoch >= 0);
    }
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.steps_T = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = {};
    c.loc_sigma = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
}
