#include "specattn/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "specattn/io.hpp"

namespace specattn::bench {

using nlohmann::json;

std::string to_string(Task t) {
    switch (t) {
        case Task::ScenarioI: return "scenario-i";
        case Task::ScenarioII: return "scenario-ii";
        case Task::PairBpskFsk4: return "pair-bpsk-fsk4";
    }
    return "?";
}

Task task_from_string(const std::string& s) {
    if (s == "scenario-i" || s == "I") return Task::ScenarioI;
    if (s == "scenario-ii" || s == "II") return Task::ScenarioII;
    if (s == "pair-bpsk-fsk4" || s == "pair") return Task::PairBpskFsk4;
    throw ParameterError("unknown task '" + s + "'");
}

sigsynth::DatasetPlan plan_for(const BenchConfig& config) {
    switch (config.task) {
        case Task::ScenarioI: return sigsynth::plan_for(sigsynth::Scenario::I, config.snr_db);
        case Task::ScenarioII: return sigsynth::plan_for(sigsynth::Scenario::II, config.snr_db);
        case Task::PairBpskFsk4: {
            sigsynth::DatasetPlan p = sigsynth::plan_for(sigsynth::Scenario::I, config.snr_db);
            p.negatives = {sigsynth::Modulation::FSK4};
            p.carriers_hz = {300e6};
            return p;
        }
    }
    throw ParameterError("unknown task");
}

json to_json(const BenchConfig& c) {
    return json{{"task", to_string(c.task)},
                {"n_train", c.n_train},
                {"n_test", c.n_test},
                {"data_seed", c.data_seed},
                {"snr_db", std::isinf(c.snr_db) ? json(c.snr_db > 0 ? "inf" : "-inf") : json(c.snr_db)},
                {"plan", io::to_json(plan_for(c))},
                {"train", io::to_json(c.train)},
                {"scf", io::to_json(c.scf)},
                {"with_baseline", c.with_baseline},
                {"baseline",
                 {{"epochs", c.baseline.epochs},
                  {"lr", c.baseline.lr},
                  {"batch_size", c.baseline.batch_size},
                  {"hidden", c.baseline.hidden},
                  {"seed", c.baseline.seed}}}};
}

BenchConfig bench_config_from_json(const json& j) {
    BenchConfig c;
    try {
        if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
        c.n_train = j.value("n_train", c.n_train);
        c.n_test = j.value("n_test", c.n_test);
        c.data_seed = j.value("data_seed", c.data_seed);
        if (j.contains("snr_db")) {
            const auto& s = j.at("snr_db");
            c.snr_db = s.is_string() ? (s.get<std::string>() == "-inf" ? -INFINITY : INFINITY) : s.get<double>();
        }
        if (j.contains("train")) c.train = io::train_config_from_json(j.at("train"));
        if (j.contains("scf")) c.scf = io::scf_config_from_json(j.at("scf"));
        c.with_baseline = j.value("with_baseline", c.with_baseline);
        if (j.contains("baseline")) {
            const auto& b = j.at("baseline");
            c.baseline.epochs = b.value("epochs", c.baseline.epochs);
            c.baseline.lr = b.value("lr", c.baseline.lr);
            c.baseline.batch_size = b.value("batch_size", c.baseline.batch_size);
            c.baseline.hidden = b.value("hidden", c.baseline.hidden);
            c.baseline.seed = b.value("seed", c.baseline.seed);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed bench config: ") + e.what());
    }
    return c;
}

reinforce::GridDataset grid_dataset(const std::vector<sigsynth::DatasetRecord>& records,
                                    const cyclo::ScfConfig& scf, unsigned threads) {
    std::vector<cyclo::ScfGrid> grids(records.size());
    std::vector<int> labels(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        auto [x, label] = sigsynth::compose_scene(records[i].scene, kSampleRateHz, scf.window_n);
        grids[i] = cyclo::scf_full(x, scf);
        labels[i] = label;
    });
    return reinforce::GridDataset(std::move(grids), std::move(labels));
}

std::optional<double> reference_carrier(const sigsynth::DatasetRecord& r) {
    if (r.scene.target) return r.scene.target->carrier_hz;
    if (!r.scene.background.empty()) return r.scene.background.front().carrier_hz;
    return std::nullopt;
}

BenchReport evaluate(const BenchConfig& config, const attnnet::ModelParams& params, const sigsynth::Dataset& data) {
    const auto& recs = data.test;
    BenchReport rep;
    rep.task = config.task;
    rep.records.resize(recs.size());
    parallel_for(recs.size(), config.train.threads, [&](std::size_t i) {
        auto [x, label] = sigsynth::compose_scene(recs[i].scene, kSampleRateHz, config.scf.window_n);
        rep.records[i] = {recs[i].id, label,
                          detector::detect(params, x, config.train, detector::DetectMode::greedy(), config.scf)};
    });

    std::map<double, std::pair<std::size_t, std::size_t>> by_carrier;  // correct, count
    for (double c : plan_for(config).carriers_hz) by_carrier[c];
    std::size_t correct = 0;
    double bins = 0.0, cells = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& rr = rep.records[i];
        const bool ok = rr.report.decision == rr.label;
        correct += ok;
        if (auto c = reference_carrier(recs[i])) {
            by_carrier[*c].first += ok;
            by_carrier[*c].second += 1;
        }
        bins += rr.report.bin_fraction();
        cells += rr.report.cell_fraction();
        rep.max_bins_computed = std::max(rep.max_bins_computed, rr.report.scf_bins_computed);
        rep.max_patches_computed = std::max(rep.max_patches_computed, rr.report.patches_computed);
    }
    const double n = static_cast<double>(std::max<std::size_t>(recs.size(), 1));
    rep.overall_accuracy = static_cast<double>(correct) / n;
    rep.mean_bins_fraction = bins / n;
    rep.mean_cell_fraction = cells / n;
    for (const auto& [c, cnt] : by_carrier)
        rep.per_carrier.push_back({c, cnt.second,
                                   cnt.second ? static_cast<double>(cnt.first) / static_cast<double>(cnt.second) : 0.0});
    rep.baseline_bins_per_decision = config.scf.alpha_bins * config.scf.f_bins;
    rep.config_digest = io::digest(to_json(config).dump());
    rep.params = params;
    return rep;
}

BenchReport run(const BenchConfig& config) {
    config.train.validate();
    config.scf.validate();
    const sigsynth::Dataset data =
        sigsynth::generate_dataset(plan_for(config), config.n_train, config.n_test, config.data_seed);
    const auto train_grids = grid_dataset(data.train, config.scf, config.train.threads);
    const auto test_grids = grid_dataset(data.test, config.scf, config.train.threads);
    const auto trained = reinforce::train(train_grids, &test_grids, config.train);

    BenchReport rep = evaluate(config, trained.selected, data);
    rep.curve = trained.curve;
    rep.selected_epoch = trained.selected_epoch;
    if (trained.selected_epoch > 0)
        rep.train_accuracy = trained.curve[static_cast<std::size_t>(trained.selected_epoch - 1)].train_acc;
    if (config.with_baseline)
        rep.baseline_accuracy = baseline_full_scf(train_grids, test_grids, config.baseline).test_accuracy;
    return rep;
}

BenchReport run_scenario_i(BenchConfig config) {
    config.task = Task::ScenarioI;
    return run(config);
}

BenchReport run_scenario_ii(BenchConfig config) {
    config.task = Task::ScenarioII;
    config.with_baseline = true;
    return run(config);
}

BenchReport classify_pair_task(BenchConfig config) {
    config.task = Task::PairBpskFsk4;
    return run(config);
}

Eigen::VectorXd pooled_features(const cyclo::ScfGrid& grid) {
    const std::size_t rows = grid.alpha_bins / 2, cols = grid.f_bins / 2;
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows * cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out(static_cast<Eigen::Index>(r * cols + c)) =
                0.25 * (grid.at(2 * r, 2 * c) + grid.at(2 * r, 2 * c + 1) + grid.at(2 * r + 1, 2 * c) +
                        grid.at(2 * r + 1, 2 * c + 1));
    return out;
}

namespace {

struct Mlp {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;

    Eigen::MatrixXd hidden_pre(const Eigen::MatrixXd& x) const { return (w1 * x).colwise() + b1; }
    Eigen::RowVectorXd prob(const Eigen::MatrixXd& x) const {
        const Eigen::MatrixXd h = hidden_pre(x).cwiseMax(0.0);
        const Eigen::RowVectorXd z = ((w2 * h).colwise() + b2).row(0);
        return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    }
};

Eigen::MatrixXd feature_matrix(const reinforce::GridDataset& d) {
    if (d.size() == 0) return {};
    Eigen::MatrixXd x(pooled_features(d.grid(0)).size(), static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = pooled_features(d.grid(i));
    return x;
}

double accuracy(const Mlp& net, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    const Eigen::RowVectorXd p = net.prob(x);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) ok += (p(static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0) == labels[i];
    return static_cast<double>(ok) / static_cast<double>(labels.size());
}

}  // namespace

BaselineResult baseline_full_scf(const reinforce::GridDataset& train, const reinforce::GridDataset& test,
                                 const BaselineConfig& config) {
    if (train.size() == 0) throw ParameterError("empty training set");
    if (config.epochs < 0 || config.batch_size <= 0 || config.hidden <= 0 || !(config.lr >= 0))
        throw ParameterError("invalid baseline config");
    const Eigen::MatrixXd xtr = feature_matrix(train);
    const Eigen::MatrixXd xte = feature_matrix(test);
    const Eigen::Index d = xtr.rows(), h = config.hidden;

    Rng rng(derive_seed(config.seed, 0xba5e));
    Mlp net;
    auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> u(-a, a);
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
        return m;
    };
    net.w1 = glorot(h, d);
    net.w2 = glorot(1, h);
    net.b1 = Eigen::VectorXd::Zero(h);
    net.b2 = Eigen::VectorXd::Zero(1);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            const auto n = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd x(d, n);
            Eigen::RowVectorXd y(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                x.col(k) = xtr.col(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(k)]));
                y(k) = train.label(order[start + static_cast<std::size_t>(k)]);
            }
            const Eigen::MatrixXd pre = net.hidden_pre(x);
            const Eigen::MatrixXd hid = pre.cwiseMax(0.0);
            const Eigen::RowVectorXd z = ((net.w2 * hid).colwise() + net.b2).row(0);
            const Eigen::RowVectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
            const Eigen::RowVectorXd dz = (p - y) / static_cast<double>(n);
            const Eigen::MatrixXd dh = (net.w2.transpose() * dz).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
            net.w2.noalias() -= config.lr * dz * hid.transpose();
            net.b2(0) -= config.lr * dz.sum();
            net.w1.noalias() -= config.lr * dh * x.transpose();
            net.b1.noalias() -= config.lr * dh.rowwise().sum();
        }
    }
    BaselineResult r;
    r.train_accuracy = accuracy(net, xtr, train.labels());
    r.test_accuracy = accuracy(net, xte, test.labels());
    return r;
}

namespace {

std::string cells_string(const std::vector<cyclo::GridCell>& cells) {
    std::string s;
    for (const auto& c : cells) {
        if (!s.empty()) s += ' ';
        s += std::to_string(c.row) + ':' + std::to_string(c.col);
    }
    return s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string summary_text(const BenchReport& r) {
    std::string s;
    s += "task: " + to_string(r.task) + "\n";
    s += "config digest: " + r.config_digest + "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "test accuracy (attention, greedy): %.4f\n", r.overall_accuracy);
    s += buf;
    if (r.selected_epoch > 0) {
        std::snprintf(buf, sizeof buf, "train accuracy at selected epoch %d: %.4f\n", r.selected_epoch, r.train_accuracy);
        s += buf;
    }
    for (const auto& c : r.per_carrier) {
        std::snprintf(buf, sizeof buf, "  carrier %6.1f MHz: %.4f (n=%zu)\n", c.carrier_hz / 1e6, c.accuracy, c.count);
        s += buf;
    }
    if (r.baseline_accuracy) {
        std::snprintf(buf, sizeof buf,
                      "full-grid baseline accuracy: %.4f (pooled-MLP reference, not the original CNN)\n",
                      *r.baseline_accuracy);
        s += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "SCF cost per decision: max %zu patch bins (%zu patches) vs %zu full-grid bins; "
                  "mean bin fraction %.5f, mean cell fraction %.5f\n",
                  r.max_bins_computed, r.max_patches_computed, r.baseline_bins_per_decision, r.mean_bins_fraction,
                  r.mean_cell_fraction);
    s += buf;
    return s;
}

std::string per_carrier_csv(const BenchReport& r) {
    std::string s = "carrier_hz,count,accuracy\n";
    for (const auto& c : r.per_carrier) s += fmt(c.carrier_hz) + "," + std::to_string(c.count) + "," + fmt(c.accuracy) + "\n";
    return s;
}

std::string records_csv(const BenchReport& r) {
    std::string s = "record_id,label,decision,class_prob,cells,bins_computed\n";
    for (const auto& rr : r.records)
        s += rr.id + "," + std::to_string(rr.label) + "," + std::to_string(rr.report.decision) + "," +
             fmt(rr.report.class_prob) + "," + cells_string(rr.report.attended_cells) + "," +
             std::to_string(rr.report.scf_bins_computed) + "\n";
    return s;
}

std::string curve_csv(const std::vector<reinforce::CurvePoint>& curve) {
    std::string s = "epoch,mean_reward,train_acc,test_acc,loss\n";
    for (const auto& p : curve)
        s += std::to_string(p.epoch) + "," + fmt(p.mean_reward) + "," + fmt(p.train_acc) + "," +
             (p.test_acc < 0 ? std::string() : fmt(p.test_acc)) + "," + fmt(p.loss) + "\n";
    return s;
}

std::string trace_csv(const std::vector<detector::TracePoint>& trace) {
    std::string s = "episode,step,f,alpha\n";
    for (const auto& p : trace)
        s += std::to_string(p.episode) + "," + std::to_string(p.step) + "," + fmt(p.f) + "," + fmt(p.alpha) + "\n";
    return s;
}

}  // namespace specattn::bench
