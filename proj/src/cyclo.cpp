#include "specattn/cyclo.hpp"

#include <cmath>

namespace specattn::cyclo {

void ScfConfig::validate() const {
    if (window_n == 0) throw ParameterError("window_n must be positive");
    if (f_bins == 0 || alpha_bins == 0) throw ParameterError("grid must have bins");
    if (max_lag >= window_n) throw ParameterError("max_lag must be below window_n");
}

namespace {

constexpr std::size_t kGridForPatches = static_cast<std::size_t>(kCellsPerAxis * kPatchSide * kPatchStride);

void require_patch_grid(const ScfConfig& config) {
    if (config.alpha_bins != kGridForPatches || config.f_bins != kGridForPatches)
        throw ParameterError("attention patches need a 64x64 grid");
}

std::size_t effective_n(const IqSignal& signal, std::size_t window_n) {
    return std::min(signal.size(), window_n);
}

std::vector<cplx> unit_roots(std::size_t count, double sign) {
    std::vector<cplx> t(count);
    for (std::size_t j = 0; j < count; ++j)
        t[j] = std::polar(1.0, sign * kTwoPi * static_cast<double>(j) / static_cast<double>(count));
    return t;
}

std::size_t wrap_index(long long value, std::size_t period) {
    const long long p = static_cast<long long>(period);
    long long r = value % p;
    if (r < 0) r += p;
    return static_cast<std::size_t>(r);
}

// sum_n y[n] * conj(x[n - lag]) over valid n.
cplx lagged_dot(const cplx* y, const cplx* x, std::size_t n, int lag, bool circular) {
    double re = 0.0, im = 0.0;
    auto term = [&](std::size_t a, std::size_t b) {
        const double yr = y[a].real(), yi = y[a].imag();
        const double xr = x[b].real(), xi = x[b].imag();
        re += yr * xr + yi * xi;
        im += yi * xr - yr * xi;
    };
    if (circular) {
        for (std::size_t i = 0; i < n; ++i) term(i, wrap_index(static_cast<long long>(i) - lag, n));
        return {re, im};
    }
    const long long lo = std::max<long long>(0, lag);
    const long long hi = std::min<long long>(static_cast<long long>(n), static_cast<long long>(n) + lag);
    for (long long i = lo; i < hi; ++i)
        term(static_cast<std::size_t>(i), static_cast<std::size_t>(i - lag));
    return {re, im};
}

}  // namespace

std::pair<std::size_t, std::size_t> patch_point(const GridCell& cell, int i, int j) {
    const int block = kPatchSide * kPatchStride;
    return {static_cast<std::size_t>(cell.row * block + i * kPatchStride),
            static_cast<std::size_t>(cell.col * block + j * kPatchStride)};
}

bool valid_cell(const GridCell& cell, int cells_per_axis) {
    return cell.row >= 0 && cell.row < cells_per_axis && cell.col >= 0 && cell.col < cells_per_axis;
}

std::vector<cplx> caf(const IqSignal& signal, double alpha, int lag_lo, int lag_hi, bool circular,
                      std::size_t window_n) {
    const std::size_t n = effective_n(signal, window_n);
    if (lag_hi < lag_lo) return {};
    if (static_cast<std::size_t>(std::max(std::abs(lag_lo), std::abs(lag_hi))) >= std::max<std::size_t>(n, 1))
        throw ParameterError("lag magnitude must be below the window length");
    std::vector<cplx> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = signal.samples[i] * std::polar(1.0, -alpha * static_cast<double>(i));
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(lag_hi - lag_lo + 1));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int l = lag_lo; l <= lag_hi; ++l) {
        const cplx acc = lagged_dot(y.data(), signal.samples.data(), n, l, circular);
        out.push_back(acc * inv_n * std::polar(1.0, alpha * static_cast<double>(l) / 2.0));
    }
    return out;
}

cplx scf_point(const IqSignal& signal, double alpha, double f, std::size_t max_lag, bool circular,
               std::size_t window_n) {
    const int L = static_cast<int>(max_lag);
    const auto r = caf(signal, alpha, -L, L, circular, window_n);
    cplx acc{0.0, 0.0};
    for (int l = -L; l <= L; ++l)
        acc += r[static_cast<std::size_t>(l + L)] * std::polar(1.0, -f * static_cast<double>(l));
    return acc;
}

std::vector<double> psd(const IqSignal& signal, const ScfConfig& config) {
    config.validate();
    const std::size_t n = effective_n(signal, config.window_n);
    const int L = static_cast<int>(config.max_lag);
    std::vector<cplx> r(static_cast<std::size_t>(2 * L + 1));
    if (n > 0) {
        for (int l = -L; l <= L; ++l) {
            cplx acc{0.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) {
                long long j = static_cast<long long>(i) - l;
                if (config.circular) j = static_cast<long long>(wrap_index(j, n));
                if (j < 0 || j >= static_cast<long long>(n)) continue;
                acc += signal.samples[i] * std::conj(signal.samples[static_cast<std::size_t>(j)]);
            }
            r[static_cast<std::size_t>(l + L)] = acc / static_cast<double>(n);
        }
    }
    std::vector<double> out(config.f_bins);
    for (std::size_t m = 0; m < config.f_bins; ++m) {
        const double f = config.f_center(m);
        cplx acc{0.0, 0.0};
        for (int l = -L; l <= L; ++l)
            acc += r[static_cast<std::size_t>(l + L)] * std::polar(1.0, -f * static_cast<double>(l));
        out[m] = std::abs(acc);
    }
    return out;
}

// Evaluates raw |SCF| bins. Both methods produce, for a given (alpha_bin,
// f_bin), the same floating-point result no matter which other bins are
// requested, so patches and full grids agree exactly.
struct PatchEvaluator::Engine {
    const IqSignal* signal;
    ScfConfig config;
    std::size_t n;
    int L;
    std::vector<cplx> f_roots;       // e^{-j 2 pi j / F}
    std::vector<cplx> alpha_roots;   // e^{-j 2 pi j / K}
    std::vector<cplx> half_roots;    // e^{+j pi j / K}
    std::vector<cplx> folded;        // [lag][m], Folded method only
    std::map<std::size_t, std::vector<cplx>> caf_rows;  // alpha bin -> caf over lags

    Engine(const IqSignal& s, const ScfConfig& c)
        : signal(&s), config(c), n(effective_n(s, c.window_n)), L(static_cast<int>(c.max_lag)) {
        config.validate();
        f_roots = unit_roots(config.f_bins, -1.0);
        alpha_roots = unit_roots(config.alpha_bins, -1.0);
        half_roots = unit_roots(2 * config.alpha_bins, +1.0);
    }

    void build_folded() {
        const std::size_t K = config.alpha_bins;
        const std::size_t lags = static_cast<std::size_t>(2 * L + 1);
        folded.assign(lags * K, cplx{0.0, 0.0});
        if (n == 0) return;
        std::vector<double> acc_re(K), acc_im(K);
        const cplx* x = signal->samples.data();
        for (int l = -L; l <= L; ++l) {
            std::fill(acc_re.begin(), acc_re.end(), 0.0);
            std::fill(acc_im.begin(), acc_im.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                long long j = static_cast<long long>(i) - l;
                if (config.circular) {
                    j = static_cast<long long>(wrap_index(j, n));
                } else if (j < 0 || j >= static_cast<long long>(n)) {
                    continue;
                }
                const double yr = x[i].real(), yi = x[i].imag();
                const double xr = x[j].real(), xi = x[j].imag();
                const std::size_t m = i % K;
                acc_re[m] += yr * xr + yi * xi;
                acc_im[m] += yi * xr - yr * xi;
            }
            cplx* row = &folded[static_cast<std::size_t>(l + L) * K];
            for (std::size_t m = 0; m < K; ++m) row[m] = {acc_re[m], acc_im[m]};
        }
    }

    const std::vector<cplx>& caf_row(std::size_t k) {
        auto it = caf_rows.find(k);
        if (it != caf_rows.end()) return it->second;
        std::vector<cplx> row;
        if (config.method == ScfMethod::Direct) {
            row = caf(*signal, config.alpha_center(k), -L, L, config.circular, config.window_n);
        } else {
            if (folded.empty()) build_folded();
            const std::size_t K = config.alpha_bins;
            const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
            row.resize(static_cast<std::size_t>(2 * L + 1));
            for (int l = -L; l <= L; ++l) {
                const cplx* p = &folded[static_cast<std::size_t>(l + L) * K];
                cplx acc{0.0, 0.0};
                for (std::size_t m = 0; m < K; ++m) acc += p[m] * alpha_roots[(k * m) % K];
                const std::size_t h = wrap_index(static_cast<long long>(k) * l, 2 * K);
                row[static_cast<std::size_t>(l + L)] = acc * inv_n * half_roots[h];
            }
        }
        return caf_rows.emplace(k, std::move(row)).first->second;
    }

    double raw_bin(std::size_t k, std::size_t m) {
        const auto& r = caf_row(k);
        const std::size_t F = config.f_bins;
        cplx acc{0.0, 0.0};
        for (int l = -L; l <= L; ++l) {
            // e^{-j f_m l} with f_m = -pi + 2 pi m / F
            cplx w = f_roots[wrap_index(static_cast<long long>(m) * l, F)];
            if (l % 2 != 0) w = -w;
            acc += r[static_cast<std::size_t>(l + L)] * w;
        }
        return std::abs(acc);
    }

    double alpha0_max() {
        double best = 0.0;
        for (std::size_t m = 0; m < config.f_bins; ++m) best = std::max(best, raw_bin(0, m));
        return best;
    }
};

PatchEvaluator::PatchEvaluator(const IqSignal& signal, ScfConfig config)
    : engine_(std::make_unique<Engine>(signal, config)) {}
PatchEvaluator::~PatchEvaluator() = default;
PatchEvaluator::PatchEvaluator(PatchEvaluator&&) noexcept = default;
PatchEvaluator& PatchEvaluator::operator=(PatchEvaluator&&) noexcept = default;

double PatchEvaluator::normalization() {
    if (!norm_) {
        if (!engine_->config.normalize) {
            norm_ = 1.0;
        } else {
            const double m = engine_->alpha0_max();
            normalization_bins_ += engine_->config.f_bins;
            norm_ = m > 0.0 ? m : 1.0;
        }
    }
    return *norm_;
}

const ScfPatch& PatchEvaluator::patch(const GridCell& cell) {
    auto it = cache_.find(cell);
    if (it != cache_.end()) return it->second;
    require_patch_grid(engine_->config);
    if (!valid_cell(cell)) throw ParameterError("grid cell outside the 8x8 lattice");
    const double norm = normalization();
    ScfPatch p;
    p.cell = cell;
    for (int i = 0; i < kPatchSide; ++i)
        for (int j = 0; j < kPatchSide; ++j) {
            const auto [k, m] = patch_point(cell, i, j);
            p.values[static_cast<std::size_t>(i * kPatchSide + j)] = engine_->raw_bin(k, m) / norm;
        }
    bins_computed_ += kPatchSize;
    return cache_.emplace(cell, p).first->second;
}

ScfGrid scf_full(const IqSignal& signal, const ScfConfig& config) {
    PatchEvaluator::Engine engine(signal, config);
    ScfGrid g;
    g.alpha_bins = config.alpha_bins;
    g.f_bins = config.f_bins;
    g.magnitudes.resize(g.alpha_bins * g.f_bins);
    for (std::size_t k = 0; k < g.alpha_bins; ++k) g.alpha_axis.push_back(config.alpha_center(k));
    for (std::size_t m = 0; m < g.f_bins; ++m) g.f_axis.push_back(config.f_center(m));
    for (std::size_t k = 0; k < g.alpha_bins; ++k)
        for (std::size_t m = 0; m < g.f_bins; ++m) g.magnitudes[k * g.f_bins + m] = engine.raw_bin(k, m);
    if (config.normalize) {
        double norm = 0.0;
        for (std::size_t m = 0; m < g.f_bins; ++m) norm = std::max(norm, g.magnitudes[m]);
        if (norm <= 0.0) norm = 1.0;
        for (auto& v : g.magnitudes) v = v / norm;
        g.scale = norm;
    }
    return g;
}

ScfPatch scf_patch(const IqSignal& signal, const GridCell& cell, const ScfConfig& config) {
    PatchEvaluator ev(signal, config);
    return ev.patch(cell);
}

ScfPatch patch_from_grid(const ScfGrid& grid, const GridCell& cell) {
    if (grid.alpha_bins != kGridForPatches || grid.f_bins != kGridForPatches)
        throw ParameterError("attention patches need a 64x64 grid");
    if (!valid_cell(cell)) throw ParameterError("grid cell outside the 8x8 lattice");
    ScfPatch p;
    p.cell = cell;
    for (int i = 0; i < kPatchSide; ++i)
        for (int j = 0; j < kPatchSide; ++j) {
            const auto [k, m] = patch_point(cell, i, j);
            p.values[static_cast<std::size_t>(i * kPatchSide + j)] = grid.at(k, m);
        }
    return p;
}

std::vector<double> cell_energy(const ScfGrid& grid) {
    const std::size_t rb = grid.alpha_bins / kCellsPerAxis;
    const std::size_t cb = grid.f_bins / kCellsPerAxis;
    std::vector<double> e(static_cast<std::size_t>(kCellsPerAxis * kCellsPerAxis), 0.0);
    for (std::size_t k = 0; k < rb * kCellsPerAxis; ++k)
        for (std::size_t m = 0; m < cb * kCellsPerAxis; ++m) {
            const double v = grid.at(k, m);
            e[(k / rb) * kCellsPerAxis + m / cb] += v * v;
        }
    return e;
}

}  // namespace specattn::cyclo
