#include "specattn/attnnet.hpp"

#include <cmath>
#include <random>

#include "specattn/common.hpp"

namespace specattn::attnnet {

namespace {

struct Shape {
    const char* name;
    Matrix ModelParams::*member;
    int rows;
    int cols;
    int fan_in;   // 0 for biases
    int fan_out;
};

const std::vector<Shape>& layout() {
    static const std::vector<Shape> shapes = {
        {"value_encoder.weight", &ModelParams::value_w, kValueDim, kInputDim, kInputDim, kValueDim},
        {"value_encoder.bias", &ModelParams::value_b, kValueDim, 1, 0, 0},
        {"loc_encoder.weight", &ModelParams::loc_w, kLocationDim, kLocOutDim, kLocOutDim, kLocationDim},
        {"loc_encoder.bias", &ModelParams::loc_b, kLocationDim, 1, 0, 0},
        {"fusion.weight", &ModelParams::fusion_w, kFusedDim, kValueDim + kLocationDim,
         kValueDim + kLocationDim, kFusedDim},
        {"fusion.bias", &ModelParams::fusion_b, kFusedDim, 1, 0, 0},
        {"rnn_core.weight_hh", &ModelParams::rnn_wh, kHiddenDim, kHiddenDim, kHiddenDim + kFusedDim, kHiddenDim},
        {"rnn_core.weight_fh", &ModelParams::rnn_wf, kHiddenDim, kFusedDim, kHiddenDim + kFusedDim, kHiddenDim},
        {"rnn_core.bias", &ModelParams::rnn_b, kHiddenDim, 1, 0, 0},
        {"loc_head.weight", &ModelParams::loch_w, kLocOutDim, kHiddenDim, kHiddenDim, kLocOutDim},
        {"loc_head.bias", &ModelParams::loch_b, kLocOutDim, 1, 0, 0},
        {"class_head.weight", &ModelParams::cls_w, 1, kHiddenDim, kHiddenDim, 1},
        {"class_head.bias", &ModelParams::cls_b, 1, 1, 0, 0},
        {"baseline_head.weight", &ModelParams::base_w, 1, kHiddenDim, kHiddenDim, 1},
        {"baseline_head.bias", &ModelParams::base_b, 1, 1, 0, 0},
    };
    return shapes;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& d) {
    return (pre.array() > 0.0).select(d, 0.0);
}

Matrix add_bias(Matrix x, const Matrix& b) {
    x.colwise() += b.col(0);
    return x;
}

}  // namespace

ModelParams ModelParams::zeros() {
    ModelParams p;
    for (const auto& s : layout()) p.*(s.member) = Matrix::Zero(s.rows, s.cols);
    return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
    for (const auto& s : layout()) fn(s.name, this->*(s.member));
}

void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
    for (const auto& s : layout()) fn(s.name, this->*(s.member));
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
}

void ModelParams::check_shapes() const {
    for (const auto& s : layout()) {
        const Matrix& m = this->*(s.member);
        if (m.rows() != s.rows || m.cols() != s.cols)
            throw ParameterError(std::string("tensor ") + s.name + " has shape " +
                                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                 ", expected " + std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
}

void ModelParams::set_zero() {
    for (const auto& s : layout()) (this->*(s.member)).setZero();
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
    for (const auto& s : layout()) this->*(s.member) += other.*(s.member);
    return *this;
}

ModelParams& ModelParams::operator*=(double f) {
    for (const auto& s : layout()) this->*(s.member) *= f;
    return *this;
}

bool ModelParams::operator==(const ModelParams& other) const {
    for (const auto& s : layout()) {
        const Matrix& a = this->*(s.member);
        const Matrix& b = other.*(s.member);
        if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
    }
    return true;
}

double init_limit(const std::string& tensor_name) {
    for (const auto& s : layout())
        if (tensor_name == s.name)
            return s.fan_in == 0 ? 0.0 : std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    throw ParameterError("unknown tensor " + tensor_name);
}

ModelParams init_params(std::uint64_t seed) {
    ModelParams p = ModelParams::zeros();
    Rng rng(derive_seed(seed, 0x1417));
    for (const auto& s : layout()) {
        if (s.fan_in == 0) continue;
        const double a = init_limit(s.name);
        std::uniform_real_distribution<double> u(-a, a);
        Matrix& m = p.*(s.member);
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
    }
    return p;
}

Matrix encode_value(const ModelParams& p, const Matrix& patches, Matrix* pre) {
    Matrix z = add_bias(p.value_w * patches, p.value_b);
    Matrix out = relu(z);
    if (pre) *pre = std::move(z);
    return out;
}

Matrix encode_location(const ModelParams& p, const Matrix& locations, Matrix* pre) {
    Matrix z = add_bias(p.loc_w * locations, p.loc_b);
    Matrix out = relu(z);
    if (pre) *pre = std::move(z);
    return out;
}

Matrix fuse(const ModelParams& p, const Matrix& v, const Matrix& s, Matrix* pre) {
    Matrix z = p.fusion_w.leftCols(kValueDim) * v;
    z.noalias() += p.fusion_w.rightCols(kLocationDim) * s;
    z = add_bias(std::move(z), p.fusion_b);
    Matrix out = relu(z);
    if (pre) *pre = std::move(z);
    return out;
}

Matrix rnn_step(const ModelParams& p, const Matrix& h_prev, const Matrix& f) {
    Matrix z = p.rnn_wh * h_prev;
    z.noalias() += p.rnn_wf * f;
    z = add_bias(std::move(z), p.rnn_b);
    return z.array().tanh().matrix();
}

HeadOutputs heads(const ModelParams& p, const Matrix& h) {
    HeadOutputs out;
    out.loc_mean = add_bias(p.loch_w * h, p.loch_b).array().tanh().matrix();
    const Matrix logit = add_bias(p.cls_w * h, p.cls_b);
    out.class_prob = (1.0 / (1.0 + (-logit.array()).exp())).matrix();
    out.baseline = add_bias(p.base_w * h, p.base_b);
    return out;
}

Vector encode_value(const ModelParams& p, const Vector& patch) {
    return encode_value(p, Matrix(patch)).col(0);
}

Vector encode_location(const ModelParams& p, const Vector& loc) {
    return encode_location(p, Matrix(loc)).col(0);
}

Vector fuse(const ModelParams& p, const Vector& v, const Vector& s) {
    return fuse(p, Matrix(v), Matrix(s)).col(0);
}

HiddenState rnn_step(const ModelParams& p, const HiddenState& prev, const Vector& f) {
    HiddenState next;
    next.h = rnn_step(p, Matrix(prev.h), Matrix(f)).col(0);
    next.t = prev.t + 1;
    return next;
}

NetOutputs heads(const ModelParams& p, const HiddenState& h) {
    const HeadOutputs o = heads(p, Matrix(h.h));
    NetOutputs out;
    out.loc_mean = o.loc_mean.col(0);
    out.class_prob = o.class_prob(0, 0);
    out.baseline = o.baseline(0, 0);
    return out;
}

void encode_value_backward(const ModelParams&, const Matrix& patches, const Matrix& pre,
                           const Matrix& d_out, ModelParams& grad) {
    const Matrix dz = relu_mask(pre, d_out);
    grad.value_w.noalias() += dz * patches.transpose();
    grad.value_b += dz.rowwise().sum();
}

void encode_location_backward(const ModelParams&, const Matrix& locations, const Matrix& pre,
                              const Matrix& d_out, ModelParams& grad) {
    const Matrix dz = relu_mask(pre, d_out);
    grad.loc_w.noalias() += dz * locations.transpose();
    grad.loc_b += dz.rowwise().sum();
}

std::pair<Matrix, Matrix> fuse_backward(const ModelParams& p, const Matrix& v, const Matrix& s,
                                        const Matrix& pre, const Matrix& d_out, ModelParams& grad) {
    const Matrix dz = relu_mask(pre, d_out);
    grad.fusion_w.leftCols(kValueDim).noalias() += dz * v.transpose();
    grad.fusion_w.rightCols(kLocationDim).noalias() += dz * s.transpose();
    grad.fusion_b += dz.rowwise().sum();
    Matrix dv = p.fusion_w.leftCols(kValueDim).transpose() * dz;
    Matrix ds = p.fusion_w.rightCols(kLocationDim).transpose() * dz;
    return {std::move(dv), std::move(ds)};
}

std::pair<Matrix, Matrix> rnn_step_backward(const ModelParams& p, const Matrix& h_prev,
                                            const Matrix& f, const Matrix& h, const Matrix& d_h,
                                            ModelParams& grad) {
    const Matrix dz = (d_h.array() * (1.0 - h.array().square())).matrix();
    grad.rnn_wh.noalias() += dz * h_prev.transpose();
    grad.rnn_wf.noalias() += dz * f.transpose();
    grad.rnn_b += dz.rowwise().sum();
    Matrix dh_prev = p.rnn_wh.transpose() * dz;
    Matrix df = p.rnn_wf.transpose() * dz;
    return {std::move(dh_prev), std::move(df)};
}

Matrix heads_backward(const ModelParams& p, const Matrix& h, const HeadOutputs& out,
                      const Matrix& d_loc_mean, const Matrix& d_class_logit,
                      const Matrix& d_baseline, ModelParams& grad) {
    Matrix dh = Matrix::Zero(h.rows(), h.cols());
    if (d_loc_mean.size() > 0) {
        const Matrix dz = (d_loc_mean.array() * (1.0 - out.loc_mean.array().square())).matrix();
        grad.loch_w.noalias() += dz * h.transpose();
        grad.loch_b += dz.rowwise().sum();
        dh.noalias() += p.loch_w.transpose() * dz;
    }
    if (d_class_logit.size() > 0) {
        grad.cls_w.noalias() += d_class_logit * h.transpose();
        grad.cls_b += d_class_logit.rowwise().sum();
        dh.noalias() += p.cls_w.transpose() * d_class_logit;
    }
    if (d_baseline.size() > 0) {
        grad.base_w.noalias() += d_baseline * h.transpose();
        grad.base_b += d_baseline.rowwise().sum();
        dh.noalias() += p.base_w.transpose() * d_baseline;
    }
    return dh;
}

}  // namespace specattn::attnnet
