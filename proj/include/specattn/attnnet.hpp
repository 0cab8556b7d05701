#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace specattn::attnnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kInputDim = 16;
inline constexpr int kValueDim = 128;
inline constexpr int kLocationDim = 128;
inline constexpr int kFusedDim = 256;
inline constexpr int kHiddenDim = 256;
inline constexpr int kLocOutDim = 2;

/// Weights of the attention network. Biases are stored as n x 1 matrices so
/// every tensor can be visited uniformly.
struct ModelParams {
    Matrix value_w, value_b;        // 128 x 16, 128 x 1
    Matrix loc_w, loc_b;            // 128 x 2,  128 x 1
    Matrix fusion_w, fusion_b;      // 256 x 256 (acts on [v; s]), 256 x 1
    Matrix rnn_wh, rnn_wf, rnn_b;   // 256 x 256, 256 x 256, 256 x 1
    Matrix loch_w, loch_b;          // 2 x 256, 2 x 1
    Matrix cls_w, cls_b;            // 1 x 256, 1 x 1
    Matrix base_w, base_b;          // 1 x 256, 1 x 1

    /// All-zero parameters with the fixed layer shapes.
    static ModelParams zeros();

    /// Visits every tensor in canonical order with its stable name.
    void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    std::size_t parameter_count() const;
    bool all_finite() const;
    /// Throws ParameterError when any tensor deviates from the layer table.
    void check_shapes() const;

    void set_zero();
    ModelParams& operator+=(const ModelParams& other);
    ModelParams& operator*=(double s);
    bool operator==(const ModelParams& other) const;
};

/// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)); zero biases.
ModelParams init_params(std::uint64_t seed);

/// Uniform limit used by init_params for the named weight tensor.
double init_limit(const std::string& tensor_name);

// Batched forward ops. Columns are independent samples.

/// relu(W p + b): 16 -> 128. `pre` receives the pre-activation when non-null.
Matrix encode_value(const ModelParams& p, const Matrix& patches, Matrix* pre = nullptr);
/// relu(W l + b): 2 -> 128.
Matrix encode_location(const ModelParams& p, const Matrix& locations, Matrix* pre = nullptr);
/// relu(W [v; s] + b): 256 -> 256.
Matrix fuse(const ModelParams& p, const Matrix& v, const Matrix& s, Matrix* pre = nullptr);
/// tanh(Wh h + Wf f + b).
Matrix rnn_step(const ModelParams& p, const Matrix& h_prev, const Matrix& f);

struct HeadOutputs {
    Matrix loc_mean;   // 2 x B, tanh
    Matrix class_prob; // 1 x B, logistic
    Matrix baseline;   // 1 x B, linear
};
HeadOutputs heads(const ModelParams& p, const Matrix& h);

// Single-sample conveniences.
Vector encode_value(const ModelParams& p, const Vector& patch);
Vector encode_location(const ModelParams& p, const Vector& loc);
Vector fuse(const ModelParams& p, const Vector& v, const Vector& s);

struct HiddenState {
    Vector h = Vector::Zero(kHiddenDim);
    int t = 0;
};
HiddenState rnn_step(const ModelParams& p, const HiddenState& prev, const Vector& f);

struct NetOutputs {
    Eigen::Vector2d loc_mean;
    double class_prob = 0.5;
    double baseline = 0.0;
};
NetOutputs heads(const ModelParams& p, const HiddenState& h);

// Backward ops. Each accumulates weight gradients into `grad` and returns the
// gradient with respect to the op's differentiable input where one exists.

void encode_value_backward(const ModelParams& p, const Matrix& patches, const Matrix& pre,
                           const Matrix& d_out, ModelParams& grad);
void encode_location_backward(const ModelParams& p, const Matrix& locations, const Matrix& pre,
                              const Matrix& d_out, ModelParams& grad);
/// Returns {dv, ds}.
std::pair<Matrix, Matrix> fuse_backward(const ModelParams& p, const Matrix& v, const Matrix& s,
                                        const Matrix& pre, const Matrix& d_out, ModelParams& grad);
/// `h` is the step output. Returns {dh_prev, df}.
std::pair<Matrix, Matrix> rnn_step_backward(const ModelParams& p, const Matrix& h_prev,
                                            const Matrix& f, const Matrix& h, const Matrix& d_h,
                                            ModelParams& grad);
/// Gradients arrive with respect to the head outputs (loc_mean, class logit,
/// baseline). Returns dh.
Matrix heads_backward(const ModelParams& p, const Matrix& h, const HeadOutputs& out,
                      const Matrix& d_loc_mean, const Matrix& d_class_logit,
                      const Matrix& d_baseline, ModelParams& grad);

}  // namespace specattn::attnnet
