#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "claster/common.hpp"

namespace claster {

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
};

// Two dense layers with a rectifier in between.
struct MlpParams {
    DenseLayer layer1;
    DenseLayer layer2;
};

// One-dimensional convolution, stride 1, zero padding that preserves length.
// Weights are laid out [out_channel][in_channel][tap].
struct Conv1dLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    Vector weights;
    Vector bias;

    double weight(std::size_t oc, std::size_t ic, std::size_t t) const {
        return weights[(oc * in_channels + ic) * kernel_size + t];
    }
    double& weight(std::size_t oc, std::size_t ic, std::size_t t) {
        return weights[(oc * in_channels + ic) * kernel_size + t];
    }
};

// Classification head V: two conv layers on the single-channel input
// sequence, then two dense layers; rectifiers after every hidden layer.
struct ClassifierParams {
    Conv1dLayer conv1;
    Conv1dLayer conv2;
    DenseLayer fc1;
    DenseLayer fc2;
};

namespace detail {

inline void check_dense(const DenseLayer& layer, std::size_t input_size, const char* name) {
    if (layer.weights.cols != input_size || layer.weights.rows != layer.bias.size()) {
        throw data_error("ShapeMismatch", std::string(name) + ": weights " + std::to_string(layer.weights.rows) +
                                              "x" + std::to_string(layer.weights.cols) + " vs input " +
                                              std::to_string(input_size) + ", bias " +
                                              std::to_string(layer.bias.size()));
    }
}

inline Vector dense_forward(const DenseLayer& layer, const Vector& input) {
    Vector out(layer.bias);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < layer.weights.cols; ++c) s += layer.weights(r, c) * input[c];
        out[r] += s;
    }
    return out;
}

inline void relu_inplace(Vector& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

inline void check_conv(const Conv1dLayer& layer, std::size_t in_channels, const char* name) {
    if (layer.in_channels != in_channels || layer.kernel_size % 2 == 0 || layer.kernel_size == 0 ||
        layer.weights.size() != layer.out_channels * layer.in_channels * layer.kernel_size ||
        layer.bias.size() != layer.out_channels) {
        throw data_error("ShapeMismatch", std::string(name) + ": inconsistent convolution shapes");
    }
}

// Channel-major storage: value(ch, pos) = data[ch * length + pos].
inline Vector conv1d_forward(const Conv1dLayer& layer, const Vector& input, std::size_t length) {
    const std::size_t pad = layer.kernel_size / 2;
    Vector out(layer.out_channels * length, 0.0);
    for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
        for (std::size_t i = 0; i < length; ++i) {
            double s = layer.bias[oc];
            for (std::size_t ic = 0; ic < layer.in_channels; ++ic) {
                for (std::size_t t = 0; t < layer.kernel_size; ++t) {
                    const std::size_t src = i + t;
                    if (src < pad || src - pad >= length) continue;
                    s += layer.weight(oc, ic, t) * input[ic * length + (src - pad)];
                }
            }
            out[oc * length + i] = s;
        }
    }
    return out;
}

inline void conv1d_backward(const Conv1dLayer& layer, const Vector& input, std::size_t length,
                            const Vector& upstream, Conv1dLayer& grads, Vector& input_grad) {
    const std::size_t pad = layer.kernel_size / 2;
    grads.in_channels = layer.in_channels;
    grads.out_channels = layer.out_channels;
    grads.kernel_size = layer.kernel_size;
    grads.weights.assign(layer.weights.size(), 0.0);
    grads.bias.assign(layer.bias.size(), 0.0);
    input_grad.assign(input.size(), 0.0);
    for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
        for (std::size_t i = 0; i < length; ++i) {
            const double g = upstream[oc * length + i];
            if (g == 0.0) continue;
            grads.bias[oc] += g;
            for (std::size_t ic = 0; ic < layer.in_channels; ++ic) {
                for (std::size_t t = 0; t < layer.kernel_size; ++t) {
                    const std::size_t src = i + t;
                    if (src < pad || src - pad >= length) continue;
                    grads.weight(oc, ic, t) += g * input[ic * length + (src - pad)];
                    input_grad[ic * length + (src - pad)] += g * layer.weight(oc, ic, t);
                }
            }
        }
    }
}

}  // namespace detail

inline Vector mlp_forward(const MlpParams& params, const Vector& input) {
    detail::check_dense(params.layer1, input.size(), "layer1");
    detail::check_dense(params.layer2, params.layer1.bias.size(), "layer2");
    Vector hidden = detail::dense_forward(params.layer1, input);
    detail::relu_inplace(hidden);
    Vector out = detail::dense_forward(params.layer2, hidden);
    if (!all_finite(out)) throw numeric_error("NonFiniteValue", "mlp_forward produced a non-finite value");
    return out;
}

struct MlpBackward {
    MlpParams grads;
    Vector input_grad;
};

// Exact gradients of mlp_forward; the rectifier subgradient at 0 is 0.
inline MlpBackward mlp_gradient(const MlpParams& params, const Vector& input, const Vector& upstream) {
    detail::check_dense(params.layer1, input.size(), "layer1");
    detail::check_dense(params.layer2, params.layer1.bias.size(), "layer2");
    if (upstream.size() != params.layer2.bias.size()) {
        throw data_error("ShapeMismatch", "upstream gradient does not match mlp output size");
    }

    Vector pre_hidden = detail::dense_forward(params.layer1, input);
    Vector hidden = pre_hidden;
    detail::relu_inplace(hidden);

    MlpBackward result;
    result.grads.layer1.weights = Matrix(params.layer1.weights.rows, params.layer1.weights.cols);
    result.grads.layer1.bias.assign(params.layer1.bias.size(), 0.0);
    result.grads.layer2.weights = Matrix(params.layer2.weights.rows, params.layer2.weights.cols);
    result.grads.layer2.bias = upstream;

    for (std::size_t r = 0; r < params.layer2.weights.rows; ++r) {
        for (std::size_t c = 0; c < params.layer2.weights.cols; ++c) {
            result.grads.layer2.weights(r, c) = upstream[r] * hidden[c];
        }
    }
    Vector hidden_grad(hidden.size(), 0.0);
    for (std::size_t c = 0; c < hidden.size(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < params.layer2.weights.rows; ++r) {
            s += params.layer2.weights(r, c) * upstream[r];
        }
        hidden_grad[c] = pre_hidden[c] > 0.0 ? s : 0.0;
    }
    result.grads.layer1.bias = hidden_grad;
    for (std::size_t r = 0; r < params.layer1.weights.rows; ++r) {
        for (std::size_t c = 0; c < params.layer1.weights.cols; ++c) {
            result.grads.layer1.weights(r, c) = hidden_grad[r] * input[c];
        }
    }
    result.input_grad.assign(input.size(), 0.0);
    for (std::size_t c = 0; c < input.size(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < params.layer1.weights.rows; ++r) {
            s += params.layer1.weights(r, c) * hidden_grad[r];
        }
        result.input_grad[c] = s;
    }
    return result;
}

// Mean squared difference plus its gradient with respect to the prediction.
inline std::pair<double, Vector> least_squares_loss(const Vector& prediction, const Vector& target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw data_error("ShapeMismatch", "least_squares_loss requires equal non-empty lengths");
    }
    const double n = static_cast<double>(prediction.size());
    double loss = 0.0;
    Vector grad(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        loss += d * d;
        grad[i] = 2.0 * d / n;
    }
    return {loss / n, std::move(grad)};
}

namespace detail {

struct ClassifierTrace {
    std::size_t length = 0;
    Vector conv1_pre, conv1_act;
    Vector conv2_pre, conv2_act;
    Vector fc1_pre, fc1_act;
    Vector output;
};

inline ClassifierTrace classifier_trace(const ClassifierParams& params, const Vector& omega) {
    check_conv(params.conv1, 1, "conv1");
    check_conv(params.conv2, params.conv1.out_channels, "conv2");
    if (omega.empty()) throw data_error("ShapeMismatch", "classifier input is empty");
    ClassifierTrace trace;
    trace.length = omega.size();
    check_dense(params.fc1, params.conv2.out_channels * trace.length, "fc1");
    check_dense(params.fc2, params.fc1.bias.size(), "fc2");

    trace.conv1_pre = conv1d_forward(params.conv1, omega, trace.length);
    trace.conv1_act = trace.conv1_pre;
    relu_inplace(trace.conv1_act);
    trace.conv2_pre = conv1d_forward(params.conv2, trace.conv1_act, trace.length);
    trace.conv2_act = trace.conv2_pre;
    relu_inplace(trace.conv2_act);
    trace.fc1_pre = dense_forward(params.fc1, trace.conv2_act);
    trace.fc1_act = trace.fc1_pre;
    relu_inplace(trace.fc1_act);
    trace.output = dense_forward(params.fc2, trace.fc1_act);
    return trace;
}

}  // namespace detail

inline Vector classifier_forward(const ClassifierParams& params, const Vector& omega) {
    Vector out = detail::classifier_trace(params, omega).output;
    if (!all_finite(out)) throw numeric_error("NonFiniteValue", "classifier_forward produced a non-finite value");
    return out;
}

struct ClassifierBackward {
    ClassifierParams grads;
    Vector input_grad;
};

inline ClassifierBackward classifier_gradient(const ClassifierParams& params, const Vector& omega,
                                              const Vector& upstream) {
    detail::ClassifierTrace trace = detail::classifier_trace(params, omega);
    if (upstream.size() != trace.output.size()) {
        throw data_error("ShapeMismatch", "upstream gradient does not match classifier output size");
    }
    ClassifierBackward result;

    result.grads.fc2.weights = Matrix(params.fc2.weights.rows, params.fc2.weights.cols);
    result.grads.fc2.bias = upstream;
    for (std::size_t r = 0; r < params.fc2.weights.rows; ++r) {
        for (std::size_t c = 0; c < params.fc2.weights.cols; ++c) {
            result.grads.fc2.weights(r, c) = upstream[r] * trace.fc1_act[c];
        }
    }
    Vector fc1_grad(trace.fc1_act.size(), 0.0);
    for (std::size_t c = 0; c < fc1_grad.size(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < params.fc2.weights.rows; ++r) s += params.fc2.weights(r, c) * upstream[r];
        fc1_grad[c] = trace.fc1_pre[c] > 0.0 ? s : 0.0;
    }

    result.grads.fc1.weights = Matrix(params.fc1.weights.rows, params.fc1.weights.cols);
    result.grads.fc1.bias = fc1_grad;
    for (std::size_t r = 0; r < params.fc1.weights.rows; ++r) {
        for (std::size_t c = 0; c < params.fc1.weights.cols; ++c) {
            result.grads.fc1.weights(r, c) = fc1_grad[r] * trace.conv2_act[c];
        }
    }
    Vector conv2_act_grad(trace.conv2_act.size(), 0.0);
    for (std::size_t c = 0; c < conv2_act_grad.size(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < params.fc1.weights.rows; ++r) s += params.fc1.weights(r, c) * fc1_grad[r];
        conv2_act_grad[c] = trace.conv2_pre[c] > 0.0 ? s : 0.0;
    }

    Vector conv1_act_grad;
    detail::conv1d_backward(params.conv2, trace.conv1_act, trace.length, conv2_act_grad, result.grads.conv2,
                            conv1_act_grad);
    for (std::size_t i = 0; i < conv1_act_grad.size(); ++i) {
        if (trace.conv1_pre[i] <= 0.0) conv1_act_grad[i] = 0.0;
    }
    detail::conv1d_backward(params.conv1, omega, trace.length, conv1_act_grad, result.grads.conv1,
                            result.input_grad);
    return result;
}

// Numerically stable softmax over raw logits (max subtraction).
inline Vector stable_softmax(Vector logits) {
    if (logits.empty()) throw data_error("ShapeMismatch", "softmax over empty logits");
    if (!all_finite(logits)) throw numeric_error("NonFiniteValue", "softmax received non-finite logits");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& x : logits) {
        x = std::exp(x - max_logit);
        total += x;
    }
    for (double& x : logits) x /= total;
    return logits;
}

// Probability over the seen classes from logits a(y_j)^T v.
inline Vector semantic_softmax(const Matrix& seen_embeddings, const Vector& projected) {
    if (seen_embeddings.rows == 0 || seen_embeddings.cols != projected.size()) {
        throw data_error("ShapeMismatch", "semantic_softmax embedding/projection dimensions disagree");
    }
    Vector logits(seen_embeddings.rows, 0.0);
    for (std::size_t j = 0; j < seen_embeddings.rows; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < seen_embeddings.cols; ++d) s += seen_embeddings(j, d) * projected[d];
        logits[j] = s;
    }
    return stable_softmax(std::move(logits));
}

inline void check_probability_vector(const Vector& probabilities) {
    if (probabilities.empty()) throw numeric_error("InvalidProbability", "empty probability vector");
    double total = 0.0;
    for (double p : probabilities) {
        if (!std::isfinite(p) || p < -1e-12 || p > 1.0 + 1e-9) {
            throw numeric_error("InvalidProbability", "entry outside [0,1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw numeric_error("InvalidProbability", "probabilities sum to " + format_double(total));
    }
}

struct Eq3Loss {
    double loss = 0.0;
    Vector projected_grad;  // gradient w.r.t. the projected vector v
    bool clamped = false;   // true-class probability hit the 1e-12 floor
};

// Cross-entropy over the semantic softmax plus lambda times the summed squared
// Frobenius norms of the given weight tensors. The gradient w.r.t. v collapses
// to sum_j (p_j - [j == true]) a(y_j).
inline Eq3Loss loss_eq3(const Vector& probabilities, std::size_t true_class,
                        const Matrix& seen_embeddings, const std::vector<const Vector*>& all_weights,
                        double lambda) {
    check_probability_vector(probabilities);
    if (true_class >= probabilities.size() || seen_embeddings.rows != probabilities.size()) {
        throw data_error("ShapeMismatch", "loss_eq3 index or embedding row count out of range");
    }
    Eq3Loss result;
    double p_true = probabilities[true_class];
    if (p_true < 1e-12) {
        p_true = 1e-12;
        result.clamped = true;
    }
    double penalty = 0.0;
    for (const Vector* w : all_weights) {
        for (double x : *w) penalty += x * x;
    }
    result.loss = -std::log(p_true) + lambda * penalty;
    result.projected_grad.assign(seen_embeddings.cols, 0.0);
    for (std::size_t j = 0; j < probabilities.size(); ++j) {
        const double coeff = probabilities[j] - (j == true_class ? 1.0 : 0.0);
        for (std::size_t d = 0; d < seen_embeddings.cols; ++d) {
            result.projected_grad[d] += coeff * seen_embeddings(j, d);
        }
    }
    return result;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
};

struct AdamState {
    AdamConfig config;
    long step_count = 0;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
};

struct TensorView {
    std::string name;
    std::vector<std::size_t> shape;
    Vector* values;
};

struct ConstTensorView {
    std::string name;
    std::vector<std::size_t> shape;
    const Vector* values;
};

inline std::vector<TensorView> tensor_views(MlpParams& p, const std::string& prefix) {
    return {{prefix + ".layer1.weights", {p.layer1.weights.rows, p.layer1.weights.cols}, &p.layer1.weights.data},
            {prefix + ".layer1.bias", {p.layer1.bias.size()}, &p.layer1.bias},
            {prefix + ".layer2.weights", {p.layer2.weights.rows, p.layer2.weights.cols}, &p.layer2.weights.data},
            {prefix + ".layer2.bias", {p.layer2.bias.size()}, &p.layer2.bias}};
}

inline std::vector<ConstTensorView> tensor_views(const MlpParams& p, const std::string& prefix) {
    return {{prefix + ".layer1.weights", {p.layer1.weights.rows, p.layer1.weights.cols}, &p.layer1.weights.data},
            {prefix + ".layer1.bias", {p.layer1.bias.size()}, &p.layer1.bias},
            {prefix + ".layer2.weights", {p.layer2.weights.rows, p.layer2.weights.cols}, &p.layer2.weights.data},
            {prefix + ".layer2.bias", {p.layer2.bias.size()}, &p.layer2.bias}};
}

inline std::vector<TensorView> tensor_views(ClassifierParams& p, const std::string& prefix) {
    return {{prefix + ".conv1.weights", {p.conv1.out_channels, p.conv1.in_channels, p.conv1.kernel_size},
             &p.conv1.weights},
            {prefix + ".conv1.bias", {p.conv1.bias.size()}, &p.conv1.bias},
            {prefix + ".conv2.weights", {p.conv2.out_channels, p.conv2.in_channels, p.conv2.kernel_size},
             &p.conv2.weights},
            {prefix + ".conv2.bias", {p.conv2.bias.size()}, &p.conv2.bias},
            {prefix + ".fc1.weights", {p.fc1.weights.rows, p.fc1.weights.cols}, &p.fc1.weights.data},
            {prefix + ".fc1.bias", {p.fc1.bias.size()}, &p.fc1.bias},
            {prefix + ".fc2.weights", {p.fc2.weights.rows, p.fc2.weights.cols}, &p.fc2.weights.data},
            {prefix + ".fc2.bias", {p.fc2.bias.size()}, &p.fc2.bias}};
}

inline std::vector<ConstTensorView> tensor_views(const ClassifierParams& p, const std::string& prefix) {
    return {{prefix + ".conv1.weights", {p.conv1.out_channels, p.conv1.in_channels, p.conv1.kernel_size},
             &p.conv1.weights},
            {prefix + ".conv1.bias", {p.conv1.bias.size()}, &p.conv1.bias},
            {prefix + ".conv2.weights", {p.conv2.out_channels, p.conv2.in_channels, p.conv2.kernel_size},
             &p.conv2.weights},
            {prefix + ".conv2.bias", {p.conv2.bias.size()}, &p.conv2.bias},
            {prefix + ".fc1.weights", {p.fc1.weights.rows, p.fc1.weights.cols}, &p.fc1.weights.data},
            {prefix + ".fc1.bias", {p.fc1.bias.size()}, &p.fc1.bias},
            {prefix + ".fc2.weights", {p.fc2.weights.rows, p.fc2.weights.cols}, &p.fc2.weights.data},
            {prefix + ".fc2.bias", {p.fc2.bias.size()}, &p.fc2.bias}};
}

// Classic Adam with bias correction. Weight decay couples in as an L2 term
// added to the gradient before the moment updates.
inline void adam_step(AdamState& state, const std::vector<TensorView>& params,
                      const std::vector<ConstTensorView>& grads) {
    if (params.size() != grads.size()) {
        throw data_error("ShapeMismatch", "adam_step parameter/gradient tensor counts differ");
    }
    if (state.first_moment.empty()) {
        for (const auto& view : params) {
            state.first_moment.emplace_back(view.values->size(), 0.0);
            state.second_moment.emplace_back(view.values->size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw data_error("ShapeMismatch", "adam_step state does not match parameter count");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step_count));
    for (std::size_t t = 0; t < params.size(); ++t) {
        Vector& theta = *params[t].values;
        const Vector& g_in = *grads[t].values;
        if (theta.size() != g_in.size() || theta.size() != state.first_moment[t].size()) {
            throw data_error("ShapeMismatch", "adam_step tensor '" + params[t].name + "' shape mismatch");
        }
        Vector& m = state.first_moment[t];
        Vector& v = state.second_moment[t];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = g_in[i] + state.config.weight_decay * theta[i];
            m[i] = state.config.beta1 * m[i] + (1.0 - state.config.beta1) * g;
            v[i] = state.config.beta2 * v[i] + (1.0 - state.config.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= state.config.lr * m_hat / (std::sqrt(v_hat) + state.config.eps);
        }
    }
}

template <class Params>
inline void adam_step(AdamState& state, Params& params, const Params& grads) {
    adam_step(state, tensor_views(params, "p"), tensor_views(grads, "p"));
}

inline double frobenius_squared(const std::vector<const Vector*>& weights) {
    double s = 0.0;
    for (const Vector* w : weights) {
        for (double x : *w) s += x * x;
    }
    return s;
}

// Weight tensors only (biases carry no Frobenius penalty).
inline std::vector<const Vector*> weight_tensors(const MlpParams& p) {
    return {&p.layer1.weights.data, &p.layer2.weights.data};
}

inline std::vector<const Vector*> weight_tensors(const ClassifierParams& p) {
    return {&p.conv1.weights, &p.conv2.weights, &p.fc1.weights.data, &p.fc2.weights.data};
}

}  // namespace claster
