#pragma once

#include <string>
#include <vector>

#include "bayesagg/bayes_classification.hpp"
#include "bayesagg/common.hpp"
#include "bayesagg/rng.hpp"

namespace bayesagg {

enum class Activation { kRelu, kElu, kTanh, kIdentity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// Shared fully-connected trunk. Layer l maps widths[l] -> widths[l+1];
// the final width is d_h.
struct TrunkParams {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::vector<Activation> activations;

    [[nodiscard]] Index layer_count() const { return static_cast<Index>(weights.size()); }
    [[nodiscard]] Index input_dim() const { return weights.front().cols(); }
    [[nodiscard]] Index hidden_dim() const { return weights.back().rows(); }
};

// Uniform fan-in init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
TrunkParams make_trunk(Index input_dim, const std::vector<Index>& widths, Activation act,
                       const RngStream& rng);

struct TrunkGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// Cached intermediates of one batch forward pass. hidden() is d_h x n.
struct ForwardTrace {
    Matrix input;                       // d_x x n
    std::vector<Matrix> pre;            // per-layer pre-activations
    std::vector<Matrix> post;           // per-layer activations
    Index layer_count = 0;

    [[nodiscard]] const Matrix& hidden() const { return post.back(); }
    [[nodiscard]] Index batch_size() const { return input.cols(); }
};

// Linear task head on the bias-augmented hidden vector [h; 1].
struct TaskHead {
    int id = 0;
    TaskKind kind = TaskKind::kRegression;
    Matrix W;  // o_k x (d_h + 1), bias in the last column

    [[nodiscard]] Index outputs() const { return W.rows(); }
    [[nodiscard]] HeadPointEstimate flatten() const;
};

TaskHead make_head(int id, TaskKind kind, Index outputs, Index hidden_dim, const RngStream& rng);

namespace network {

ForwardTrace forward(const Matrix& x_batch, const TrunkParams& trunk);

// Append the constant-1 bias row: d_h x n -> (d_h + 1) x n.
Matrix augment_bias(const Matrix& hidden);
Vector augment_bias(const Vector& h);

// Head outputs for a whole batch: regression values, sigmoid probabilities
// (1 x n) or softmax columns (o x n).
Matrix head_forward(const Matrix& hidden, const TaskHead& head);

// Gradient of the per-example task loss w.r.t. the hidden vector:
// regression (squared loss, outputs summed): sum_o 2 w_o (hhat^T w_o - y_o);
// binary/multiclass cross-entropy: W[:, :d_h]^T (p - y).
Vector hidden_gradient(const TaskHead& head, const Vector& h, const Vector& y);

// Reverse-mode VJP of the trunk: gradient of (1/n) sum_i g_i . h_i over the
// trunk parameters, with g_batch holding one column per example.
TrunkGrads backprop_shared(const Matrix& g_batch, const ForwardTrace& trace,
                           const TrunkParams& trunk);

}  // namespace network
}  // namespace bayesagg
