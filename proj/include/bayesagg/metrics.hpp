#pragma once

#include <span>
#include <vector>

#include "bayesagg/common.hpp"
#include "bayesagg/data.hpp"

namespace bayesagg::metrics {

// Per-task criterion values for a method vs the single-task reference.
// higher_is_better[k] = 1 flips the sign for accuracy-like criteria.
struct MetricRecord {
    Vector method_values;
    Vector stl_values;
    std::vector<int> higher_is_better;
};

// 100 * (1/K) sum_k (-1)^{delta_k} (M_m - M_s) / M_s; lower is better.
double delta_m(const MetricRecord& record);

// Expected calibration error over equal-width confidence bins on [0,1].
double ece(const Vector& confidences, const std::vector<bool>& correct, int bins = 15);

// Mean over samples of the squared distance between the probability vector
// and the one-hot label (sum over classes).
double brier(const Matrix& probs, const std::vector<int>& labels);

// Regression criterion: MAE, rescaled to raw units by the normalization std.
double mae(const Vector& predictions, const Vector& targets, double denorm_std = 1.0);

// Classification criterion: accuracy. Binary probabilities tie-break to
// class 0 at exactly 0.5; multiclass argmax picks the lowest index on ties.
double accuracy(const Matrix& probs, const std::vector<int>& labels, bool binary);

// Per-task criterion: MAE on the de-normalized scale for regression
// (averaged over outputs), accuracy for classification.
double task_criteria(const Matrix& predictions, const Matrix& labels, TaskKind kind,
                     std::span<const NormStats> norm = {});

}  // namespace bayesagg::metrics
