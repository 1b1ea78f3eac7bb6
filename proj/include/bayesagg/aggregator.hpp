#pragma once

#include <span>
#include <vector>

#include "bayesagg/bayes_regression.hpp"
#include "bayesagg/common.hpp"

namespace bayesagg {

struct AggregationConfig {
    double s = 1.0;  // precision temper exponent in (0,1]; 0 acts as the s->0+ limit
    MomentMode mode = MomentMode::kDiagonal;
    double epsilon = kVarianceFloor;  // variance floor feeding the precisions
};

// Per-dimension convex weights alpha_k for one example; rows of the implied
// K x d matrix sum to one along k for every dimension.
struct TaskWeights {
    std::vector<Vector> alpha;

    [[nodiscard]] Index tasks() const { return static_cast<Index>(alpha.size()); }
    // Mean of alpha over dimensions, one scalar per task.
    [[nodiscard]] Vector dimension_means() const;
};

namespace aggregator {

// Precision-weighted combination with tempered precisions, elementwise:
//   alpha_k = lambda_k^s / sum_j lambda_j^s,  g = sum_k alpha_k .* mu_k.
// Tempering happens in log space. A per-task exponent overload supports
// mixed regression/classification batches.
std::pair<Vector, TaskWeights> aggregate_diagonal(std::span<const GradientMoments> moments,
                                                  const AggregationConfig& cfg);
std::pair<Vector, TaskWeights> aggregate_diagonal(std::span<const GradientMoments> moments,
                                                  std::span<const double> s_per_task,
                                                  double epsilon = kVarianceFloor);

// Full-covariance solution g = (sum_k Lambda_k)^-1 (sum_k Lambda_k mu_k)
// with Lambda_k the (jittered) inverse of Sigma_k = E[gg^T] - mu mu^T.
// Experimental: kept for the closed-form cross-check, not the default path.
Vector aggregate_full(std::span<const GradientMoments> moments, double epsilon = kVarianceFloor);

// Per-task mean weights for logging: one row per example (mean of alpha over
// dimensions per task) plus the batch mean per task.
struct WeightSummary {
    Matrix per_example;  // n x K
    Vector batch_mean;   // K
};
WeightSummary weight_summary(std::span<const TaskWeights> batch);

}  // namespace aggregator
}  // namespace bayesagg
