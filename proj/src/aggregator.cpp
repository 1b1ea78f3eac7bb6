#include "bayesagg/aggregator.hpp"

#include <cmath>

#include "bayesagg/numerics.hpp"

namespace bayesagg {

Vector TaskWeights::dimension_means() const {
    Vector out(tasks());
    for (Index k = 0; k < tasks(); ++k) out(k) = alpha[k].mean();
    return out;
}

namespace aggregator {

std::pair<Vector, TaskWeights> aggregate_diagonal(std::span<const GradientMoments> moments,
                                                  std::span<const double> s_per_task,
                                                  double epsilon) {
    const auto K = static_cast<Index>(moments.size());
    if (K == 0) throw EmptyTasksError("aggregate_diagonal: no tasks");
    if (s_per_task.size() != moments.size()) {
        throw DimensionError("aggregate_diagonal: one exponent per task required");
    }
    const Index d = moments[0].mu.size();

    // Tempered precisions in log space; lambda^s = exp(s * log lambda)
    // stays finite even for precisions near 1/epsilon.
    Matrix log_tempered(d, K);
    for (Index k = 0; k < K; ++k) {
        const GradientMoments& m = moments[k];
        if (m.mu.size() != d) throw DimensionError("aggregate_diagonal: dim mismatch across tasks");
        const double s = s_per_task[k];
        if (s < 0.0 || s > 1.0) throw DimensionError("aggregate_diagonal: s must lie in [0,1]");
        const Vector lambda = m.var.cwiseMax(epsilon).cwiseInverse();
        log_tempered.col(k) = s * lambda.array().log();
    }

    TaskWeights weights;
    weights.alpha.assign(K, Vector(d));
    Vector g = Vector::Zero(d);
    for (Index j = 0; j < d; ++j) {
        const double row_max = log_tempered.row(j).maxCoeff();
        double denom = 0.0;
        for (Index k = 0; k < K; ++k) denom += std::exp(log_tempered(j, k) - row_max);
        for (Index k = 0; k < K; ++k) {
            const double a = std::exp(log_tempered(j, k) - row_max) / denom;
            weights.alpha[k](j) = a;
            g(j) += a * moments[k].mu(j);
        }
    }
    return {g, weights};
}

std::pair<Vector, TaskWeights> aggregate_diagonal(std::span<const GradientMoments> moments,
                                                  const AggregationConfig& cfg) {
    const std::vector<double> s(moments.size(), cfg.s);
    return aggregate_diagonal(moments, s, cfg.epsilon);
}

Vector aggregate_full(std::span<const GradientMoments> moments, double epsilon) {
    const auto K = static_cast<Index>(moments.size());
    if (K == 0) throw EmptyTasksError("aggregate_full: no tasks");
    const Index d = moments[0].mu.size();
    const Matrix eye = Matrix::Identity(d, d);

    Matrix lambda_sum = Matrix::Zero(d, d);
    Vector weighted_mu = Vector::Zero(d);
    for (const GradientMoments& m : moments) {
        if (!m.has_full()) {
            throw DimensionError("aggregate_full: full second moments required");
        }
        if (m.mu.size() != d) throw DimensionError("aggregate_full: dim mismatch across tasks");
        Matrix cov = m.second_full - m.mu * m.mu.transpose();
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal() = cov.diagonal().cwiseMax(epsilon);
        const Matrix lambda = numerics::spd_solve(cov, eye);
        lambda_sum += lambda;
        weighted_mu += lambda * m.mu;
    }
    return numerics::spd_solve(lambda_sum, weighted_mu);
}

WeightSummary weight_summary(std::span<const TaskWeights> batch) {
    WeightSummary out;
    if (batch.empty()) {
        out.per_example = Matrix(0, 0);
        out.batch_mean = Vector();
        return out;
    }
    const Index n = static_cast<Index>(batch.size());
    const Index K = batch[0].tasks();
    out.per_example = Matrix(n, K);
    for (Index i = 0; i < n; ++i) {
        if (batch[i].tasks() != K) throw DimensionError("weight_summary: ragged task counts");
        out.per_example.row(i) = batch[i].dimension_means().transpose();
    }
    out.batch_mean = out.per_example.colwise().mean();
    return out;
}

}  // namespace aggregator
}  // namespace bayesagg
