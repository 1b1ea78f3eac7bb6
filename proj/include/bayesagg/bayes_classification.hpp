#pragma once

#include "bayesagg/bayes_regression.hpp"
#include "bayesagg/common.hpp"
#include "bayesagg/rng.hpp"

namespace bayesagg {

enum class TaskKind { kRegression, kBinary, kMulticlass };

// Quadratic expansion of the negative log-joint around the point estimate:
// c is the value, a the gradient, B the (GGN) curvature with prior precision
// added.
struct TaylorExpansion {
    double c = 0.0;
    Vector a;
    Matrix B;
};

// Flattened head weights w_hat, row-major over outputs: weights for output
// c occupy slots [c*cols, (c+1)*cols). `outputs` is o_k; cols = w.size()/o_k
// and equals d_h + 1 when the head carries a bias feature.
struct HeadPointEstimate {
    Vector w;
    Index outputs = 1;

    [[nodiscard]] Index cols() const { return w.size() / outputs; }
    [[nodiscard]] Matrix as_matrix() const;
};

namespace bayes_classification {

double sigmoid(double z);
Vector softmax(const Vector& logits);

// Hessian of the negative log-likelihood w.r.t. the model outputs (logits):
// binary -> [p(1-p)] (1x1); multiclass -> diag(p) - p p^T.
Matrix nll_output_hessian(const Vector& probs, TaskKind kind);

// Probabilities of the linear head on one feature column.
// Binary returns a 1-vector (P(y=1)); multiclass the class simplex.
Vector head_probs(const HeadPointEstimate& w_hat, const Vector& feature, TaskKind kind);

// Negative log-joint expansion at w_hat over a batch:
//   a = grad of -log lik - log prior,  B = sum_i J_i^T H_i J_i + S_p^-1.
// `features` is cols x n with cols = w_hat.cols() (bias row included by the
// caller when configured); `labels` holds {0,1} for binary or class ids.
TaylorExpansion taylor_expansion(const HeadPointEstimate& w_hat, const Matrix& features,
                                 const Vector& labels, const GaussianPosterior& prior,
                                 TaskKind kind);

// Gaussian N(w_hat - B^-1 a, B^-1) from the expansion; one Newton step of
// the mean, Laplace covariance.
GaussianPosterior taylor_posterior(const HeadPointEstimate& w_hat, const Matrix& features,
                                   const Vector& labels, const GaussianPosterior& prior,
                                   TaskKind kind);

// J weight samples from the posterior, one per column.
Matrix sample_head_weights(const GaussianPosterior& post, Index n_samples, const RngStream& rng);

// Monte-Carlo gradient moments w.r.t. the hidden vector h (d_h dims) from
// pre-drawn weight samples. The bias slot, when present (cols == d_h + 1),
// contributes to the logits but not to the returned gradient dimensions.
GradientMoments mc_moments_from_samples(const Matrix& weight_samples, Index outputs,
                                        const Vector& h, double label, TaskKind kind,
                                        MomentMode mode = MomentMode::kDiagonal,
                                        double var_floor = kVarianceFloor);

// Convenience wrapper: draw J samples then reduce.
GradientMoments mc_gradient_moments(const GaussianPosterior& post, const Vector& h, double label,
                                    TaskKind kind, Index outputs, Index n_samples,
                                    const RngStream& rng, MomentMode mode = MomentMode::kDiagonal,
                                    double var_floor = kVarianceFloor);

}  // namespace bayes_classification
}  // namespace bayesagg
