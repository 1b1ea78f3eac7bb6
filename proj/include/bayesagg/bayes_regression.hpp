#pragma once

#include "bayesagg/common.hpp"

namespace bayesagg {

// Gaussian over a task head's weights: prior and posterior share this type.
struct GaussianPosterior {
    Vector mean;
    Matrix cov;
    double tau = 1.0;  // observation noise std of the Gaussian likelihood

    [[nodiscard]] Index dim() const { return mean.size(); }
};

GaussianPosterior isotropic_prior(Index dim, double variance = 1.0, double tau = 1.0);

// First/second moments of a per-example hidden-layer gradient, plus the
// derived variance and precision. `second_full` is only populated in full
// mode; `second_diag` is always available.
struct GradientMoments {
    Vector mu;
    Vector second_diag;
    Matrix second_full;  // empty in diagonal mode
    Vector var;          // clamped at zero
    Vector precision;    // 1 / max(var, floor)

    [[nodiscard]] bool has_full() const { return second_full.size() > 0; }

    // Restrict to the leading n dimensions (drops the bias slot when the
    // moments were computed over bias-augmented features).
    [[nodiscard]] GradientMoments head(Index n) const;
};

enum class MomentMode { kDiagonal, kFull };

// Variance floor: point-mass posteriors produce exact zeros.
inline constexpr double kVarianceFloor = 1e-12;

namespace bayes_regression {

// Conjugate update for a Gaussian likelihood with fixed scalar noise std tau:
//   S = (S_p^-1 + tau^-2 H H^T)^-1,  m = S (S_p^-1 m_p + tau^-2 H y),
// with H the d x n matrix of stacked feature columns. n = 0 returns the
// prior unchanged.
GaussianPosterior posterior_update(const Matrix& features, const Vector& targets,
                                   const GaussianPosterior& prior, double tau = 1.0);

// Full-data refresh at an epoch boundary: the posterior over everything
// collected during the epoch, starting from the isotropic base prior. The
// caller installs the result as the per-batch prior for the next epoch.
GaussianPosterior epoch_prior_refresh(const Matrix& all_features, const Vector& all_targets,
                                      const GaussianPosterior& base_prior, double tau = 1.0);

// Closed-form moments of g = 2 w (h^T w - y) under w ~ N(m, S):
//   E[g]     = 2 [(S + m m^T) h - y m]
//   E[g g^T] = 4 [ y^2 P - 2y (m h^T P + P h m^T + (h^T m)(S - M))
//                  + P (A + A^T) P + (m^T A m)(S - M) + Tr(A S) P ]
// with P = S + M, M = m m^T, A = h h^T.
GradientMoments regression_gradient_moments(const GaussianPosterior& post, const Vector& h,
                                            double y, MomentMode mode = MomentMode::kDiagonal,
                                            double var_floor = kVarianceFloor);

}  // namespace bayes_regression
}  // namespace bayesagg
