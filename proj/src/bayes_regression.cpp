#include "bayesagg/bayes_regression.hpp"

#include "bayesagg/numerics.hpp"

namespace bayesagg {

GaussianPosterior isotropic_prior(Index dim, double variance, double tau) {
    GaussianPosterior p;
    p.mean = Vector::Zero(dim);
    p.cov = variance * Matrix::Identity(dim, dim);
    p.tau = tau;
    return p;
}

GradientMoments GradientMoments::head(Index n) const {
    GradientMoments out;
    out.mu = mu.head(n);
    out.second_diag = second_diag.head(n);
    if (has_full()) out.second_full = second_full.topLeftCorner(n, n);
    out.var = var.head(n);
    out.precision = precision.head(n);
    return out;
}

namespace bayes_regression {

GaussianPosterior posterior_update(const Matrix& features, const Vector& targets,
                                   const GaussianPosterior& prior, double tau) {
    const Index d = prior.dim();
    if (features.cols() != targets.size()) {
        throw DimensionError("posterior_update: feature/target count mismatch");
    }
    if (features.cols() == 0) return prior;
    if (features.rows() != d) {
        throw DimensionError("posterior_update: feature dim does not match prior");
    }
    const double inv_tau2 = 1.0 / (tau * tau);
    const Matrix eye = Matrix::Identity(d, d);
    const Matrix prior_precision = numerics::spd_solve(prior.cov, eye);
    Matrix precision = prior_precision + inv_tau2 * (features * features.transpose());
    precision = 0.5 * (precision + precision.transpose());

    GaussianPosterior post;
    post.tau = tau;
    post.cov = numerics::spd_solve(precision, eye);
    post.cov = 0.5 * (post.cov + post.cov.transpose());
    post.mean = post.cov * (prior_precision * prior.mean + inv_tau2 * (features * targets));
    return post;
}

GaussianPosterior epoch_prior_refresh(const Matrix& all_features, const Vector& all_targets,
                                      const GaussianPosterior& base_prior, double tau) {
    return posterior_update(all_features, all_targets, base_prior, tau);
}

GradientMoments regression_gradient_moments(const GaussianPosterior& post, const Vector& h,
                                            double y, MomentMode mode, double var_floor) {
    const Index d = post.dim();
    if (h.size() != d) {
        throw DimensionError("regression_gradient_moments: feature dim mismatch");
    }
    const Vector& m = post.mean;
    const Matrix& S = post.cov;

    const double hm = h.dot(m);
    const Vector Sh = S * h;
    const Vector Ph = Sh + m * hm;  // (S + m m^T) h

    GradientMoments out;
    out.mu = 2.0 * (Ph - y * m);

    const double trAS = h.dot(Sh);     // Tr(h h^T S) = h^T S h
    const double mAm = hm * hm;        // m^T h h^T m
    if (mode == MomentMode::kFull) {
        const Matrix M = m * m.transpose();
        const Matrix P = S + M;
        const Matrix SminusM = S - M;
        Matrix second = (y * y) * P;
        second.noalias() -= 2.0 * y * (m * (h.transpose() * P));
        second.noalias() -= 2.0 * y * ((P * h) * m.transpose());
        second -= 2.0 * y * hm * SminusM;
        second.noalias() += 2.0 * (Ph * Ph.transpose());  // P (A + A^T) P with A = h h^T
        second += mAm * SminusM;
        second += trAS * P;
        second *= 4.0;
        out.second_full = 0.5 * (second + second.transpose());
        out.second_diag = out.second_full.diagonal();
    } else {
        const Vector m2 = m.array().square();
        const Vector dP = S.diagonal() + m2;             // diag(S + M)
        const Vector dSminusM = S.diagonal() - m2;       // diag(S - M)
        Vector diag = (y * y) * dP;
        diag -= 2.0 * y * (2.0 * Ph.cwiseProduct(m) + hm * dSminusM);
        diag += 2.0 * Ph.array().square().matrix();
        diag += mAm * dSminusM;
        diag += trAS * dP;
        out.second_diag = 4.0 * diag;
    }

    out.var = (out.second_diag - out.mu.array().square().matrix()).cwiseMax(0.0);
    out.precision = out.var.cwiseMax(var_floor).cwiseInverse();
    return out;
}

}  // namespace bayes_regression
}  // namespace bayesagg
