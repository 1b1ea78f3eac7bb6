#include "bayesagg/bayes_classification.hpp"

#include <cmath>

#include "bayesagg/numerics.hpp"

namespace bayesagg {

Matrix HeadPointEstimate::as_matrix() const {
    if (outputs <= 0 || w.size() % outputs != 0) {
        throw DimensionError("HeadPointEstimate: weight size not divisible by outputs");
    }
    using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>;
    return RowMajorMap(w.data(), outputs, cols());
}

namespace bayes_classification {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Vector softmax(const Vector& logits) {
    const double zmax = logits.maxCoeff();
    Vector p = (logits.array() - zmax).exp();
    return p / p.sum();
}

Matrix nll_output_hessian(const Vector& probs, TaskKind kind) {
    constexpr double tol = 1e-8;
    if (kind == TaskKind::kBinary) {
        if (probs.size() != 1) {
            throw InvalidProbabilityError("nll_output_hessian: binary expects a scalar");
        }
        const double p = probs(0);
        if (p < -tol || p > 1.0 + tol) {
            throw InvalidProbabilityError("nll_output_hessian: probability outside [0,1]");
        }
        Matrix H(1, 1);
        H(0, 0) = p * (1.0 - p);
        return H;
    }
    if (kind == TaskKind::kMulticlass) {
        if ((probs.array() < -tol).any() || std::abs(probs.sum() - 1.0) > tol) {
            throw InvalidProbabilityError("nll_output_hessian: vector is not on the simplex");
        }
        Matrix H = Matrix(probs.asDiagonal());
        H.noalias() -= probs * probs.transpose();
        return H;
    }
    throw InvalidProbabilityError("nll_output_hessian: regression tasks have no output Hessian");
}

Vector head_probs(const HeadPointEstimate& w_hat, const Vector& feature, TaskKind kind) {
    const Matrix W = w_hat.as_matrix();
    if (feature.size() != W.cols()) {
        throw DimensionError("head_probs: feature dim mismatch");
    }
    const Vector z = W * feature;
    if (kind == TaskKind::kBinary) {
        Vector p(1);
        p(0) = sigmoid(z(0));
        return p;
    }
    return softmax(z);
}

namespace {

Vector one_hot(double label, Index classes) {
    const auto cls = static_cast<Index>(label);
    if (cls < 0 || cls >= classes || static_cast<double>(cls) != label) {
        throw InvalidLabelError("class label out of range");
    }
    Vector y = Vector::Zero(classes);
    y(cls) = 1.0;
    return y;
}

Vector residual(const Vector& probs, double label, TaskKind kind) {
    if (kind == TaskKind::kBinary) {
        if (label != 0.0 && label != 1.0) {
            throw InvalidLabelError("binary label must be 0 or 1");
        }
        Vector r(1);
        r(0) = probs(0) - label;
        return r;
    }
    return probs - one_hot(label, probs.size());
}

}  // namespace

TaylorExpansion taylor_expansion(const HeadPointEstimate& w_hat, const Matrix& features,
                                 const Vector& labels, const GaussianPosterior& prior,
                                 TaskKind kind) {
    const Index dk = w_hat.w.size();
    const Index o = w_hat.outputs;
    const Index cols = w_hat.cols();
    if (prior.dim() != dk) {
        throw DimensionError("taylor_expansion: prior dim does not match head");
    }
    if (features.cols() != labels.size() || (features.cols() > 0 && features.rows() != cols)) {
        throw DimensionError("taylor_expansion: feature/label shape mismatch");
    }

    const Matrix eye = Matrix::Identity(dk, dk);
    const Matrix prior_precision = numerics::spd_solve(prior.cov, eye);

    TaylorExpansion out;
    out.a = Vector::Zero(dk);
    out.B = prior_precision;
    out.c = 0.0;

    const Matrix W = w_hat.as_matrix();
    for (Index i = 0; i < features.cols(); ++i) {
        const Vector f = features.col(i);
        const Vector z = W * f;
        Vector probs;
        if (kind == TaskKind::kBinary) {
            probs = Vector::Constant(1, sigmoid(z(0)));
            const double y = labels(i);
            if (y != 0.0 && y != 1.0) throw InvalidLabelError("binary label must be 0 or 1");
            // -log p(y|z) with numerically stable log-sigmoid
            const double zi = z(0);
            const double log1pe = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
            out.c += log1pe - y * zi;
        } else if (kind == TaskKind::kMulticlass) {
            probs = softmax(z);
            const Vector y = one_hot(labels(i), o);
            const double zmax = z.maxCoeff();
            const double lse = zmax + std::log((z.array() - zmax).exp().sum());
            out.c += lse - y.dot(z);
        } else {
            throw InvalidLabelError("taylor_expansion: regression tasks use the conjugate path");
        }
        const Vector r = residual(probs, labels(i), kind);
        // d(-log lik)/dw: per output c, block c accumulates r_c * f.
        for (Index c = 0; c < o; ++c) {
            out.a.segment(c * cols, cols) += r(c) * f;
        }
        // GGN term J^T H J = H (x) f f^T under row-major flattening.
        const Matrix H = nll_output_hessian(probs, kind);
        const Matrix ff = f * f.transpose();
        for (Index c1 = 0; c1 < o; ++c1) {
            for (Index c2 = 0; c2 < o; ++c2) {
                if (H(c1, c2) == 0.0) continue;
                out.B.block(c1 * cols, c2 * cols, cols, cols) += H(c1, c2) * ff;
            }
        }
    }

    // Prior contribution to the gradient and value.
    const Vector dw = w_hat.w - prior.mean;
    const Vector prior_grad = prior_precision * dw;
    out.a += prior_grad;
    out.c += 0.5 * dw.dot(prior_grad);
    out.B = 0.5 * (out.B + out.B.transpose());
    return out;
}

GaussianPosterior taylor_posterior(const HeadPointEstimate& w_hat, const Matrix& features,
                                   const Vector& labels, const GaussianPosterior& prior,
                                   TaskKind kind) {
    const TaylorExpansion t = taylor_expansion(w_hat, features, labels, prior, kind);
    const Index dk = w_hat.w.size();
    GaussianPosterior post;
    post.tau = prior.tau;
    post.cov = numerics::spd_solve(t.B, Matrix::Identity(dk, dk));
    post.cov = 0.5 * (post.cov + post.cov.transpose());
    post.mean = w_hat.w - numerics::spd_solve(t.B, t.a);
    return post;
}

Matrix sample_head_weights(const GaussianPosterior& post, Index n_samples, const RngStream& rng) {
    return numerics::sample_gaussian(post.mean, post.cov, n_samples, rng);
}

GradientMoments mc_moments_from_samples(const Matrix& weight_samples, Index outputs,
                                        const Vector& h, double label, TaskKind kind,
                                        MomentMode mode, double var_floor) {
    const Index J = weight_samples.cols();
    const Index dk = weight_samples.rows();
    if (J < 1) throw EmptyInputError("mc_moments_from_samples: no samples");
    if (outputs <= 0 || dk % outputs != 0) {
        throw DimensionError("mc_moments_from_samples: sample dim not divisible by outputs");
    }
    const Index cols = dk / outputs;
    const Index dh = h.size();
    if (cols != dh && cols != dh + 1) {
        throw DimensionError("mc_moments_from_samples: head/feature dim mismatch");
    }
    Vector f(cols);
    f.head(dh) = h;
    if (cols == dh + 1) f(dh) = 1.0;

    Matrix grads(dh, J);
    HeadPointEstimate sample{Vector(), outputs};
    for (Index j = 0; j < J; ++j) {
        sample.w = weight_samples.col(j);
        const Matrix W = sample.as_matrix();
        const Vector z = W * f;
        Vector probs;
        if (kind == TaskKind::kBinary) {
            probs = Vector::Constant(1, sigmoid(z(0)));
        } else if (kind == TaskKind::kMulticlass) {
            probs = softmax(z);
        } else {
            throw InvalidLabelError("mc_moments_from_samples: regression uses closed forms");
        }
        const Vector r = residual(probs, label, kind);
        grads.col(j) = W.leftCols(dh).transpose() * r;
    }

    GradientMoments out;
    out.mu = grads.rowwise().mean();
    if (mode == MomentMode::kFull) {
        out.second_full = (grads * grads.transpose()) / static_cast<double>(J);
        out.second_full = 0.5 * (out.second_full + out.second_full.transpose());
        out.second_diag = out.second_full.diagonal();
    } else {
        out.second_diag = grads.array().square().rowwise().mean();
    }
    out.var = (out.second_diag - out.mu.array().square().matrix()).cwiseMax(0.0);
    out.precision = out.var.cwiseMax(var_floor).cwiseInverse();
    return out;
}

GradientMoments mc_gradient_moments(const GaussianPosterior& post, const Vector& h, double label,
                                    TaskKind kind, Index outputs, Index n_samples,
                                    const RngStream& rng, MomentMode mode, double var_floor) {
    if (n_samples < 2) throw EmptyInputError("mc_gradient_moments: need at least 2 samples");
    const Matrix samples = sample_head_weights(post, n_samples, rng);
    return mc_moments_from_samples(samples, outputs, h, label, kind, mode, var_floor);
}

}  // namespace bayes_classification
}  // namespace bayesagg
