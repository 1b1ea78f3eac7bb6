#include <doctest.h>

#include <cmath>

#include "bayesagg/bayes_classification.hpp"
#include "oracles.hpp"

using namespace bayesagg;
namespace bc = bayesagg::bayes_classification;

TEST_SUITE_BEGIN("bayes_classification");

TEST_CASE("nll_output_hessian fixtures") {
    Vector half(1);
    half << 0.5;
    CHECK(bc::nll_output_hessian(half, TaskKind::kBinary)(0, 0) == doctest::Approx(0.25));

    Vector p(2);
    p << 0.5, 0.5;
    const Matrix H = bc::nll_output_hessian(p, TaskKind::kMulticlass);
    CHECK(H(0, 0) == doctest::Approx(0.25));
    CHECK(H(0, 1) == doctest::Approx(-0.25));
    CHECK(H(1, 0) == doctest::Approx(-0.25));
    CHECK(H(1, 1) == doctest::Approx(0.25));

    Vector sat(2);
    sat << 1, 0;
    CHECK(bc::nll_output_hessian(sat, TaskKind::kMulticlass).norm() == doctest::Approx(0.0));

    Vector bad(1);
    bad << 1.5;
    CHECK_THROWS_AS(bc::nll_output_hessian(bad, TaskKind::kBinary), InvalidProbabilityError);
    Vector off(2);
    off << 0.7, 0.6;
    CHECK_THROWS_AS(bc::nll_output_hessian(off, TaskKind::kMulticlass), InvalidProbabilityError);
}

TEST_CASE("taylor_posterior 1-D logistic fixture N(0.4, 0.8)") {
    // w_hat = 0, one example x = 1 with y = 1, prior N(0, 1):
    // a = (sigma(0) - 1) * 1 + 0 = -0.5, B = 0.25 + 1 = 1.25,
    // posterior N(0 - a/B, 1/B) = N(0.4, 0.8).
    HeadPointEstimate what{Vector::Zero(1), 1};
    Matrix X(1, 1);
    X << 1;
    Vector y(1);
    y << 1;
    const GaussianPosterior post =
        bc::taylor_posterior(what, X, y, isotropic_prior(1, 1.0), TaskKind::kBinary);
    CHECK(post.mean(0) == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(post.cov(0, 0) == doctest::Approx(0.8).epsilon(1e-10));
}

TEST_CASE("taylor_posterior at a stationary point recovers Laplace (mean = w_hat)") {
    // Two symmetric examples with matching labels cancel the likelihood
    // gradient at w_hat = 0, and the zero-mean prior adds nothing.
    HeadPointEstimate what{Vector::Zero(2), 1};
    Matrix X(2, 2);
    X << 1, -1, 2, -2;
    Vector y(2);
    y << 1, 1;
    const GaussianPosterior post =
        bc::taylor_posterior(what, X, y, isotropic_prior(2, 1.0), TaskKind::kBinary);
    CHECK(post.mean.norm() < 1e-12);
}

TEST_CASE("taylor_posterior on an empty batch returns the prior") {
    auto engine = make_engine(RngStream{41, 0});
    const Index d = 3;
    GaussianPosterior prior;
    prior.mean = oracles::random_vector(d, engine);
    prior.cov = oracles::random_spd(d, 0.3, 2.0, engine);
    HeadPointEstimate what{oracles::random_vector(d, engine), 1};
    const GaussianPosterior post =
        bc::taylor_posterior(what, Matrix(d, 0), Vector(0), prior, TaskKind::kBinary);
    CHECK((post.mean - prior.mean).norm() < 1e-10);
    CHECK((post.cov - prior.cov).norm() < 1e-9);
}

TEST_CASE("taylor expansion curvature is PD and mean matches independent Newton") {
    auto engine = make_engine(RngStream{42, 0});
    for (int rep = 0; rep < 12; ++rep) {
        const bool multiclass = rep % 2 == 1;
        const Index o = multiclass ? 3 : 1;
        const Index cols = 2 + (rep % 3);
        const Index dk = o * cols;
        const Index n = 6;
        HeadPointEstimate what{oracles::random_vector(dk, engine), o};
        Matrix X(cols, n);
        for (Index j = 0; j < n; ++j) X.col(j) = oracles::random_vector(cols, engine);
        Vector y(n);
        auto u = std::uniform_int_distribution<int>(0, static_cast<int>(o - 1));
        for (Index j = 0; j < n; ++j) {
            y(j) = multiclass ? u(engine) : (X(0, j) > 0 ? 1.0 : 0.0);
        }
        GaussianPosterior prior;
        prior.mean = oracles::random_vector(dk, engine, 0.2);
        prior.cov = oracles::random_spd(dk, 0.5, 2.0, engine);

        const TaskKind kind = multiclass ? TaskKind::kMulticlass : TaskKind::kBinary;
        const TaylorExpansion t = bc::taylor_expansion(what, X, y, prior, kind);
        const GaussianPosterior post = bc::taylor_posterior(what, X, y, prior, kind);

        const auto newton = oracles::independent_newton_step(what.w, o, X, y, prior.mean,
                                                             prior.cov, multiclass);
        CHECK((post.mean - newton.mean).norm() <= 1e-8 * std::max(1.0, newton.mean.norm()));
        CHECK((t.B - newton.precision).norm() < 1e-8 * newton.precision.norm());

        Eigen::SelfAdjointEigenSolver<Matrix> eig(t.B);
        Eigen::SelfAdjointEigenSolver<Matrix> eig_prior(
            Matrix(prior.cov.fullPivLu().inverse()));
        CHECK(eig.eigenvalues().minCoeff() >= eig_prior.eigenvalues().minCoeff() - 1e-10);
    }
}

TEST_CASE("mc moments: zero covariance equals the deterministic gradient") {
    auto engine = make_engine(RngStream{43, 0});
    const Index dh = 3;
    GaussianPosterior post;
    post.mean = oracles::random_vector(dh + 1, engine);  // binary head with bias
    post.cov = Matrix::Zero(dh + 1, dh + 1);
    const Vector h = oracles::random_vector(dh, engine);
    const GradientMoments mom =
        bc::mc_gradient_moments(post, h, 1.0, TaskKind::kBinary, 1, 64, RngStream{43, 1});

    Vector f(dh + 1);
    f.head(dh) = h;
    f(dh) = 1.0;
    const double p = bc::sigmoid(post.mean.dot(f));
    const Vector expected = (p - 1.0) * post.mean.head(dh);
    CHECK((mom.mu - expected).norm() < 1e-12);
    CHECK(mom.var.maxCoeff() < 1e-12);
}

TEST_CASE("mc moments: N(0, I) head at h = 0 gives mu ~ 0, var ~ 0.25") {
    // Head with no bias slot: logits vanish at h = 0, so g = (0.5 - y) w.
    const GaussianPosterior post = isotropic_prior(2, 1.0);
    const Vector h = Vector::Zero(2);
    const GradientMoments mom =
        bc::mc_gradient_moments(post, h, 1.0, TaskKind::kBinary, 1, 100000, RngStream{44, 0});
    CHECK(std::abs(mom.mu(0)) < 0.01);
    CHECK(std::abs(mom.mu(1)) < 0.01);
    CHECK(mom.var(0) == doctest::Approx(0.25).epsilon(0.05));
    CHECK(mom.var(1) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("mc moments are deterministic per stream and J >= 2 enforced") {
    const GaussianPosterior post = isotropic_prior(3, 1.0);
    Vector h(2);
    h << 0.3, -0.2;
    const auto a =
        bc::mc_gradient_moments(post, h, 0.0, TaskKind::kBinary, 1, 256, RngStream{45, 7});
    const auto b =
        bc::mc_gradient_moments(post, h, 0.0, TaskKind::kBinary, 1, 256, RngStream{45, 7});
    CHECK((a.mu - b.mu).norm() == 0.0);
    CHECK((a.second_diag - b.second_diag).norm() == 0.0);
    CHECK_THROWS_AS(
        bc::mc_gradient_moments(post, h, 0.0, TaskKind::kBinary, 1, 1, RngStream{45, 8}),
        EmptyInputError);
}

TEST_CASE("mc moments match the analytic expectation of a linear-in-w gradient") {
    // Bias-free head at h = 0: the logit vanishes for every sample, so
    // g(w) = (sigmoid(0) - 1) w = -0.5 w and E[g] = -0.5 m exactly.
    auto engine = make_engine(RngStream{46, 0});
    const Index dh = 3;
    GaussianPosterior post;
    post.mean = oracles::random_vector(dh, engine, 0.5);
    post.cov = 0.04 * Matrix::Identity(dh, dh);
    const Vector h = Vector::Zero(dh);
    const Vector analytic = -0.5 * post.mean;

    const GradientMoments mom =
        bc::mc_gradient_moments(post, h, 1.0, TaskKind::kBinary, 1, 200000, RngStream{46, 1});
    CHECK((mom.mu - analytic).norm() < 5e-3);
}

TEST_CASE("multiclass mc gradient at the point estimate matches cross-entropy backprop") {
    auto engine = make_engine(RngStream{47, 0});
    const Index dh = 4, classes = 3;
    const Index dk = classes * (dh + 1);
    GaussianPosterior post;
    post.mean = oracles::random_vector(dk, engine);
    post.cov = Matrix::Zero(dk, dk);
    const Vector h = oracles::random_vector(dh, engine);

    const GradientMoments mom = bc::mc_gradient_moments(post, h, 2.0, TaskKind::kMulticlass,
                                                        classes, 16, RngStream{47, 1});
    // Independent: softmax probabilities and W^T (p - y) assembled by hand.
    Vector f(dh + 1);
    f.head(dh) = h;
    f(dh) = 1.0;
    Matrix W(classes, dh + 1);
    for (Index c = 0; c < classes; ++c) {
        W.row(c) = post.mean.segment(c * (dh + 1), dh + 1).transpose();
    }
    Vector z = W * f;
    const double zmax = z.maxCoeff();
    Vector p = (z.array() - zmax).exp();
    p /= p.sum();
    p(2) -= 1.0;
    const Vector expected = W.leftCols(dh).transpose() * p;
    CHECK((mom.mu - expected).norm() < 1e-12);
}

TEST_SUITE_END();
