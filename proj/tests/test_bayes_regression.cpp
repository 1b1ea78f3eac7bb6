#include <doctest.h>

#include "bayesagg/bayes_regression.hpp"
#include "bayesagg/numerics.hpp"
#include "oracles.hpp"

using namespace bayesagg;
namespace br = bayesagg::bayes_regression;

TEST_SUITE_BEGIN("bayes_regression");

TEST_CASE("posterior_update with no data returns the prior") {
    const GaussianPosterior prior = isotropic_prior(3, 2.5);
    const GaussianPosterior post = br::posterior_update(Matrix(3, 0), Vector(0), prior);
    CHECK((post.mean - prior.mean).norm() == 0.0);
    CHECK((post.cov - prior.cov).norm() == 0.0);
}

TEST_CASE("posterior_update single observation, hand inverse") {
    // prior N(0, I), tau=1, h=[1,0], y=1:
    // S = (I + h h^T)^-1 = diag(1/2, 1), m = S h = [1/2, 0].
    const GaussianPosterior prior = isotropic_prior(2, 1.0);
    Matrix H(2, 1);
    H << 1, 0;
    Vector y(1);
    y << 1;
    const GaussianPosterior post = br::posterior_update(H, y, prior, 1.0);
    CHECK(post.mean(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post.mean(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(post.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post.cov(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(post.cov(0, 1)) < 1e-12);
}

TEST_CASE("posterior_update approaches least squares under a vague prior") {
    auto engine = make_engine(RngStream{21, 0});
    const Index d = 4, n = 10000;
    Matrix H(d, n);
    for (Index j = 0; j < n; ++j) H.col(j) = oracles::random_vector(d, engine);
    const Vector w_true = oracles::random_vector(d, engine);
    Vector y = H.transpose() * w_true;
    for (Index j = 0; j < n; ++j) y(j) += 0.05 * oracles::random_vector(1, engine)(0);

    const Vector w_ls = oracles::least_squares(H, y);
    const GaussianPosterior post =
        br::posterior_update(H, y, isotropic_prior(d, 1e6), 1.0);
    CHECK((post.mean - w_ls).norm() < 1e-3);
}

TEST_CASE("epoch_prior_refresh is order invariant and matches one batch") {
    auto engine = make_engine(RngStream{22, 0});
    const Index d = 3, n = 40;
    Matrix H(d, n);
    for (Index j = 0; j < n; ++j) H.col(j) = oracles::random_vector(d, engine);
    Vector y(n);
    for (Index j = 0; j < n; ++j) y(j) = oracles::random_vector(1, engine)(0);
    const GaussianPosterior base = isotropic_prior(d, 1.0);

    SUBCASE("empty collection returns the base prior") {
        const GaussianPosterior p = br::epoch_prior_refresh(Matrix(d, 0), Vector(0), base);
        CHECK((p.mean - base.mean).norm() == 0.0);
    }
    SUBCASE("single batch is definitional") {
        const GaussianPosterior a = br::epoch_prior_refresh(H, y, base);
        const GaussianPosterior b = br::posterior_update(H, y, base);
        CHECK((a.mean - b.mean).norm() == 0.0);
        CHECK((a.cov - b.cov).norm() == 0.0);
    }
    SUBCASE("two half collections concatenated vs reordered") {
        Matrix H2(d, n);
        Vector y2(n);
        H2 << H.rightCols(n / 2), H.leftCols(n / 2);
        y2 << y.tail(n / 2), y.head(n / 2);
        const GaussianPosterior a = br::epoch_prior_refresh(H, y, base);
        const GaussianPosterior b = br::epoch_prior_refresh(H2, y2, base);
        CHECK((a.mean - b.mean).norm() < 1e-10);
        CHECK((a.cov - b.cov).norm() < 1e-10);
    }
}

TEST_CASE("posterior contraction: data only adds precision") {
    auto engine = make_engine(RngStream{23, 0});
    const Index d = 5, n = 12;
    const Matrix Sp = oracles::random_spd(d, 0.2, 2.0, engine);
    GaussianPosterior prior;
    prior.mean = oracles::random_vector(d, engine);
    prior.cov = Sp;
    Matrix H(d, n);
    for (Index j = 0; j < n; ++j) H.col(j) = oracles::random_vector(d, engine);
    Vector y(n);
    for (Index j = 0; j < n; ++j) y(j) = oracles::random_vector(1, engine)(0);
    const GaussianPosterior post = br::posterior_update(H, y, prior, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector x = oracles::random_vector(d, engine);
        CHECK(x.dot(post.cov * x) <= x.dot(prior.cov * x) + 1e-10);
    }
}

TEST_CASE("moments: point-mass posterior reduces to the deterministic gradient") {
    GaussianPosterior post;
    post.mean = Vector(2);
    post.mean << 1, 1;
    post.cov = Matrix::Zero(2, 2);
    Vector h(2);
    h << 1, 0;
    const GradientMoments mom =
        br::regression_gradient_moments(post, h, 0.0, MomentMode::kFull);
    CHECK(mom.mu(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mom.mu(1) == doctest::Approx(2.0).epsilon(1e-12));
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            CHECK(mom.second_full(i, j) == doctest::Approx(4.0).epsilon(1e-12));
        }
    }
    CHECK(mom.var.maxCoeff() == 0.0);
    CHECK(mom.precision.minCoeff() == doctest::Approx(1e12).epsilon(1e-6));
}

TEST_CASE("moments: 1-D hand values mu=2, E[g^2]=12, var=8") {
    // g = 2 w^2 with w ~ N(0,1): E[g] = 2, E[g^2] = 4 E[w^4] = 12.
    GaussianPosterior post;
    post.mean = Vector::Zero(1);
    post.cov = Matrix::Identity(1, 1);
    Vector h(1);
    h << 1;
    const GradientMoments mom = br::regression_gradient_moments(post, h, 0.0, MomentMode::kFull);
    CHECK(mom.mu(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mom.second_full(0, 0) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(mom.var(0) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("moments: mu matches hand value [2,-2] and a Monte-Carlo check") {
    GaussianPosterior post;
    post.mean = Vector(2);
    post.mean << 0, 1;
    post.cov = Matrix::Identity(2, 2);
    Vector h(2);
    h << 1, 0;
    const GradientMoments mom = br::regression_gradient_moments(post, h, 1.0);
    CHECK(mom.mu(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mom.mu(1) == doctest::Approx(-2.0).epsilon(1e-12));

    const auto mc = oracles::mc_regression_moments(post.mean, post.cov, h, 1.0, 1000000,
                                                   RngStream{31, 0});
    CHECK((mom.mu - mc.mu).norm() / mc.mu.norm() < 0.01);
}

TEST_CASE("moments match Monte-Carlo within 2% on random instances") {
    auto engine = make_engine(RngStream{32, 0});
    for (int rep = 0; rep < 4; ++rep) {
        const Index d = 2 + rep * 2;  // 2, 4, 6, 8
        GaussianPosterior post;
        post.mean = oracles::random_vector(d, engine, 0.8);
        post.cov = oracles::random_spd(d, 0.1, 1.0, engine);
        const Vector h = oracles::random_vector(d, engine);
        const double y = oracles::random_vector(1, engine)(0);

        const GradientMoments mom =
            br::regression_gradient_moments(post, h, y, MomentMode::kFull);
        const auto mc = oracles::mc_regression_moments(
            post.mean, post.cov, h, y, 1000000, RngStream{32, static_cast<std::uint64_t>(rep)});
        CHECK((mom.mu - mc.mu).norm() / mc.mu.norm() < 0.02);
        CHECK((mom.second_full - mc.second).norm() / mc.second.norm() < 0.02);
    }
}

TEST_CASE("diagonal mode agrees with the full-matrix diagonal") {
    auto engine = make_engine(RngStream{33, 0});
    for (int rep = 0; rep < 8; ++rep) {
        const Index d = 2 + (rep % 5);
        GaussianPosterior post;
        post.mean = oracles::random_vector(d, engine);
        post.cov = oracles::random_spd(d, 0.05, 2.0, engine);
        const Vector h = oracles::random_vector(d, engine);
        const double y = oracles::random_vector(1, engine)(0);
        const GradientMoments full = br::regression_gradient_moments(post, h, y, MomentMode::kFull);
        const GradientMoments diag =
            br::regression_gradient_moments(post, h, y, MomentMode::kDiagonal);
        CHECK((full.second_diag - diag.second_diag).norm() < 1e-10 * full.second_diag.norm());
        CHECK((full.mu - diag.mu).norm() == 0.0);
    }
}

TEST_CASE("finite-difference consistency at a point mass") {
    // With S = 0 the mean gradient must equal d/dh of (h^T w - y)^2.
    auto engine = make_engine(RngStream{34, 0});
    const Index d = 4;
    const Vector w = oracles::random_vector(d, engine);
    const Vector h = oracles::random_vector(d, engine);
    const double y = 0.3;
    GaussianPosterior post;
    post.mean = w;
    post.cov = Matrix::Zero(d, d);
    const GradientMoments mom = br::regression_gradient_moments(post, h, y);
    const Vector fd = numerics::finite_diff(
        [&](const Vector& hh) {
            const double r = hh.dot(w) - y;
            return r * r;
        },
        h, 1e-6);
    CHECK((mom.mu - fd).norm() / fd.norm() < 1e-5);
    CHECK(mom.var.maxCoeff() < 1e-12);  // exact zero up to cancellation noise
}

TEST_CASE("moments head() slices the bias dimension away consistently") {
    auto engine = make_engine(RngStream{35, 0});
    const Index d = 5;
    GaussianPosterior post;
    post.mean = oracles::random_vector(d, engine);
    post.cov = oracles::random_spd(d, 0.1, 1.0, engine);
    const Vector h = oracles::random_vector(d, engine);
    const GradientMoments full = br::regression_gradient_moments(post, h, 0.7, MomentMode::kFull);
    const GradientMoments sliced = full.head(d - 1);
    CHECK(sliced.mu.size() == d - 1);
    CHECK((sliced.mu - full.mu.head(d - 1)).norm() == 0.0);
    CHECK((sliced.second_full - full.second_full.topLeftCorner(d - 1, d - 1)).norm() == 0.0);
    CHECK((sliced.precision - full.precision.head(d - 1)).norm() == 0.0);
}

TEST_CASE("dimension mismatch raises") {
    GaussianPosterior post = isotropic_prior(3);
    Vector h(2);
    h << 1, 2;
    CHECK_THROWS_AS(br::regression_gradient_moments(post, h, 0.0), DimensionError);
}

TEST_SUITE_END();
