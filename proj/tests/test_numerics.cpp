#include <doctest.h>

#include "bayesagg/numerics.hpp"
#include "oracles.hpp"

using namespace bayesagg;
namespace num = bayesagg::numerics;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("spd_solve identity") {
    Matrix A = Matrix::Identity(2, 2);
    Matrix B(2, 1);
    B << 3, 4;
    const Matrix X = num::spd_solve(A, B);
    CHECK(X(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(X(1, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("spd_solve diagonal inverse") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = 2.0;
    A(1, 1) = 4.0;
    const Matrix X = num::spd_solve(A, Matrix::Identity(2, 2));
    CHECK(X(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(X(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(std::abs(X(0, 1)) < 1e-15);
}

TEST_CASE("spd_solve random SPD residual") {
    auto engine = make_engine(RngStream{11, 1});
    for (int rep = 0; rep < 10; ++rep) {
        const Index d = 5;
        Matrix M(d, d);
        for (Index i = 0; i < d; ++i) {
            for (Index j = 0; j < d; ++j) M(i, j) = oracles::random_vector(1, engine)(0);
        }
        const Matrix A = M.transpose() * M + Matrix::Identity(d, d);
        Matrix B(d, 2);
        for (Index i = 0; i < d; ++i) {
            B(i, 0) = oracles::random_vector(1, engine)(0);
            B(i, 1) = oracles::random_vector(1, engine)(0);
        }
        const Matrix X = num::spd_solve(A, B);
        CHECK((A * X - B).norm() / B.norm() < 1e-8);
    }
}

TEST_CASE("spd_solve known solution up to dim 64") {
    auto engine = make_engine(RngStream{12, 1});
    for (Index d : {4, 16, 64}) {
        const Matrix A = oracles::random_spd(d, 0.5, 5.0, engine);
        const Vector x_true = oracles::random_vector(d, engine);
        const Vector b = A * x_true;
        const Matrix x = num::spd_solve(A, b);
        CHECK((x.col(0) - x_true).norm() / x_true.norm() < 1e-8);
    }
}

TEST_CASE("spd_solve jitter ladder rescues a singular matrix") {
    Matrix A = Matrix::Zero(3, 3);
    A(0, 0) = 1.0;  // rank 1
    Matrix B = Matrix::Ones(3, 1);
    CHECK_NOTHROW(num::spd_solve(A, B));
}

TEST_CASE("spd_solve rejects asymmetric input and reports NotPSD with jitter") {
    Matrix A(2, 2);
    A << 1, 2, 3, 4;
    CHECK_THROWS_AS(num::spd_solve(A, Matrix::Identity(2, 2)), DimensionError);
    // Strongly negative definite: no jitter in the ladder can rescue it.
    Matrix N = -10.0 * Matrix::Identity(2, 2);
    try {
        num::spd_solve(N, Matrix::Identity(2, 2));
        FAIL("expected NotPsdError");
    } catch (const NotPsdError& e) {
        CHECK(e.final_jitter == doctest::Approx(1e-6));
    }
}

TEST_CASE("sample_gaussian zero covariance is a point mass") {
    Vector mean(3);
    mean << 1, -2, 5;
    const Matrix S = num::sample_gaussian(mean, Matrix::Zero(3, 3), 7, RngStream{1, 2});
    for (Index j = 0; j < 7; ++j) CHECK((S.col(j) - mean).norm() == 0.0);
}

TEST_CASE("sample_gaussian mean within CLT bound") {
    const Index n = 1000000;
    Vector mean = Vector::Zero(3);
    const Matrix S = num::sample_gaussian(mean, Matrix::Identity(3, 3), n, RngStream{7, 3});
    const Vector emp = S.rowwise().mean();
    const double bound = 4.0 / std::sqrt(static_cast<double>(n));
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(emp(i)) < bound);
}

TEST_CASE("sample_gaussian determinism and stream independence") {
    Vector mean(2);
    mean << 0.5, -1.0;
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 1.0;
    const Matrix a = num::sample_gaussian(mean, cov, 32, RngStream{42, 9});
    const Matrix b = num::sample_gaussian(mean, cov, 32, RngStream{42, 9});
    CHECK((a - b).norm() == 0.0);
    const Matrix c = num::sample_gaussian(mean, cov, 32, RngStream{42, 10});
    CHECK((a - c).norm() > 0.0);
}

TEST_CASE("sample_gaussian empirical covariance within 2% Frobenius") {
    auto engine = make_engine(RngStream{5, 5});
    const Index d = 6;
    const Matrix cov = oracles::random_spd(d, 0.5, 3.0, engine);
    const Index n = 1000000;
    const Matrix S = num::sample_gaussian(Vector::Zero(d), cov, n, RngStream{5, 6});
    const Vector mu = S.rowwise().mean();
    Matrix emp = (S * S.transpose()) / static_cast<double>(n) - mu * mu.transpose();
    CHECK((emp - cov).norm() / cov.norm() < 0.02);
}

TEST_CASE("finite_diff quadratic, constant, bilinear") {
    Vector x(2);
    x << 1, 2;
    const Vector g = num::finite_diff([](const Vector& v) { return v.squaredNorm(); }, x, 1e-4);
    CHECK(g(0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g(1) == doctest::Approx(4.0).epsilon(1e-6));

    const Vector gc = num::finite_diff([](const Vector&) { return 3.14; }, x, 1e-4);
    CHECK(gc.norm() == 0.0);

    Vector z(2);
    z << 3, 5;
    const Vector gb = num::finite_diff([](const Vector& v) { return v(0) * v(1); }, z, 1e-4);
    CHECK(gb(0) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(gb(1) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_SUITE_END();
