#include "bayesagg/numerics.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace bayesagg::numerics {

namespace {

void check_square_symmetric(const Matrix& A, const char* who) {
    if (A.rows() != A.cols()) {
        throw DimensionError(std::string(who) + ": matrix must be square");
    }
    // Symmetry is a precondition; tolerate roundoff-level asymmetry.
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw DimensionError(std::string(who) + ": matrix is not symmetric");
    }
}

// Runs fn(jittered A) over the escalation ladder; fn returns true on success.
template <typename TryFactor>
double with_jitter_ladder(double jitter, const TryFactor& try_factor, const char* who) {
    if (jitter < 0.0) {
        throw DimensionError(std::string(who) + ": jitter must be nonnegative");
    }
    if (try_factor(jitter)) return jitter;
    double last = jitter;
    for (double j = std::max(jitter, kJitterFloor); j <= kJitterCeil * (1.0 + 1e-12); j *= 10.0) {
        if (try_factor(j)) return j;
        last = j;
    }
    last = std::max(last, kJitterFloor);
    throw NotPsdError(std::string(who) + ": factorization failed, final jitter tried " +
                          std::to_string(last),
                      last);
}

}  // namespace

Matrix spd_solve(const Matrix& A, const Matrix& B, double jitter) {
    check_square_symmetric(A, "spd_solve");
    if (A.rows() != B.rows()) {
        throw DimensionError("spd_solve: A and B row counts differ");
    }
    Eigen::LLT<Matrix> llt;
    with_jitter_ladder(
        jitter,
        [&](double j) {
            Matrix Aj = A;
            Aj.diagonal().array() += j;
            llt.compute(Aj);
            return llt.info() == Eigen::Success;
        },
        "spd_solve");
    return llt.solve(B);
}

Matrix spd_cholesky(const Matrix& A, double jitter) {
    check_square_symmetric(A, "spd_cholesky");
    Eigen::LLT<Matrix> llt;
    with_jitter_ladder(
        jitter,
        [&](double j) {
            Matrix Aj = A;
            Aj.diagonal().array() += j;
            llt.compute(Aj);
            return llt.info() == Eigen::Success;
        },
        "spd_cholesky");
    return llt.matrixL();
}

Vector standard_normal(Index n, const RngStream& rng) {
    auto engine = make_engine(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(n);
    for (Index i = 0; i < n; ++i) z(i) = normal(engine);
    return z;
}

Matrix sample_gaussian(const Vector& mean, const Matrix& cov, Index n, const RngStream& rng) {
    const Index d = mean.size();
    if (cov.rows() != d || cov.cols() != d) {
        throw DimensionError("sample_gaussian: mean/cov dimension mismatch");
    }
    // A zero covariance is a point mass; skip factorization.
    Matrix samples(d, n);
    if (cov.cwiseAbs().maxCoeff() == 0.0) {
        samples.colwise() = mean;
        return samples;
    }
    const Matrix L = spd_cholesky(cov);
    auto engine = make_engine(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix Z(d, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < d; ++i) Z(i, j) = normal(engine);
    }
    samples = L * Z;
    samples.colwise() += mean;
    return samples;
}

Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x, double eps) {
    Vector grad(x.size());
    Vector probe = x;
    for (Index j = 0; j < x.size(); ++j) {
        const double xj = x(j);
        probe(j) = xj + eps;
        const double fp = f(probe);
        probe(j) = xj - eps;
        const double fm = f(probe);
        probe(j) = xj;
        grad(j) = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace bayesagg::numerics
