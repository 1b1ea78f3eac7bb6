#pragma once

#include <functional>

#include "bayesagg/common.hpp"
#include "bayesagg/rng.hpp"

namespace bayesagg::numerics {

// Jitter escalation for nearly-PSD matrices: starts at kJitterFloor and
// multiplies by 10 up to kJitterCeil before giving up.
inline constexpr double kJitterFloor = 1e-10;
inline constexpr double kJitterCeil = 1e-6;

// Solve (A + jitter*I) X = B for symmetric positive semi-definite A.
// A plain Cholesky is attempted first with the caller's jitter; on failure
// the jitter escalates through the ladder. Throws NotPsdError (carrying the
// final jitter tried) if no factorization succeeds.
Matrix spd_solve(const Matrix& A, const Matrix& B, double jitter = 0.0);

// Lower-triangular factor L with L L^T = A + jitter*I, same escalation rules.
Matrix spd_cholesky(const Matrix& A, double jitter = 0.0);

// Draw n samples from N(mean, cov); columns of the result are samples.
// cov may be singular (point-mass posteriors): the jitter ladder applies.
Matrix sample_gaussian(const Vector& mean, const Matrix& cov, Index n, const RngStream& rng);

// n i.i.d. standard normal draws.
Vector standard_normal(Index n, const RngStream& rng);

// Central-difference gradient estimate of f at x.
Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x,
                   double eps = 1e-5);

}  // namespace bayesagg::numerics
