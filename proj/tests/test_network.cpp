#include <doctest.h>

#include "bayesagg/bayes_regression.hpp"
#include "bayesagg/network.hpp"
#include "bayesagg/numerics.hpp"
#include "oracles.hpp"

using namespace bayesagg;
namespace net = bayesagg::network;

namespace {

TrunkParams random_trunk(Index in, std::vector<Index> widths, Activation act,
                         std::uint64_t seed) {
    return make_trunk(in, widths, act, RngStream{seed, 77});
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("single identity layer passes input through") {
    TrunkParams trunk;
    trunk.weights = {Matrix::Identity(3, 3)};
    trunk.biases = {Vector::Zero(3)};
    trunk.activations = {Activation::kIdentity};
    Matrix x(3, 2);
    x << 1, 4, 2, 5, 3, 6;
    const ForwardTrace trace = net::forward(x, trunk);
    CHECK((trace.hidden() - x).norm() == 0.0);
}

TEST_CASE("zero weights with relu give a zero representation") {
    TrunkParams trunk;
    trunk.weights = {Matrix::Zero(4, 3)};
    trunk.biases = {Vector::Zero(4)};
    trunk.activations = {Activation::kRelu};
    const ForwardTrace trace = net::forward(Matrix::Random(3, 5), trunk);
    CHECK(trace.hidden().norm() == 0.0);
}

TEST_CASE("head_forward fixtures") {
    SUBCASE("zero binary head gives p = 0.5") {
        TaskHead head{0, TaskKind::kBinary, Matrix::Zero(1, 4)};
        const Matrix p = net::head_forward(Matrix::Random(3, 6), head);
        for (Index i = 0; i < 6; ++i) CHECK(p(0, i) == doctest::Approx(0.5));
    }
    SUBCASE("zero multiclass head is uniform") {
        TaskHead head{0, TaskKind::kMulticlass, Matrix::Zero(5, 4)};
        const Matrix p = net::head_forward(Matrix::Random(3, 2), head);
        for (Index i = 0; i < 2; ++i) {
            for (Index c = 0; c < 5; ++c) CHECK(p(c, i) == doctest::Approx(0.2));
        }
    }
    SUBCASE("regression head picks the first coordinate") {
        TaskHead head{0, TaskKind::kRegression, Matrix::Zero(1, 3)};
        head.W(0, 0) = 1.0;  // weights [1, 0, 0]; bias slot holds 0
        Matrix h(2, 1);
        h << 3, 7;
        CHECK(net::head_forward(h, head)(0, 0) == doctest::Approx(3.0));
    }
    SUBCASE("probability outputs stay in (0,1) and multiclass columns sum to 1") {
        auto engine = make_engine(RngStream{60, 0});
        TaskHead head{0, TaskKind::kMulticlass, Matrix(4, 6)};
        for (Index r = 0; r < 4; ++r) {
            head.W.row(r) = oracles::random_vector(6, engine).transpose();
        }
        const Matrix p = net::head_forward(Matrix::Random(5, 9), head);
        for (Index i = 0; i < 9; ++i) {
            CHECK(p.col(i).minCoeff() > 0.0);
            CHECK(p.col(i).maxCoeff() < 1.0);
            CHECK(p.col(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("hidden_gradient fixtures") {
    SUBCASE("regression matches the closed form 2w(h.w - y)") {
        TaskHead head{0, TaskKind::kRegression, Matrix(1, 3)};
        head.W << 1, 1, 0;  // no bias
        Vector h(2), y(1);
        h << 1, 0;
        y << 0;
        const Vector g = net::hidden_gradient(head, h, y);
        CHECK(g(0) == doctest::Approx(2.0));
        CHECK(g(1) == doctest::Approx(2.0));
    }
    SUBCASE("binary at zero logits") {
        TaskHead head{0, TaskKind::kBinary, Matrix(1, 3)};
        head.W << 1, 0, 0;
        Vector h(2), y(1);
        h << 0, 0;
        y << 1;
        const Vector g = net::hidden_gradient(head, h, y);
        CHECK(g(0) == doctest::Approx(-0.5));
        CHECK(g(1) == doctest::Approx(0.0));
    }
    SUBCASE("invalid labels raise") {
        TaskHead head{0, TaskKind::kBinary, Matrix::Zero(1, 3)};
        Vector h(2), y(1);
        h << 0, 0;
        y << 0.5;
        CHECK_THROWS_AS(net::hidden_gradient(head, h, y), InvalidLabelError);
        TaskHead mc{0, TaskKind::kMulticlass, Matrix::Zero(3, 3)};
        Vector ybad(1);
        ybad << 3;
        CHECK_THROWS_AS(net::hidden_gradient(mc, h, ybad), InvalidLabelError);
    }
}

TEST_CASE("hidden_gradient agrees with finite differences for every head kind") {
    auto engine = make_engine(RngStream{61, 0});
    const Index dh = 5;
    for (int rep = 0; rep < 6; ++rep) {
        const TaskKind kind = rep % 3 == 0   ? TaskKind::kRegression
                              : rep % 3 == 1 ? TaskKind::kBinary
                                             : TaskKind::kMulticlass;
        const Index o = kind == TaskKind::kMulticlass ? 4 : (kind == TaskKind::kBinary ? 1 : 2);
        TaskHead head{0, kind, Matrix(o, dh + 1)};
        for (Index r = 0; r < o; ++r) {
            head.W.row(r) = oracles::random_vector(dh + 1, engine).transpose();
        }
        const Vector h = oracles::random_vector(dh, engine);
        Vector y;
        if (kind == TaskKind::kRegression) {
            y = oracles::random_vector(o, engine);
        } else if (kind == TaskKind::kBinary) {
            y = Vector::Constant(1, 1.0);
        } else {
            y = Vector::Constant(1, 2.0);
        }
        const Vector g = net::hidden_gradient(head, h, y);
        const Vector fd = numerics::finite_diff(
            [&](const Vector& hh) {
                const Vector z = head.W * net::augment_bias(hh);
                switch (kind) {
                    case TaskKind::kRegression: return (z - y).squaredNorm();
                    case TaskKind::kBinary: {
                        const double zi = z(0);
                        const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi))
                                                       : std::log1p(std::exp(zi));
                        return softplus - y(0) * zi;
                    }
                    case TaskKind::kMulticlass: {
                        const double zmax = z.maxCoeff();
                        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
                        return lse - z(static_cast<Index>(y(0)));
                    }
                }
                return 0.0;
            },
            h, 1e-6);
        CHECK((g - fd).norm() / std::max(1e-8, fd.norm()) < 1e-5);
    }
}

TEST_CASE("backprop_shared: linear trunk reduces to g x^T / n") {
    auto engine = make_engine(RngStream{62, 0});
    TrunkParams trunk;
    trunk.weights = {Matrix::Random(4, 3)};
    trunk.biases = {Vector::Zero(4)};
    trunk.activations = {Activation::kIdentity};
    Matrix x(3, 5), g(4, 5);
    for (Index j = 0; j < 5; ++j) {
        x.col(j) = oracles::random_vector(3, engine);
        g.col(j) = oracles::random_vector(4, engine);
    }
    const ForwardTrace trace = net::forward(x, trunk);
    const TrunkGrads grads = net::backprop_shared(g, trace, trunk);
    const Matrix expected = (g * x.transpose()) / 5.0;
    CHECK((grads.weights[0] - expected).norm() < 1e-12);
    CHECK((grads.biases[0] - Vector(g.rowwise().mean())).norm() < 1e-12);
}

TEST_CASE("backprop_shared: zero upstream gradient zeroes every parameter gradient") {
    const TrunkParams trunk = random_trunk(4, {8, 6}, Activation::kElu, 9);
    const Matrix x = Matrix::Random(4, 7);
    const ForwardTrace trace = net::forward(x, trunk);
    const TrunkGrads grads = net::backprop_shared(Matrix::Zero(6, 7), trace, trunk);
    for (const Matrix& W : grads.weights) CHECK(W.norm() == 0.0);
    for (const Vector& b : grads.biases) CHECK(b.norm() == 0.0);
}

TEST_CASE("backprop_shared matches finite differences of c . h(x)") {
    auto engine = make_engine(RngStream{63, 0});
    for (Activation act : {Activation::kElu, Activation::kTanh, Activation::kIdentity}) {
        const TrunkParams trunk = random_trunk(3, {6, 4}, act, 17);
        const Matrix x = Matrix::Random(3, 4);
        const Vector c = oracles::random_vector(4, engine);

        const ForwardTrace trace = net::forward(x, trunk);
        Matrix g(4, 4);
        g.colwise() = c;
        const TrunkGrads grads = net::backprop_shared(g, trace, trunk);

        // Surrogate scalar L(theta) = (1/n) sum_i c . h(x_i; theta).
        auto loss_at = [&](const TrunkParams& t) {
            const ForwardTrace tr = net::forward(x, t);
            double acc = 0.0;
            for (Index i = 0; i < x.cols(); ++i) acc += c.dot(tr.hidden().col(i));
            return acc / static_cast<double>(x.cols());
        };
        for (Index l = 0; l < trunk.layer_count(); ++l) {
            Matrix fd_w(trunk.weights[l].rows(), trunk.weights[l].cols());
            for (Index r = 0; r < fd_w.rows(); ++r) {
                for (Index cidx = 0; cidx < fd_w.cols(); ++cidx) {
                    TrunkParams tp = trunk;
                    tp.weights[l](r, cidx) += 1e-6;
                    TrunkParams tm = trunk;
                    tm.weights[l](r, cidx) -= 1e-6;
                    fd_w(r, cidx) = (loss_at(tp) - loss_at(tm)) / 2e-6;
                }
            }
            CHECK((grads.weights[l] - fd_w).norm() / std::max(1e-8, fd_w.norm()) < 1e-5);
        }
    }
}

TEST_CASE("hidden_gradient equals the regression moments mean at a point mass") {
    auto engine = make_engine(RngStream{64, 0});
    const Index dh = 4;
    TaskHead head{0, TaskKind::kRegression, Matrix(1, dh + 1)};
    head.W.row(0) = oracles::random_vector(dh + 1, engine).transpose();
    const Vector h = oracles::random_vector(dh, engine);
    Vector y(1);
    y << 0.4;

    GaussianPosterior post;
    post.mean = head.W.row(0).transpose();
    post.cov = Matrix::Zero(dh + 1, dh + 1);
    const GradientMoments mom =
        bayes_regression::regression_gradient_moments(post, net::augment_bias(h), y(0));
    const Vector g = net::hidden_gradient(head, h, y);
    CHECK((mom.mu.head(dh) - g).norm() < 1e-12);
}

TEST_CASE("trace and dimension mismatches raise") {
    const TrunkParams trunk = random_trunk(3, {5}, Activation::kElu, 3);
    CHECK_THROWS_AS(net::forward(Matrix::Random(4, 2), trunk), DimensionError);
    const ForwardTrace trace = net::forward(Matrix::Random(3, 2), trunk);
    CHECK_THROWS_AS(net::backprop_shared(Matrix::Zero(5, 3), trace, trunk), TraceMismatchError);
    const TrunkParams other = random_trunk(3, {5, 5}, Activation::kElu, 4);
    CHECK_THROWS_AS(net::backprop_shared(Matrix::Zero(5, 2), trace, other), TraceMismatchError);
}

TEST_SUITE_END();
