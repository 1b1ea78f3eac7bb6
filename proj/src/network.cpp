#include "bayesagg/network.hpp"

#include <cmath>

namespace bayesagg {

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::kRelu;
    if (name == "elu") return Activation::kElu;
    if (name == "tanh") return Activation::kTanh;
    if (name == "identity" || name == "linear") return Activation::kIdentity;
    throw ConfigError("model.activation", "unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::kRelu: return "relu";
        case Activation::kElu: return "elu";
        case Activation::kTanh: return "tanh";
        case Activation::kIdentity: return "identity";
    }
    return "?";
}

namespace {

double activate(double x, Activation a) {
    switch (a) {
        case Activation::kRelu: return x > 0.0 ? x : 0.0;
        case Activation::kElu: return x > 0.0 ? x : std::expm1(x);
        case Activation::kTanh: return std::tanh(x);
        case Activation::kIdentity: return x;
    }
    return x;
}

double activate_grad(double pre, Activation a) {
    switch (a) {
        case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::kElu: return pre > 0.0 ? 1.0 : std::exp(pre);
        case Activation::kTanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case Activation::kIdentity: return 1.0;
    }
    return 1.0;
}

Matrix uniform_fan_in(Index rows, Index cols, std::mt19937_64& engine) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix W(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) W(i, j) = u(engine);
    }
    return W;
}

}  // namespace

TrunkParams make_trunk(Index input_dim, const std::vector<Index>& widths, Activation act,
                       const RngStream& rng) {
    if (widths.empty()) throw DimensionError("make_trunk: at least one layer required");
    auto engine = make_engine(rng);
    TrunkParams trunk;
    Index in = input_dim;
    for (Index w : widths) {
        trunk.weights.push_back(uniform_fan_in(w, in, engine));
        trunk.biases.push_back(Vector::Zero(w));
        trunk.activations.push_back(act);
        in = w;
    }
    return trunk;
}

HeadPointEstimate TaskHead::flatten() const {
    HeadPointEstimate est;
    est.outputs = W.rows();
    est.w = Vector(W.size());
    for (Index r = 0; r < W.rows(); ++r) {
        est.w.segment(r * W.cols(), W.cols()) = W.row(r).transpose();
    }
    return est;
}

TaskHead make_head(int id, TaskKind kind, Index outputs, Index hidden_dim, const RngStream& rng) {
    auto engine = make_engine(rng);
    TaskHead head;
    head.id = id;
    head.kind = kind;
    head.W = uniform_fan_in(outputs, hidden_dim + 1, engine);
    return head;
}

namespace network {

ForwardTrace forward(const Matrix& x_batch, const TrunkParams& trunk) {
    if (x_batch.rows() != trunk.input_dim()) {
        throw DimensionError("forward: input dim does not match first layer");
    }
    ForwardTrace trace;
    trace.input = x_batch;
    trace.layer_count = trunk.layer_count();
    const Matrix* in = &trace.input;
    for (Index l = 0; l < trunk.layer_count(); ++l) {
        Matrix z = trunk.weights[l] * (*in);
        z.colwise() += trunk.biases[l];
        trace.pre.push_back(z);
        Matrix a = z.unaryExpr(
            [act = trunk.activations[l]](double v) { return activate(v, act); });
        trace.post.push_back(std::move(a));
        in = &trace.post.back();
    }
    return trace;
}

Matrix augment_bias(const Matrix& hidden) {
    Matrix out(hidden.rows() + 1, hidden.cols());
    out.topRows(hidden.rows()) = hidden;
    out.row(hidden.rows()).setOnes();
    return out;
}

Vector augment_bias(const Vector& h) {
    Vector out(h.size() + 1);
    out.head(h.size()) = h;
    out(h.size()) = 1.0;
    return out;
}

Matrix head_forward(const Matrix& hidden, const TaskHead& head) {
    if (head.W.cols() != hidden.rows() + 1) {
        throw DimensionError("head_forward: head dims do not match d_h + 1");
    }
    Matrix z = head.W * augment_bias(hidden);
    switch (head.kind) {
        case TaskKind::kRegression: return z;
        case TaskKind::kBinary:
            return z.unaryExpr([](double v) { return bayes_classification::sigmoid(v); });
        case TaskKind::kMulticlass: {
            for (Index i = 0; i < z.cols(); ++i) {
                z.col(i) = bayes_classification::softmax(z.col(i));
            }
            return z;
        }
    }
    return z;
}

Vector hidden_gradient(const TaskHead& head, const Vector& h, const Vector& y) {
    const Index dh = h.size();
    if (head.W.cols() != dh + 1) throw DimensionError("hidden_gradient: head/feature mismatch");
    const Vector hhat = augment_bias(h);
    const Vector z = head.W * hhat;
    switch (head.kind) {
        case TaskKind::kRegression: {
            if (y.size() != head.outputs()) throw InvalidLabelError("hidden_gradient: label arity");
            const Vector residual = z - y;
            return 2.0 * (head.W.leftCols(dh).transpose() * residual);
        }
        case TaskKind::kBinary: {
            if (y.size() != 1 || (y(0) != 0.0 && y(0) != 1.0)) {
                throw InvalidLabelError("hidden_gradient: binary label must be 0 or 1");
            }
            const double p = bayes_classification::sigmoid(z(0));
            return (p - y(0)) * head.W.leftCols(dh).transpose().col(0);
        }
        case TaskKind::kMulticlass: {
            const Index classes = head.outputs();
            const auto cls = static_cast<Index>(y(0));
            if (y.size() != 1 || cls < 0 || cls >= classes || static_cast<double>(cls) != y(0)) {
                throw InvalidLabelError("hidden_gradient: class id out of range");
            }
            Vector r = bayes_classification::softmax(z);
            r(cls) -= 1.0;
            return head.W.leftCols(dh).transpose() * r;
        }
    }
    throw InvalidLabelError("hidden_gradient: unknown task kind");
}

TrunkGrads backprop_shared(const Matrix& g_batch, const ForwardTrace& trace,
                           const TrunkParams& trunk) {
    if (trace.layer_count != trunk.layer_count()) {
        throw TraceMismatchError("backprop_shared: trace does not match trunk");
    }
    const Index n = trace.batch_size();
    if (g_batch.cols() != n || g_batch.rows() != trunk.hidden_dim()) {
        throw TraceMismatchError("backprop_shared: gradient batch shape mismatch");
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    TrunkGrads grads;
    grads.weights.resize(trunk.layer_count());
    grads.biases.resize(trunk.layer_count());

    Matrix delta = g_batch;
    for (Index l = trunk.layer_count() - 1; l >= 0; --l) {
        if (trace.pre[l].rows() != delta.rows() || trace.pre[l].cols() != n) {
            throw TraceMismatchError("backprop_shared: stale trace");
        }
        const Matrix dpre = delta.cwiseProduct(trace.pre[l].unaryExpr(
            [act = trunk.activations[l]](double v) { return activate_grad(v, act); }));
        const Matrix& layer_in = (l == 0) ? trace.input : trace.post[l - 1];
        grads.weights[l] = inv_n * (dpre * layer_in.transpose());
        grads.biases[l] = inv_n * dpre.rowwise().sum();
        if (l > 0) delta = trunk.weights[l].transpose() * dpre;
    }
    return grads;
}

}  // namespace network
}  // namespace bayesagg
