#include "bayesagg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bayesagg {

Method method_from_string(const std::string& name) {
    if (name == "bayesagg") return Method::kBayesAgg;
    if (name == "ls") return Method::kLS;
    if (name == "si") return Method::kSI;
    if (name == "rlw") return Method::kRLW;
    if (name == "dwa") return Method::kDWA;
    if (name == "pcgrad") return Method::kPCGrad;
    throw UnknownMethodError("unknown method '" + name + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::kBayesAgg: return "bayesagg";
        case Method::kLS: return "ls";
        case Method::kSI: return "si";
        case Method::kRLW: return "rlw";
        case Method::kDWA: return "dwa";
        case Method::kPCGrad: return "pcgrad";
    }
    return "?";
}

void BaselineState::record_epoch_losses(std::span<const double> epoch_mean_losses) {
    if (loss_history.size() != epoch_mean_losses.size()) {
        loss_history.assign(epoch_mean_losses.size(), {});
    }
    for (std::size_t k = 0; k < epoch_mean_losses.size(); ++k) {
        loss_history[k].push_back(epoch_mean_losses[k]);
        while (loss_history[k].size() > 2) loss_history[k].pop_front();
    }
}

namespace baselines {

namespace {

Vector softmax_of(const Vector& v) {
    const double vmax = v.maxCoeff();
    Vector e = (v.array() - vmax).exp();
    return e / e.sum();
}

}  // namespace

Vector baseline_weights(Method method, const Vector& losses, BaselineState& state) {
    const Index K = losses.size();
    if (K == 0) throw EmptyTasksError("baseline_weights: no tasks");
    switch (method) {
        case Method::kLS:
            return Vector::Ones(K);
        case Method::kSI: {
            Vector w(K);
            for (Index k = 0; k < K; ++k) w(k) = 1.0 / std::max(losses(k), 1e-8);
            return w;
        }
        case Method::kRLW: {
            auto engine = make_engine(state.rng.derive(state.draw_counter++));
            std::normal_distribution<double> normal(0.0, 1.0);
            Vector z(K);
            for (Index k = 0; k < K; ++k) z(k) = normal(engine);
            return softmax_of(z);
        }
        case Method::kDWA: {
            bool ready = static_cast<Index>(state.loss_history.size()) == K;
            if (ready) {
                for (const auto& h : state.loss_history) ready = ready && h.size() >= 2;
            }
            if (!ready) return Vector::Ones(K);
            Vector r(K);
            for (Index k = 0; k < K; ++k) {
                const auto& h = state.loss_history[k];
                r(k) = h[1] / std::max(h[0], 1e-12);
            }
            return static_cast<double>(K) * softmax_of(r / state.temperature);
        }
        default:
            throw UnknownMethodError("baseline_weights: '" + to_string(method) +
                                     "' has no loss-weight rule");
    }
}

Vector pcgrad_combine(std::span<const Vector> grads, const RngStream& rng) {
    const auto K = static_cast<Index>(grads.size());
    if (K == 0) throw EmptyTasksError("pcgrad_combine: no gradients");
    const Index d = grads[0].size();
    if (K == 1) return grads[0];

    auto engine = make_engine(rng);
    Vector combined = Vector::Zero(d);
    std::vector<Index> order(K);
    std::iota(order.begin(), order.end(), Index{0});
    for (Index i = 0; i < K; ++i) {
        if (grads[i].size() != d) throw DimensionError("pcgrad_combine: dim mismatch");
        Vector g = grads[i];
        std::shuffle(order.begin(), order.end(), engine);
        for (Index j : order) {
            if (j == i) continue;
            const Vector& other = grads[j];
            const double dot = g.dot(other);
            if (dot < 0.0) {
                const double nrm2 = other.squaredNorm();
                if (nrm2 > 0.0) g -= (dot / nrm2) * other;
            }
        }
        combined += g;
    }
    return combined / static_cast<double>(K);
}

}  // namespace baselines
}  // namespace bayesagg
