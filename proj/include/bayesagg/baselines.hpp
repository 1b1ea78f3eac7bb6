#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "bayesagg/common.hpp"
#include "bayesagg/rng.hpp"

namespace bayesagg {

enum class Method { kBayesAgg, kLS, kSI, kRLW, kDWA, kPCGrad };

Method method_from_string(const std::string& name);
std::string to_string(Method m);

// Loss-history bookkeeping for DWA plus the RLW draw stream.
struct BaselineState {
    Method method = Method::kLS;
    double temperature = 2.0;
    std::vector<std::deque<double>> loss_history;  // per task, last two epoch means
    RngStream rng;
    std::uint64_t draw_counter = 0;

    void record_epoch_losses(std::span<const double> epoch_mean_losses);
};

namespace baselines {

// Per-task loss weights.
//   LS  -> 1 for every task
//   SI  -> 1 / max(loss, 1e-8)   (gradient of sum_k log loss_k)
//   RLW -> softmax of K standard normal draws, fresh each call
//   DWA -> K * softmax(r_k / T) with r_k = L(t-1)/L(t-2); uniform until two
//          epochs of history exist
Vector baseline_weights(Method method, const Vector& losses, BaselineState& state);

// Gradient surgery on per-example hidden gradients: in a random task order,
// project each gradient off every conflicting (negative dot) peer, then
// average the surgered gradients.
Vector pcgrad_combine(std::span<const Vector> grads, const RngStream& rng);

}  // namespace baselines
}  // namespace bayesagg
