#pragma once

#include <optional>
#include <vector>

#include "bayesagg/aggregator.hpp"
#include "bayesagg/baselines.hpp"
#include "bayesagg/bayes_classification.hpp"
#include "bayesagg/bayes_regression.hpp"
#include "bayesagg/data.hpp"
#include "bayesagg/network.hpp"

namespace bayesagg {

struct MethodConfig {
    Method method = Method::kBayesAgg;
    double s_regression = 0.85;        // tempering for regression tasks
    double s_classification = 0.005;   // tempering for classification tasks
    Index mc_samples = 1024;           // J
    double prior_variance = 1.0;       // isotropic base prior scale
    double tau = 1.0;                  // regression observation noise std
    MomentMode mode = MomentMode::kDiagonal;
    double epsilon = kVarianceFloor;   // variance floor
    double newton_damping = 1.0;       // w_hat <- w_hat + damping * (mean - w_hat)
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, trunk only
};

enum class SchedulerKind { kNone, kStep, kPlateau };

struct SchedulerConfig {
    SchedulerKind kind = SchedulerKind::kNone;
    double factor = 0.1;
    int step_every = 20;  // epochs, step mode
    int patience = 10;    // epochs without improvement, plateau mode
};

struct TrainConfig {
    int epochs = 50;
    int pretrain_epochs = 0;  // linear-scalarization warmup (bayesagg only)
    Index batch_size = 32;
    AdamConfig adam;
    SchedulerConfig scheduler;
    std::uint64_t seed = 0;
    MethodConfig method;
    bool select_best = true;  // restore the best validation snapshot at the end
};

struct Batch {
    Matrix x;                    // d_x x n
    std::vector<Matrix> labels;  // per task
};

// Adam with bias correction; one moment slot per parameter tensor.
struct AdamSlot {
    Matrix m, v;
};
struct AdamOpt {
    long t = 0;
    std::vector<AdamSlot> slots;
};

// In-place update of one tensor; `slot` must persist across calls.
void adam_step(Eigen::Ref<Matrix> param, const Matrix& grad, AdamSlot& slot, long t,
               const AdamConfig& cfg, double weight_decay);

struct TrainerState {
    TrunkParams trunk;
    std::vector<TaskHead> heads;
    AdamOpt trunk_opt;
    std::vector<AdamOpt> head_opts;

    // Per regression task: one posterior prior per output, over d_h+1 dims.
    // Per classification task: one prior over o_k * (d_h+1) dims.
    std::vector<std::vector<GaussianPosterior>> reg_priors;
    std::vector<GaussianPosterior> cls_priors;

    // Epoch collection: bias-augmented hidden features as seen in training.
    std::vector<Matrix> buf_features;
    std::vector<std::vector<Matrix>> buf_labels;  // [chunk][task]

    BaselineState baseline;
    RngStream root;
    std::uint64_t step_counter = 0;

    // Full-train posterior means for regression prediction (set by finalize).
    std::vector<std::vector<GaussianPosterior>> reg_predict;
    bool finalized = false;

    [[nodiscard]] Index task_count() const { return static_cast<Index>(heads.size()); }
    [[nodiscard]] Index hidden_dim() const { return trunk.hidden_dim(); }
};

namespace trainer {

TrainerState init_state(Index input_dim, const std::vector<Index>& trunk_widths, Activation act,
                        const std::vector<TaskSpec>& tasks, const TrainConfig& cfg);

// Aggregated update direction of Algorithm 1, computed without mutating the
// state: per-task batch posterior, per-example moments, precision-weighted
// combination, trunk VJP.
struct BayesAggDirection {
    Matrix hidden_grads;  // d_h x n
    Matrix hidden_aug;    // (d_h + 1) x n features as seen this step
    TrunkGrads trunk_grads;
    Vector task_weight_means;  // per task, batch mean of alpha
    Vector losses;             // per-task batch-mean losses at the posterior means
    std::vector<GaussianPosterior> cls_posteriors;  // per classification task
};
BayesAggDirection bayesagg_direction(const TrainerState& state, const Batch& batch,
                                     const MethodConfig& mcfg, const RngStream& mc_rng);

// Reference direction for LS/SI/RLW/DWA/PCGrad and the pretraining stage.
struct ReferenceDirection {
    Matrix hidden_grads;  // d_h x n, weighted combination (or PCGrad surgery)
    Matrix hidden_aug;    // (d_h + 1) x n
    TrunkGrads trunk_grads;
    std::vector<Matrix> head_grads;  // per task, loss-weighted
    Vector losses;                   // per-task batch means, unweighted
    Vector weights;                  // task weights used (ones for pcgrad)
};
ReferenceDirection reference_direction(const TrainerState& state, const Batch& batch,
                                       Method method, BaselineState& bl,
                                       const RngStream& pcgrad_rng);

// One optimizer step. Both mutate the trunk; the bayesagg step also applies
// the Newton update to classification heads and appends the epoch buffers.
struct StepOutcome {
    Vector losses;
    Vector task_weight_means;  // empty outside the bayesagg phase
};
StepOutcome train_step_bayesagg(TrainerState& state, const Batch& batch, const TrainConfig& cfg);
StepOutcome train_step_reference(TrainerState& state, const Batch& batch, Method method,
                                 const TrainConfig& cfg);

// Epoch boundary: refresh per-task priors from everything collected during
// the epoch (isotropic base prior) and clear the buffers. Empty buffers
// reset the priors to the base.
void end_epoch(TrainerState& state, const MethodConfig& mcfg);

// Full-train regression posteriors for prediction, from fresh features of
// the (final) trunk.
void finalize(TrainerState& state, const Matrix& train_x,
              const std::vector<Matrix>& train_labels, const MethodConfig& mcfg);

// Per-task outputs: regression posterior-mean predictions (requires
// finalize), classification probabilities through the learned heads.
std::vector<Matrix> predict(const TrainerState& state, const Matrix& x);

// Point-estimate outputs through the current heads (pretraining/baselines).
std::vector<Matrix> predict_point(const TrainerState& state, const Matrix& x);

// Per-task batch-mean losses at the current point heads.
Vector point_losses(const TrainerState& state, const Batch& batch);

}  // namespace trainer
}  // namespace bayesagg
