#include "bayesagg/trainer.hpp"

#include <cmath>

#include "bayesagg/numerics.hpp"

namespace bayesagg {

void adam_step(Eigen::Ref<Matrix> param, const Matrix& grad, AdamSlot& slot, long t,
               const AdamConfig& cfg, double weight_decay) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
        throw DimensionError("adam_step: param/grad shape mismatch");
    }
    if (slot.m.size() == 0) {
        slot.m = Matrix::Zero(param.rows(), param.cols());
        slot.v = Matrix::Zero(param.rows(), param.cols());
    }
    slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * grad;
    slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    if (weight_decay > 0.0) {
        param -= cfg.lr * weight_decay * param;  // decoupled
    }
    param.array() -=
        cfg.lr * (slot.m.array() / bc1) / ((slot.v.array() / bc2).sqrt() + cfg.eps);
}

namespace trainer {

namespace {

// Fixed stream salts for the purpose-specific sub-streams.
constexpr std::uint64_t kSaltInit = 0x01;
constexpr std::uint64_t kSaltShuffle = 0x02;
constexpr std::uint64_t kSaltMC = 0x03;
constexpr std::uint64_t kSaltRLW = 0x04;
constexpr std::uint64_t kSaltPCGrad = 0x05;

GaussianPosterior base_reg_prior(Index dh, const MethodConfig& mcfg) {
    return isotropic_prior(dh + 1, mcfg.prior_variance, mcfg.tau);
}

GaussianPosterior base_cls_prior(Index outputs, Index dh, const MethodConfig& mcfg) {
    return isotropic_prior(outputs * (dh + 1), mcfg.prior_variance, mcfg.tau);
}

void install_base_priors(TrainerState& state, const MethodConfig& mcfg) {
    const Index dh = state.hidden_dim();
    state.reg_priors.assign(state.heads.size(), {});
    state.cls_priors.assign(state.heads.size(), GaussianPosterior{});
    for (std::size_t k = 0; k < state.heads.size(); ++k) {
        const TaskHead& head = state.heads[k];
        if (head.kind == TaskKind::kRegression) {
            state.reg_priors[k].assign(head.outputs(), base_reg_prior(dh, mcfg));
        } else {
            state.cls_priors[k] = base_cls_prior(head.outputs(), dh, mcfg);
        }
    }
}

// Write a flattened (row-major) weight vector back into the head matrix.
void unflatten_into(TaskHead& head, const Vector& w) {
    const Index cols = head.W.cols();
    for (Index r = 0; r < head.W.rows(); ++r) {
        head.W.row(r) = w.segment(r * cols, cols).transpose();
    }
}

double batch_loss(const TaskHead& head, const Matrix& z, const Matrix& labels) {
    const Index n = z.cols();
    double acc = 0.0;
    switch (head.kind) {
        case TaskKind::kRegression:
            acc = (z - labels).array().square().sum();
            break;
        case TaskKind::kBinary:
            for (Index i = 0; i < n; ++i) {
                const double zi = z(0, i);
                const double y = labels(0, i);
                const double softplus =
                    zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
                acc += softplus - y * zi;
            }
            break;
        case TaskKind::kMulticlass:
            for (Index i = 0; i < n; ++i) {
                const Vector p = bayes_classification::softmax(z.col(i));
                const auto cls = static_cast<Index>(labels(0, i));
                acc += -std::log(std::max(p(cls), 1e-300));
            }
            break;
    }
    return acc / static_cast<double>(n);
}

// d(loss)/d(logits) for one task over a batch.
Matrix logit_residual(const TaskHead& head, const Matrix& z, const Matrix& labels) {
    const Index n = z.cols();
    switch (head.kind) {
        case TaskKind::kRegression:
            return 2.0 * (z - labels);
        case TaskKind::kBinary: {
            Matrix r(1, n);
            for (Index i = 0; i < n; ++i) {
                r(0, i) = bayes_classification::sigmoid(z(0, i)) - labels(0, i);
            }
            return r;
        }
        case TaskKind::kMulticlass: {
            Matrix r(head.outputs(), n);
            for (Index i = 0; i < n; ++i) {
                Vector p = bayes_classification::softmax(z.col(i));
                p(static_cast<Index>(labels(0, i))) -= 1.0;
                r.col(i) = p;
            }
            return r;
        }
    }
    throw InvalidLabelError("logit_residual: unknown task kind");
}

}  // namespace

TrainerState init_state(Index input_dim, const std::vector<Index>& trunk_widths, Activation act,
                        const std::vector<TaskSpec>& tasks, const TrainConfig& cfg) {
    TrainerState state;
    state.root = RngStream{cfg.seed, 0};
    const RngStream init = state.root.derive(kSaltInit);
    state.trunk = make_trunk(input_dim, trunk_widths, act, init.derive(0));
    const Index dh = state.trunk.hidden_dim();
    int id = 0;
    for (const TaskSpec& t : tasks) {
        const Index outputs = t.kind == TaskKind::kBinary ? 1 : t.outputs;
        state.heads.push_back(
            make_head(id, t.kind, outputs, dh, init.derive(100 + static_cast<std::uint64_t>(id))));
        ++id;
    }
    state.head_opts.assign(state.heads.size(), AdamOpt{});
    state.baseline.method = cfg.method.method;
    state.baseline.rng = state.root.derive(kSaltRLW);
    install_base_priors(state, cfg.method);
    return state;
}

BayesAggDirection bayesagg_direction(const TrainerState& state, const Batch& batch,
                                     const MethodConfig& mcfg, const RngStream& mc_rng) {
    const Index K = state.task_count();
    const Index n = batch.x.cols();
    const Index dh = state.hidden_dim();
    const ForwardTrace trace = network::forward(batch.x, state.trunk);
    const Matrix hhat = network::augment_bias(trace.hidden());

    // One moment set per scalar sub-task: each regression output stands on
    // its own; a classification task contributes a single set.
    std::vector<std::vector<GradientMoments>> moments;  // [subtask][example]
    std::vector<double> sub_s;
    std::vector<Index> sub_parent;

    BayesAggDirection out;
    out.hidden_aug = hhat;
    out.losses = Vector::Zero(K);
    out.cls_posteriors.assign(K, GaussianPosterior{});

    for (Index k = 0; k < K; ++k) {
        const TaskHead& head = state.heads[k];
        const Matrix& labels = batch.labels[k];
        if (head.kind == TaskKind::kRegression) {
            for (Index o = 0; o < head.outputs(); ++o) {
                const Vector y = labels.row(o).transpose();
                const GaussianPosterior post = bayes_regression::posterior_update(
                    hhat, y, state.reg_priors[k][o], mcfg.tau);
                std::vector<GradientMoments> per_example(n);
                for (Index i = 0; i < n; ++i) {
                    per_example[i] = bayes_regression::regression_gradient_moments(
                                         post, hhat.col(i), y(i), mcfg.mode, mcfg.epsilon)
                                         .head(dh);
                }
                moments.push_back(std::move(per_example));
                sub_s.push_back(mcfg.s_regression);
                sub_parent.push_back(k);
                // Loss bookkeeping at the posterior mean.
                const Vector resid = hhat.transpose() * post.mean - y;
                out.losses(k) += resid.array().square().mean();
            }
        } else {
            const HeadPointEstimate what = head.flatten();
            const Vector labels_row = labels.row(0).transpose();
            const GaussianPosterior post = bayes_classification::taylor_posterior(
                what, hhat, labels_row, state.cls_priors[k], head.kind);
            out.cls_posteriors[k] = post;
            // J samples drawn once per (task, batch), shared by all examples.
            const Matrix samples = bayes_classification::sample_head_weights(
                post, mcfg.mc_samples, mc_rng.derive(static_cast<std::uint64_t>(k)));
            std::vector<GradientMoments> per_example(n);
            for (Index i = 0; i < n; ++i) {
                per_example[i] = bayes_classification::mc_moments_from_samples(
                    samples, head.outputs(), trace.hidden().col(i), labels_row(i), head.kind,
                    mcfg.mode, mcfg.epsilon);
            }
            moments.push_back(std::move(per_example));
            sub_s.push_back(mcfg.s_classification);
            sub_parent.push_back(k);
            const Matrix z = head.W * hhat;
            out.losses(k) = batch_loss(head, z, labels);
        }
    }

    const auto n_sub = static_cast<Index>(moments.size());
    out.hidden_grads = Matrix(dh, n);
    Matrix weight_sums = Matrix::Zero(n, K);
    std::vector<GradientMoments> per_sub(n_sub);
    for (Index i = 0; i < n; ++i) {
        for (Index s = 0; s < n_sub; ++s) per_sub[s] = moments[s][i];
        if (mcfg.mode == MomentMode::kFull) {
            out.hidden_grads.col(i) = aggregator::aggregate_full(per_sub, mcfg.epsilon);
            // Per-dimension weights are only defined for the diagonal rule.
            for (Index s = 0; s < n_sub; ++s) {
                weight_sums(i, sub_parent[s]) += 1.0 / static_cast<double>(n_sub);
            }
        } else {
            auto [g, alpha] = aggregator::aggregate_diagonal(per_sub, sub_s, mcfg.epsilon);
            out.hidden_grads.col(i) = g;
            for (Index s = 0; s < n_sub; ++s) {
                weight_sums(i, sub_parent[s]) += alpha.alpha[s].mean();
            }
        }
    }
    out.task_weight_means = weight_sums.colwise().mean().transpose();
    out.trunk_grads = network::backprop_shared(out.hidden_grads, trace, state.trunk);
    return out;
}

ReferenceDirection reference_direction(const TrainerState& state, const Batch& batch,
                                       Method method, BaselineState& bl,
                                       const RngStream& pcgrad_rng) {
    const Index K = state.task_count();
    const Index n = batch.x.cols();
    const Index dh = state.hidden_dim();
    const ForwardTrace trace = network::forward(batch.x, state.trunk);
    const Matrix hhat = network::augment_bias(trace.hidden());

    ReferenceDirection out;
    out.hidden_aug = hhat;
    out.losses = Vector(K);
    std::vector<Matrix> residuals(K);
    for (Index k = 0; k < K; ++k) {
        const Matrix z = state.heads[k].W * hhat;
        out.losses(k) = batch_loss(state.heads[k], z, batch.labels[k]);
        residuals[k] = logit_residual(state.heads[k], z, batch.labels[k]);
    }

    if (method == Method::kPCGrad) {
        out.weights = Vector::Ones(K);
        out.hidden_grads = Matrix(dh, n);
        std::vector<Vector> task_grads(K);
        for (Index i = 0; i < n; ++i) {
            for (Index k = 0; k < K; ++k) {
                task_grads[k] =
                    state.heads[k].W.leftCols(dh).transpose() * residuals[k].col(i);
            }
            out.hidden_grads.col(i) = baselines::pcgrad_combine(
                task_grads, pcgrad_rng.derive(static_cast<std::uint64_t>(i)));
        }
    } else {
        out.weights = baselines::baseline_weights(method, out.losses, bl);
        out.hidden_grads = Matrix::Zero(dh, n);
        for (Index k = 0; k < K; ++k) {
            out.hidden_grads.noalias() +=
                out.weights(k) * (state.heads[k].W.leftCols(dh).transpose() * residuals[k]);
        }
    }

    out.trunk_grads = network::backprop_shared(out.hidden_grads, trace, state.trunk);
    const double inv_n = 1.0 / static_cast<double>(n);
    out.head_grads.resize(K);
    for (Index k = 0; k < K; ++k) {
        const double w = method == Method::kPCGrad ? 1.0 : out.weights(k);
        out.head_grads[k] = (w * inv_n) * (residuals[k] * hhat.transpose());
    }
    return out;
}

namespace {

void apply_trunk_step(TrainerState& state, const TrunkGrads& grads, const AdamConfig& adam) {
    AdamOpt& opt = state.trunk_opt;
    const auto layers = state.trunk.layer_count();
    if (opt.slots.empty()) opt.slots.resize(2 * layers);
    ++opt.t;
    for (Index l = 0; l < layers; ++l) {
        adam_step(state.trunk.weights[l], grads.weights[l], opt.slots[2 * l], opt.t, adam,
                  adam.weight_decay);
        adam_step(state.trunk.biases[l], grads.biases[l], opt.slots[2 * l + 1], opt.t, adam,
                  adam.weight_decay);
    }
}

void append_buffers(TrainerState& state, const Matrix& hhat, const Batch& batch) {
    state.buf_features.push_back(hhat);
    std::vector<Matrix> labels;
    labels.reserve(batch.labels.size());
    for (const Matrix& l : batch.labels) labels.push_back(l);
    state.buf_labels.push_back(std::move(labels));
}

}  // namespace

StepOutcome train_step_bayesagg(TrainerState& state, const Batch& batch, const TrainConfig& cfg) {
    const RngStream mc = state.root.derive(kSaltMC).derive(state.step_counter);
    BayesAggDirection dir = bayesagg_direction(state, batch, cfg.method, mc);

    // Collect features as seen during training, before the parameters move.
    append_buffers(state, dir.hidden_aug, batch);

    apply_trunk_step(state, dir.trunk_grads, cfg.adam);

    // Newton-mean update of the classification point estimates.
    for (Index k = 0; k < state.task_count(); ++k) {
        TaskHead& head = state.heads[k];
        if (head.kind == TaskKind::kRegression) continue;
        const Vector target = dir.cls_posteriors[k].mean;
        const Vector current = head.flatten().w;
        unflatten_into(head, current + cfg.method.newton_damping * (target - current));
    }
    ++state.step_counter;
    return StepOutcome{dir.losses, dir.task_weight_means};
}

StepOutcome train_step_reference(TrainerState& state, const Batch& batch, Method method,
                                 const TrainConfig& cfg) {
    const RngStream pc = state.root.derive(kSaltPCGrad).derive(state.step_counter);
    ReferenceDirection dir = reference_direction(state, batch, method, state.baseline, pc);

    if (cfg.method.method == Method::kBayesAgg) {
        // Pretraining stage: keep collecting for the first bayesagg prior.
        append_buffers(state, dir.hidden_aug, batch);
    }

    apply_trunk_step(state, dir.trunk_grads, cfg.adam);
    for (Index k = 0; k < state.task_count(); ++k) {
        AdamOpt& opt = state.head_opts[k];
        if (opt.slots.empty()) opt.slots.resize(1);
        ++opt.t;
        adam_step(state.heads[k].W, dir.head_grads[k], opt.slots[0], opt.t, cfg.adam, 0.0);
    }
    ++state.step_counter;
    return StepOutcome{dir.losses, Vector()};
}

void end_epoch(TrainerState& state, const MethodConfig& mcfg) {
    const Index dh = state.hidden_dim();
    if (state.buf_features.empty()) {
        install_base_priors(state, mcfg);
        return;
    }
    Index total = 0;
    for (const Matrix& c : state.buf_features) total += c.cols();
    Matrix hall(dh + 1, total);
    std::vector<Matrix> labels_all(state.heads.size());
    for (std::size_t k = 0; k < state.heads.size(); ++k) {
        labels_all[k] = Matrix(state.buf_labels[0][k].rows(), total);
    }
    Index at = 0;
    for (std::size_t c = 0; c < state.buf_features.size(); ++c) {
        const Index cols = state.buf_features[c].cols();
        hall.middleCols(at, cols) = state.buf_features[c];
        for (std::size_t k = 0; k < state.heads.size(); ++k) {
            labels_all[k].middleCols(at, cols) = state.buf_labels[c][k];
        }
        at += cols;
    }

    for (Index k = 0; k < state.task_count(); ++k) {
        const TaskHead& head = state.heads[k];
        if (head.kind == TaskKind::kRegression) {
            for (Index o = 0; o < head.outputs(); ++o) {
                state.reg_priors[k][o] = bayes_regression::epoch_prior_refresh(
                    hall, labels_all[k].row(o).transpose(), base_reg_prior(dh, mcfg), mcfg.tau);
            }
        } else {
            // Full-data Taylor posterior at the epoch-end point estimate.
            state.cls_priors[k] = bayes_classification::taylor_posterior(
                head.flatten(), hall, labels_all[k].row(0).transpose(),
                base_cls_prior(head.outputs(), dh, mcfg), head.kind);
        }
    }
    state.buf_features.clear();
    state.buf_labels.clear();
}

void finalize(TrainerState& state, const Matrix& train_x,
              const std::vector<Matrix>& train_labels, const MethodConfig& mcfg) {
    const Index dh = state.hidden_dim();
    const ForwardTrace trace = network::forward(train_x, state.trunk);
    const Matrix hhat = network::augment_bias(trace.hidden());
    state.reg_predict.assign(state.heads.size(), {});
    for (Index k = 0; k < state.task_count(); ++k) {
        const TaskHead& head = state.heads[k];
        if (head.kind != TaskKind::kRegression) continue;
        std::vector<GaussianPosterior> per_output;
        for (Index o = 0; o < head.outputs(); ++o) {
            per_output.push_back(bayes_regression::posterior_update(
                hhat, train_labels[k].row(o).transpose(), base_reg_prior(dh, mcfg), mcfg.tau));
        }
        state.reg_predict[k] = std::move(per_output);
    }
    state.finalized = true;
}

std::vector<Matrix> predict(const TrainerState& state, const Matrix& x) {
    const ForwardTrace trace = network::forward(x, state.trunk);
    const Matrix hhat = network::augment_bias(trace.hidden());
    std::vector<Matrix> out(state.heads.size());
    for (Index k = 0; k < state.task_count(); ++k) {
        const TaskHead& head = state.heads[k];
        if (head.kind == TaskKind::kRegression) {
            if (!state.finalized) {
                throw NotTrainedError("predict: regression posterior not finalized");
            }
            Matrix z(head.outputs(), x.cols());
            for (Index o = 0; o < head.outputs(); ++o) {
                z.row(o) = (hhat.transpose() * state.reg_predict[k][o].mean).transpose();
            }
            out[k] = std::move(z);
        } else {
            out[k] = network::head_forward(trace.hidden(), head);
        }
    }
    return out;
}

std::vector<Matrix> predict_point(const TrainerState& state, const Matrix& x) {
    const ForwardTrace trace = network::forward(x, state.trunk);
    std::vector<Matrix> out(state.heads.size());
    for (Index k = 0; k < state.task_count(); ++k) {
        out[k] = network::head_forward(trace.hidden(), state.heads[k]);
    }
    return out;
}

Vector point_losses(const TrainerState& state, const Batch& batch) {
    const ForwardTrace trace = network::forward(batch.x, state.trunk);
    const Matrix hhat = network::augment_bias(trace.hidden());
    Vector losses(state.task_count());
    for (Index k = 0; k < state.task_count(); ++k) {
        const Matrix z = state.heads[k].W * hhat;
        losses(k) = batch_loss(state.heads[k], z, batch.labels[k]);
    }
    return losses;
}

}  // namespace trainer
}  // namespace bayesagg
