#include "bayesagg/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace bayesagg::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSaltEpochShuffle = 0xEB0C;

std::vector<int> direction_flags(const std::vector<TaskSpec>& tasks) {
    std::vector<int> flags;
    flags.reserve(tasks.size());
    for (const TaskSpec& t : tasks) {
        flags.push_back(t.kind == TaskKind::kRegression ? 0 : 1);  // accuracy: higher is better
    }
    return flags;
}

Vector criteria_on_rows(const TrainerState& state, const Dataset& ds,
                        const std::vector<Index>& rows, bool bayes_predict) {
    const Matrix x = data::gather_columns(ds.features, rows);
    const std::vector<Matrix> preds =
        bayes_predict ? trainer::predict(state, x) : trainer::predict_point(state, x);
    Vector out(ds.task_count());
    for (Index k = 0; k < ds.task_count(); ++k) {
        const Matrix labels = data::gather_columns(ds.labels[k], rows);
        out(k) = metrics::task_criteria(preds[k], labels, ds.tasks[k].kind, ds.norm[k]);
    }
    return out;
}

double selection_score(const Vector& criteria, const std::vector<TaskSpec>& tasks,
                       const std::optional<Vector>& stl_values) {
    if (stl_values) {
        metrics::MetricRecord rec{criteria, *stl_values, direction_flags(tasks)};
        return metrics::delta_m(rec);
    }
    double acc = 0.0;
    for (Index k = 0; k < criteria.size(); ++k) {
        acc += tasks[k].kind == TaskKind::kRegression ? criteria(k) : 1.0 - criteria(k);
    }
    return acc / static_cast<double>(criteria.size());
}

struct Snapshot {
    TrunkParams trunk;
    std::vector<TaskHead> heads;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("output", "cannot write '" + path.string() + "'");
    out << text;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Dataset build_dataset(const RunConfig& cfg) {
    Dataset ds;
    if (cfg.dataset.source == DatasetConfig::Source::kSynthetic) {
        SyntheticSpec spec = cfg.dataset.synthetic;
        spec.seed = cfg.dataset.data_seed;
        ds = data::generate_synthetic(spec);
    } else {
        ds = data::load_csv(cfg.dataset.csv_path, cfg.dataset.csv_tasks);
    }
    ds.split = data::make_split(ds, cfg.dataset.train_frac, cfg.dataset.val_frac,
                                RngStream{cfg.dataset.data_seed, 0x5917});
    if (cfg.dataset.normalize) {
        std::vector<Index> reg_tasks;
        for (Index k = 0; k < ds.task_count(); ++k) {
            if (ds.tasks[k].kind == TaskKind::kRegression) reg_tasks.push_back(k);
        }
        if (!reg_tasks.empty()) data::normalize_targets(ds, reg_tasks);
    }
    return ds;
}

FitResult fit_method(const Dataset& dataset, const RunConfig& cfg, Method method,
                     std::uint64_t seed, const std::optional<Vector>& stl_values) {
    TrainConfig tcfg = cfg.training;
    tcfg.seed = seed;
    tcfg.method.method = method;
    const bool is_bayes = method == Method::kBayesAgg;
    const int pretrain = is_bayes ? tcfg.pretrain_epochs : 0;

    TrainerState state =
        trainer::init_state(dataset.input_dim(), cfg.model.widths, cfg.model.activation,
                            dataset.tasks, tcfg);

    const std::vector<Index>& train_rows = dataset.split.train;
    const Index n_train = static_cast<Index>(train_rows.size());
    if (n_train == 0) throw ConfigError("dataset", "empty train split");
    const Matrix x_train = data::gather_columns(dataset.features, train_rows);
    std::vector<Matrix> labels_train(dataset.task_count());
    for (Index k = 0; k < dataset.task_count(); ++k) {
        labels_train[k] = data::gather_columns(dataset.labels[k], train_rows);
    }

    FitResult result;
    AdamConfig live_adam = tcfg.adam;
    double best_score = std::numeric_limits<double>::infinity();
    Snapshot best;
    double plateau_best = std::numeric_limits<double>::infinity();
    int plateau_wait = 0;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const bool bayes_phase = is_bayes && epoch >= pretrain;
        std::vector<Index> order(n_train);
        std::iota(order.begin(), order.end(), Index{0});
        auto shuffle_engine = make_engine(
            RngStream{seed, kSaltEpochShuffle}.derive(static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_engine);

        Vector loss_sum = Vector::Zero(dataset.task_count());
        Vector weight_sum = Vector::Zero(dataset.task_count());
        Index steps = 0, weighted_steps = 0;
        TrainConfig step_cfg = tcfg;
        step_cfg.adam = live_adam;

        for (Index start = 0; start < n_train; start += tcfg.batch_size) {
            const Index len = std::min(tcfg.batch_size, n_train - start);
            Batch batch;
            batch.x = Matrix(dataset.input_dim(), len);
            batch.labels.resize(dataset.task_count());
            for (Index k = 0; k < dataset.task_count(); ++k) {
                batch.labels[k] = Matrix(labels_train[k].rows(), len);
            }
            for (Index j = 0; j < len; ++j) {
                const Index col = order[start + j];
                batch.x.col(j) = x_train.col(col);
                for (Index k = 0; k < dataset.task_count(); ++k) {
                    batch.labels[k].col(j) = labels_train[k].col(col);
                }
            }
            trainer::StepOutcome outcome;
            if (bayes_phase) {
                outcome = trainer::train_step_bayesagg(state, batch, step_cfg);
                weight_sum += outcome.task_weight_means;
                ++weighted_steps;
            } else {
                const Method step_method = is_bayes ? Method::kLS : method;
                outcome = trainer::train_step_reference(state, batch, step_method, step_cfg);
            }
            loss_sum += outcome.losses;
            ++steps;
        }

        if (is_bayes) trainer::end_epoch(state, tcfg.method);
        const Vector epoch_losses = loss_sum / static_cast<double>(std::max<Index>(steps, 1));
        {
            std::vector<double> l(epoch_losses.data(), epoch_losses.data() + epoch_losses.size());
            state.baseline.record_epoch_losses(l);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_losses = epoch_losses;
        rec.lr = live_adam.lr;
        rec.task_weights = weighted_steps > 0
                               ? Vector(weight_sum / static_cast<double>(weighted_steps))
                               : Vector(Vector::Constant(dataset.task_count(),
                                                         std::numeric_limits<double>::quiet_NaN()));

        const bool have_val = !dataset.split.val.empty();
        if (have_val) {
            if (is_bayes) trainer::finalize(state, x_train, labels_train, tcfg.method);
            rec.val_criteria =
                criteria_on_rows(state, dataset, dataset.split.val, /*bayes_predict=*/is_bayes);
            if (stl_values) {
                metrics::MetricRecord mrec{rec.val_criteria, *stl_values,
                                           direction_flags(dataset.tasks)};
                rec.val_delta_m = metrics::delta_m(mrec);
            }
            const double score = selection_score(rec.val_criteria, dataset.tasks, stl_values);
            if (tcfg.select_best && score < best_score) {
                best_score = score;
                best.trunk = state.trunk;
                best.heads = state.heads;
                result.best_epoch = epoch;
            }
            // Scheduler is inactive during the pretraining stage.
            if (epoch >= pretrain) {
                if (tcfg.scheduler.kind == SchedulerKind::kPlateau) {
                    if (score < plateau_best - 1e-12) {
                        plateau_best = score;
                        plateau_wait = 0;
                    } else if (++plateau_wait >= tcfg.scheduler.patience) {
                        live_adam.lr *= tcfg.scheduler.factor;
                        plateau_wait = 0;
                    }
                }
            }
        } else {
            rec.val_criteria = Vector::Constant(dataset.task_count(),
                                                std::numeric_limits<double>::quiet_NaN());
        }
        if (tcfg.scheduler.kind == SchedulerKind::kStep && epoch >= pretrain &&
            tcfg.scheduler.step_every > 0 &&
            (epoch - pretrain + 1) % tcfg.scheduler.step_every == 0) {
            live_adam.lr *= tcfg.scheduler.factor;
        }
        result.history.push_back(std::move(rec));
    }

    if (tcfg.select_best && result.best_epoch >= 0) {
        state.trunk = best.trunk;
        state.heads = best.heads;
    }
    trainer::finalize(state, x_train, labels_train, tcfg.method);
    result.state = std::move(state);
    return result;
}

RunSummary evaluate(const TrainerState& state, const Dataset& dataset, const RunConfig& cfg,
                    Method method, std::uint64_t seed, const std::optional<Vector>& stl_values) {
    RunSummary out;
    out.method = method;
    out.seed = seed;
    out.higher_is_better = direction_flags(dataset.tasks);
    const bool bayes_predict = method == Method::kBayesAgg;
    const std::vector<Index>& rows = dataset.split.test;
    out.test_criteria = criteria_on_rows(state, dataset, rows, bayes_predict);
    if (stl_values) {
        metrics::MetricRecord rec{out.test_criteria, *stl_values, out.higher_is_better};
        out.delta_m = metrics::delta_m(rec);
    }

    const Matrix x = data::gather_columns(dataset.features, rows);
    const std::vector<Matrix> preds =
        bayes_predict ? trainer::predict(state, x) : trainer::predict_point(state, x);
    out.ece.assign(dataset.task_count(), std::numeric_limits<double>::quiet_NaN());
    out.brier.assign(dataset.task_count(), std::numeric_limits<double>::quiet_NaN());
    for (Index k = 0; k < dataset.task_count(); ++k) {
        const TaskKind kind = dataset.tasks[k].kind;
        if (kind == TaskKind::kRegression) continue;
        const Matrix labels = data::gather_columns(dataset.labels[k], rows);
        const Index n = labels.cols();
        std::vector<int> y(n);
        for (Index i = 0; i < n; ++i) y[i] = static_cast<int>(labels(0, i));
        Matrix probs;
        if (kind == TaskKind::kBinary) {
            probs = Matrix(2, n);
            probs.row(1) = preds[k].row(0);
            probs.row(0) = 1.0 - preds[k].row(0).array();
        } else {
            probs = preds[k];
        }
        Vector conf(n);
        std::vector<bool> correct(n);
        for (Index i = 0; i < n; ++i) {
            Index arg = 0;
            const double c = probs.col(i).maxCoeff(&arg);
            conf(i) = c;
            int pred;
            if (kind == TaskKind::kBinary) {
                pred = preds[k](0, i) > 0.5 ? 1 : 0;
            } else {
                pred = static_cast<int>(arg);
            }
            correct[i] = pred == y[i];
        }
        out.ece[k] = metrics::ece(conf, correct);
        out.brier[k] = metrics::brier(probs, y);
    }
    return out;
}

Vector stl_reference(const Dataset& dataset, const RunConfig& cfg, std::uint64_t seed) {
    Vector refs(dataset.task_count());
    for (Index k = 0; k < dataset.task_count(); ++k) {
        Dataset single = dataset;
        single.tasks = {dataset.tasks[k]};
        single.labels = {dataset.labels[k]};
        single.norm = {dataset.norm[k]};
        single.teacher_weights.clear();
        const FitResult fit = fit_method(single, cfg, Method::kLS, seed, std::nullopt);
        const RunSummary summary =
            evaluate(fit.state, single, cfg, Method::kLS, seed, std::nullopt);
        refs(k) = summary.test_criteria(0);
    }
    return refs;
}

namespace {

json summary_json(const RunConfig& cfg, Method method, const std::vector<RunSummary>& runs,
                  const Dataset& dataset) {
    json meta;
    meta["method"] = to_string(method);
    meta["config_hash"] = config::config_hash(cfg);
    meta["seeds"] = cfg.seeds;
    json tasks = json::array();
    for (const TaskSpec& t : dataset.tasks) {
        tasks.push_back({{"name", t.name},
                         {"kind", t.kind == TaskKind::kRegression ? "regression"
                                  : t.kind == TaskKind::kBinary  ? "binary"
                                                                 : "multiclass"},
                         {"outputs", t.outputs}});
    }
    meta["tasks"] = tasks;
    meta["conventions"] = {{"brier", "sum-over-classes"},
                           {"normalization_std", "population"},
                           {"delta_m", "percent, lower is better"}};

    json rows = json::array();
    for (const RunSummary& r : runs) {
        json row;
        row["seed"] = r.seed;
        row["criteria"] = std::vector<double>(r.test_criteria.data(),
                                              r.test_criteria.data() + r.test_criteria.size());
        row["delta_m"] = r.delta_m;
        row["ece"] = r.ece;
        row["brier"] = r.brier;
        rows.push_back(row);
    }

    const auto n = static_cast<double>(runs.size());
    const Index K = runs.empty() ? 0 : runs.front().test_criteria.size();
    Vector mean = Vector::Zero(K), var = Vector::Zero(K);
    double dm_mean = 0.0, dm_var = 0.0;
    for (const RunSummary& r : runs) {
        mean += r.test_criteria;
        dm_mean += r.delta_m;
    }
    mean /= n;
    dm_mean /= n;
    for (const RunSummary& r : runs) {
        var.array() += (r.test_criteria - mean).array().square();
        dm_var += (r.delta_m - dm_mean) * (r.delta_m - dm_mean);
    }
    var /= n;
    dm_var /= n;

    json aggregate;
    aggregate["criteria_mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    aggregate["criteria_std"] =
        std::vector<double>(Vector(var.cwiseSqrt()).data(), Vector(var.cwiseSqrt()).data() + K);
    aggregate["delta_m_mean"] = dm_mean;
    aggregate["delta_m_std"] = std::sqrt(dm_var);

    json out;
    out["meta"] = meta;
    out["runs"] = rows;
    out["aggregate"] = aggregate;
    return out;
}

void write_history_csv(const fs::path& path, const RunConfig& cfg, Method method,
                       std::uint64_t seed, const Dataset& dataset,
                       const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "# method=" << to_string(method) << " seed=" << seed
        << " config_hash=" << config::config_hash(cfg) << "\n";
    out << "epoch";
    for (const TaskSpec& t : dataset.tasks) out << ",train_loss_" << t.name;
    for (const TaskSpec& t : dataset.tasks) out << ",val_" << t.name;
    out << ",val_delta_m,lr\n";
    for (const EpochRecord& r : history) {
        out << r.epoch;
        for (Index k = 0; k < r.train_losses.size(); ++k) out << "," << r.train_losses(k);
        for (Index k = 0; k < r.val_criteria.size(); ++k) out << "," << r.val_criteria(k);
        out << "," << r.val_delta_m << "," << r.lr << "\n";
    }
    write_text(path, out.str());
}

void write_weights_csv(const fs::path& path, const RunConfig& cfg, std::uint64_t seed,
                       const Dataset& dataset, const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "# method=bayesagg seed=" << seed << " config_hash=" << config::config_hash(cfg)
        << "\n";
    out << "epoch,task,mean_weight\n";
    for (const EpochRecord& r : history) {
        for (Index k = 0; k < dataset.task_count(); ++k) {
            out << r.epoch << "," << dataset.tasks[k].name << "," << r.task_weights(k) << "\n";
        }
    }
    write_text(path, out.str());
}

void save_model(const fs::path& path, const TrainerState& state) {
    std::ostringstream out;
    out.precision(17);
    out << "bayesagg-model 1\n";
    out << "layers " << state.trunk.layer_count() << "\n";
    for (Index l = 0; l < state.trunk.layer_count(); ++l) {
        const Matrix& W = state.trunk.weights[l];
        out << "layer " << W.rows() << " " << W.cols() << " "
            << to_string(state.trunk.activations[l]) << "\n";
        for (Index r = 0; r < W.rows(); ++r) {
            for (Index c = 0; c < W.cols(); ++c) out << W(r, c) << " ";
            out << "\n";
        }
        for (Index r = 0; r < W.rows(); ++r) out << state.trunk.biases[l](r) << " ";
        out << "\n";
    }
    out << "heads " << state.heads.size() << "\n";
    for (const TaskHead& head : state.heads) {
        out << "head " << head.id << " "
            << (head.kind == TaskKind::kRegression ? "regression"
                : head.kind == TaskKind::kBinary   ? "binary"
                                                   : "multiclass")
            << " " << head.W.rows() << " " << head.W.cols() << "\n";
        for (Index r = 0; r < head.W.rows(); ++r) {
            for (Index c = 0; c < head.W.cols(); ++c) out << head.W(r, c) << " ";
            out << "\n";
        }
    }
    out << "reg_predict " << state.reg_predict.size() << "\n";
    for (const auto& per_task : state.reg_predict) {
        out << "task_posteriors " << per_task.size() << "\n";
        for (const GaussianPosterior& p : per_task) {
            out << p.mean.size() << "\n";
            for (Index i = 0; i < p.mean.size(); ++i) out << p.mean(i) << " ";
            out << "\n";
        }
    }
    write_text(path, out.str());
}

TrainerState load_model(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("eval", "cannot open model '" + path.string() + "'");
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "bayesagg-model" || version != 1) {
        throw ConfigError("eval", "unrecognized model file '" + path.string() + "'");
    }
    TrainerState state;
    Index layers = 0;
    in >> tag >> layers;
    for (Index l = 0; l < layers; ++l) {
        Index r, c;
        std::string act;
        in >> tag >> r >> c >> act;
        Matrix W(r, c);
        for (Index i = 0; i < r; ++i) {
            for (Index j = 0; j < c; ++j) in >> W(i, j);
        }
        Vector b(r);
        for (Index i = 0; i < r; ++i) in >> b(i);
        state.trunk.weights.push_back(std::move(W));
        state.trunk.biases.push_back(std::move(b));
        state.trunk.activations.push_back(activation_from_string(act));
    }
    std::size_t heads = 0;
    in >> tag >> heads;
    for (std::size_t k = 0; k < heads; ++k) {
        TaskHead head;
        std::string kind;
        Index r, c;
        in >> tag >> head.id >> kind >> r >> c;
        head.kind = kind == "regression" ? TaskKind::kRegression
                    : kind == "binary"   ? TaskKind::kBinary
                                         : TaskKind::kMulticlass;
        head.W = Matrix(r, c);
        for (Index i = 0; i < r; ++i) {
            for (Index j = 0; j < c; ++j) in >> head.W(i, j);
        }
        state.heads.push_back(std::move(head));
    }
    std::size_t npred = 0;
    in >> tag >> npred;
    state.reg_predict.resize(npred);
    for (std::size_t k = 0; k < npred; ++k) {
        std::size_t per = 0;
        in >> tag >> per;
        for (std::size_t o = 0; o < per; ++o) {
            Index d;
            in >> d;
            GaussianPosterior p;
            p.mean = Vector(d);
            for (Index i = 0; i < d; ++i) in >> p.mean(i);
            p.cov = Matrix::Zero(d, d);
            state.reg_predict[k].push_back(std::move(p));
        }
    }
    if (!in) throw ConfigError("eval", "truncated model file '" + path.string() + "'");
    state.finalized = true;
    return state;
}

}  // namespace

std::string run_train(const RunConfig& cfg) {
    const Dataset dataset = build_dataset(cfg);
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "config.resolved", config::resolved_text(cfg));

    const Method method = cfg.training.method.method;
    std::vector<RunSummary> runs;
    for (std::uint64_t seed : cfg.seeds) {
        const FitResult fit = fit_method(dataset, cfg, method, seed, cfg.stl_values);
        const RunSummary summary = evaluate(fit.state, dataset, cfg, method, seed, cfg.stl_values);
        runs.push_back(summary);
        const fs::path seed_dir = out_dir / ("seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);
        write_history_csv(seed_dir / "history.csv", cfg, method, seed, dataset, fit.history);
        if (method == Method::kBayesAgg) {
            write_weights_csv(seed_dir / "weights.csv", cfg, seed, dataset, fit.history);
        }
        save_model(seed_dir / "model.txt", fit.state);
    }
    const json summary = summary_json(cfg, method, runs, dataset);
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    return out_dir.string();
}

std::string run_compare(const RunConfig& cfg, const std::vector<Method>& methods) {
    const Dataset dataset = build_dataset(cfg);
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "config.resolved", config::resolved_text(cfg));

    // STL reference per seed, shared across methods (or the fixed values).
    std::map<std::uint64_t, Vector> stl;
    for (std::uint64_t seed : cfg.seeds) {
        stl[seed] = cfg.stl_values ? *cfg.stl_values : stl_reference(dataset, cfg, seed);
    }
    {
        std::ostringstream out;
        out.precision(17);
        out << "# config_hash=" << config::config_hash(cfg) << "\n";
        out << "seed";
        for (const TaskSpec& t : dataset.tasks) out << ",stl_" << t.name;
        out << "\n";
        for (const auto& [seed, refs] : stl) {
            out << seed;
            for (Index k = 0; k < refs.size(); ++k) out << "," << refs(k);
            out << "\n";
        }
        write_text(out_dir / "stl.csv", out.str());
    }

    std::ostringstream table;
    table.precision(17);
    table << "# config_hash=" << config::config_hash(cfg) << "\n";
    table << "method,seed";
    for (const TaskSpec& t : dataset.tasks) table << "," << t.name;
    table << ",delta_m\n";

    json all = json::object();
    for (Method m : methods) {
        std::vector<RunSummary> runs;
        for (std::uint64_t seed : cfg.seeds) {
            const FitResult fit = fit_method(dataset, cfg, m, seed, stl[seed]);
            runs.push_back(evaluate(fit.state, dataset, cfg, m, seed, stl[seed]));
        }
        Vector mean = Vector::Zero(dataset.task_count());
        double dm_mean = 0.0;
        for (const RunSummary& r : runs) {
            table << to_string(m) << "," << r.seed;
            for (Index k = 0; k < r.test_criteria.size(); ++k) {
                table << "," << r.test_criteria(k);
            }
            table << "," << r.delta_m << "\n";
            mean += r.test_criteria;
            dm_mean += r.delta_m;
        }
        const auto n = static_cast<double>(runs.size());
        mean /= n;
        dm_mean /= n;
        Vector var = Vector::Zero(dataset.task_count());
        double dm_var = 0.0;
        for (const RunSummary& r : runs) {
            var.array() += (r.test_criteria - mean).array().square();
            dm_var += (r.delta_m - dm_mean) * (r.delta_m - dm_mean);
        }
        var /= n;
        dm_var /= n;
        table << to_string(m) << ",mean";
        for (Index k = 0; k < mean.size(); ++k) table << "," << mean(k);
        table << "," << dm_mean << "\n";
        table << to_string(m) << ",std";
        for (Index k = 0; k < var.size(); ++k) table << "," << std::sqrt(var(k));
        table << "," << std::sqrt(dm_var) << "\n";
        all[to_string(m)] = summary_json(cfg, m, runs, dataset);
    }
    write_text(out_dir / "compare.csv", table.str());
    write_text(out_dir / "compare.json", all.dump(2) + "\n");
    std::cout << table.str();
    return out_dir.string();
}

std::size_t select_best_cell(const std::vector<SweepCell>& cells) {
    if (cells.empty()) throw EmptyInputError("select_best_cell: no cells");
    auto axis = [](const SweepCell& c, const std::string& key, double fallback) {
        const auto it = c.cell.values.find(key);
        return it == c.cell.values.end() ? fallback : it->second;
    };
    auto s_of = [&](const SweepCell& c) {
        return axis(c, "s", axis(c, "s_regression", axis(c, "s_classification", 1.0)));
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const SweepCell& a = cells[i];
        const SweepCell& b = cells[best];
        if (a.val_delta_m < b.val_delta_m - 1e-12) {
            best = i;
        } else if (std::abs(a.val_delta_m - b.val_delta_m) <= 1e-12) {
            // Documented tie-break: smaller s, then fewer samples, then
            // smaller prior variance.
            const double sa = s_of(a), sb = s_of(b);
            if (sa < sb ||
                (sa == sb && axis(a, "mc_samples", 0) < axis(b, "mc_samples", 0)) ||
                (sa == sb && axis(a, "mc_samples", 0) == axis(b, "mc_samples", 0) &&
                 axis(a, "prior_variance", 0) < axis(b, "prior_variance", 0))) {
                best = i;
            }
        }
    }
    return best;
}

int worker_count() {
    const char* env = std::getenv("BAYESAGG_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n < 1 ? 1 : n;
}

std::string run_sweep(const RunConfig& cfg, const std::vector<config::GridCell>& grid) {
    if (grid.empty()) throw ConfigError("grid", "empty grid");
    const Dataset dataset = build_dataset(cfg);
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "config.resolved", config::resolved_text(cfg));

    std::map<std::uint64_t, Vector> stl;
    for (std::uint64_t seed : cfg.seeds) {
        stl[seed] = cfg.stl_values ? *cfg.stl_values : stl_reference(dataset, cfg, seed);
    }

    struct CellResult {
        SweepCell cell;
        double test_delta_m = 0.0;
    };
    std::vector<CellResult> results(grid.size());

    auto run_cell = [&](std::size_t idx) {
        RunConfig cell_cfg = cfg;
        config::apply_cell(cell_cfg, grid[idx]);
        const fs::path cell_dir = out_dir / ("cell_" + std::to_string(idx));
        cell_cfg.out_dir = cell_dir.string();
        fs::create_directories(cell_dir);
        write_text(cell_dir / "config.resolved", config::resolved_text(cell_cfg));
        double val_dm = 0.0, test_dm = 0.0;
        std::vector<RunSummary> runs;
        for (std::uint64_t seed : cell_cfg.seeds) {
            const FitResult fit =
                fit_method(dataset, cell_cfg, Method::kBayesAgg, seed, stl[seed]);
            // Validation delta_m at the selected epoch drives the sweep.
            double best_val = std::numeric_limits<double>::infinity();
            for (const EpochRecord& r : fit.history) {
                if (std::isfinite(r.val_delta_m)) best_val = std::min(best_val, r.val_delta_m);
            }
            val_dm += best_val;
            const RunSummary s =
                evaluate(fit.state, dataset, cell_cfg, Method::kBayesAgg, seed, stl[seed]);
            test_dm += s.delta_m;
            runs.push_back(s);
            const fs::path seed_dir = cell_dir / ("seed_" + std::to_string(seed));
            fs::create_directories(seed_dir);
            write_history_csv(seed_dir / "history.csv", cell_cfg, Method::kBayesAgg, seed,
                              dataset, fit.history);
            write_weights_csv(seed_dir / "weights.csv", cell_cfg, seed, dataset, fit.history);
        }
        const json cell_summary = summary_json(cell_cfg, Method::kBayesAgg, runs, dataset);
        write_text(cell_dir / "summary.json", cell_summary.dump(2) + "\n");
        results[idx].cell = SweepCell{grid[idx], val_dm / cfg.seeds.size()};
        results[idx].test_delta_m = test_dm / cfg.seeds.size();
    };

    const int workers = worker_count();
    if (workers <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) run_cell(i);
    } else {
        std::vector<std::future<void>> futures;
        std::size_t next = 0;
        while (next < grid.size()) {
            futures.clear();
            for (int w = 0; w < workers && next < grid.size(); ++w, ++next) {
                futures.push_back(std::async(std::launch::async, run_cell, next));
            }
            for (auto& f : futures) f.get();
        }
    }

    std::vector<SweepCell> cells;
    cells.reserve(results.size());
    for (const CellResult& r : results) cells.push_back(r.cell);
    const std::size_t best = select_best_cell(cells);

    std::ostringstream table;
    table.precision(17);
    table << "# config_hash=" << config::config_hash(cfg) << "\n";
    table << "cell,label,val_delta_m,test_delta_m,selected\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        table << i << "," << grid[i].label() << "," << results[i].cell.val_delta_m << ","
              << results[i].test_delta_m << "," << (i == best ? 1 : 0) << "\n";
    }
    write_text(out_dir / "sweep.csv", table.str());

    RunConfig best_cfg = cfg;
    config::apply_cell(best_cfg, grid[best]);
    write_text(out_dir / "best_config.resolved", config::resolved_text(best_cfg));
    std::cout << table.str();
    return out_dir.string();
}

void run_eval(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const RunConfig cfg = config::load((dir / "config.resolved").string());
    const Dataset dataset = build_dataset(cfg);
    const Method method = cfg.training.method.method;

    json out = json::object();
    out["config_hash"] = config::config_hash(cfg);
    json runs = json::array();
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path model_path = dir / ("seed_" + std::to_string(seed)) / "model.txt";
        if (!fs::exists(model_path)) continue;
        const TrainerState state = load_model(model_path);
        const RunSummary s = evaluate(state, dataset, cfg, method, seed, cfg.stl_values);
        json row;
        row["seed"] = seed;
        row["criteria"] = std::vector<double>(s.test_criteria.data(),
                                              s.test_criteria.data() + s.test_criteria.size());
        row["delta_m"] = s.delta_m;
        runs.push_back(row);
        std::cout << "seed " << seed << ":";
        for (Index k = 0; k < s.test_criteria.size(); ++k) {
            std::cout << " " << dataset.tasks[k].name << "=" << format_double(s.test_criteria(k));
        }
        std::cout << "\n";
    }
    if (runs.empty()) throw ConfigError("eval", "no saved models under '" + run_dir + "'");
    out["runs"] = runs;
    write_text(dir / "eval.json", out.dump(2) + "\n");
}

}  // namespace bayesagg::runner
