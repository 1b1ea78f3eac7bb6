#include "bayesagg/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace bayesagg::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Unit vector at `angle_deg` from `ref` inside the plane spanned by ref and
// a random orthogonal direction. sin/cos snapped to zero near exact
// multiples of pi so 180 degrees yields -ref exactly.
Vector rotated_direction(const Vector& ref, double angle_deg, std::mt19937_64& engine) {
    const Index d = ref.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector ortho(d);
    for (int attempt = 0; attempt < 16; ++attempt) {
        for (Index i = 0; i < d; ++i) ortho(i) = normal(engine);
        ortho -= ref * ref.dot(ortho);
        if (ortho.norm() > 1e-8) break;
    }
    ortho.normalize();
    const double theta = angle_deg * kPi / 180.0;
    double c = std::cos(theta);
    double s = std::sin(theta);
    if (std::abs(s) < 1e-15) s = 0.0;
    if (std::abs(c) < 1e-15) c = 0.0;
    return c * ref + s * ortho;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 0 || spec.input_dim < 1 || spec.tasks.empty()) {
        throw DimensionError("generate_synthetic: invalid spec");
    }
    const RngStream root{spec.seed, 0x5d471e};
    Dataset ds;
    ds.features = Matrix(spec.input_dim, spec.n);
    {
        auto engine = make_engine(root.derive(1));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index j = 0; j < spec.n; ++j) {
            for (Index i = 0; i < spec.input_dim; ++i) ds.features(i, j) = normal(engine);
        }
    }

    auto dir_engine = make_engine(root.derive(2));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector ref(spec.input_dim);
    for (Index i = 0; i < spec.input_dim; ++i) ref(i) = normal(dir_engine);
    ref.normalize();

    int task_id = 0;
    for (const SyntheticTaskSpec& t : spec.tasks) {
        if (t.conflict_angle < 0.0 || t.conflict_angle > 180.0) {
            throw DimensionError("generate_synthetic: conflict angle outside [0, 180]");
        }
        TaskSpec task;
        task.name = "task" + std::to_string(task_id);
        task.kind = t.kind;
        task.outputs = t.outputs;
        auto engine = make_engine(root.derive(3, static_cast<std::uint64_t>(task_id)));

        const Index rows = t.kind == TaskKind::kMulticlass ? t.outputs
                           : t.kind == TaskKind::kBinary   ? 1
                                                           : t.outputs;
        Matrix teacher(rows, spec.input_dim);
        for (Index r = 0; r < rows; ++r) {
            Vector w = rotated_direction(ref, t.conflict_angle, engine);
            // Spread multi-output/multi-class teachers a little so rows differ.
            if (r > 0) {
                Vector jitter(spec.input_dim);
                for (Index i = 0; i < spec.input_dim; ++i) jitter(i) = 0.25 * normal(engine);
                w = (w + jitter).normalized();
            }
            teacher.row(r) = w.transpose();
        }

        const Matrix logits = teacher * ds.features;
        Matrix label;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        switch (t.kind) {
            case TaskKind::kRegression: {
                label = logits;
                if (t.noise > 0.0) {
                    for (Index j = 0; j < label.cols(); ++j) {
                        for (Index r = 0; r < label.rows(); ++r) {
                            label(r, j) += t.noise * normal(engine);
                        }
                    }
                }
                break;
            }
            case TaskKind::kBinary: {
                label = Matrix(1, spec.n);
                for (Index j = 0; j < spec.n; ++j) {
                    const double p = bayes_classification::sigmoid(3.0 * logits(0, j));
                    double y = unif(engine) < p ? 1.0 : 0.0;
                    if (t.noise > 0.0 && unif(engine) < t.noise) y = 1.0 - y;
                    label(0, j) = y;
                }
                break;
            }
            case TaskKind::kMulticlass: {
                label = Matrix(1, spec.n);
                for (Index j = 0; j < spec.n; ++j) {
                    const Vector p = bayes_classification::softmax(3.0 * logits.col(j));
                    double u = unif(engine);
                    Index cls = 0;
                    double cum = 0.0;
                    for (Index c = 0; c < t.outputs; ++c) {
                        cum += p(c);
                        if (u <= cum) {
                            cls = c;
                            break;
                        }
                        cls = c;
                    }
                    if (t.noise > 0.0 && unif(engine) < t.noise) {
                        cls = static_cast<Index>(unif(engine) * t.outputs);
                        cls = std::min(cls, t.outputs - 1);
                    }
                    label(0, j) = static_cast<double>(cls);
                }
                break;
            }
        }
        ds.tasks.push_back(task);
        ds.labels.push_back(std::move(label));
        ds.teacher_weights.push_back(std::move(teacher));
        ++task_id;
    }
    ds.norm.assign(ds.tasks.size(), {});
    return ds;
}

Dataset load_csv(const std::string& path, const std::vector<TaskSpec>& tasks) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_csv: cannot open '" + path + "'", 0, 0);

    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    Index total_cols = -1;
    // Header row is required; column names are not interpreted.
    if (!std::getline(in, line)) throw ParseError("load_csv: missing header row", 1, 0);
    ++lineno;
    {
        total_cols = static_cast<Index>(std::count(line.begin(), line.end(), ',')) + 1;
    }
    Index label_cols = 0;
    for (const TaskSpec& t : tasks) label_cols += t.label_columns();
    const Index feature_cols = total_cols - label_cols;
    if (feature_cols < 1) {
        throw ParseError("load_csv: fewer columns than declared labels", 1, 0);
    }

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(total_cols);
        std::stringstream ss(line);
        std::string cell;
        long col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                // Trailing whitespace is fine, trailing junk is not.
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) {
                    ++used;
                }
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("load_csv: bad value '" + cell + "' at row " +
                                     std::to_string(lineno) + ", column " + std::to_string(col),
                                 lineno, col);
            }
        }
        if (static_cast<Index>(row.size()) != total_cols) {
            throw ParseError("load_csv: row " + std::to_string(lineno) + " has " +
                                 std::to_string(row.size()) + " cells, expected " +
                                 std::to_string(total_cols),
                             lineno, static_cast<long>(row.size()));
        }
        rows.push_back(std::move(row));
    }

    const Index n = static_cast<Index>(rows.size());
    Dataset ds;
    ds.tasks = tasks;
    ds.features = Matrix(feature_cols, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < feature_cols; ++i) ds.features(i, j) = rows[j][i];
    }
    Index offset = feature_cols;
    for (const TaskSpec& t : tasks) {
        const Index cols = t.label_columns();
        Matrix label(cols, n);
        for (Index j = 0; j < n; ++j) {
            for (Index c = 0; c < cols; ++c) label(c, j) = rows[j][offset + c];
        }
        if (t.kind == TaskKind::kBinary) {
            for (Index j = 0; j < n; ++j) {
                if (label(0, j) != 0.0 && label(0, j) != 1.0) {
                    throw LabelOutOfRangeError("load_csv: binary label not in {0,1} for task '" +
                                               t.name + "', row " + std::to_string(j + 2));
                }
            }
        } else if (t.kind == TaskKind::kMulticlass) {
            for (Index j = 0; j < n; ++j) {
                const double v = label(0, j);
                if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(t.outputs)) {
                    throw LabelOutOfRangeError("load_csv: class id out of range for task '" +
                                               t.name + "', row " + std::to_string(j + 2));
                }
            }
        }
        ds.labels.push_back(std::move(label));
        offset += cols;
    }
    ds.norm.assign(ds.tasks.size(), {});
    return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_csv: cannot open '" + path + "'", 0, 0);
    out.precision(17);
    for (Index i = 0; i < dataset.input_dim(); ++i) {
        out << "x" << i << ",";
    }
    bool first = true;
    for (Index k = 0; k < dataset.task_count(); ++k) {
        const TaskSpec& t = dataset.tasks[k];
        for (Index c = 0; c < t.label_columns(); ++c) {
            if (!first) out << ",";
            out << t.name << (t.label_columns() > 1 ? "_" + std::to_string(c) : "");
            first = false;
        }
    }
    out << "\n";
    for (Index j = 0; j < dataset.size(); ++j) {
        for (Index i = 0; i < dataset.input_dim(); ++i) out << dataset.features(i, j) << ",";
        first = true;
        for (Index k = 0; k < dataset.task_count(); ++k) {
            for (Index c = 0; c < dataset.labels[k].rows(); ++c) {
                if (!first) out << ",";
                out << dataset.labels[k](c, j);
                first = false;
            }
        }
        out << "\n";
    }
}

void normalize_targets(Dataset& dataset, const std::vector<Index>& task_ids) {
    if (dataset.split.train.empty()) {
        throw EmptyInputError("normalize_targets: train split must be set first");
    }
    for (Index k : task_ids) {
        if (k < 0 || k >= dataset.task_count() ||
            dataset.tasks[k].kind != TaskKind::kRegression) {
            throw DimensionError("normalize_targets: task id is not a regression task");
        }
        Matrix& label = dataset.labels[k];
        std::vector<NormStats> stats(label.rows());
        for (Index r = 0; r < label.rows(); ++r) {
            double mean = 0.0;
            for (Index j : dataset.split.train) mean += label(r, j);
            mean /= static_cast<double>(dataset.split.train.size());
            double var = 0.0;
            for (Index j : dataset.split.train) {
                const double d = label(r, j) - mean;
                var += d * d;
            }
            var /= static_cast<double>(dataset.split.train.size());  // population convention
            if (var <= 0.0) {
                throw ZeroVarianceError("normalize_targets: constant target column in task " +
                                        std::to_string(k));
            }
            const double sd = std::sqrt(var);
            label.row(r) = (label.row(r).array() - mean) / sd;
            stats[r] = NormStats{mean, sd};
        }
        dataset.norm[k] = std::move(stats);
    }
}

Split make_split(const Dataset& dataset, double train_frac, double val_frac,
                 const RngStream& rng) {
    const Index n = dataset.size();
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw DimensionError("make_split: bad fractions");
    }

    // Stratum per row: first classification task's label, else quantile bin
    // of the first regression target (first output).
    std::vector<int> stratum(n, 0);
    Index cls_task = -1, reg_task = -1;
    for (Index k = 0; k < dataset.task_count(); ++k) {
        if (dataset.tasks[k].kind != TaskKind::kRegression) {
            if (cls_task < 0) cls_task = k;
        } else if (reg_task < 0) {
            reg_task = k;
        }
    }
    if (cls_task >= 0) {
        for (Index j = 0; j < n; ++j) {
            stratum[j] = static_cast<int>(dataset.labels[cls_task](0, j));
        }
    } else if (reg_task >= 0 && n > 0) {
        const int bins = static_cast<int>(std::min<Index>(10, n));
        std::vector<Index> order(n);
        std::iota(order.begin(), order.end(), Index{0});
        const Matrix& y = dataset.labels[reg_task];
        std::sort(order.begin(), order.end(),
                  [&](Index a, Index b) { return y(0, a) < y(0, b); });
        for (Index pos = 0; pos < n; ++pos) {
            stratum[order[pos]] = static_cast<int>((pos * bins) / n);
        }
    }

    std::map<int, std::vector<Index>> groups;
    for (Index j = 0; j < n; ++j) groups[stratum[j]].push_back(j);

    auto engine = make_engine(rng);
    // Global targets by largest remainder, then per-stratum quota walk that
    // always assigns to the split with the largest outstanding deficit.
    const double fracs[3] = {train_frac, val_frac, 1.0 - train_frac - val_frac};
    double want[3];
    Index given[3] = {0, 0, 0};
    for (int s = 0; s < 3; ++s) want[s] = fracs[s] * static_cast<double>(n);

    Split split;
    std::vector<Index>* buckets[3] = {&split.train, &split.val, &split.test};
    for (auto& [key, members] : groups) {
        std::shuffle(members.begin(), members.end(), engine);
        for (Index j : members) {
            int best = 0;
            double best_deficit = -1e300;
            for (int s = 0; s < 3; ++s) {
                const double deficit = want[s] - static_cast<double>(given[s]);
                if (deficit > best_deficit + 1e-12) {
                    best_deficit = deficit;
                    best = s;
                }
            }
            buckets[best]->push_back(j);
            ++given[best];
        }
    }
    for (auto* b : buckets) std::sort(b->begin(), b->end());
    return split;
}

Matrix gather_columns(const Matrix& m, const std::vector<Index>& idx) {
    Matrix out(m.rows(), static_cast<Index>(idx.size()));
    for (Index j = 0; j < out.cols(); ++j) out.col(j) = m.col(idx[j]);
    return out;
}

}  // namespace bayesagg::data
