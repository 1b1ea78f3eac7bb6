#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bayesagg/bayes_classification.hpp"
#include "bayesagg/common.hpp"
#include "bayesagg/rng.hpp"

namespace bayesagg {

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::kRegression;
    Index outputs = 1;  // regression arity, or class count for multiclass (1 for binary)

    [[nodiscard]] Index label_columns() const {
        return kind == TaskKind::kRegression ? outputs : 1;
    }
};

struct Split {
    std::vector<Index> train, val, test;
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

// Features are stored one example per column. Regression labels are
// outputs x n; binary/multiclass labels are 1 x n holding {0,1} or class
// ids. Teacher weights are kept when the data is synthetic (test hooks).
struct Dataset {
    Matrix features;  // d_x x n
    std::vector<TaskSpec> tasks;
    std::vector<Matrix> labels;  // per task
    Split split;
    std::vector<std::vector<NormStats>> norm;  // per task, per output (empty = raw)
    std::vector<Matrix> teacher_weights;       // per task (synthetic only)

    [[nodiscard]] Index size() const { return features.cols(); }
    [[nodiscard]] Index input_dim() const { return features.rows(); }
    [[nodiscard]] Index task_count() const { return static_cast<Index>(tasks.size()); }
};

struct SyntheticTaskSpec {
    TaskKind kind = TaskKind::kRegression;
    Index outputs = 1;
    double noise = 0.0;           // regression: additive std; classification: flip prob
    double conflict_angle = 0.0;  // degrees vs the reference direction, in [0, 180]
};

struct SyntheticSpec {
    Index n = 0;
    Index input_dim = 1;
    std::vector<SyntheticTaskSpec> tasks;
    std::uint64_t seed = 0;
};

namespace data {

// Linear/logistic/softmax teachers over x ~ N(0, I); task weight vectors sit
// at the requested angle from a shared reference direction.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Header row, feature columns first, then label columns per task in
// declaration order (regression tasks take `outputs` columns each).
Dataset load_csv(const std::string& path, const std::vector<TaskSpec>& tasks);
void save_csv(const Dataset& dataset, const std::string& path);

// Z-score regression targets in place. Statistics come from the train split
// only (population std) and apply to every split.
void normalize_targets(Dataset& dataset, const std::vector<Index>& task_ids);

// Disjoint covering split with proportions honored to +-1 row; stratified by
// the first classification task's label when one exists, otherwise by
// quantile bins of the first regression target.
Split make_split(const Dataset& dataset, double train_frac, double val_frac,
                 const RngStream& rng);

Matrix gather_columns(const Matrix& m, const std::vector<Index>& idx);

}  // namespace data
}  // namespace bayesagg
