#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bayesagg/config.hpp"
#include "bayesagg/metrics.hpp"

namespace bayesagg::runner {

struct EpochRecord {
    int epoch = 0;
    Vector train_losses;   // per task, epoch mean
    Vector val_criteria;   // per task (MAE / accuracy); empty val split -> NaN
    double val_delta_m = std::numeric_limits<double>::quiet_NaN();
    double lr = 0.0;
    Vector task_weights;   // per task alpha means; NaN outside the bayesagg phase
};

struct FitResult {
    TrainerState state;
    std::vector<EpochRecord> history;
    int best_epoch = -1;
};

// Per-task test criteria plus calibration metrics for classification tasks.
struct RunSummary {
    Method method = Method::kLS;
    std::uint64_t seed = 0;
    Vector test_criteria;
    std::vector<int> higher_is_better;
    double delta_m = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> ece;    // NaN for regression tasks
    std::vector<double> brier;  // NaN for regression tasks
};

Dataset build_dataset(const RunConfig& cfg);

// Train one method on one seed over the config's dataset/budget. STL
// references, when given, enable the validation delta_m column and the
// plateau scheduler/selection metric.
FitResult fit_method(const Dataset& dataset, const RunConfig& cfg, Method method,
                     std::uint64_t seed, const std::optional<Vector>& stl_values);

RunSummary evaluate(const TrainerState& state, const Dataset& dataset, const RunConfig& cfg,
                    Method method, std::uint64_t seed, const std::optional<Vector>& stl_values);

// Single-task reference values: one LS run per task under the same budget,
// evaluated on the test split. Used by delta_m.
Vector stl_reference(const Dataset& dataset, const RunConfig& cfg, std::uint64_t seed);

// Commands. Each returns the artifacts directory used; all of them throw
// ConfigError / numeric errors on failure.
std::string run_train(const RunConfig& cfg);
std::string run_compare(const RunConfig& cfg, const std::vector<Method>& methods);
std::string run_sweep(const RunConfig& cfg, const std::vector<config::GridCell>& grid);
void run_eval(const std::string& run_dir);

// Sweep selection: lowest mean validation delta_m; ties break toward the
// smaller s, then fewer samples, then smaller prior variance.
struct SweepCell {
    config::GridCell cell;
    double val_delta_m = 0.0;
};
std::size_t select_best_cell(const std::vector<SweepCell>& cells);

// Worker cap for sweep cells (env var), >= 1.
int worker_count();

}  // namespace bayesagg::runner
