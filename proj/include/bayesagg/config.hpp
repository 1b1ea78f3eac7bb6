#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bayesagg/data.hpp"
#include "bayesagg/trainer.hpp"

namespace bayesagg {

struct DatasetConfig {
    enum class Source { kSynthetic, kCsv };
    Source source = Source::kSynthetic;
    SyntheticSpec synthetic;
    std::string csv_path;
    std::vector<TaskSpec> csv_tasks;
    double train_frac = 0.7;
    double val_frac = 0.15;
    bool normalize = false;
    std::uint64_t data_seed = 0;  // generation + split stream, independent of run seeds
};

struct ModelConfig {
    std::vector<Index> widths{16};
    Activation activation = Activation::kElu;
};

struct RunConfig {
    DatasetConfig dataset;
    ModelConfig model;
    TrainConfig training;  // training.seed is overridden per run by `seeds`
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "runs/out";
    std::optional<Vector> stl_values;  // fixed per-task references for delta_m
};

namespace config {

// Parsed INI-style sections: lines `key = value`, `[section]` headers,
// `#` comments. Duplicate keys keep the last value.
using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

SectionMap parse_ini(const std::string& text);
SectionMap parse_ini_file(const std::string& path);

RunConfig load(const std::string& path);
RunConfig from_sections(const SectionMap& sections);

// Canonical serialization with every field resolved; config.resolved content
// and the hashing base.
std::string resolved_text(const RunConfig& cfg);
std::uint64_t fnv1a(const std::string& text);
std::string config_hash(const RunConfig& cfg);

// "kind:outputs[:noise:angle]" lists; noise/angle only for synthetic specs.
std::vector<SyntheticTaskSpec> parse_synthetic_tasks(const std::string& text);
std::vector<TaskSpec> parse_csv_tasks(const std::string& text);

// Grid file: one key per line with a comma list of values. Supported keys:
// s, s_regression, s_classification, mc_samples, prior_variance.
struct GridCell {
    std::map<std::string, double> values;
    [[nodiscard]] std::string label() const;
};
std::vector<GridCell> load_grid(const std::string& path);
void apply_cell(RunConfig& cfg, const GridCell& cell);

}  // namespace config
}  // namespace bayesagg
