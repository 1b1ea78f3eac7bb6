#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "bayesagg/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"BayesAgg-MTL experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string grid_path;
    std::string run_dir;
    std::string methods_csv;
    long long seed_override = -1;

    CLI::App* train = app.add_subcommand("train", "train one method per the config");
    train->add_option("--config", config_path, "run config path")->required();
    train->add_option("--seed", seed_override, "override the config's seed list with one seed");

    CLI::App* compare = app.add_subcommand("compare", "run several methods against STL + delta_m");
    compare->add_option("--config", config_path, "run config path")->required();
    compare->add_option("--methods", methods_csv, "comma list, e.g. ls,bayesagg")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "grid search selected on validation delta_m");
    sweep->add_option("--config", config_path, "run config path")->required();
    sweep->add_option("--grid", grid_path, "grid file path")->required();

    CLI::App* eval = app.add_subcommand("eval", "re-evaluate a finished run directory");
    eval->add_option("--run-dir", run_dir, "directory produced by train")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            bayesagg::RunConfig cfg = bayesagg::config::load(config_path);
            if (seed_override >= 0) {
                cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
            }
            const std::string dir = bayesagg::runner::run_train(cfg);
            std::cout << "artifacts written to " << dir << "\n";
        } else if (compare->parsed()) {
            const bayesagg::RunConfig cfg = bayesagg::config::load(config_path);
            std::vector<bayesagg::Method> methods;
            std::stringstream ss(methods_csv);
            std::string name;
            while (std::getline(ss, name, ',')) {
                if (!name.empty()) methods.push_back(bayesagg::method_from_string(name));
            }
            if (methods.empty()) throw bayesagg::ConfigError("methods", "no methods given");
            bayesagg::runner::run_compare(cfg, methods);
        } else if (sweep->parsed()) {
            const bayesagg::RunConfig cfg = bayesagg::config::load(config_path);
            const auto grid = bayesagg::config::load_grid(grid_path);
            bayesagg::runner::run_sweep(cfg, grid);
        } else if (eval->parsed()) {
            bayesagg::runner::run_eval(run_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
