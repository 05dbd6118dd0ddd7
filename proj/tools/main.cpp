#include <CLI11.hpp>

#include "iwsgd/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"feed-forward training engine with multi-sample importance-weighted dropout"};
    app.require_subcommand(1);

    std::string train_config, bounds_config, compare_config;
    std::uint64_t gc_seed = 1;
    std::size_t gc_trials = 200;
    bool gc_corrupt = false;
    bool bounds_worked = false;

    CLI::App* train = app.add_subcommand("train", "train per config, write metrics CSV");
    train->add_option("config", train_config, "config file")->required();

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference checks of the gradient paths");
    gradcheck->add_option("--seed", gc_seed, "base seed");
    gradcheck->add_option("--trials", gc_trials, "number of random configurations");
    gradcheck->add_flag("--corrupt", gc_corrupt,
                        "inject a gradient fault (verifies the check can fail)");

    CLI::App* bounds =
        app.add_subcommand("bounds", "exact bound hierarchy table for tiny networks");
    bounds->add_option("config", bounds_config, "config file");
    bounds->add_flag("--worked", bounds_worked, "run the closed-form single-unit instance");

    CLI::App* compare = app.add_subcommand("compare", "matched runs over S values and seeds");
    compare->add_option("config", compare_config, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return iwsgd::harness::cmd_train(train_config);
    if (gradcheck->parsed()) return iwsgd::harness::cmd_gradcheck(gc_seed, gc_trials, gc_corrupt);
    if (bounds->parsed()) {
        if (!bounds_worked && bounds_config.empty()) {
            std::fprintf(stderr, "config error: bounds requires a config file or --worked\n");
            return 2;
        }
        return iwsgd::harness::cmd_bounds(bounds_config, bounds_worked);
    }
    if (compare->parsed()) return iwsgd::harness::cmd_compare(compare_config);
    return 2;
}
