#pragma once

#include <cstdint>
#include <string>

#include "iwsgd/config.hpp"
#include "iwsgd/objective.hpp"

namespace iwsgd::harness {

// Exit codes shared by the CLI: 0 success, 1 check failure, 2 config or
// capacity error, 3 degenerate-likelihood abort.

int cmd_train(const std::string& config_path);
int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt = false);
int cmd_bounds(const std::string& config_path, bool worked_instance = false);
int cmd_compare(const std::string& config_path);

// ---- machinery reused by the test suites ----

struct GradcheckResult {
    double worst_rel_err = 0.0;
    std::uint64_t worst_trial_seed = 0;
    bool pass = false;
};

// trials random (network, draw, example) configurations; checks the
// per-sample log-likelihood gradient and the combined multi-sample gradient
// against central finite differences (step 1e-4, relative error threshold
// 1e-6 with denominator max(|a|, |fd|, 1e-8)). corrupt injects a fault into
// one analytic gradient to prove the check can fail.
GradcheckResult run_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt = false);

struct BoundsRow {
    double lsgd1 = 0.0, lsgd2 = 0.0, lsgd3 = 0.0, marginal = 0.0;
    bool chain_holds = false;
};

BoundsRow bounds_row(const net::NetworkSpec& spec, const net::NetworkParams& params,
                     const Tensor& x, std::size_t y);

// The closed-form single-unit instance: keep 0.5, p(y|kept) = 0.8,
// p(y|dropped) = 0.2.
struct WorkedInstance {
    net::NetworkSpec spec;
    net::NetworkParams params;
    Tensor x;
    std::size_t y = 0;
};
WorkedInstance worked_instance();

// metrics CSV schema (fixed column set and order)
std::string metrics_header();
std::string metrics_row(std::uint64_t step, const std::string& split, double nll,
                        double error_rate, double lsgd_estimate, double mean_max_weight,
                        std::uint64_t degenerate_count, double wall_ms);

// Runs training per config and writes metrics + run log into out_dir; returns
// final test evaluation and budget accounting.
struct RunOutcome {
    double final_test_error = 0.0;
    double final_test_nll = 0.0;
    std::uint64_t updates = 0;
    std::uint64_t forward_passes = 0;
};
RunOutcome run_training(const ExperimentConfig& cfg, const data::Dataset& dataset,
                        std::uint64_t master_seed, std::size_t samples,
                        const std::string& metrics_path, const std::string& log_path);

}  // namespace iwsgd::harness
