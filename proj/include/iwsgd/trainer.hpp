#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iwsgd/dataset.hpp"
#include "iwsgd/net.hpp"
#include "iwsgd/objective.hpp"

namespace iwsgd::train {

enum class BudgetKind { Updates, ForwardPasses };

// Iwsgd weights each sample's gradient by its normalized likelihood;
// Unweighted averages them plainly (the conventional-dropout update).
enum class Estimator { Iwsgd, Unweighted };

struct TrainConfig {
    net::NetworkSpec network;
    std::size_t samples = 1;  // S, noise samples per example per step
    Estimator estimator = Estimator::Iwsgd;
    double learning_rate = 0.1;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::size_t batch_size = 32;
    BudgetKind budget_kind = BudgetKind::Updates;
    std::uint64_t budget = 0;
    std::uint64_t master_seed = 1;
    std::size_t eval_every = 100;
    std::size_t workers = 0;  // 0: IWSGD_WORKERS env var, else hardware concurrency

    void validate() const;
    std::uint64_t total_steps() const;  // steps the budget affords
};

struct StepReport {
    std::uint64_t step = 0;
    double mean_objective = 0.0;   // batch mean of the per-example S-sample objective
    double mean_max_weight = 0.0;  // batch mean of max importance weight, in [1/S, 1]
    double batch_error = 0.0;      // sampled training error (first noise sample's argmax)
    std::uint64_t degenerate_count = 0;
    double wall_ms = 0.0;
};

struct EvalResult {
    double nll = 0.0;
    double error_rate = 0.0;
};

struct EvalEvent {
    std::uint64_t step = 0;
    std::string split;
    EvalResult result;
};

struct TrainResult {
    net::NetworkParams params;
    std::vector<StepReport> steps;
    std::vector<EvalEvent> evals;
    std::uint64_t updates = 0;
    std::uint64_t forward_passes = 0;
};

// Mutable optimization state threaded through train_step calls.
struct TrainState {
    TrainConfig config;
    net::NetworkParams params;
    net::NetworkParams velocity;
    std::uint64_t step = 0;  // completed updates
    std::uint64_t forward_passes = 0;

    explicit TrainState(TrainConfig cfg);
};

struct BatchItem {
    std::uint64_t example_id = 0;  // dataset row; part of the draw coordinates
    Tensor x;
    std::size_t y = 0;
};

// One update: S draws and evaluations per example (parallelizable), then a
// fixed-order reduction and a momentum-SGD update with decoupled weight
// decay. epoch/batch_in_epoch feed the draw coordinates.
StepReport train_step(TrainState& state, const std::vector<BatchItem>& batch, std::uint64_t epoch,
                      std::uint64_t batch_in_epoch);

// Full run on the dataset's train split, evaluating the validation split
// every eval_every updates.
TrainResult train(const TrainConfig& config, const data::Dataset& dataset);

// Deterministic inference pass: mean NLL and argmax error rate (ties broken
// toward the lowest class index).
EvalResult evaluate(const net::NetworkParams& params, const data::Split& split,
                    const net::NetworkSpec& spec);

// Worker-count resolution: explicit value, else IWSGD_WORKERS, else hardware.
std::size_t resolve_workers(std::size_t configured);

}  // namespace iwsgd::train
