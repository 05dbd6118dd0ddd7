#pragma once

#include <map>
#include <string>
#include <vector>

#include "iwsgd/dataset.hpp"
#include "iwsgd/trainer.hpp"

namespace iwsgd::harness {

// Flat key=value experiment configuration. Every key is enumerated here and
// validated up front; unknown keys are rejected so sweep typos fail loudly.
struct ExperimentConfig {
    // dataset
    std::string dataset;  // blobs | spirals | idx
    std::uint64_t data_seed = 1;
    std::size_t blobs_per_class = 200;
    std::size_t blobs_classes = 3;
    std::size_t blobs_dim = 2;
    double blobs_radius = 3.0;
    double blobs_sigma = 1.0;
    std::size_t spirals_per_class = 500;
    double spirals_sigma = 0.05;
    double spirals_turns = 1.75;
    std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
    std::size_t idx_limit = 0;

    // network
    std::vector<std::size_t> hidden{64};
    std::string activation = "relu";      // relu | tanh
    std::string noise_mode = "bernoulli";  // bernoulli | gaussian | none
    double keep_prob = 0.5;
    double noise_sigma = 0.1;

    // training
    std::size_t samples = 1;
    std::string estimator = "iwsgd";  // iwsgd | unweighted
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch_size = 32;
    std::string budget_kind = "updates";  // updates | forward_passes
    std::uint64_t budget = 1000;
    std::uint64_t master_seed = 1;
    std::size_t eval_every = 100;

    // harness
    std::string output_dir;
    std::vector<std::size_t> compare_s{1};
    std::vector<std::uint64_t> compare_seeds{1};
    std::size_t bounds_trials = 1;

    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse_map(const std::map<std::string, std::string>& kv);

    void require(const std::vector<std::string>& keys) const;  // presence of required fields

    data::Dataset make_dataset() const;
    net::NetworkSpec make_network(std::size_t input_dim, std::size_t classes) const;
    train::TrainConfig make_train_config(const data::Dataset& ds) const;
};

}  // namespace iwsgd::harness
