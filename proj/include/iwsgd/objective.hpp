#pragma once

#include <cstdint>
#include <span>

#include "iwsgd/net.hpp"

namespace iwsgd::obj {

// One forward/backward evaluation of a single noise sample for one example.
struct SampleEvaluation {
    double log_lik = 0.0;
    net::NetworkParams grad;
    net::DrawCoords draw_id;
};

struct ImportanceWeights {
    std::vector<double> weights;  // in [0,1], sum to 1
};

// weights_i = exp(log_liks_i - log_sum_exp(log_liks)): the normalized
// likelihood of each sample. Throws DegenerateLikelihoodError when every
// entry is -inf or any entry is NaN.
ImportanceWeights importance_weights(std::span<const double> log_liks);

// log (1/S) sum_i exp(log_liks_i), the per-example multi-sample objective.
double lsgd_inner(std::span<const double> log_liks);

struct CombineResult {
    net::NetworkParams grad;
    ImportanceWeights weights;
    double objective = 0.0;
};

// Weighted average of per-sample gradients with normalized-likelihood
// weights; reduces in sample-index order so results are reproducible.
CombineResult iwsgd_combine(std::span<const SampleEvaluation> samples);

// log E_mask[p(y|mask)] by exhaustive enumeration of every bernoulli mask
// over all noise units. Bernoulli mode only; throws CapacityError when the
// unit count exceeds max_units.
double marginal_exact(const net::NetworkSpec& spec, const net::NetworkParams& params,
                      const Tensor& x, std::size_t y, std::size_t max_units = 22);

// E over all S-tuples of masks (iid with replacement) of lsgd_inner, each
// tuple weighted by its product probability. Throws CapacityError when
// (2^k)^S exceeds max_tuples.
double lsgd_exact(const net::NetworkSpec& spec, const net::NetworkParams& params, const Tensor& x,
                  std::size_t y, std::size_t S, std::uint64_t max_tuples = std::uint64_t{1} << 24);

struct BoundEstimate {
    double value = 0.0;
    double std_error = 0.0;  // sample standard deviation / sqrt(n_outer)
    std::size_t n_outer = 0;
    std::size_t S = 0;
    std::size_t degenerate = 0;
};

// Monte Carlo estimate of the S-sample objective: mean and standard error of
// lsgd_inner over n_outer independent S-tuples of draws.
BoundEstimate lsgd_mc(const net::NetworkSpec& spec, const net::NetworkParams& params,
                      const Tensor& x, std::size_t y, std::size_t S, std::size_t n_outer,
                      std::uint64_t seed);

}  // namespace iwsgd::obj
