#pragma once

#include <span>

#include "iwsgd/tensor.hpp"

namespace iwsgd {

// log(sum_i exp(v_i)) computed by shifting by max(v). Tolerates -inf entries;
// throws DegenerateLikelihoodError if every entry is -inf (zero total mass).
double log_sum_exp(std::span<const double> v);

// out_i = v_i - log_sum_exp(v); exp(out) sums to 1. Rank-1 input.
Tensor log_softmax(const Tensor& logits);

}  // namespace iwsgd
