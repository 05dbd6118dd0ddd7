#include "iwsgd/logmath.hpp"

#include <cmath>
#include <limits>

namespace iwsgd {

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw DimensionError("log_sum_exp of empty sequence");
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > m) m = x;
    if (std::isinf(m) && m < 0) {
        throw DegenerateLikelihoodError("log_sum_exp: all inputs are -inf (zero total mass)");
    }
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

Tensor log_softmax(const Tensor& logits) {
    if (logits.rank() != 1) {
        throw DimensionError("log_softmax expects rank-1 logits, got " + shape_str(logits));
    }
    const double lse = log_sum_exp(logits.values());
    Tensor out = logits;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lse;
    return out;
}

}  // namespace iwsgd
