#include "iwsgd/objective.hpp"

#include <cmath>
#include <limits>

#include "iwsgd/logmath.hpp"

namespace iwsgd::obj {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_not_degenerate(std::span<const double> log_liks) {
    if (log_liks.empty()) throw DimensionError("empty log-likelihood sequence");
    bool any_finite = false;
    for (double l : log_liks) {
        if (std::isnan(l)) {
            throw DegenerateLikelihoodError("NaN log-likelihood among noise samples");
        }
        if (l > kNegInf) any_finite = true;
    }
    if (!any_finite) {
        throw DegenerateLikelihoodError(
            "all noise samples underflowed to zero likelihood; importance weights undefined");
    }
}

}  // namespace

ImportanceWeights importance_weights(std::span<const double> log_liks) {
    check_not_degenerate(log_liks);
    const double lse = log_sum_exp(log_liks);
    ImportanceWeights out;
    out.weights.reserve(log_liks.size());
    for (double l : log_liks) out.weights.push_back(std::exp(l - lse));
    return out;
}

double lsgd_inner(std::span<const double> log_liks) {
    check_not_degenerate(log_liks);
    double m = kNegInf;
    for (double l : log_liks)
        if (l > m) m = l;
    double acc = 0.0;
    for (double l : log_liks) acc += std::exp(l - m);
    // grouping the two logs keeps constant sequences exact: acc == S gives
    // back m bit for bit (the S=1 reduction relies on this)
    return m + (std::log(acc) - std::log(static_cast<double>(log_liks.size())));
}

CombineResult iwsgd_combine(std::span<const SampleEvaluation> samples) {
    if (samples.empty()) throw DimensionError("iwsgd_combine with no samples");
    std::vector<double> log_liks;
    log_liks.reserve(samples.size());
    for (const SampleEvaluation& s : samples) log_liks.push_back(s.log_lik);

    CombineResult result;
    result.weights = importance_weights(log_liks);
    result.objective = lsgd_inner(log_liks);
    result.grad = samples[0].grad.zeros_like();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        params_axpy(result.weights.weights[i], samples[i].grad, result.grad);
    }
    return result;
}

namespace {

struct MaskTable {
    std::vector<double> log_prob;  // per mask, sum over units of log keep / log (1-keep)
    std::vector<double> log_lik;   // per mask, log p(y | mask)
    std::size_t units = 0;
};

// Evaluates every one of the 2^k joint masks; bit j of the mask index drives
// flattened noise unit j (layer-major).
MaskTable enumerate_masks(const net::NetworkSpec& spec, const net::NetworkParams& params,
                          const Tensor& x, std::size_t y, std::size_t max_units,
                          const char* caller) {
    spec.validate();
    const auto indices = spec.noise_layer_indices();
    const auto widths = spec.noise_widths();
    for (std::size_t idx : indices) {
        if (spec.layers[idx].noise.mode != net::NoiseMode::BernoulliMultiply) {
            throw UnsupportedModeError(std::string(caller) +
                                       " supports bernoulli noise only; layer " +
                                       std::to_string(idx) + " is gaussian");
        }
    }
    std::size_t k = 0;
    for (std::size_t w : widths) k += w;
    if (k > max_units) {
        throw CapacityError(std::string(caller) + ": " + std::to_string(k) +
                            " noise units exceed the enumeration limit of " +
                            std::to_string(max_units));
    }

    MaskTable table;
    table.units = k;
    const std::uint64_t n_masks = std::uint64_t{1} << k;
    table.log_prob.reserve(n_masks);
    table.log_lik.reserve(n_masks);

    net::NoiseDraw draw;
    for (std::size_t w : widths) draw.eps.emplace_back(std::vector<std::size_t>{w});

    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        double log_prob = 0.0;
        std::size_t bit = 0;
        for (std::size_t n = 0; n < widths.size(); ++n) {
            const double keep = spec.layers[indices[n]].noise.keep_prob;
            for (std::size_t u = 0; u < widths[n]; ++u, ++bit) {
                const bool on = (mask >> bit) & 1u;
                draw.eps[n][u] = on ? 1.0 : 0.0;
                log_prob += on ? std::log(keep) : std::log(1.0 - keep);
            }
        }
        const net::ForwardTrace trace =
            net::forward(spec, params, x, &draw, net::Phase::Train);
        table.log_prob.push_back(log_prob);
        table.log_lik.push_back(net::log_likelihood(trace, y));
    }
    return table;
}

}  // namespace

double marginal_exact(const net::NetworkSpec& spec, const net::NetworkParams& params,
                      const Tensor& x, std::size_t y, std::size_t max_units) {
    const MaskTable table = enumerate_masks(spec, params, x, y, max_units, "marginal_exact");
    std::vector<double> terms(table.log_prob.size());
    for (std::size_t m = 0; m < terms.size(); ++m) {
        terms[m] = table.log_prob[m] + table.log_lik[m];
    }
    return log_sum_exp(terms);
}

namespace {

// Expectation over iid S-tuples, enumerated as non-decreasing index multisets
// with multinomial multiplicity. Groups permutations of the same masks, which
// leaves the expectation unchanged and cuts the work ~S! times.
struct TupleEnumerator {
    const MaskTable& table;
    std::size_t S;
    std::vector<std::size_t> picked;
    double acc = 0.0;

    explicit TupleEnumerator(const MaskTable& t, std::size_t s) : table(t), S(s) {}

    static double factorial(std::size_t n) {
        double f = 1.0;
        for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
        return f;
    }

    double multiplicity() const {
        double denom = 1.0;
        std::size_t run = 1;
        for (std::size_t i = 1; i < picked.size(); ++i) {
            if (picked[i] == picked[i - 1]) {
                ++run;
            } else {
                denom *= factorial(run);
                run = 1;
            }
        }
        denom *= factorial(run);
        return factorial(S) / denom;
    }

    void recurse(std::size_t depth, std::size_t first, double log_prob_sum) {
        if (depth == S) {
            std::vector<double> liks(S);
            for (std::size_t i = 0; i < S; ++i) liks[i] = table.log_lik[picked[i]];
            const double weight = multiplicity() * std::exp(log_prob_sum);
            acc += weight * lsgd_inner(liks);
            return;
        }
        for (std::size_t m = first; m < table.log_prob.size(); ++m) {
            picked.push_back(m);
            recurse(depth + 1, m, log_prob_sum + table.log_prob[m]);
            picked.pop_back();
        }
    }
};

}  // namespace

double lsgd_exact(const net::NetworkSpec& spec, const net::NetworkParams& params, const Tensor& x,
                  std::size_t y, std::size_t S, std::uint64_t max_tuples) {
    if (S == 0) throw DimensionError("lsgd_exact requires S >= 1");
    std::size_t k = spec.noise_unit_count();
    // (2^k)^S must stay enumerable
    if (k >= 64 || static_cast<long double>(S) * static_cast<long double>(k) >
                       std::log2(static_cast<long double>(max_tuples)) + 1e-9) {
        throw CapacityError("lsgd_exact: tuple space 2^(" + std::to_string(k) + "*" +
                            std::to_string(S) + ") exceeds the limit of " +
                            std::to_string(max_tuples) + " tuples");
    }
    const MaskTable table = enumerate_masks(spec, params, x, y, 63, "lsgd_exact");
    TupleEnumerator e(table, S);
    e.picked.reserve(S);
    e.recurse(0, 0, 0.0);
    return e.acc;
}

BoundEstimate lsgd_mc(const net::NetworkSpec& spec, const net::NetworkParams& params,
                      const Tensor& x, std::size_t y, std::size_t S, std::size_t n_outer,
                      std::uint64_t seed) {
    if (S == 0) throw DimensionError("lsgd_mc requires S >= 1");
    if (n_outer < 2) throw DimensionError("lsgd_mc requires n_outer >= 2");
    spec.validate();

    std::vector<double> values;
    values.reserve(n_outer);
    std::vector<double> log_liks(S);
    std::size_t degenerate = 0;
    for (std::size_t r = 0; r < n_outer; ++r) {
        bool bad = false;
        for (std::size_t s = 0; s < S; ++s) {
            net::DrawCoords coords;
            coords.seed = seed;
            coords.epoch = r;
            coords.sample = static_cast<std::uint32_t>(s);
            coords.kind = rng::StreamKind::Mc;
            const net::NoiseDraw draw = net::sample_noise(spec, coords);
            const net::ForwardTrace trace = net::forward(spec, params, x, &draw, net::Phase::Train);
            log_liks[s] = net::log_likelihood(trace, y);
            if (!std::isfinite(log_liks[s])) bad = true;
        }
        if (bad) {
            ++degenerate;
            continue;
        }
        values.push_back(lsgd_inner(log_liks));
    }
    if (degenerate * 100 > n_outer) {
        throw DegenerateLikelihoodError("lsgd_mc: " + std::to_string(degenerate) + " of " +
                                        std::to_string(n_outer) + " replicates degenerate");
    }

    BoundEstimate est;
    est.n_outer = n_outer;
    est.S = S;
    est.degenerate = degenerate;

    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) {  // no randomness reached the likelihood
        est.value = lo;
        est.std_error = 0.0;
        return est;
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    est.value = mean;
    est.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return est;
}

}  // namespace iwsgd::obj
