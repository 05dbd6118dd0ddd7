#include "iwsgd/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>

namespace iwsgd::train {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fork-join over [0, n): results must land in per-index slots; the caller
// does any order-sensitive reduction afterwards.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(workers, n);
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::size_t argmax_lowest(const Tensor& logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

}  // namespace

std::size_t resolve_workers(std::size_t configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("IWSGD_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void TrainConfig::validate() const {
    network.validate();
    if (samples == 0) throw std::invalid_argument("samples (S) must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (eval_every == 0) throw std::invalid_argument("eval_every must be >= 1");
}

std::uint64_t TrainConfig::total_steps() const {
    if (budget_kind == BudgetKind::Updates) return budget;
    const std::uint64_t per_step = static_cast<std::uint64_t>(batch_size) * samples;
    return budget / per_step;
}

TrainState::TrainState(TrainConfig cfg) : config(std::move(cfg)) {
    config.validate();
    params = net::init_params(config.network, config.master_seed);
    velocity = params.zeros_like();
}

StepReport train_step(TrainState& state, const std::vector<BatchItem>& batch, std::uint64_t epoch,
                      std::uint64_t batch_in_epoch) {
    if (batch.empty()) throw DimensionError("train_step: empty batch");
    const auto t0 = std::chrono::steady_clock::now();

    const TrainConfig& cfg = state.config;
    const std::size_t S = cfg.samples;
    const std::size_t n_tasks = batch.size() * S;

    std::vector<obj::SampleEvaluation> evals(n_tasks);
    std::vector<std::size_t> first_sample_pred(batch.size());

    // Evaluations are pure in (params, coordinates): any thread may compute
    // any slot and the result is schedule-independent.
    parallel_for(n_tasks, resolve_workers(cfg.workers), [&](std::size_t t) {
        const std::size_t e = t / S;
        const std::size_t s = t % S;
        const BatchItem& item = batch[e];
        net::DrawCoords coords;
        coords.seed = cfg.master_seed;
        coords.epoch = epoch;
        coords.batch = batch_in_epoch;
        coords.example = item.example_id;
        coords.sample = static_cast<std::uint32_t>(s);
        const net::NoiseDraw draw = net::sample_noise(cfg.network, coords);
        const net::ForwardTrace trace =
            net::forward(cfg.network, state.params, item.x, &draw, net::Phase::Train);
        obj::SampleEvaluation eval;
        eval.log_lik = net::log_likelihood(trace, item.y);
        eval.grad = net::backward(cfg.network, state.params, trace, item.y);
        eval.draw_id = coords;
        if (s == 0) first_sample_pred[e] = argmax_lowest(trace.logits());
        evals[t] = std::move(eval);
    });

    // Reduction in (example, sample) order; nothing here depends on the
    // worker schedule above.
    StepReport report;
    report.step = state.step + 1;
    net::NetworkParams batch_grad = state.params.zeros_like();
    double sum_objective = 0.0, sum_max_weight = 0.0;
    std::size_t batch_errors = 0;
    for (std::size_t e = 0; e < batch.size(); ++e) {
        const std::span<const obj::SampleEvaluation> samples(evals.data() + e * S, S);
        for (const obj::SampleEvaluation& s : samples)
            if (s.log_lik == kNegInf) ++report.degenerate_count;
        try {
            if (cfg.estimator == Estimator::Iwsgd) {
                obj::CombineResult combined = obj::iwsgd_combine(samples);
                params_axpy(1.0, combined.grad, batch_grad);
                sum_objective += combined.objective;
                double mw = 0.0;
                for (double w : combined.weights.weights) mw = std::max(mw, w);
                sum_max_weight += mw;
            } else {
                std::vector<double> log_liks;
                log_liks.reserve(S);
                for (const obj::SampleEvaluation& s : samples) log_liks.push_back(s.log_lik);
                net::NetworkParams mean_grad = state.params.zeros_like();
                const double w = 1.0 / static_cast<double>(S);
                for (const obj::SampleEvaluation& s : samples) params_axpy(w, s.grad, mean_grad);
                params_axpy(1.0, mean_grad, batch_grad);
                sum_objective += obj::lsgd_inner(log_liks);
                sum_max_weight += w;
            }
        } catch (const DegenerateLikelihoodError& err) {
            throw DegenerateLikelihoodError("example " + std::to_string(batch[e].example_id) +
                                            " at step " + std::to_string(report.step) + ": " +
                                            err.what());
        }
        if (first_sample_pred[e] != batch[e].y) ++batch_errors;
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    params_scale(batch_grad, inv_b);

    // v <- mu v + g; theta <- theta (1 - lr wd) + lr v. The decay term never
    // passes through the importance weighting.
    const double lr = cfg.learning_rate, mu = cfg.momentum, wd = cfg.weight_decay;
    for (std::size_t l = 0; l < state.params.dense.size(); ++l) {
        auto update = [&](Tensor& theta, Tensor& vel, const Tensor& g) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                vel[i] = mu * vel[i] + g[i];
                theta[i] = theta[i] * (1.0 - lr * wd) + lr * vel[i];
            }
        };
        update(state.params.dense[l].weight, state.velocity.dense[l].weight,
               batch_grad.dense[l].weight);
        if (state.params.dense[l].has_bias) {
            update(state.params.dense[l].bias, state.velocity.dense[l].bias,
                   batch_grad.dense[l].bias);
        }
    }

    state.step += 1;
    state.forward_passes += batch.size() * S;
    report.mean_objective = sum_objective * inv_b;
    report.mean_max_weight = sum_max_weight * inv_b;
    report.batch_error = static_cast<double>(batch_errors) * inv_b;
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng::Stream stream(seed, rng::StreamKind::Shuffle, epoch);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(stream.next_u64() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

Tensor split_row(const data::Split& split, std::size_t r) {
    const std::size_t d = split.features.dim(1);
    Tensor x({d});
    for (std::size_t c = 0; c < d; ++c) x[c] = split.features.at(r, c);
    return x;
}

}  // namespace

TrainResult train(const TrainConfig& config, const data::Dataset& dataset) {
    config.validate();
    if (dataset.train.size() == 0) throw DimensionError("train: empty training split");
    if (config.batch_size > dataset.train.size()) {
        throw std::invalid_argument("batch_size exceeds the training split size");
    }

    TrainState state(config);
    TrainResult result;
    const std::uint64_t steps_total = config.total_steps();
    const std::size_t n_train = dataset.train.size();
    const std::uint64_t batches_per_epoch = n_train / config.batch_size;

    std::vector<std::size_t> perm;
    std::uint64_t perm_epoch = std::numeric_limits<std::uint64_t>::max();

    for (std::uint64_t step = 0; step < steps_total; ++step) {
        const std::uint64_t epoch = step / batches_per_epoch;
        const std::uint64_t batch_in_epoch = step % batches_per_epoch;
        if (epoch != perm_epoch) {
            perm = epoch_permutation(n_train, config.master_seed, epoch);
            perm_epoch = epoch;
        }
        std::vector<BatchItem> batch;
        batch.reserve(config.batch_size);
        for (std::size_t j = 0; j < config.batch_size; ++j) {
            const std::size_t row = perm[batch_in_epoch * config.batch_size + j];
            BatchItem item;
            item.example_id = row;
            item.x = split_row(dataset.train, row);
            item.y = dataset.train.labels[row];
            batch.push_back(std::move(item));
        }
        result.steps.push_back(train_step(state, batch, epoch, batch_in_epoch));

        if ((step + 1) % config.eval_every == 0 && dataset.validation.size() > 0) {
            EvalEvent ev;
            ev.step = step + 1;
            ev.split = "validation";
            ev.result = evaluate(state.params, dataset.validation, config.network);
            result.evals.push_back(std::move(ev));
        }
    }

    result.params = std::move(state.params);
    result.updates = state.step;
    result.forward_passes = state.forward_passes;
    return result;
}

EvalResult evaluate(const net::NetworkParams& params, const data::Split& split,
                    const net::NetworkSpec& spec) {
    if (split.size() == 0) throw DimensionError("evaluate: empty split");
    double nll_sum = 0.0;
    std::size_t errors = 0;
    for (std::size_t r = 0; r < split.size(); ++r) {
        const Tensor x = split_row(split, r);
        const net::ForwardTrace trace =
            net::forward(spec, params, x, nullptr, net::Phase::Inference);
        nll_sum -= net::log_likelihood(trace, split.labels[r]);
        if (argmax_lowest(trace.logits()) != split.labels[r]) ++errors;
    }
    EvalResult out;
    out.nll = nll_sum / static_cast<double>(split.size());
    out.error_rate = static_cast<double>(errors) / static_cast<double>(split.size());
    return out;
}

}  // namespace iwsgd::train
