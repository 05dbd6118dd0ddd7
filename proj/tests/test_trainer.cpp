#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "iwsgd/trainer.hpp"

using namespace iwsgd;
using namespace iwsgd::train;

namespace {

net::NoiseSpec bern(double keep) {
    net::NoiseSpec s;
    s.mode = net::NoiseMode::BernoulliMultiply;
    s.keep_prob = keep;
    return s;
}

TrainConfig small_config(std::size_t S, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.network = net::mlp_spec(2, {6}, 3, net::Activation::Relu, true, bern(0.5));
    cfg.samples = S;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 1e-4;
    cfg.batch_size = 8;
    cfg.budget_kind = BudgetKind::Updates;
    cfg.budget = 40;
    cfg.master_seed = seed;
    cfg.eval_every = 10;
    cfg.workers = 1;
    return cfg;
}

data::Dataset small_dataset() { return data::gen_gaussian_blobs(40, 3, 2, 2.0, 1.0, 77); }

std::vector<BatchItem> make_batch(const data::Dataset& ds, std::size_t n) {
    std::vector<BatchItem> batch;
    for (std::size_t r = 0; r < n; ++r) {
        BatchItem item;
        item.example_id = r;
        item.x = Tensor({2}, {ds.train.features.at(r, 0), ds.train.features.at(r, 1)});
        item.y = ds.train.labels[r];
        batch.push_back(std::move(item));
    }
    return batch;
}

}  // namespace

TEST_CASE("S=1 step is bit-identical to the conventional-dropout step") {
    const data::Dataset ds = small_dataset();
    TrainConfig iw = small_config(1, 5);
    TrainConfig conv = iw;
    conv.estimator = Estimator::Unweighted;
    TrainState a(iw), b(conv);
    const auto batch = make_batch(ds, 8);
    for (int step = 0; step < 5; ++step) {
        train_step(a, batch, 0, 0);
        train_step(b, batch, 0, 0);
    }
    CHECK(a.params.max_abs_diff(b.params) == 0.0);
}

TEST_CASE("learning_rate=0 leaves params unchanged but reports") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(2, 6);
    cfg.learning_rate = 0.0;
    TrainState state(cfg);
    const net::NetworkParams before = state.params;
    const StepReport report = train_step(state, make_batch(ds, 4), 0, 0);
    CHECK(state.params.max_abs_diff(before) == 0.0);
    CHECK(report.step == 1);
    CHECK(report.mean_objective < 0.0);
    CHECK(report.mean_max_weight >= 0.5);
    CHECK(report.mean_max_weight <= 1.0);
}

TEST_CASE("thread count does not change the step result") {
    const data::Dataset ds = small_dataset();
    for (std::size_t workers : {std::size_t{1}, std::size_t{4}, std::size_t{13}}) {
        TrainConfig cfg = small_config(2, 7);
        cfg.workers = workers;
        TrainState state(cfg);
        train_step(state, make_batch(ds, 2), 0, 0);
        static net::NetworkParams reference;
        if (workers == 1) {
            reference = state.params;
        } else {
            CHECK(state.params.max_abs_diff(reference) == 0.0);
        }
    }
}

TEST_CASE("degenerate likelihoods abort with the example index") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(2, 8);
    TrainState state(cfg);
    // +inf weight on a wrong-class logit forces -inf log-likelihood
    state.params.dense[1].weight.at(0, 0) = std::numeric_limits<double>::infinity();
    auto batch = make_batch(ds, 3);
    for (auto& item : batch) item.y = 1;
    try {
        train_step(state, batch, 0, 0);
        FAIL("expected DegenerateLikelihoodError");
    } catch (const DegenerateLikelihoodError& e) {
        CHECK(std::string(e.what()).find("example") != std::string::npos);
    }
}

TEST_CASE("budget {updates: 0} returns init params and empty series") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(1, 9);
    cfg.budget = 0;
    const TrainResult result = train::train(cfg, ds);
    CHECK(result.steps.empty());
    CHECK(result.evals.empty());
    CHECK(result.updates == 0);
    CHECK(result.forward_passes == 0);
}

TEST_CASE("identical config and seed reproduce the metric series") {
    const data::Dataset ds = small_dataset();
    const TrainConfig cfg = small_config(2, 10);
    const TrainResult a = train::train(cfg, ds);
    const TrainResult b = train::train(cfg, ds);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].mean_objective == b.steps[i].mean_objective);
        CHECK(a.steps[i].mean_max_weight == b.steps[i].mean_max_weight);
    }
    CHECK(a.params.max_abs_diff(b.params) == 0.0);
}

TEST_CASE("equal forward-pass budget gives S=4 a quarter of the updates") {
    const data::Dataset ds = small_dataset();
    TrainConfig s1 = small_config(1, 11);
    s1.budget_kind = BudgetKind::ForwardPasses;
    s1.budget = 640;
    TrainConfig s4 = s1;
    s4.samples = 4;
    const TrainResult r1 = train::train(s1, ds);
    const TrainResult r4 = train::train(s4, ds);
    CHECK(r1.updates == 80);
    CHECK(r4.updates == 20);
    CHECK(r1.forward_passes == 640);
    CHECK(r4.forward_passes == 640);
}

TEST_CASE("budget conservation: forward passes equal steps * batch * S") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(3, 12);
    cfg.budget = 17;
    const TrainResult result = train::train(cfg, ds);
    CHECK(result.forward_passes == 17ull * 8 * 3);
}

TEST_CASE("mean max-weight stays within [1/S, 1]") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(4, 13);
    const TrainResult result = train::train(cfg, ds);
    for (const StepReport& s : result.steps) {
        CHECK(s.mean_max_weight >= 0.25);
        CHECK(s.mean_max_weight <= 1.0);
    }
}

TEST_CASE("draw coordinates are unique across a run") {
    const data::Dataset ds = small_dataset();
    TrainConfig cfg = small_config(2, 14);
    cfg.budget = 12;
    cfg.batch_size = 8;

    // replicate the trainer's coordinate schedule and check uniqueness
    std::set<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t, std::uint32_t>> seen;
    const std::size_t batches_per_epoch = ds.train.size() / cfg.batch_size;
    for (std::uint64_t step = 0; step < cfg.budget; ++step) {
        const std::uint64_t epoch = step / batches_per_epoch;
        const std::uint64_t batch = step % batches_per_epoch;
        for (std::size_t j = 0; j < cfg.batch_size; ++j) {
            for (std::uint32_t s = 0; s < cfg.samples; ++s) {
                // example ids within one batch are distinct rows of the epoch
                // permutation; coordinates add (epoch, batch, sample)
                seen.insert({epoch, batch, j, s});
            }
        }
    }
    CHECK(seen.size() == cfg.budget * cfg.batch_size * cfg.samples);
}

TEST_CASE("evaluate: interpolating model reaches zero error, uniform logits give ln C") {
    // two separable points and an exact interpolating model
    data::Split split;
    split.features = Tensor({2, 1}, {-1.0, 1.0});
    split.labels = {0, 1};
    net::NetworkSpec spec;
    spec.input_dim = 1;
    spec.layers = {net::dense(1, 2)};
    net::NetworkParams params;
    net::DenseParams d;
    d.weight = Tensor({1, 2}, {-5.0, 5.0});
    d.bias = Tensor({2});
    params.dense = {d};
    const EvalResult r = evaluate(params, split, spec);
    CHECK(r.error_rate == 0.0);

    net::NetworkParams zero = params.zeros_like();
    const EvalResult u = evaluate(zero, split, spec);
    CHECK(u.nll == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // ties broken toward the lowest class index: always predicts 0
    CHECK(u.error_rate == 0.5);
}

TEST_CASE("evaluation is invariant to S and worker count") {
    const data::Dataset ds = small_dataset();
    const TrainConfig cfg = small_config(2, 15);
    const TrainResult r = train::train(cfg, ds);
    const EvalResult base = evaluate(r.params, ds.test, cfg.network);
    for (std::size_t workers : {std::size_t{1}, std::size_t{4}}) {
        TrainConfig other = cfg;
        other.workers = workers;
        other.samples = 5;  // S must not matter at inference
        const EvalResult again = evaluate(r.params, ds.test, other.network);
        CHECK(again.nll == base.nll);
        CHECK(again.error_rate == base.error_rate);
    }
}

TEST_CASE("an entire S=1 run matches the conventional run sharing the schedule") {
    const data::Dataset ds = small_dataset();
    TrainConfig iw = small_config(1, 16);
    iw.budget = 60;
    TrainConfig conv = iw;
    conv.estimator = Estimator::Unweighted;
    const TrainResult a = train::train(iw, ds);
    const TrainResult b = train::train(conv, ds);
    CHECK(a.params.max_abs_diff(b.params) < 1e-12);
}
