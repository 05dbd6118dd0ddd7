#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "iwsgd/harness.hpp"
#include "iwsgd/objective.hpp"

using namespace iwsgd;
using namespace iwsgd::net;
using namespace iwsgd::obj;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

NoiseSpec bern(double keep) {
    NoiseSpec s;
    s.mode = NoiseMode::BernoulliMultiply;
    s.keep_prob = keep;
    return s;
}

NetworkParams grad_like(const NetworkSpec& spec, std::initializer_list<double> values) {
    NetworkParams p = init_params(spec, 1).zeros_like();
    std::size_t i = 0;
    for (double v : values) p.add_flat(i++, v);
    return p;
}

}  // namespace

TEST_CASE("importance weights worked values") {
    const double equal[] = {std::log(2.0), std::log(2.0), std::log(2.0)};
    for (double w : importance_weights(equal).weights)
        CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-13));

    const double single[] = {-3.7};
    CHECK(importance_weights(single).weights[0] == 1.0);

    const double pair[] = {std::log(1.0), std::log(3.0)};
    const auto w = importance_weights(pair).weights;
    CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-13));

    const double tiny[] = {-1000.0, -1001.0};
    const auto wt = importance_weights(tiny).weights;
    CHECK(wt[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(wt[1] == doctest::Approx(0.268941).epsilon(1e-6));
}

TEST_CASE("importance weights degenerate inputs") {
    const double all_inf[] = {-kInf, -kInf};
    CHECK_THROWS_AS(importance_weights(all_inf), DegenerateLikelihoodError);
    const double with_nan[] = {0.0, std::nan("")};
    CHECK_THROWS_AS(importance_weights(with_nan), DegenerateLikelihoodError);
    const double one_inf[] = {-kInf, -2.0};
    const auto w = importance_weights(one_inf).weights;
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 1.0);
}

TEST_CASE("importance weights stay on the simplex and shift-invariant") {
    rng::Stream gen(31, rng::StreamKind::Harness);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> v(1 + gen.next_u64() % 8);
        for (double& x : v) x = -5.0 * gen.next_unit() - 1e3 * gen.next_unit();
        const auto w = importance_weights(v).weights;
        double sum = 0.0;
        for (double x : w) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        const double c = 200.0 * gen.next_unit() - 100.0;
        std::vector<double> vc = v;
        for (double& x : vc) x += c;
        const auto wc = importance_weights(vc).weights;
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - wc[i]) < 1e-12);
    }
}

TEST_CASE("lsgd_inner worked values") {
    const double constant[] = {std::log(0.5), std::log(0.5)};
    CHECK(lsgd_inner(constant) == std::log(0.5));  // exact for constant sequences

    const double pair[] = {std::log(0.2), std::log(0.8)};
    CHECK(lsgd_inner(pair) == doctest::Approx(std::log(0.5)).epsilon(1e-13));

    const double single[] = {-1.2345};
    CHECK(lsgd_inner(single) == -1.2345);  // S=1 reduces to the sample itself
}

TEST_CASE("iwsgd_combine: uniform weights reduce to the plain mean") {
    const NetworkSpec spec = mlp_spec(2, {}, 2, Activation::Relu, false, {});
    std::vector<SampleEvaluation> evals(3);
    for (std::size_t s = 0; s < 3; ++s) {
        evals[s].log_lik = std::log(0.3);
        evals[s].grad = grad_like(spec, {double(s), 1.0, 0.0, 0.0, 0.0, 0.0});
    }
    const CombineResult r = iwsgd_combine(evals);
    CHECK(r.grad.get_flat(0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.grad.get_flat(1) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.objective == std::log(0.3));
}

TEST_CASE("iwsgd_combine: S=1 returns the sample gradient bit-exactly") {
    const NetworkSpec spec = mlp_spec(2, {}, 2, Activation::Relu, false, {});
    std::vector<SampleEvaluation> evals(1);
    evals[0].log_lik = -0.7;
    evals[0].grad = grad_like(spec, {0.123456789, -4.2, 1e-17, 3.0, 0.0, -0.0});
    const CombineResult r = iwsgd_combine(evals);
    CHECK(r.weights.weights[0] == 1.0);
    for (std::size_t i = 0; i < 6; ++i) CHECK(r.grad.get_flat(i) == evals[0].grad.get_flat(i));
    CHECK(r.objective == -0.7);
}

TEST_CASE("iwsgd_combine: 0.25/0.75 linear combination") {
    const NetworkSpec spec = mlp_spec(1, {}, 2, Activation::Relu, false, {});
    std::vector<SampleEvaluation> evals(2);
    evals[0].log_lik = std::log(1.0);
    evals[0].grad = grad_like(spec, {1.0, 0.0, 0.0, 0.0});
    evals[1].log_lik = std::log(3.0);
    evals[1].grad = grad_like(spec, {0.0, 1.0, 0.0, 0.0});
    const CombineResult r = iwsgd_combine(evals);
    CHECK(r.grad.get_flat(0) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(r.grad.get_flat(1) == doctest::Approx(0.75).epsilon(1e-13));
}

TEST_CASE("iwsgd_combine gradient equals finite differences of the composed objective") {
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        const NetworkSpec spec =
            mlp_spec(3, {5}, 3, Activation::Tanh, true, bern(rep % 2 ? 0.5 : 0.7));
        NetworkParams params = init_params(spec, 500 + rep);
        rng::Stream gen(rep, rng::StreamKind::Harness, 1);
        Tensor x({3}, {gen.next_gaussian(), gen.next_gaussian(), gen.next_gaussian()});
        const std::size_t y = rep % 3;
        const std::size_t S = 1 + rep % 4;

        std::vector<NoiseDraw> draws;
        std::vector<SampleEvaluation> evals(S);
        for (std::size_t s = 0; s < S; ++s) {
            DrawCoords coords;
            coords.seed = 900 + rep;
            coords.sample = static_cast<std::uint32_t>(s);
            draws.push_back(sample_noise(spec, coords));
        }
        for (std::size_t s = 0; s < S; ++s) {
            const ForwardTrace trace = forward(spec, params, x, &draws[s], Phase::Train);
            evals[s].log_lik = log_likelihood(trace, y);
            evals[s].grad = backward(spec, params, trace, y);
        }
        const CombineResult combined = iwsgd_combine(evals);

        auto objective = [&](const NetworkParams& p) {
            std::vector<double> liks(S);
            for (std::size_t s = 0; s < S; ++s)
                liks[s] = log_likelihood(forward(spec, p, x, &draws[s], Phase::Train), y);
            return lsgd_inner(liks);
        };
        const double h = 1e-4;
        double worst = 0.0;
        for (std::size_t i = 0; i < params.count(); ++i) {
            params.add_flat(i, h);
            const double up = objective(params);
            params.add_flat(i, -2 * h);
            const double down = objective(params);
            params.add_flat(i, h);
            const double fd = (up - down) / (2 * h);
            const double a = combined.grad.get_flat(i);
            worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8}));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("marginal_exact: keep=1 equals the deterministic log-likelihood") {
    const NetworkSpec spec = mlp_spec(2, {3}, 2, Activation::Tanh, true, bern(1.0));
    const NetworkParams params = init_params(spec, 8);
    const Tensor x({2}, {0.4, -0.6});
    const double marg = marginal_exact(spec, params, x, 1);
    const double det = log_likelihood(forward(spec, params, x, nullptr, Phase::Inference), 1);
    CHECK(marg == det);
}

TEST_CASE("marginal_exact on the single-unit 0.8/0.2 instance") {
    const harness::WorkedInstance w = harness::worked_instance();
    // sanity: the two masks produce likelihoods 0.8 and 0.2
    NoiseDraw kept;
    kept.eps = {Tensor({1}, {1.0})};
    CHECK(std::exp(log_likelihood(forward(w.spec, w.params, w.x, &kept, Phase::Train), 0)) ==
          doctest::Approx(0.8).epsilon(1e-12));
    NoiseDraw dropped;
    dropped.eps = {Tensor({1}, {0.0})};
    CHECK(std::exp(log_likelihood(forward(w.spec, w.params, w.x, &dropped, Phase::Train), 0)) ==
          doctest::Approx(0.2).epsilon(1e-12));

    CHECK(marginal_exact(w.spec, w.params, w.x, w.y) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("marginal_exact agrees with a Monte Carlo cross-check on a k=4 net") {
    const NetworkSpec spec = mlp_spec(2, {4}, 3, Activation::Tanh, true, bern(0.5));
    const NetworkParams params = init_params(spec, 404);
    const Tensor x({2}, {0.9, -0.1});
    const std::size_t y = 2;
    const double marg = marginal_exact(spec, params, x, y);

    // estimate E[p(y|mask)] directly by sampling masks
    const std::size_t n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        DrawCoords coords;
        coords.seed = 777;
        coords.epoch = r;
        coords.kind = rng::StreamKind::Mc;
        const NoiseDraw draw = sample_noise(spec, coords);
        const double p = std::exp(log_likelihood(forward(spec, params, x, &draw, Phase::Train), y));
        sum += p;
        sumsq += p * p;
    }
    const double mean = sum / n;
    const double var = std::max(sumsq / n - mean * mean, 0.0);
    const double se = std::sqrt(var / (n - 1));
    REQUIRE(se > 0.0);
    CHECK(std::abs(std::exp(marg) - mean) < 4.0 * se);
}

TEST_CASE("marginal_exact capacity and mode errors") {
    const NetworkSpec big = mlp_spec(2, {23}, 2, Activation::Relu, true, bern(0.5));
    const NetworkParams params = init_params(big, 2);
    CHECK_THROWS_AS(marginal_exact(big, params, Tensor({2}), 0), CapacityError);

    NoiseSpec gauss;
    gauss.mode = NoiseMode::GaussianAdd;
    gauss.sigma = 0.1;
    const NetworkSpec g = mlp_spec(2, {3}, 2, Activation::Relu, true, gauss);
    const NetworkParams gp = init_params(g, 3);
    CHECK_THROWS_AS(marginal_exact(g, gp, Tensor({2}), 0), UnsupportedModeError);
}

TEST_CASE("lsgd_exact worked values and the bound chain") {
    const harness::WorkedInstance w = harness::worked_instance();
    const double l1 = lsgd_exact(w.spec, w.params, w.x, w.y, 1);
    const double l2 = lsgd_exact(w.spec, w.params, w.x, w.y, 2);
    const double marg = marginal_exact(w.spec, w.params, w.x, w.y);
    CHECK(l1 == doctest::Approx(std::log(0.4)).epsilon(1e-12));
    CHECK(l1 == doctest::Approx(-0.916291).epsilon(1e-6));
    CHECK(l2 == doctest::Approx(-0.804719).epsilon(1e-6));
    CHECK(l2 == doctest::Approx(0.25 * std::log(0.8) + 0.5 * std::log(0.5) + 0.25 * std::log(0.2))
                    .epsilon(1e-12));
    CHECK(l1 <= l2);
    CHECK(l2 <= marg);
    CHECK(marg == doctest::Approx(-0.693147).epsilon(1e-6));
}

TEST_CASE("lsgd_exact capacity error") {
    const NetworkSpec spec = mlp_spec(2, {12}, 2, Activation::Relu, true, bern(0.5));
    const NetworkParams params = init_params(spec, 5);
    CHECK_THROWS_AS(lsgd_exact(spec, params, Tensor({2}), 0, 3), CapacityError);
}

TEST_CASE("jensen chain holds strictly when mask likelihoods differ") {
    for (std::uint64_t rep = 0; rep < 12; ++rep) {
        const std::size_t width = 1 + rep % 6;
        const double keeps[] = {0.3, 0.5, 0.7};
        // redraw seeds until the noise actually moves the likelihood (a dead
        // relu layer makes every mask equivalent and the chain collapses to
        // equality, where fp enumeration noise has no defined sign)
        std::uint64_t seed = 6000 + rep;
        rng::Stream gen(rep, rng::StreamKind::Harness, 2);
        const NetworkSpec spec =
            mlp_spec(2, {width}, 2, rep % 2 ? Activation::Tanh : Activation::Relu, true,
                     bern(keeps[rep % 3]));
        const Tensor x({2}, {gen.next_gaussian(), gen.next_gaussian()});
        const std::size_t y = rep % 2;
        double l1 = 0.0, marg = 0.0;
        NetworkParams params;
        for (;; seed += 1000) {
            params = init_params(spec, seed);
            l1 = lsgd_exact(spec, params, x, y, 1);
            marg = marginal_exact(spec, params, x, y);
            if (marg - l1 > 1e-9) break;
        }
        const double l2 = lsgd_exact(spec, params, x, y, 2);
        const double l3 = lsgd_exact(spec, params, x, y, 3);
        CHECK(l1 < l2);
        CHECK(l2 < l3);
        CHECK(l3 < marg);
    }
}

TEST_CASE("lsgd_mc: keep=1 gives the deterministic value with zero std error") {
    const NetworkSpec spec = mlp_spec(2, {3}, 2, Activation::Tanh, true, bern(1.0));
    const NetworkParams params = init_params(spec, 12);
    const Tensor x({2}, {0.2, 0.3});
    const BoundEstimate est = lsgd_mc(spec, params, x, 0, 2, 100, 9);
    const double det = log_likelihood(forward(spec, params, x, nullptr, Phase::Inference), 0);
    CHECK(est.value == det);
    CHECK(est.std_error == 0.0);
    CHECK(est.degenerate == 0);
}

TEST_CASE("lsgd_mc agrees with lsgd_exact within 4 standard errors") {
    const NetworkSpec spec = mlp_spec(2, {4}, 3, Activation::Relu, true, bern(0.5));
    const NetworkParams params = init_params(spec, 314);
    const Tensor x({2}, {0.5, 1.5});
    const std::size_t y = 1;
    const double exact = lsgd_exact(spec, params, x, y, 2);
    const BoundEstimate est = lsgd_mc(spec, params, x, y, 2, 100000, 2718);
    CHECK(est.std_error > 0.0);
    CHECK(std::abs(est.value - exact) < 4.0 * est.std_error);
}

TEST_CASE("lsgd_mc estimates are ordered in S per the tightening bound") {
    const NetworkSpec spec = mlp_spec(2, {4}, 2, Activation::Relu, true, bern(0.5));
    const NetworkParams params = init_params(spec, 161);
    const Tensor x({2}, {-0.4, 0.8});
    const BoundEstimate s1 = lsgd_mc(spec, params, x, 0, 1, 60000, 5);
    const BoundEstimate s4 = lsgd_mc(spec, params, x, 0, 4, 60000, 6);
    const double combined_se = std::sqrt(s1.std_error * s1.std_error + s4.std_error * s4.std_error);
    CHECK(s4.value - s1.value > -4.0 * combined_se);
}
