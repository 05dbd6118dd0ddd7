#include "iwsgd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "iwsgd/logmath.hpp"
#include "iwsgd/trainer.hpp"

namespace iwsgd::harness {

namespace {

std::string fmt6(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string metrics_header() {
    return "step,split,nll,error_rate,lsgd_estimate,mean_max_weight,degenerate_count,wall_ms";
}

std::string metrics_row(std::uint64_t step, const std::string& split, double nll,
                        double error_rate, double lsgd_estimate, double mean_max_weight,
                        std::uint64_t degenerate_count, double wall_ms) {
    std::ostringstream os;
    os << step << ',' << split << ',' << fmt6(nll) << ',' << fmt6(error_rate) << ','
       << fmt6(lsgd_estimate) << ',' << fmt6(mean_max_weight) << ',' << degenerate_count << ','
       << fmt6(wall_ms);
    return os.str();
}

RunOutcome run_training(const ExperimentConfig& cfg, const data::Dataset& dataset,
                        std::uint64_t master_seed, std::size_t samples,
                        const std::string& metrics_path, const std::string& log_path) {
    train::TrainConfig tc = cfg.make_train_config(dataset);
    tc.master_seed = master_seed;
    tc.samples = samples;

    const auto t0 = std::chrono::steady_clock::now();
    train::TrainResult result = train::train(tc, dataset);
    const double total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream csv(metrics_path, std::ios::binary);
    if (!csv) throw ConfigError("output_dir", "cannot write " + metrics_path);
    csv << metrics_header() << '\n';
    // interleave train rows with the validation evaluations at their step
    std::size_t next_eval = 0;
    for (const train::StepReport& s : result.steps) {
        // wall_ms is rendered as 0 in the CSV so output is byte-identical
        // across runs; measured times go to the run log
        csv << metrics_row(s.step, "train", -s.mean_objective, s.batch_error, s.mean_objective,
                           s.mean_max_weight, s.degenerate_count, 0.0)
            << '\n';
        while (next_eval < result.evals.size() && result.evals[next_eval].step == s.step) {
            const train::EvalEvent& ev = result.evals[next_eval];
            csv << metrics_row(ev.step, ev.split, ev.result.nll, ev.result.error_rate,
                               -ev.result.nll, 1.0, 0, 0.0)
                << '\n';
            ++next_eval;
        }
    }
    csv.close();

    RunOutcome outcome;
    outcome.updates = result.updates;
    outcome.forward_passes = result.forward_passes;
    const net::NetworkParams final_params =
        result.updates > 0 ? std::move(result.params) : net::init_params(tc.network, master_seed);
    const train::EvalResult test = train::evaluate(final_params, dataset.test, tc.network);
    outcome.final_test_error = test.error_rate;
    outcome.final_test_nll = test.nll;

    std::ofstream log(log_path, std::ios::binary);
    log << "dataset: " << dataset.provenance << "\n"
        << "samples: " << samples << "\n"
        << "master_seed: " << master_seed << "\n"
        << "updates: " << outcome.updates << "\n"
        << "forward_passes: " << outcome.forward_passes << "\n"
        << "train_wall_ms: " << fmt6(total_ms) << "\n"
        << "final_test_nll: " << fmt6(outcome.final_test_nll) << "\n"
        << "final_test_error: " << fmt6(outcome.final_test_error) << "\n";
    return outcome;
}

int cmd_train(const std::string& config_path) {
    try {
        const ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
        cfg.require({"dataset", "output_dir"});
        const data::Dataset dataset = cfg.make_dataset();
        cfg.make_train_config(dataset);  // full validation before any output
        std::filesystem::create_directories(cfg.output_dir);
        const RunOutcome outcome =
            run_training(cfg, dataset, cfg.master_seed, cfg.samples,
                         cfg.output_dir + "/metrics.csv", cfg.output_dir + "/run.log");
        std::cout << "final_test_error=" << fmt6(outcome.final_test_error) << std::endl;
        return 0;
    } catch (const DegenerateLikelihoodError& e) {
        std::cerr << "degenerate likelihoods: " << e.what() << std::endl;
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const IdxError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

// ---- gradient checking ----

namespace {

constexpr double kFdStep = 1e-4;
constexpr double kGradTol = 1e-6;

double rel_err(double a, double fd) {
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    return std::abs(a - fd) / denom;
}

struct TrialSetup {
    net::NetworkSpec spec;
    net::NetworkParams params;
    Tensor x;
    std::size_t y = 0;
    std::size_t S = 1;
    std::uint64_t trial_seed = 0;
};

// The fixed 1e-4 step resolves gradients only at benign operating points:
// a relu pre-activation near zero puts the kink inside the stencil, and a
// saturated tanh attenuates the gradient far below the h^2 truncation term.
// Configurations without margin are redrawn.
bool activation_margins_ok(const TrialSetup& t, const net::ForwardTrace& trace) {
    for (std::size_t i = 0; i < t.spec.layers.size(); ++i) {
        if (t.spec.layers[i].kind != net::LayerSpec::Kind::Activation) continue;
        const Tensor& input = trace.values[i];
        for (std::size_t j = 0; j < input.size(); ++j) {
            const double pre = std::abs(input[j]);
            if (t.spec.layers[i].act == net::Activation::Relu ? pre < 5e-3 : pre > 1.75)
                return false;
        }
    }
    return true;
}

TrialSetup make_trial(std::uint64_t seed, std::size_t trial) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t trial_seed = seed + 7919 * trial + 104729 * attempt;
        rng::Stream gen(trial_seed, rng::StreamKind::Harness, 0, 0, 0);
        TrialSetup t;
        t.trial_seed = trial_seed;
        const std::size_t in_dim = 2 + gen.next_u64() % 4;
        const std::size_t n_hidden = 1 + gen.next_u64() % 2;
        std::vector<std::size_t> hidden;
        for (std::size_t i = 0; i < n_hidden; ++i) hidden.push_back(2 + gen.next_u64() % 7);
        const std::size_t classes = 2 + gen.next_u64() % 3;
        const net::Activation act =
            gen.next_u64() % 2 ? net::Activation::Tanh : net::Activation::Relu;
        net::NoiseSpec ns;
        if (gen.next_u64() % 4 == 0) {
            ns.mode = net::NoiseMode::GaussianAdd;
            ns.sigma = 0.1 + 0.4 * gen.next_unit();
        } else {
            const double keeps[] = {0.3, 0.5, 0.7, 1.0};
            ns.mode = net::NoiseMode::BernoulliMultiply;
            ns.keep_prob = keeps[gen.next_u64() % 4];
        }
        t.spec = net::mlp_spec(in_dim, hidden, classes, act, true, ns);
        t.params = net::init_params(t.spec, trial_seed);
        t.x = Tensor({in_dim});
        for (std::size_t i = 0; i < in_dim; ++i) t.x[i] = gen.next_gaussian();
        t.y = gen.next_u64() % classes;
        t.S = 1 + gen.next_u64() % 4;

        bool margin_ok = true;
        for (std::size_t s = 0; s < t.S && margin_ok; ++s) {
            net::DrawCoords coords;
            coords.seed = trial_seed;
            coords.sample = static_cast<std::uint32_t>(s);
            const net::NoiseDraw draw = net::sample_noise(t.spec, coords);
            const net::ForwardTrace trace =
                net::forward(t.spec, t.params, t.x, &draw, net::Phase::Train);
            margin_ok = activation_margins_ok(t, trace);
        }
        if (margin_ok) return t;
    }
}

net::NoiseDraw trial_draw(const TrialSetup& t, std::size_t s) {
    net::DrawCoords coords;
    coords.seed = t.trial_seed;
    coords.sample = static_cast<std::uint32_t>(s);
    return net::sample_noise(t.spec, coords);
}

double fd_gradient(const std::function<double(const net::NetworkParams&)>& f,
                   net::NetworkParams& params, std::size_t flat_index) {
    params.add_flat(flat_index, kFdStep);
    const double up = f(params);
    params.add_flat(flat_index, -2.0 * kFdStep);
    const double down = f(params);
    params.add_flat(flat_index, kFdStep);
    return (up - down) / (2.0 * kFdStep);
}

}  // namespace

GradcheckResult run_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt) {
    GradcheckResult result;
    result.pass = true;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        TrialSetup t = make_trial(seed, trial);

        // per-sample log-likelihood gradient
        {
            const net::NoiseDraw draw = trial_draw(t, 0);
            const net::ForwardTrace trace =
                net::forward(t.spec, t.params, t.x, &draw, net::Phase::Train);
            net::NetworkParams analytic = net::backward(t.spec, t.params, trace, t.y);
            if (corrupt && trial == 0) analytic.add_flat(0, 1e-3);
            auto f = [&](const net::NetworkParams& p) {
                return net::log_likelihood(net::forward(t.spec, p, t.x, &draw, net::Phase::Train),
                                           t.y);
            };
            for (std::size_t i = 0; i < t.params.count(); ++i) {
                const double fd = fd_gradient(f, t.params, i);
                const double err = rel_err(analytic.get_flat(i), fd);
                if (err > result.worst_rel_err) {
                    result.worst_rel_err = err;
                    result.worst_trial_seed = t.trial_seed;
                }
            }
        }

        // combined multi-sample gradient against the composed objective
        {
            std::vector<obj::SampleEvaluation> evals(t.S);
            std::vector<net::NoiseDraw> draws;
            for (std::size_t s = 0; s < t.S; ++s) draws.push_back(trial_draw(t, s));
            for (std::size_t s = 0; s < t.S; ++s) {
                const net::ForwardTrace trace =
                    net::forward(t.spec, t.params, t.x, &draws[s], net::Phase::Train);
                evals[s].log_lik = net::log_likelihood(trace, t.y);
                evals[s].grad = net::backward(t.spec, t.params, trace, t.y);
            }
            const obj::CombineResult combined = obj::iwsgd_combine(evals);
            auto f = [&](const net::NetworkParams& p) {
                std::vector<double> liks(t.S);
                for (std::size_t s = 0; s < t.S; ++s) {
                    liks[s] = net::log_likelihood(
                        net::forward(t.spec, p, t.x, &draws[s], net::Phase::Train), t.y);
                }
                return obj::lsgd_inner(liks);
            };
            for (std::size_t i = 0; i < t.params.count(); ++i) {
                const double fd = fd_gradient(f, t.params, i);
                const double err = rel_err(combined.grad.get_flat(i), fd);
                if (err > result.worst_rel_err) {
                    result.worst_rel_err = err;
                    result.worst_trial_seed = t.trial_seed;
                }
            }
        }
    }
    result.pass = result.worst_rel_err < kGradTol;
    return result;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt) {
    if (trials < 1) {
        std::cerr << "config error: trials must be >= 1" << std::endl;
        return 2;
    }
    try {
        const GradcheckResult r = run_gradcheck(seed, trials, corrupt);
        char buf[160];
        std::snprintf(buf, sizeof buf, "trials=%zu worst_rel_err=%.3e (trial_seed=%llu)", trials,
                      r.worst_rel_err, static_cast<unsigned long long>(r.worst_trial_seed));
        std::cout << buf << std::endl;
        if (!r.pass) {
            std::cerr << "FAIL: gradient mismatch above " << kGradTol << " at trial_seed="
                      << r.worst_trial_seed << std::endl;
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

// ---- bound hierarchy ----

BoundsRow bounds_row(const net::NetworkSpec& spec, const net::NetworkParams& params,
                     const Tensor& x, std::size_t y) {
    BoundsRow row;
    row.lsgd1 = obj::lsgd_exact(spec, params, x, y, 1);
    row.lsgd2 = obj::lsgd_exact(spec, params, x, y, 2);
    row.lsgd3 = obj::lsgd_exact(spec, params, x, y, 3);
    row.marginal = obj::marginal_exact(spec, params, x, y);
    row.chain_holds = row.lsgd1 <= row.lsgd2 && row.lsgd2 <= row.lsgd3 && row.lsgd3 <= row.marginal;
    return row;
}

WorkedInstance worked_instance() {
    WorkedInstance w;
    w.spec.input_dim = 1;
    net::NoiseSpec ns;
    ns.mode = net::NoiseMode::BernoulliMultiply;
    ns.keep_prob = 0.5;
    w.spec.layers = {net::dense(1, 1, false), net::noise(ns), net::dense(1, 2, true)};
    w.spec.validate();

    // p(y=0 | unit kept) = 0.8, p(y=0 | unit dropped) = 0.2
    net::DenseParams first;
    first.has_bias = false;
    first.weight = Tensor({1, 1}, {1.0});
    net::DenseParams second;
    second.has_bias = true;
    second.weight = Tensor({1, 2}, {2.0 * std::log(4.0), 0.0});
    second.bias = Tensor({2}, {std::log(0.2), std::log(0.8)});
    w.params.dense = {std::move(first), std::move(second)};
    w.x = Tensor({1}, {1.0});
    w.y = 0;
    return w;
}

int cmd_bounds(const std::string& config_path, bool worked) {
    try {
        std::printf("%-6s %-12s %-13s %-13s %-13s %-13s %s\n", "trial", "seed", "lsgd(1)",
                    "lsgd(2)", "lsgd(3)", "marginal", "chain");
        bool all_hold = true;
        auto print_row = [&](std::size_t trial, std::uint64_t seed, const BoundsRow& row) {
            std::printf("%-6zu %-12llu %-13.9f %-13.9f %-13.9f %-13.9f %s\n", trial,
                        static_cast<unsigned long long>(seed), row.lsgd1, row.lsgd2, row.lsgd3,
                        row.marginal, row.chain_holds ? "ok" : "VIOLATED");
            all_hold = all_hold && row.chain_holds;
        };

        if (worked) {
            const WorkedInstance w = worked_instance();
            print_row(0, 0, bounds_row(w.spec, w.params, w.x, w.y));
        } else {
            const ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
            cfg.require({"dataset"});
            const data::Dataset dataset = cfg.make_dataset();
            const net::NetworkSpec spec = cfg.make_network(dataset.dim, dataset.num_classes);
            for (std::size_t trial = 0; trial < cfg.bounds_trials; ++trial) {
                const std::uint64_t seed = cfg.master_seed + trial;
                const net::NetworkParams params = net::init_params(spec, seed);
                const std::size_t row_index = trial % dataset.train.size();
                Tensor x({dataset.dim});
                for (std::size_t c = 0; c < dataset.dim; ++c)
                    x[c] = dataset.train.features.at(row_index, c);
                print_row(trial, seed, bounds_row(spec, params, x, dataset.train.labels[row_index]));
            }
        }
        return all_hold ? 0 : 1;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << std::endl;
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const UnsupportedModeError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

// ---- matched comparison runs ----

int cmd_compare(const std::string& config_path) {
    try {
        const ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
        cfg.require({"dataset", "output_dir"});
        const data::Dataset dataset = cfg.make_dataset();
        cfg.make_train_config(dataset);  // validate before creating outputs
        std::filesystem::create_directories(cfg.output_dir);

        std::ofstream summary(cfg.output_dir + "/summary.csv", std::ios::binary);
        summary << "s,n_seeds,updates,forward_passes,test_error_mean,test_error_std\n";
        for (const std::size_t S : cfg.compare_s) {
            std::vector<double> errors;
            std::uint64_t updates = 0, forward_passes = 0;
            for (const std::uint64_t seed : cfg.compare_seeds) {
                std::ostringstream base;
                base << cfg.output_dir << "/metrics_s" << S << "_seed" << seed;
                const RunOutcome outcome = run_training(cfg, dataset, seed, S,
                                                        base.str() + ".csv", base.str() + ".log");
                errors.push_back(outcome.final_test_error);
                updates = outcome.updates;
                forward_passes = outcome.forward_passes;
            }
            double mean = 0.0;
            for (double e : errors) mean += e;
            mean /= static_cast<double>(errors.size());
            double std_dev = 0.0;
            if (errors.size() > 1) {
                double ss = 0.0;
                for (double e : errors) ss += (e - mean) * (e - mean);
                std_dev = std::sqrt(ss / static_cast<double>(errors.size() - 1));
            }
            summary << S << ',' << cfg.compare_seeds.size() << ',' << updates << ','
                    << forward_passes << ',' << fmt6(mean) << ',' << fmt6(std_dev) << '\n';
        }
        return 0;
    } catch (const DegenerateLikelihoodError& e) {
        std::cerr << "degenerate likelihoods: " << e.what() << std::endl;
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const IdxError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace iwsgd::harness
