#include "iwsgd/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace iwsgd::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    if (value.empty() || value[0] == '-') throw ConfigError(key, "expects a non-negative integer, got '" + value + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end != value.c_str() + value.size()) {
        throw ConfigError(key, "expects a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::uint64_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || errno != 0 || end != value.c_str() + value.size() || !std::isfinite(v)) {
        throw ConfigError(key, "expects a finite number, got '" + value + "'");
    }
    return v;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& key, const std::string& value) {
    std::vector<std::uint64_t> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, trim(item)));
    return out;
}

void expect_one_of(const std::string& key, const std::string& value,
                   const std::vector<std::string>& allowed) {
    if (std::find(allowed.begin(), allowed.end(), value) != allowed.end()) return;
    std::string msg = "must be one of {";
    for (std::size_t i = 0; i < allowed.size(); ++i) msg += (i ? ", " : "") + allowed[i];
    msg += "}, got '" + value + "'";
    throw ConfigError(key, msg);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
        }
        if (kv.count(key)) throw ConfigError(key, "duplicate key");
        kv[key] = value;
    }
    return parse_map(kv);
}

ExperimentConfig ExperimentConfig::parse_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    static const std::set<std::string> known = {
        "dataset",          "data_seed",         "blobs_per_class", "blobs_classes",
        "blobs_dim",        "blobs_radius",      "blobs_sigma",     "spirals_per_class",
        "spirals_sigma",    "spirals_turns",     "idx_train_images", "idx_train_labels",
        "idx_test_images",  "idx_test_labels",   "idx_limit",       "hidden",
        "activation",       "noise_mode",        "keep_prob",       "noise_sigma",
        "samples",          "estimator",         "learning_rate",   "momentum",
        "weight_decay",     "batch_size",        "budget_kind",     "budget",
        "master_seed",      "eval_every",        "output_dir",      "compare_s",
        "compare_seeds",    "bounds_trials"};
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw ConfigError(key, "unknown key");
        if (key == "dataset") {
            expect_one_of(key, value, {"blobs", "spirals", "idx"});
            cfg.dataset = value;
        } else if (key == "data_seed") {
            cfg.data_seed = parse_u64(key, value);
        } else if (key == "blobs_per_class") {
            cfg.blobs_per_class = parse_u64(key, value);
            if (cfg.blobs_per_class == 0) throw ConfigError(key, "must be positive");
        } else if (key == "blobs_classes") {
            cfg.blobs_classes = parse_u64(key, value);
            if (cfg.blobs_classes == 0) throw ConfigError(key, "must be positive");
        } else if (key == "blobs_dim") {
            cfg.blobs_dim = parse_u64(key, value);
            if (cfg.blobs_dim == 0) throw ConfigError(key, "must be positive");
        } else if (key == "blobs_radius") {
            cfg.blobs_radius = parse_double(key, value);
            if (cfg.blobs_radius < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "blobs_sigma") {
            cfg.blobs_sigma = parse_double(key, value);
            if (cfg.blobs_sigma < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "spirals_per_class") {
            cfg.spirals_per_class = parse_u64(key, value);
            if (cfg.spirals_per_class == 0) throw ConfigError(key, "must be positive");
        } else if (key == "spirals_sigma") {
            cfg.spirals_sigma = parse_double(key, value);
            if (cfg.spirals_sigma < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "spirals_turns") {
            cfg.spirals_turns = parse_double(key, value);
            if (cfg.spirals_turns <= 0) throw ConfigError(key, "must be positive");
        } else if (key == "idx_train_images") {
            cfg.idx_train_images = value;
        } else if (key == "idx_train_labels") {
            cfg.idx_train_labels = value;
        } else if (key == "idx_test_images") {
            cfg.idx_test_images = value;
        } else if (key == "idx_test_labels") {
            cfg.idx_test_labels = value;
        } else if (key == "idx_limit") {
            cfg.idx_limit = parse_u64(key, value);
        } else if (key == "hidden") {
            cfg.hidden.clear();
            for (std::uint64_t h : parse_u64_list(key, value)) {
                if (h == 0) throw ConfigError(key, "layer widths must be positive");
                cfg.hidden.push_back(h);
            }
        } else if (key == "activation") {
            expect_one_of(key, value, {"relu", "tanh"});
            cfg.activation = value;
        } else if (key == "noise_mode") {
            expect_one_of(key, value, {"bernoulli", "gaussian", "none"});
            cfg.noise_mode = value;
        } else if (key == "keep_prob") {
            cfg.keep_prob = parse_double(key, value);
            if (!(cfg.keep_prob > 0.0 && cfg.keep_prob <= 1.0)) {
                throw ConfigError(key, "must be in (0, 1]");
            }
        } else if (key == "noise_sigma") {
            cfg.noise_sigma = parse_double(key, value);
            if (cfg.noise_sigma < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "samples") {
            cfg.samples = parse_u64(key, value);
            if (cfg.samples == 0) throw ConfigError(key, "must be >= 1");
        } else if (key == "estimator") {
            expect_one_of(key, value, {"iwsgd", "unweighted"});
            cfg.estimator = value;
        } else if (key == "learning_rate") {
            cfg.learning_rate = parse_double(key, value);
            if (cfg.learning_rate < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "momentum") {
            cfg.momentum = parse_double(key, value);
            if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
                throw ConfigError(key, "must be in [0, 1)");
            }
        } else if (key == "weight_decay") {
            cfg.weight_decay = parse_double(key, value);
            if (cfg.weight_decay < 0) throw ConfigError(key, "must be >= 0");
        } else if (key == "batch_size") {
            cfg.batch_size = parse_u64(key, value);
            if (cfg.batch_size == 0) throw ConfigError(key, "must be >= 1");
        } else if (key == "budget_kind") {
            expect_one_of(key, value, {"updates", "forward_passes"});
            cfg.budget_kind = value;
        } else if (key == "budget") {
            cfg.budget = parse_u64(key, value);
        } else if (key == "master_seed") {
            cfg.master_seed = parse_u64(key, value);
        } else if (key == "eval_every") {
            cfg.eval_every = parse_u64(key, value);
            if (cfg.eval_every == 0) throw ConfigError(key, "must be >= 1");
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "compare_s") {
            cfg.compare_s.clear();
            for (std::uint64_t s : parse_u64_list(key, value)) {
                if (s == 0) throw ConfigError(key, "sample counts must be >= 1");
                cfg.compare_s.push_back(s);
            }
            if (cfg.compare_s.empty()) throw ConfigError(key, "must list at least one S");
        } else if (key == "compare_seeds") {
            cfg.compare_seeds = parse_u64_list(key, value);
            if (cfg.compare_seeds.empty()) throw ConfigError(key, "must list at least one seed");
        } else if (key == "bounds_trials") {
            cfg.bounds_trials = parse_u64(key, value);
            if (cfg.bounds_trials == 0) throw ConfigError(key, "must be >= 1");
        }
    }
    return cfg;
}

void ExperimentConfig::require(const std::vector<std::string>& keys) const {
    for (const std::string& key : keys) {
        bool ok = true;
        if (key == "dataset") ok = !dataset.empty();
        else if (key == "output_dir") ok = !output_dir.empty();
        else if (key == "idx_files") {
            ok = !idx_train_images.empty() && !idx_train_labels.empty() &&
                 !idx_test_images.empty() && !idx_test_labels.empty();
        }
        if (!ok) throw ConfigError(key, "required by this command but not set");
    }
}

data::Dataset ExperimentConfig::make_dataset() const {
    if (dataset == "blobs") {
        return data::gen_gaussian_blobs(blobs_per_class, blobs_classes, blobs_dim, blobs_radius,
                                        blobs_sigma, data_seed);
    }
    if (dataset == "spirals") {
        return data::gen_two_spirals(spirals_per_class, spirals_sigma, spirals_turns, data_seed);
    }
    if (dataset == "idx") {
        require({"idx_files"});
        data::Split full_train = data::load_idx(idx_train_images, idx_train_labels, idx_limit);
        data::Split test = data::load_idx(idx_test_images, idx_test_labels, 0);
        if (full_train.features.dim(1) != test.features.dim(1)) {
            throw IdxError("train/test image dimensions disagree");
        }
        data::Dataset ds;
        ds.dim = full_train.features.dim(1);
        std::size_t max_label = 0;
        for (std::size_t l : full_train.labels) max_label = std::max(max_label, l);
        for (std::size_t l : test.labels) max_label = std::max(max_label, l);
        ds.num_classes = max_label + 1;
        // last 15% of the loaded training records become the validation split
        const std::size_t n = full_train.size();
        const std::size_t n_val = n * 15 / 100;
        const std::size_t n_train = n - n_val;
        auto take = [&](std::size_t begin, std::size_t count) {
            data::Split out;
            if (count == 0) return out;
            out.features = Tensor({count, ds.dim});
            out.labels.reserve(count);
            for (std::size_t r = 0; r < count; ++r) {
                for (std::size_t c = 0; c < ds.dim; ++c)
                    out.features.at(r, c) = full_train.features.at(begin + r, c);
                out.labels.push_back(full_train.labels[begin + r]);
            }
            return out;
        };
        ds.train = take(0, n_train);
        ds.validation = take(n_train, n_val);
        ds.test = std::move(test);
        ds.provenance = "idx(" + idx_train_images + "," + idx_test_images + ")";
        return ds;
    }
    throw ConfigError("dataset", "required by this command but not set");
}

net::NetworkSpec ExperimentConfig::make_network(std::size_t input_dim, std::size_t classes) const {
    net::NoiseSpec ns;
    if (noise_mode == "gaussian") {
        ns.mode = net::NoiseMode::GaussianAdd;
        ns.sigma = noise_sigma;
    } else {
        ns.mode = net::NoiseMode::BernoulliMultiply;
        ns.keep_prob = keep_prob;
    }
    const net::Activation act =
        activation == "tanh" ? net::Activation::Tanh : net::Activation::Relu;
    return net::mlp_spec(input_dim, hidden, classes, act, noise_mode != "none", ns);
}

train::TrainConfig ExperimentConfig::make_train_config(const data::Dataset& ds) const {
    train::TrainConfig cfg;
    cfg.network = make_network(ds.dim, ds.num_classes);
    cfg.samples = samples;
    cfg.estimator =
        estimator == "unweighted" ? train::Estimator::Unweighted : train::Estimator::Iwsgd;
    cfg.learning_rate = learning_rate;
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.batch_size = batch_size;
    cfg.budget_kind = budget_kind == "forward_passes" ? train::BudgetKind::ForwardPasses
                                                      : train::BudgetKind::Updates;
    cfg.budget = budget;
    cfg.master_seed = master_seed;
    cfg.eval_every = eval_every;
    cfg.validate();
    if (cfg.batch_size > ds.train.size()) {
        throw ConfigError("batch_size", "exceeds the training split size of " +
                                            std::to_string(ds.train.size()));
    }
    return cfg;
}

}  // namespace iwsgd::harness
