#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

#include "iwsgd/harness.hpp"
#include "iwsgd/logmath.hpp"
#include "iwsgd/trainer.hpp"

namespace py = pybind11;
using namespace iwsgd;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    std::vector<std::size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<std::size_t>(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

net::NetworkSpec make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t classes, const std::string& activation,
                          const std::string& noise_mode, double keep_prob, double sigma) {
    net::NoiseSpec ns;
    if (noise_mode == "gaussian") {
        ns.mode = net::NoiseMode::GaussianAdd;
        ns.sigma = sigma;
    } else if (noise_mode == "bernoulli" || noise_mode == "none") {
        ns.mode = net::NoiseMode::BernoulliMultiply;
        ns.keep_prob = keep_prob;
    } else {
        throw std::invalid_argument("noise_mode must be bernoulli, gaussian or none");
    }
    const net::Activation act = activation == "tanh" ? net::Activation::Tanh
                              : activation == "relu" ? net::Activation::Relu
                                                     : throw std::invalid_argument(
                                                           "activation must be relu or tanh");
    return net::mlp_spec(input_dim, hidden, classes, act, noise_mode != "none", ns);
}

py::dict run_from_dict(const py::dict& config) {
    std::map<std::string, std::string> kv;
    for (const auto& item : config) {
        kv[py::str(item.first).cast<std::string>()] = py::str(item.second).cast<std::string>();
    }
    const harness::ExperimentConfig cfg = harness::ExperimentConfig::parse_map(kv);
    cfg.require({"dataset"});
    const data::Dataset dataset = cfg.make_dataset();
    const train::TrainConfig tc = cfg.make_train_config(dataset);
    const train::TrainResult result = train::train(tc, dataset);
    const net::NetworkParams final_params =
        result.updates > 0 ? result.params : net::init_params(tc.network, tc.master_seed);
    const train::EvalResult test = train::evaluate(final_params, dataset.test, tc.network);

    py::list steps;
    for (const train::StepReport& s : result.steps) {
        py::dict row;
        row["step"] = s.step;
        row["objective"] = s.mean_objective;
        row["max_weight"] = s.mean_max_weight;
        row["batch_error"] = s.batch_error;
        steps.append(row);
    }
    py::dict out;
    out["final_test_error"] = test.error_rate;
    out["final_test_nll"] = test.nll;
    out["updates"] = result.updates;
    out["forward_passes"] = result.forward_passes;
    out["steps"] = steps;
    return out;
}

}  // namespace

PYBIND11_MODULE(_iwsgd, m) {
    m.doc() = "feed-forward training engine with multi-sample importance-weighted dropout";

    py::register_exception<DimensionError>(m, "DimensionError");
    py::register_exception<DegenerateLikelihoodError>(m, "DegenerateLikelihoodError");
    py::register_exception<CapacityError>(m, "CapacityError");
    py::register_exception<UnsupportedModeError>(m, "UnsupportedModeError");
    py::register_exception<ConfigError>(m, "ConfigError");

    m.def("philox4x64",
          [](const std::array<std::uint64_t, 4>& counter, const std::array<std::uint64_t, 2>& key) {
              return rng::philox4x64(counter, key);
          },
          py::arg("counter"), py::arg("key"), "Philox4x64-10 block function");

    m.def("log_sum_exp",
          [](const std::vector<double>& v) { return log_sum_exp(std::span<const double>(v)); },
          py::arg("values"));
    m.def("log_softmax",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& logits) {
              return from_tensor(log_softmax(to_tensor(logits)));
          },
          py::arg("logits"));
    m.def("matmul",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return from_tensor(matmul(to_tensor(a), to_tensor(b)));
          },
          py::arg("a"), py::arg("b"));

    m.def("importance_weights",
          [](const std::vector<double>& log_liks) {
              return obj::importance_weights(std::span<const double>(log_liks)).weights;
          },
          py::arg("log_liks"));
    m.def("lsgd_inner",
          [](const std::vector<double>& log_liks) {
              return obj::lsgd_inner(std::span<const double>(log_liks));
          },
          py::arg("log_liks"));

    py::class_<net::NetworkSpec>(m, "NetworkSpec")
        .def_property_readonly("output_dim", &net::NetworkSpec::output_dim)
        .def_property_readonly("noise_units", &net::NetworkSpec::noise_unit_count);
    py::class_<net::NetworkParams>(m, "NetworkParams")
        .def_property_readonly("count", &net::NetworkParams::count)
        .def("get_dense",
             [](const net::NetworkParams& p, std::size_t i) {
                 const net::DenseParams& d = p.dense.at(i);
                 py::object bias = d.has_bias ? py::object(from_tensor(d.bias)) : py::none();
                 return py::make_tuple(from_tensor(d.weight), bias);
             })
        .def("set_dense", [](net::NetworkParams& p, std::size_t i,
                             const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
                             const py::object& b) {
            net::DenseParams& d = p.dense.at(i);
            Tensor wt = to_tensor(w);
            if (!wt.same_shape(d.weight)) throw DimensionError("weight shape mismatch");
            d.weight = std::move(wt);
            if (!b.is_none()) {
                Tensor bt = to_tensor(b.cast<py::array_t<double>>());
                if (!d.has_bias || !bt.same_shape(d.bias)) throw DimensionError("bias shape mismatch");
                d.bias = std::move(bt);
            }
        });

    m.def("mlp", &make_mlp, py::arg("input_dim"), py::arg("hidden"), py::arg("classes"),
          py::arg("activation") = "relu", py::arg("noise_mode") = "bernoulli",
          py::arg("keep_prob") = 0.5, py::arg("sigma") = 0.0);
    m.def("init_params", &net::init_params, py::arg("spec"), py::arg("seed"));

    m.def("predict_log_probs",
          [](const net::NetworkSpec& spec, const net::NetworkParams& params,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
              const net::ForwardTrace trace =
                  net::forward(spec, params, to_tensor(x), nullptr, net::Phase::Inference);
              return from_tensor(log_softmax(trace.logits()));
          },
          py::arg("spec"), py::arg("params"), py::arg("x"));

    m.def("marginal_exact",
          [](const net::NetworkSpec& spec, const net::NetworkParams& params,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             std::size_t y) { return obj::marginal_exact(spec, params, to_tensor(x), y); },
          py::arg("spec"), py::arg("params"), py::arg("x"), py::arg("y"));
    m.def("lsgd_exact",
          [](const net::NetworkSpec& spec, const net::NetworkParams& params,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& x, std::size_t y,
             std::size_t S) { return obj::lsgd_exact(spec, params, to_tensor(x), y, S); },
          py::arg("spec"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("s"));
    m.def("lsgd_mc",
          [](const net::NetworkSpec& spec, const net::NetworkParams& params,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& x, std::size_t y,
             std::size_t S, std::size_t n_outer, std::uint64_t seed) {
              const obj::BoundEstimate est =
                  obj::lsgd_mc(spec, params, to_tensor(x), y, S, n_outer, seed);
              return py::make_tuple(est.value, est.std_error);
          },
          py::arg("spec"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("s"),
          py::arg("n_outer"), py::arg("seed"));

    m.def("gradcheck",
          [](std::uint64_t seed, std::size_t trials) {
              const harness::GradcheckResult r = harness::run_gradcheck(seed, trials);
              return py::make_tuple(r.worst_rel_err, r.pass);
          },
          py::arg("seed") = 1, py::arg("trials") = 20);

    m.def("train_run", &run_from_dict, py::arg("config"),
          "run a training configuration given as a dict of config keys");
}
