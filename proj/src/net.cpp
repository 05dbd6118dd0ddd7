#include "iwsgd/net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iwsgd/logmath.hpp"

namespace iwsgd::net {

void NoiseSpec::validate() const {
    if (mode == NoiseMode::BernoulliMultiply) {
        if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
            throw std::invalid_argument("bernoulli keep_prob must be in (0, 1]");
        }
    } else {
        if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian sigma must be >= 0");
    }
}

LayerSpec dense(std::size_t in_dim, std::size_t out_dim, bool has_bias) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::Dense;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.has_bias = has_bias;
    return l;
}

LayerSpec activation(Activation act) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::Activation;
    l.act = act;
    return l;
}

LayerSpec noise(NoiseSpec spec) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::Noise;
    l.noise = spec;
    return l;
}

void NetworkSpec::validate() const {
    if (input_dim == 0) throw DimensionError("network input_dim must be positive");
    std::size_t width = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerSpec::Kind::Dense:
                if (l.in_dim != width) {
                    std::ostringstream os;
                    os << "layer " << i << " (dense): expects in_dim " << l.in_dim
                       << " but previous width is " << width;
                    throw DimensionError(os.str());
                }
                if (l.out_dim == 0) {
                    std::ostringstream os;
                    os << "layer " << i << " (dense): out_dim must be positive";
                    throw DimensionError(os.str());
                }
                width = l.out_dim;
                break;
            case LayerSpec::Kind::Activation:
                break;
            case LayerSpec::Kind::Noise:
                l.noise.validate();
                break;
        }
    }
}

std::size_t NetworkSpec::output_dim() const {
    std::size_t width = input_dim;
    for (const LayerSpec& l : layers)
        if (l.kind == LayerSpec::Kind::Dense) width = l.out_dim;
    return width;
}

std::vector<std::size_t> NetworkSpec::noise_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerSpec::Kind::Noise) out.push_back(i);
    return out;
}

std::vector<std::size_t> NetworkSpec::noise_widths() const {
    std::vector<std::size_t> out;
    std::size_t width = input_dim;
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerSpec::Kind::Dense) width = l.out_dim;
        if (l.kind == LayerSpec::Kind::Noise) out.push_back(width);
    }
    return out;
}

std::size_t NetworkSpec::noise_unit_count() const {
    std::size_t n = 0;
    for (std::size_t w : noise_widths()) n += w;
    return n;
}

NetworkSpec mlp_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t classes, Activation act, bool use_noise, NoiseSpec noise_spec) {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    std::size_t width = input_dim;
    for (std::size_t h : hidden) {
        spec.layers.push_back(dense(width, h));
        spec.layers.push_back(activation(act));
        if (use_noise) spec.layers.push_back(noise(noise_spec));
        width = h;
    }
    spec.layers.push_back(dense(width, classes));
    spec.validate();
    return spec;
}

NoiseDraw sample_noise(const NetworkSpec& spec, const DrawCoords& coords) {
    NoiseDraw draw;
    draw.coords = coords;
    const auto indices = spec.noise_layer_indices();
    const auto widths = spec.noise_widths();
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const NoiseSpec& ns = spec.layers[indices[n]].noise;
        rng::Stream stream(coords.seed, coords.kind, coords.epoch, coords.batch, coords.example,
                           coords.sample, static_cast<std::uint32_t>(indices[n]));
        Tensor eps({widths[n]});
        if (ns.mode == NoiseMode::BernoulliMultiply) {
            for (std::size_t i = 0; i < eps.size(); ++i)
                eps[i] = stream.next_unit() < ns.keep_prob ? 1.0 : 0.0;
        } else {
            for (std::size_t i = 0; i < eps.size(); ++i)
                eps[i] = ns.sigma * stream.next_gaussian();
        }
        draw.eps.push_back(std::move(eps));
    }
    return draw;
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams out;
    out.dense.reserve(dense.size());
    for (const DenseParams& d : dense) {
        DenseParams z;
        z.weight = Tensor(d.weight.shape());
        if (d.has_bias) z.bias = Tensor(d.bias.shape());
        z.has_bias = d.has_bias;
        out.dense.push_back(std::move(z));
    }
    return out;
}

std::size_t NetworkParams::count() const {
    std::size_t n = 0;
    for (const DenseParams& d : dense) n += d.weight.size() + d.bias.size();
    return n;
}

double NetworkParams::max_abs_diff(const NetworkParams& other) const {
    double m = 0.0;
    for (std::size_t l = 0; l < dense.size(); ++l) {
        for (std::size_t i = 0; i < dense[l].weight.size(); ++i)
            m = std::max(m, std::abs(dense[l].weight[i] - other.dense[l].weight[i]));
        for (std::size_t i = 0; i < dense[l].bias.size(); ++i)
            m = std::max(m, std::abs(dense[l].bias[i] - other.dense[l].bias[i]));
    }
    return m;
}

bool NetworkParams::all_finite() const {
    for (const DenseParams& d : dense)
        if (!d.weight.all_finite() || (d.has_bias && !d.bias.all_finite())) return false;
    return true;
}

double NetworkParams::get_flat(std::size_t i) const {
    for (const DenseParams& d : dense) {
        if (i < d.weight.size()) return d.weight[i];
        i -= d.weight.size();
        if (i < d.bias.size()) return d.bias[i];
        i -= d.bias.size();
    }
    throw std::out_of_range("parameter index out of range");
}

void NetworkParams::add_flat(std::size_t i, double delta) {
    for (DenseParams& d : dense) {
        if (i < d.weight.size()) {
            d.weight[i] += delta;
            return;
        }
        i -= d.weight.size();
        if (i < d.bias.size()) {
            d.bias[i] += delta;
            return;
        }
        i -= d.bias.size();
    }
    throw std::out_of_range("parameter index out of range");
}

void params_axpy(double alpha, const NetworkParams& x, NetworkParams& y) {
    if (x.dense.size() != y.dense.size()) throw DimensionError("params_axpy: layer count mismatch");
    for (std::size_t l = 0; l < x.dense.size(); ++l) {
        axpy(alpha, x.dense[l].weight, y.dense[l].weight);
        if (x.dense[l].has_bias) axpy(alpha, x.dense[l].bias, y.dense[l].bias);
    }
}

void params_scale(NetworkParams& p, double alpha) {
    for (DenseParams& d : p.dense) {
        for (std::size_t i = 0; i < d.weight.size(); ++i) d.weight[i] *= alpha;
        for (std::size_t i = 0; i < d.bias.size(); ++i) d.bias[i] *= alpha;
    }
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetworkParams params;
    std::uint32_t dense_index = 0;
    for (const LayerSpec& l : spec.layers) {
        if (l.kind != LayerSpec::Kind::Dense) continue;
        rng::Stream stream(seed, rng::StreamKind::Init, 0, 0, 0, 0, dense_index);
        DenseParams d;
        d.has_bias = l.has_bias;
        d.weight = Tensor({l.in_dim, l.out_dim});
        const double scale = std::sqrt(2.0 / static_cast<double>(l.in_dim));
        for (std::size_t i = 0; i < d.weight.size(); ++i)
            d.weight[i] = scale * stream.next_gaussian();
        if (l.has_bias) d.bias = Tensor({l.out_dim});
        params.dense.push_back(std::move(d));
        ++dense_index;
    }
    return params;
}

Tensor inject_noise(const Tensor& h, const Tensor* eps, const NoiseSpec& spec, Phase phase) {
    if (phase == Phase::Train) {
        if (eps == nullptr) throw DimensionError("inject_noise: train phase requires a noise draw");
        if (!h.same_shape(*eps)) {
            throw DimensionError("inject_noise shape mismatch: " + shape_str(h) + " vs " +
                                 shape_str(*eps));
        }
        Tensor out = h;
        if (spec.mode == NoiseMode::BernoulliMultiply) {
            const double scale = spec.inverted ? 1.0 / spec.keep_prob : 1.0;
            for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*eps)[i] * scale;
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*eps)[i];
        }
        return out;
    }
    // inference: expectation of the train-phase transform
    if (spec.mode == NoiseMode::BernoulliMultiply && !spec.inverted) {
        return scaled(h, spec.keep_prob);
    }
    return h;
}

namespace {

Tensor apply_activation(const Tensor& x, Activation act) {
    Tensor out = x;
    if (act == Activation::Relu) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    }
    return out;
}

Tensor dense_forward(const Tensor& x, const DenseParams& d) {
    const std::size_t in = d.weight.dim(0), out_w = d.weight.dim(1);
    Tensor out({out_w});
    for (std::size_t j = 0; j < out_w; ++j) out[j] = d.has_bias ? d.bias[j] : 0.0;
    for (std::size_t k = 0; k < in; ++k) {
        const double xv = x[k];
        const double* wrow = d.weight.data() + k * out_w;
        for (std::size_t j = 0; j < out_w; ++j) out[j] += xv * wrow[j];
    }
    return out;
}

[[noreturn]] void rethrow_with_layer(std::size_t layer, const DimensionError& e) {
    std::ostringstream os;
    os << "layer " << layer << ": " << e.what();
    throw DimensionError(os.str());
}

}  // namespace

ForwardTrace forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& x,
                     const NoiseDraw* draw, Phase phase) {
    if (x.rank() != 1 || x.dim(0) != spec.input_dim) {
        throw DimensionError("forward: input shape " + shape_str(x) + " does not match input_dim " +
                             std::to_string(spec.input_dim));
    }
    const auto noise_indices = spec.noise_layer_indices();
    if (phase == Phase::Train && !noise_indices.empty()) {
        if (draw == nullptr || draw->eps.size() != noise_indices.size()) {
            throw DimensionError("forward: train phase requires a draw covering every noise layer");
        }
    }

    ForwardTrace trace;
    trace.phase = phase;
    if (draw != nullptr) trace.draw = *draw;
    trace.values.reserve(spec.layers.size() + 1);
    trace.values.push_back(x);

    std::size_t dense_index = 0, noise_index = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const Tensor& cur = trace.values.back();
        try {
            switch (l.kind) {
                case LayerSpec::Kind::Dense: {
                    if (cur.size() != l.in_dim) {
                        throw DimensionError("dense expects width " + std::to_string(l.in_dim) +
                                             ", got " + shape_str(cur));
                    }
                    trace.values.push_back(dense_forward(cur, params.dense[dense_index]));
                    ++dense_index;
                    break;
                }
                case LayerSpec::Kind::Activation:
                    trace.values.push_back(apply_activation(cur, l.act));
                    break;
                case LayerSpec::Kind::Noise: {
                    const Tensor* eps =
                        phase == Phase::Train ? &trace.draw.eps[noise_index] : nullptr;
                    trace.values.push_back(inject_noise(cur, eps, l.noise, phase));
                    ++noise_index;
                    break;
                }
            }
        } catch (const DimensionError& e) {
            rethrow_with_layer(i, e);
        }
    }
    return trace;
}

double log_likelihood(const ForwardTrace& trace, std::size_t y) {
    const Tensor& logits = trace.logits();
    if (y >= logits.size()) {
        throw std::out_of_range("class index " + std::to_string(y) + " out of range for " +
                                std::to_string(logits.size()) + " classes");
    }
    return log_softmax(logits)[y];
}

NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardTrace& trace, std::size_t y) {
    if (trace.values.size() != spec.layers.size() + 1) {
        throw DimensionError("backward: trace does not match network spec");
    }
    if (trace.phase != Phase::Train && !spec.noise_layer_indices().empty()) {
        throw std::logic_error("backward requires a train-phase trace");
    }

    NetworkParams grad;
    grad.dense.reserve(params.dense.size());
    for (const DenseParams& d : params.dense) {
        DenseParams g;
        g.weight = Tensor(d.weight.shape());
        if (d.has_bias) g.bias = Tensor(d.bias.shape());
        g.has_bias = d.has_bias;
        grad.dense.push_back(std::move(g));
    }

    // d log p(y) / d logits = onehot(y) - softmax(logits)
    const Tensor logp = log_softmax(trace.logits());
    Tensor delta({logp.size()});
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = -std::exp(logp[i]);
    if (y >= delta.size()) {
        throw std::out_of_range("class index " + std::to_string(y) + " out of range for " +
                                std::to_string(delta.size()) + " classes");
    }
    delta[y] += 1.0;

    std::size_t dense_index = params.dense.size();
    std::size_t noise_index = trace.draw.eps.size();
    for (std::size_t i = spec.layers.size(); i-- > 0;) {
        const LayerSpec& l = spec.layers[i];
        const Tensor& input = trace.values[i];
        const Tensor& output = trace.values[i + 1];
        switch (l.kind) {
            case LayerSpec::Kind::Dense: {
                --dense_index;
                const DenseParams& d = params.dense[dense_index];
                DenseParams& g = grad.dense[dense_index];
                const std::size_t in = d.weight.dim(0), out_w = d.weight.dim(1);
                for (std::size_t k = 0; k < in; ++k) {
                    const double xv = input[k];
                    double* grow = g.weight.data() + k * out_w;
                    for (std::size_t j = 0; j < out_w; ++j) grow[j] = xv * delta[j];
                }
                if (d.has_bias)
                    for (std::size_t j = 0; j < out_w; ++j) g.bias[j] = delta[j];
                Tensor next({in});
                for (std::size_t k = 0; k < in; ++k) {
                    const double* wrow = d.weight.data() + k * out_w;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < out_w; ++j) acc += delta[j] * wrow[j];
                    next[k] = acc;
                }
                delta = std::move(next);
                break;
            }
            case LayerSpec::Kind::Activation: {
                if (l.act == Activation::Relu) {
                    for (std::size_t j = 0; j < delta.size(); ++j)
                        if (input[j] <= 0.0) delta[j] = 0.0;
                } else {
                    for (std::size_t j = 0; j < delta.size(); ++j)
                        delta[j] *= 1.0 - output[j] * output[j];
                }
                break;
            }
            case LayerSpec::Kind::Noise: {
                --noise_index;
                if (l.noise.mode == NoiseMode::BernoulliMultiply) {
                    const Tensor& eps = trace.draw.eps[noise_index];
                    const double scale = l.noise.inverted ? 1.0 / l.noise.keep_prob : 1.0;
                    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= eps[j] * scale;
                }
                // gaussian_add: identity jacobian
                break;
            }
        }
    }
    return grad;
}

}  // namespace iwsgd::net
