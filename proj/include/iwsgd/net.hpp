#pragma once

#include <cstdint>
#include <vector>

#include "iwsgd/rng.hpp"
#include "iwsgd/tensor.hpp"

namespace iwsgd::net {

enum class Activation { Relu, Tanh };
enum class NoiseMode { BernoulliMultiply, GaussianAdd };

// How a noise layer perturbs the activations below it. Bernoulli masks
// multiply (dropout); gaussian noise adds. `inverted` switches dropout to the
// divide-at-train convention; the default scales by keep_prob at inference.
struct NoiseSpec {
    NoiseMode mode = NoiseMode::BernoulliMultiply;
    double keep_prob = 1.0;
    double sigma = 0.0;
    bool inverted = false;
    void validate() const;
};

struct LayerSpec {
    enum class Kind { Dense, Activation, Noise };
    Kind kind = Kind::Dense;
    std::size_t in_dim = 0, out_dim = 0;  // dense
    bool has_bias = true;                 // dense
    Activation act = Activation::Relu;    // activation
    NoiseSpec noise;                      // noise
};

LayerSpec dense(std::size_t in_dim, std::size_t out_dim, bool has_bias = true);
LayerSpec activation(Activation act);
LayerSpec noise(NoiseSpec spec);

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<LayerSpec> layers;

    void validate() const;  // checks the width chain; throws DimensionError with layer index
    std::size_t output_dim() const;
    std::vector<std::size_t> noise_layer_indices() const;
    std::vector<std::size_t> noise_widths() const;
    std::size_t noise_unit_count() const;
};

// Builds the usual MLP stack: dense -> activation -> noise per hidden layer,
// then a final dense to the class logits. No noise when mode keeps units
// deterministic is wanted; pass use_noise = false.
NetworkSpec mlp_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t classes, Activation act, bool use_noise, NoiseSpec noise_spec);

// Addressing for one noise realization. Identical coordinates always
// regenerate the identical draw, on any thread, in any schedule.
struct DrawCoords {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t batch = 0;
    std::uint64_t example = 0;
    std::uint32_t sample = 0;
    rng::StreamKind kind = rng::StreamKind::Noise;
};

struct NoiseDraw {
    std::vector<Tensor> eps;  // one tensor per noise layer, in network order
    DrawCoords coords;
};

NoiseDraw sample_noise(const NetworkSpec& spec, const DrawCoords& coords);

struct DenseParams {
    Tensor weight;  // [in_dim x out_dim]
    Tensor bias;    // [out_dim], empty when has_bias is false
    bool has_bias = true;
};

struct NetworkParams {
    std::vector<DenseParams> dense;

    NetworkParams zeros_like() const;
    std::size_t count() const;  // total scalar parameters
    double max_abs_diff(const NetworkParams& other) const;
    bool all_finite() const;

    // flat indexing across (weight, bias) of each layer in order; used by the
    // finite-difference checks
    double get_flat(std::size_t i) const;
    void add_flat(std::size_t i, double delta);
};

void params_axpy(double alpha, const NetworkParams& x, NetworkParams& y);
void params_scale(NetworkParams& p, double alpha);

// Zero-mean normal weights with std sqrt(2 / in_dim), zero biases.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

enum class Phase { Train, Inference };

// Train: bernoulli multiplies by the mask, gaussian adds the offset.
// Inference: bernoulli scales by keep_prob, gaussian passes through.
Tensor inject_noise(const Tensor& h, const Tensor* eps, const NoiseSpec& spec, Phase phase);

struct ForwardTrace {
    std::vector<Tensor> values;  // values[0] = x, values[i + 1] = output of layer i
    NoiseDraw draw;
    Phase phase = Phase::Inference;
    const Tensor& logits() const { return values.back(); }
};

ForwardTrace forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& x,
                     const NoiseDraw* draw, Phase phase);

// log softmax(logits)[y]; throws std::out_of_range on a bad class index
double log_likelihood(const ForwardTrace& trace, std::size_t y);

// d log p(y|.) / d params with the trace's noise held fixed
NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardTrace& trace, std::size_t y);

}  // namespace iwsgd::net
