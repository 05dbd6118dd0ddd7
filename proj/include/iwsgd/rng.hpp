#pragma once

#include <array>
#include <cstdint>

namespace iwsgd::rng {

// Philox4x64-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Pure function of (counter, key): any draw in the engine
// is addressable by its coordinates, which makes every stream reproducible
// independent of thread schedule.
std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key);

// Purpose tag baked into the key so distinct uses of the same seed never
// share a stream.
enum class StreamKind : std::uint64_t {
    Noise = 1,    // per-(epoch, batch, example, sample, layer) training noise
    Init = 2,     // weight initialization
    Shuffle = 3,  // per-epoch example permutation
    Data = 4,     // synthetic dataset generation
    Mc = 5,       // Monte Carlo bound estimation
    Harness = 6,  // verification-suite configuration draws
};

// One counter-based stream. The key encodes (seed, kind, sample, layer) and
// the counter prefix encodes up to three more coordinates; the fourth counter
// word is the running block index. Each block yields four 64-bit words.
class Stream {
public:
    Stream(std::uint64_t seed, StreamKind kind, std::uint64_t a = 0, std::uint64_t b = 0,
           std::uint64_t c = 0, std::uint32_t sample = 0, std::uint32_t layer = 0);

    std::uint64_t next_u64();
    double next_unit();      // uniform in [0, 1), 53-bit
    double next_gaussian();  // standard normal via Box-Muller

private:
    void refill();

    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> ctr_;
    std::array<std::uint64_t, 4> buf_{};
    unsigned buf_pos_ = 4;
    double gauss_spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace iwsgd::rng
