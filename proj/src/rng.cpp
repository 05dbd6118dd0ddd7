#include "iwsgd/rng.hpp"

#include <cmath>

namespace iwsgd::rng {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key) {
    std::array<std::uint64_t, 4> c = counter;
    std::array<std::uint64_t, 2> k = key;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

Stream::Stream(std::uint64_t seed, StreamKind kind, std::uint64_t a, std::uint64_t b,
               std::uint64_t c, std::uint32_t sample, std::uint32_t layer) {
    // kind(8) | sample(24) | layer(32): every coordinate occupies its own bits,
    // so distinct coordinate tuples address distinct streams.
    const std::uint64_t tag = (static_cast<std::uint64_t>(kind) << 56) |
                              (static_cast<std::uint64_t>(sample & 0xFFFFFFu) << 32) |
                              static_cast<std::uint64_t>(layer);
    key_ = {seed, tag};
    ctr_ = {a, b, c, 0};
}

void Stream::refill() {
    buf_ = philox4x64(ctr_, key_);
    ++ctr_[3];
    buf_pos_ = 0;
}

std::uint64_t Stream::next_u64() {
    if (buf_pos_ >= 4) refill();
    return buf_[buf_pos_++];
}

double Stream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return gauss_spare_;
    }
    // u1 in (0, 1] keeps log finite; u2 in [0, 1)
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    gauss_spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

}  // namespace iwsgd::rng
