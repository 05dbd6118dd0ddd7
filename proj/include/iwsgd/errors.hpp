#pragma once

#include <stdexcept>
#include <string>

namespace iwsgd {

// Shape or index disagreement between tensors/layers.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// All noise samples of one example underflowed to zero probability (or went
// non-finite), so importance weights are undefined.
struct DegenerateLikelihoodError : std::runtime_error {
    explicit DegenerateLikelihoodError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exhaustive enumeration would exceed the configured limit.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation defined for a different noise mode.
struct UnsupportedModeError : std::runtime_error {
    explicit UnsupportedModeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or unknown configuration key/value; carries the offending key.
struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(std::string k, const std::string& msg)
        : std::runtime_error(k.empty() ? msg : k + ": " + msg), key(std::move(k)) {}
};

// Malformed IDX file (bad magic, truncation, count mismatch).
struct IdxError : std::runtime_error {
    explicit IdxError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace iwsgd
