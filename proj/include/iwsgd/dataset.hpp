#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iwsgd/tensor.hpp"

namespace iwsgd::data {

struct Split {
    Tensor features;  // [n x d]
    std::vector<std::size_t> labels;
    std::size_t size() const { return labels.size(); }
};

struct Dataset {
    Split train, validation, test;
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::string provenance;
};

// Gaussian blobs with class centers equally spaced on a circle of the given
// radius (first two feature dimensions; remaining dimensions centered at 0).
// Deterministic per seed; stratified 70/15/15 split.
Dataset gen_gaussian_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t dim,
                           double radius, double sigma, std::uint64_t seed);

// Two interleaved spirals in the plane; class 1 is the point reflection of
// class 0, so rotating the plane by pi swaps the classes exactly at sigma=0.
Dataset gen_two_spirals(std::size_t n_per_class, double sigma, double turns, std::uint64_t seed);

// Big-endian IDX reader: images magic 0x00000803 (count, rows, cols), labels
// magic 0x00000801 (count). Pixels are scaled by 1/255 into [0,1]. limit = 0
// loads everything; otherwise the first `limit` records in file order.
Split load_idx(const std::string& images_path, const std::string& labels_path,
               std::size_t limit = 0);

// Writer for fixtures and round-trip checks; emits the same format load_idx
// reads.
void write_idx(const std::string& images_path, const std::string& labels_path,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& labels);

}  // namespace iwsgd::data
