#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iwsgd/errors.hpp"

namespace iwsgd {

// Dense rectangular array of doubles, row-major. All math in the engine runs
// through this type; summation orders are fixed so results are reproducible
// bit for bit.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor row(std::vector<double> values);  // shape [n]

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D access, row-major
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const Tensor& t);

// Standard matrix product with a fixed left-to-right summation order over the
// inner dimension. Throws DimensionError naming both shapes on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// a .* b, shapes must agree
Tensor hadamard(const Tensor& a, const Tensor& b);

Tensor scaled(const Tensor& a, double alpha);

// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);

}  // namespace iwsgd
