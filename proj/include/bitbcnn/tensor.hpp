#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bitbcnn/errors.hpp"

namespace bitbcnn {

// Scalar type of every tensor. Tests and gradient checks assume 64-bit
// precision; switch here for faster lower-precision production runs.
using Scalar = double;

// Dense row-major tensor. Values are validated to be finite whenever a
// tensor crosses an operation boundary.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<Scalar> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, Scalar fill);
    static Tensor identity(std::size_t n);
    static Tensor vector(std::vector<Scalar> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Scalar> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    Scalar* data() { return values_.data(); }
    const Scalar* data() const { return values_.data(); }
    std::vector<Scalar>& values() { return values_; }
    const std::vector<Scalar>& values() const { return values_; }

    Scalar& operator[](std::size_t i) { return values_[i]; }
    Scalar operator[](std::size_t i) const { return values_[i]; }

    // Matrix element access; requires rank 2.
    Scalar& at(std::size_t row, std::size_t col) { return values_[row * shape_[1] + col]; }
    Scalar at(std::size_t row, std::size_t col) const { return values_[row * shape_[1] + col]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Throws DimensionError if any entry is NaN or infinite. `context` names
    // the operation for the error message.
    void check_finite(const std::string& context) const;

    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<Scalar> values_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace bitbcnn
