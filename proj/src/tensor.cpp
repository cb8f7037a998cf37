#include "bitbcnn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bitbcnn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {
    for (std::size_t d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string());
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<Scalar> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string());
    }
    if (shape_product(shape_) != values_.size()) {
        throw DimensionError("value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_string());
    }
    check_finite("tensor construction");
}

Tensor Tensor::full(std::vector<std::size_t> shape, Scalar fill) {
    Tensor t(std::move(shape));
    for (Scalar& v : t.values_) v = fill;
    t.check_finite("tensor fill");
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::vector(std::vector<Scalar> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<Scalar> values) {
    return Tensor({rows, cols}, std::move(values));
}

void Tensor::check_finite(const std::string& context) const {
    for (Scalar v : values_) {
        if (!std::isfinite(v)) {
            throw DimensionError("non-finite value in " + context);
        }
    }
}

std::string Tensor::shape_string() const {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) out << "x";
        out << shape_[i];
    }
    out << "]";
    return out.str();
}

}  // namespace bitbcnn
