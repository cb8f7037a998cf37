#pragma once

#include <cstddef>

#include "bitbcnn/rng.hpp"
#include "bitbcnn/tensor.hpp"

namespace bitbcnn {

enum class RunMode { kTrain, kInfer };

// W is m x n, x is a length-n vector, b a length-m vector. Returns W*x + b.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// W*x without a bias term.
Tensor matvec(const Tensor& w, const Tensor& x);

// Elementwise hyperbolic tangent.
Tensor tanh_map(const Tensor& x);

// Numerically stable softmax over a vector of at least two entries.
// Shifts by the maximum before exponentiating; output sums to one.
Tensor softmax(const Tensor& z);

// Negative log-likelihood of `label` under probability vector p.
// p[label] is clamped to >= 1e-12 before the log.
Scalar cross_entropy(const Tensor& p, std::size_t label);

// Inverted dropout mask. Train mode: each entry is 1/keep_prob with
// probability keep_prob and 0 otherwise. Infer mode: all ones and the
// stream is not consumed.
Tensor dropout_mask(const std::vector<std::size_t>& shape, double keep_prob,
                    RngStream& rng, RunMode mode);

inline constexpr double kCrossEntropyClamp = 1e-12;

}  // namespace bitbcnn
