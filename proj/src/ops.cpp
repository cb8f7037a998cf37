#include "bitbcnn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace bitbcnn {

Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
        throw DimensionError("matvec shape mismatch: W " + w.shape_string() +
                             " vs x " + x.shape_string());
    }
    const std::size_t m = w.dim(0), n = w.dim(1);
    Tensor y({m});
    const Scalar* wd = w.data();
    const Scalar* xd = x.data();
    for (std::size_t i = 0; i < m; ++i) {
        Scalar acc = 0.0;
        const Scalar* row = wd + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * xd[j];
        y[i] = acc;
    }
    y.check_finite("matvec");
    return y;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 ||
        w.dim(1) != x.dim(0) || w.dim(0) != b.dim(0)) {
        throw DimensionError("affine shape mismatch: W " + w.shape_string() + ", x " +
                             x.shape_string() + ", b " + b.shape_string());
    }
    Tensor y = matvec(w, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
    y.check_finite("affine");
    return y;
}

Tensor tanh_map(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    return y;
}

Tensor softmax(const Tensor& z) {
    if (z.rank() != 1 || z.dim(0) < 2) {
        throw DimensionError("softmax requires a vector of at least two entries, got " +
                             z.shape_string());
    }
    Tensor p = z;
    Scalar peak = *std::max_element(p.values().begin(), p.values().end());
    Scalar total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(p[i] - peak);
        total += p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= total;
    p.check_finite("softmax");
    return p;
}

Scalar cross_entropy(const Tensor& p, std::size_t label) {
    if (p.rank() != 1) throw DimensionError("cross_entropy expects a probability vector");
    if (label >= p.dim(0)) {
        throw Error("cross_entropy label " + std::to_string(label) +
                    " out of range for " + std::to_string(p.dim(0)) + " classes");
    }
    return -std::log(std::max(p[label], kCrossEntropyClamp));
}

Tensor dropout_mask(const std::vector<std::size_t>& shape, double keep_prob,
                    RngStream& rng, RunMode mode) {
    if (keep_prob <= 0.0 || keep_prob > 1.0) {
        throw Error("dropout keep probability must be in (0, 1], got " +
                    std::to_string(keep_prob));
    }
    if (mode == RunMode::kInfer) return Tensor::full(shape, 1.0);
    Tensor mask(shape);
    const Scalar kept = 1.0 / keep_prob;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.next_unit() < keep_prob ? kept : 0.0;
    }
    return mask;
}

}  // namespace bitbcnn
