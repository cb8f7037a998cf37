#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bitbcnn/ops.hpp"
#include "bitbcnn/param_store.hpp"
#include "bitbcnn/tensor.hpp"

namespace bitbcnn {

using ValueId = std::size_t;

// Eager computation tape with reverse-mode gradients. Each op computes its
// output immediately and records enough to push gradients back to its
// inputs; backward() accumulates parameter gradients into the ParamStore.
//
// The graph is acyclic by construction: an op can only reference ids that
// already exist, so no cycle check is needed.
class Tape {
public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    // Leaf holding a constant; no gradient flows into it.
    ValueId constant(Tensor value);

    // Leaf bound to a named parameter in the store; backward() adds this
    // node's gradient to the parameter's gradient slot.
    ValueId param(const std::string& name);

    ValueId affine(ValueId x, ValueId w, ValueId b);
    ValueId matvec(ValueId w, ValueId x);
    ValueId add(ValueId a, ValueId b);
    ValueId scale(ValueId a, double factor);
    // Elementwise product with a constant tensor (dropout masks).
    ValueId mul_mask(ValueId a, Tensor mask);
    ValueId tanh_map(ValueId x);
    ValueId softmax(ValueId z);
    ValueId cross_entropy(ValueId p, std::size_t label);
    // Sum of coefficient-weighted rows of a matrix: sum_k coeff_k * M[row_k, :].
    ValueId weighted_row_sum(ValueId matrix, std::vector<std::pair<std::size_t, double>> rows);
    ValueId concat(ValueId a, ValueId b);
    // Elementwise maximum over same-shaped vectors; ties resolve to the
    // earliest input, so gradients route deterministically.
    ValueId max_over(std::vector<ValueId> inputs);

    const Tensor& value(ValueId id) const { return nodes_[id].out; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar loss node. Requires a ParamStore when the
    // graph contains param leaves.
    void backward(ValueId loss);

private:
    enum class Op {
        kConstant,
        kParam,
        kAffine,
        kMatvec,
        kAdd,
        kScale,
        kMulMask,
        kTanh,
        kSoftmax,
        kCrossEntropy,
        kWeightedRowSum,
        kConcat,
        kMaxOver,
    };

    struct Node {
        Op op;
        std::vector<ValueId> in;
        Tensor out;
        Tensor grad;
        double factor = 0.0;                                   // kScale
        std::size_t label = 0;                                 // kCrossEntropy
        Tensor mask;                                           // kMulMask
        std::vector<std::pair<std::size_t, double>> rows;      // kWeightedRowSum
        std::vector<std::size_t> argmax;                       // kMaxOver routing
        std::string param_name;                                // kParam
    };

    ValueId push(Node node);
    const Tensor& in_val(const Node& node, std::size_t i) const { return nodes_[node.in[i]].out; }
    Tensor& in_grad(Node& node, std::size_t i);

    ParamStore* params_;
    std::vector<Node> nodes_;
};

}  // namespace bitbcnn
