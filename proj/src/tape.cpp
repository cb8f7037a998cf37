#include "bitbcnn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace bitbcnn {

ValueId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

Tensor& Tape::in_grad(Node& node, std::size_t i) {
    Node& src = nodes_[node.in[i]];
    if (src.grad.size() == 0) src.grad = Tensor::zeros(src.out.shape());
    return src.grad;
}

ValueId Tape::constant(Tensor value) {
    value.check_finite("tape constant");
    Node n;
    n.op = Op::kConstant;
    n.out = std::move(value);
    return push(std::move(n));
}

ValueId Tape::param(const std::string& name) {
    if (!params_) throw Error("tape has no parameter store for param " + name);
    Node n;
    n.op = Op::kParam;
    n.param_name = name;
    n.out = params_->value(name);
    return push(std::move(n));
}

ValueId Tape::affine(ValueId x, ValueId w, ValueId b) {
    Node n;
    n.op = Op::kAffine;
    n.in = {x, w, b};
    n.out = bitbcnn::affine(nodes_[x].out, nodes_[w].out, nodes_[b].out);
    return push(std::move(n));
}

ValueId Tape::matvec(ValueId w, ValueId x) {
    Node n;
    n.op = Op::kMatvec;
    n.in = {w, x};
    n.out = bitbcnn::matvec(nodes_[w].out, nodes_[x].out);
    return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
    const Tensor& ta = nodes_[a].out;
    const Tensor& tb = nodes_[b].out;
    if (!ta.same_shape(tb)) {
        throw DimensionError("add shape mismatch: " + ta.shape_string() + " vs " + tb.shape_string());
    }
    Node n;
    n.op = Op::kAdd;
    n.in = {a, b};
    n.out = ta;
    for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] += tb[i];
    n.out.check_finite("add");
    return push(std::move(n));
}

ValueId Tape::scale(ValueId a, double factor) {
    Node n;
    n.op = Op::kScale;
    n.in = {a};
    n.factor = factor;
    n.out = nodes_[a].out;
    for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] *= factor;
    n.out.check_finite("scale");
    return push(std::move(n));
}

ValueId Tape::mul_mask(ValueId a, Tensor mask) {
    const Tensor& ta = nodes_[a].out;
    if (!ta.same_shape(mask)) {
        throw DimensionError("mask shape mismatch: " + ta.shape_string() + " vs " + mask.shape_string());
    }
    Node n;
    n.op = Op::kMulMask;
    n.in = {a};
    n.out = ta;
    for (std::size_t i = 0; i < n.out.size(); ++i) n.out[i] *= mask[i];
    n.mask = std::move(mask);
    n.out.check_finite("mul_mask");
    return push(std::move(n));
}

ValueId Tape::tanh_map(ValueId x) {
    Node n;
    n.op = Op::kTanh;
    n.in = {x};
    n.out = bitbcnn::tanh_map(nodes_[x].out);
    return push(std::move(n));
}

ValueId Tape::softmax(ValueId z) {
    Node n;
    n.op = Op::kSoftmax;
    n.in = {z};
    n.out = bitbcnn::softmax(nodes_[z].out);
    return push(std::move(n));
}

ValueId Tape::cross_entropy(ValueId p, std::size_t label) {
    Node n;
    n.op = Op::kCrossEntropy;
    n.in = {p};
    n.label = label;
    n.out = Tensor({1}, {bitbcnn::cross_entropy(nodes_[p].out, label)});
    return push(std::move(n));
}

ValueId Tape::weighted_row_sum(ValueId matrix, std::vector<std::pair<std::size_t, double>> rows) {
    const Tensor& m = nodes_[matrix].out;
    if (m.rank() != 2) throw DimensionError("weighted_row_sum expects a matrix");
    const std::size_t cols = m.dim(1);
    Node n;
    n.op = Op::kWeightedRowSum;
    n.in = {matrix};
    n.out = Tensor({cols});
    for (const auto& [row, coeff] : rows) {
        if (row >= m.dim(0)) throw DimensionError("weighted_row_sum row out of range");
        const Scalar* src = m.data() + row * cols;
        for (std::size_t j = 0; j < cols; ++j) n.out[j] += coeff * src[j];
    }
    n.rows = std::move(rows);
    n.out.check_finite("weighted_row_sum");
    return push(std::move(n));
}

ValueId Tape::concat(ValueId a, ValueId b) {
    const Tensor& ta = nodes_[a].out;
    const Tensor& tb = nodes_[b].out;
    if (ta.rank() != 1 || tb.rank() != 1) throw DimensionError("concat expects vectors");
    Node n;
    n.op = Op::kConcat;
    n.in = {a, b};
    n.out = Tensor({ta.size() + tb.size()});
    std::copy(ta.values().begin(), ta.values().end(), n.out.values().begin());
    std::copy(tb.values().begin(), tb.values().end(), n.out.values().begin() + ta.size());
    return push(std::move(n));
}

ValueId Tape::max_over(std::vector<ValueId> inputs) {
    if (inputs.empty()) throw DimensionError("max_over requires at least one input");
    const Tensor& first = nodes_[inputs[0]].out;
    Node n;
    n.op = Op::kMaxOver;
    n.out = first;
    n.argmax.assign(first.size(), 0);
    for (std::size_t k = 1; k < inputs.size(); ++k) {
        const Tensor& t = nodes_[inputs[k]].out;
        if (!t.same_shape(first)) throw DimensionError("max_over shape mismatch");
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] > n.out[j]) {
                n.out[j] = t[j];
                n.argmax[j] = k;
            }
        }
    }
    n.in = std::move(inputs);
    return push(std::move(n));
}

void Tape::backward(ValueId loss) {
    if (loss >= nodes_.size()) throw Error("backward: unknown loss node");
    if (nodes_[loss].out.size() != 1) {
        throw Error("backward requires a scalar loss, got shape " + nodes_[loss].out.shape_string());
    }
    for (Node& n : nodes_) n.grad = Tensor();
    nodes_[loss].grad = Tensor({1}, {1.0});

    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
        Node& node = nodes_[idx];
        if (node.grad.size() == 0) continue;  // not on a path to the loss
        const Tensor& g = node.grad;
        switch (node.op) {
            case Op::kConstant:
                break;
            case Op::kParam: {
                Tensor& slot = params_->grad(node.param_name);
                for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
                break;
            }
            case Op::kAffine: {
                const Tensor& x = in_val(node, 0);
                const Tensor& w = in_val(node, 1);
                const std::size_t m = w.dim(0), nn = w.dim(1);
                {
                    Tensor& gx = in_grad(node, 0);
                    for (std::size_t i = 0; i < m; ++i) {
                        const Scalar gi = g[i];
                        const Scalar* row = w.data() + i * nn;
                        for (std::size_t j = 0; j < nn; ++j) gx[j] += gi * row[j];
                    }
                }
                {
                    Tensor& gw = in_grad(node, 1);
                    for (std::size_t i = 0; i < m; ++i) {
                        const Scalar gi = g[i];
                        Scalar* row = gw.data() + i * nn;
                        for (std::size_t j = 0; j < nn; ++j) row[j] += gi * x[j];
                    }
                }
                {
                    Tensor& gb = in_grad(node, 2);
                    for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
                }
                break;
            }
            case Op::kMatvec: {
                const Tensor& w = in_val(node, 0);
                const Tensor& x = in_val(node, 1);
                const std::size_t m = w.dim(0), nn = w.dim(1);
                {
                    Tensor& gw = in_grad(node, 0);
                    for (std::size_t i = 0; i < m; ++i) {
                        const Scalar gi = g[i];
                        Scalar* row = gw.data() + i * nn;
                        for (std::size_t j = 0; j < nn; ++j) row[j] += gi * x[j];
                    }
                }
                {
                    Tensor& gx = in_grad(node, 1);
                    for (std::size_t i = 0; i < m; ++i) {
                        const Scalar gi = g[i];
                        const Scalar* row = w.data() + i * nn;
                        for (std::size_t j = 0; j < nn; ++j) gx[j] += gi * row[j];
                    }
                }
                break;
            }
            case Op::kAdd: {
                Tensor& ga = in_grad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                Tensor& gb = in_grad(node, 1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                break;
            }
            case Op::kScale: {
                Tensor& ga = in_grad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.factor * g[i];
                break;
            }
            case Op::kMulMask: {
                Tensor& ga = in_grad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.mask[i] * g[i];
                break;
            }
            case Op::kTanh: {
                Tensor& gx = in_grad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gx[i] += (1.0 - node.out[i] * node.out[i]) * g[i];
                }
                break;
            }
            case Op::kSoftmax: {
                // dz_j = p_j * (g_j - sum_i g_i p_i)
                Scalar dot = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * node.out[i];
                Tensor& gz = in_grad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gz[i] += node.out[i] * (g[i] - dot);
                }
                break;
            }
            case Op::kCrossEntropy: {
                const Tensor& p = in_val(node, 0);
                Tensor& gp = in_grad(node, 0);
                if (p[node.label] > kCrossEntropyClamp) {
                    gp[node.label] += -g[0] / p[node.label];
                }
                break;
            }
            case Op::kWeightedRowSum: {
                Tensor& gm = in_grad(node, 0);
                const std::size_t cols = node.out.size();
                for (const auto& [row, coeff] : node.rows) {
                    Scalar* dst = gm.data() + row * cols;
                    for (std::size_t j = 0; j < cols; ++j) dst[j] += coeff * g[j];
                }
                break;
            }
            case Op::kConcat: {
                const std::size_t na = in_val(node, 0).size();
                Tensor& ga = in_grad(node, 0);
                for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                Tensor& gb = in_grad(node, 1);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                break;
            }
            case Op::kMaxOver: {
                for (std::size_t j = 0; j < g.size(); ++j) {
                    Node& src = nodes_[node.in[node.argmax[j]]];
                    if (src.grad.size() == 0) src.grad = Tensor::zeros(src.out.shape());
                    src.grad[j] += g[j];
                }
                break;
            }
        }
    }
}

}  // namespace bitbcnn
