#include "bitbcnn/encoder.hpp"

#include <cmath>

namespace bitbcnn {

EtaWeights compute_eta(const EtaInputs& in) {
    if (in.level < 1 || in.level > in.window_depth) {
        throw Error("eta: level out of range");
    }
    if (in.position < 1 || in.position > in.sibling_count) {
        throw Error("eta: sibling position out of range");
    }
    EtaWeights eta;
    eta.top = in.window_depth == 1
                  ? 1.0
                  : static_cast<double>(in.level - 1) / static_cast<double>(in.window_depth - 1);
    const double remainder = 1.0 - eta.top;
    const double side = in.sibling_count == 1
                            ? 0.5
                            : static_cast<double>(in.position - 1) /
                                  static_cast<double>(in.sibling_count - 1);
    eta.right = remainder * side;
    eta.left = remainder - eta.right;
    return eta;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, RngStream& rng) {
    const double radius = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(-radius, radius);
    return t;
}

TbcnnParams init_tbcnn_params(std::size_t conv_dim, std::size_t embedding_dim, RngStream& rng) {
    TbcnnParams p;
    p.w_top = glorot_uniform(conv_dim, embedding_dim, rng);
    p.w_left = glorot_uniform(conv_dim, embedding_dim, rng);
    p.w_right = glorot_uniform(conv_dim, embedding_dim, rng);
    p.bias = Tensor::zeros({conv_dim});
    return p;
}

namespace {

// Preorder flattening: node pointers plus each node's children positions.
struct FlatTree {
    std::vector<const IndexedNode*> nodes;
    std::vector<std::vector<std::size_t>> children;
};

std::size_t flatten_into(const IndexedNode& node, FlatTree& flat) {
    const std::size_t index = flat.nodes.size();
    flat.nodes.push_back(&node);
    flat.children.emplace_back();
    for (const IndexedNode& child : node.children) {
        const std::size_t child_index = flatten_into(child, flat);
        flat.children[index].push_back(child_index);
    }
    return index;
}

FlatTree flatten(const IndexedNode& root) {
    FlatTree flat;
    flatten_into(root, flat);
    return flat;
}

// Window members of the node at `index`: itself plus its direct children,
// each with eta weights.
struct WindowEntry {
    std::size_t row;  // preorder position of the member
    EtaWeights eta;
};

void window_of(const FlatTree& flat, std::size_t index, std::vector<WindowEntry>& out) {
    out.clear();
    const std::size_t n = flat.children[index].size();
    const std::size_t window_depth = n == 0 ? 1 : 2;
    out.push_back({index, compute_eta({window_depth, window_depth, 1, 1})});
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({flat.children[index][i], compute_eta({1, 2, i + 1, n})});
    }
}

void check_conv_shapes(const TbcnnParams& params, std::size_t input_dim) {
    const std::size_t conv_dim = params.bias.dim(0);
    if (params.w_top.dim(0) != conv_dim || params.w_top.dim(1) != input_dim ||
        !params.w_top.same_shape(params.w_left) || !params.w_top.same_shape(params.w_right)) {
        throw DimensionError("inconsistent convolution parameter shapes");
    }
}

Tensor conv_over_flat(const FlatTree& flat, const Tensor& rows, const TbcnnParams& params) {
    const std::size_t input_dim = rows.dim(1);
    const std::size_t conv_dim = params.bias.dim(0);
    check_conv_shapes(params, input_dim);
    const std::size_t n = flat.nodes.size();
    Tensor features({n, conv_dim});
    std::vector<WindowEntry> window;
    std::vector<Scalar> slot_top(input_dim), slot_left(input_dim), slot_right(input_dim);
    for (std::size_t index = 0; index < n; ++index) {
        window_of(flat, index, window);
        // Sum eta-weighted inputs per matrix first; three matvecs follow.
        std::fill(slot_top.begin(), slot_top.end(), 0.0);
        std::fill(slot_left.begin(), slot_left.end(), 0.0);
        std::fill(slot_right.begin(), slot_right.end(), 0.0);
        for (const WindowEntry& entry : window) {
            const Scalar* in_row = rows.data() + entry.row * input_dim;
            for (std::size_t e = 0; e < input_dim; ++e) {
                slot_top[e] += entry.eta.top * in_row[e];
                slot_left[e] += entry.eta.left * in_row[e];
                slot_right[e] += entry.eta.right * in_row[e];
            }
        }
        Scalar* dst = features.data() + index * conv_dim;
        for (std::size_t c = 0; c < conv_dim; ++c) {
            const Scalar* top_row = params.w_top.data() + c * input_dim;
            const Scalar* left_row = params.w_left.data() + c * input_dim;
            const Scalar* right_row = params.w_right.data() + c * input_dim;
            Scalar acc = params.bias[c];
            for (std::size_t e = 0; e < input_dim; ++e) {
                acc += top_row[e] * slot_top[e] + left_row[e] * slot_left[e] +
                       right_row[e] * slot_right[e];
            }
            dst[c] = std::tanh(acc);
        }
    }
    features.check_finite("tree_convolution");
    return features;
}

Tensor gather_embedding_rows(const FlatTree& flat, const Tensor& embedding) {
    const std::size_t emb_dim = embedding.dim(1);
    Tensor rows({flat.nodes.size(), emb_dim});
    for (std::size_t i = 0; i < flat.nodes.size(); ++i) {
        const std::uint32_t type = flat.nodes[i]->type_index;
        if (type >= embedding.dim(0)) {
            throw DimensionError("node type index outside the embedding table");
        }
        std::copy(embedding.data() + type * emb_dim, embedding.data() + (type + 1) * emb_dim,
                  rows.data() + i * emb_dim);
    }
    return rows;
}

}  // namespace

Tensor tree_convolution(const IndexedNode& root, const Tensor& embedding,
                        const TbcnnParams& params) {
    const FlatTree flat = flatten(root);
    return conv_over_flat(flat, gather_embedding_rows(flat, embedding), params);
}

Tensor tree_convolution_over_rows(const IndexedNode& root, const Tensor& rows,
                                  const TbcnnParams& params) {
    const FlatTree flat = flatten(root);
    if (rows.dim(0) != flat.nodes.size()) {
        throw DimensionError("row count does not match the tree's node count");
    }
    return conv_over_flat(flat, rows, params);
}

Tensor dynamic_max_pool(const Tensor& features) {
    if (features.rank() != 2 || features.dim(0) < 1) {
        throw DimensionError("dynamic_max_pool requires at least one feature row");
    }
    const std::size_t rows = features.dim(0), cols = features.dim(1);
    Tensor pooled({cols});
    for (std::size_t c = 0; c < cols; ++c) pooled[c] = features.at(0, c);
    for (std::size_t r = 1; r < rows; ++r) {
        const Scalar* row = features.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (row[c] > pooled[c]) pooled[c] = row[c];
        }
    }
    return pooled;
}

Tensor encode_tree(const IndexedAst& tree, const Tensor& embedding, const TbcnnParams& params) {
    return dynamic_max_pool(tree_convolution(tree.root, embedding, params));
}

Tensor encode_tree(const IndexedAst& tree, const Tensor& embedding,
                   const std::vector<TbcnnParams>& layers) {
    if (layers.empty()) throw Error("at least one convolution layer is required");
    const FlatTree flat = flatten(tree.root);
    Tensor rows = gather_embedding_rows(flat, embedding);
    for (const TbcnnParams& layer : layers) {
        rows = conv_over_flat(flat, rows, layer);
    }
    return dynamic_max_pool(rows);
}

namespace {

struct LayerIds {
    ValueId w_top;
    ValueId w_left;
    ValueId w_right;
    ValueId bias;
};

// First layer: window slots are eta-weighted sums of embedding rows.
std::vector<ValueId> first_layer_features(Tape& tape, const FlatTree& flat, ValueId embedding,
                                          const LayerIds& layer) {
    std::vector<ValueId> features;
    features.reserve(flat.nodes.size());
    std::vector<WindowEntry> window;
    for (std::size_t index = 0; index < flat.nodes.size(); ++index) {
        window_of(flat, index, window);
        std::vector<std::pair<std::size_t, double>> top_rows, left_rows, right_rows;
        for (const WindowEntry& entry : window) {
            const std::size_t type = flat.nodes[entry.row]->type_index;
            if (entry.eta.top != 0.0) top_rows.emplace_back(type, entry.eta.top);
            if (entry.eta.left != 0.0) left_rows.emplace_back(type, entry.eta.left);
            if (entry.eta.right != 0.0) right_rows.emplace_back(type, entry.eta.right);
        }
        ValueId pre = tape.affine(tape.weighted_row_sum(embedding, std::move(top_rows)),
                                  layer.w_top, layer.bias);
        if (!left_rows.empty()) {
            pre = tape.add(pre, tape.matvec(layer.w_left, tape.weighted_row_sum(
                                                              embedding, std::move(left_rows))));
        }
        if (!right_rows.empty()) {
            pre = tape.add(pre, tape.matvec(layer.w_right, tape.weighted_row_sum(
                                                               embedding, std::move(right_rows))));
        }
        features.push_back(tape.tanh_map(pre));
    }
    return features;
}

// Later layers: window slots are eta-weighted sums of the previous layer's
// per-node feature vectors.
std::vector<ValueId> stacked_layer_features(Tape& tape, const FlatTree& flat,
                                            const std::vector<ValueId>& previous,
                                            const LayerIds& layer) {
    std::vector<ValueId> features;
    features.reserve(flat.nodes.size());
    std::vector<WindowEntry> window;
    auto weighted_sum = [&](double coeff_first, ValueId first,
                            std::vector<std::pair<double, ValueId>> rest) {
        ValueId acc = tape.scale(first, coeff_first);
        for (const auto& [coeff, id] : rest) acc = tape.add(acc, tape.scale(id, coeff));
        return acc;
    };
    for (std::size_t index = 0; index < flat.nodes.size(); ++index) {
        window_of(flat, index, window);
        std::vector<std::pair<double, ValueId>> top, left, right;
        for (const WindowEntry& entry : window) {
            if (entry.eta.top != 0.0) top.emplace_back(entry.eta.top, previous[entry.row]);
            if (entry.eta.left != 0.0) left.emplace_back(entry.eta.left, previous[entry.row]);
            if (entry.eta.right != 0.0) right.emplace_back(entry.eta.right, previous[entry.row]);
        }
        ValueId slot_top = weighted_sum(top[0].first, top[0].second,
                                        {top.begin() + 1, top.end()});
        ValueId pre = tape.affine(slot_top, layer.w_top, layer.bias);
        if (!left.empty()) {
            ValueId slot = weighted_sum(left[0].first, left[0].second,
                                        {left.begin() + 1, left.end()});
            pre = tape.add(pre, tape.matvec(layer.w_left, slot));
        }
        if (!right.empty()) {
            ValueId slot = weighted_sum(right[0].first, right[0].second,
                                        {right.begin() + 1, right.end()});
            pre = tape.add(pre, tape.matvec(layer.w_right, slot));
        }
        features.push_back(tape.tanh_map(pre));
    }
    return features;
}

}  // namespace

ValueId build_tree_encoding(Tape& tape, const IndexedNode& root,
                            const std::vector<EncoderParamNames>& layers) {
    if (layers.empty()) throw Error("at least one convolution layer is required");
    const FlatTree flat = flatten(root);
    ValueId embedding = tape.param(layers[0].embedding);
    std::vector<ValueId> features;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerIds ids{tape.param(layers[i].w_top), tape.param(layers[i].w_left),
                     tape.param(layers[i].w_right), tape.param(layers[i].bias)};
        features = i == 0 ? first_layer_features(tape, flat, embedding, ids)
                          : stacked_layer_features(tape, flat, features, ids);
    }
    return tape.max_over(std::move(features));
}

ValueId build_tree_encoding(Tape& tape, const IndexedNode& root, const EncoderParamNames& names) {
    return build_tree_encoding(tape, root, std::vector<EncoderParamNames>{names});
}

}  // namespace bitbcnn
