#pragma once

#include <string>

#include "bitbcnn/embedding.hpp"
#include "bitbcnn/rng.hpp"
#include "bitbcnn/tape.hpp"
#include "bitbcnn/tensor.hpp"
#include "bitbcnn/vocab.hpp"

namespace bitbcnn {

// Position of one node inside a convolution window. Levels count from the
// bottom of the window: level == window_depth at the window root, 1 at the
// deepest layer. Positions are 1-based among the node's siblings.
struct EtaInputs {
    std::size_t level;          // 1 <= level <= window_depth
    std::size_t window_depth;   // depth of the window, 1 for a lone node
    std::size_t position;       // 1 <= position <= sibling_count
    std::size_t sibling_count;
};

// Convex weights distributing a window node's contribution over the three
// convolution matrices. Always nonnegative and summing to one.
struct EtaWeights {
    double top;
    double left;
    double right;
};

// top = (level-1)/(window_depth-1), defined as 1 for a depth-1 window.
// right = (1-top) * (position-1)/(sibling_count-1); an only child splits
// the remainder evenly (factor 0.5). left takes whatever remains.
EtaWeights compute_eta(const EtaInputs& in);

// Convolution parameters of one encoder: three C x E matrices and a bias.
struct TbcnnParams {
    Tensor w_top;
    Tensor w_left;
    Tensor w_right;
    Tensor bias;
};

TbcnnParams init_tbcnn_params(std::size_t conv_dim, std::size_t embedding_dim, RngStream& rng);

// Uniform init in [-r, r] with r = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, RngStream& rng);

// Per-node conv features (N x C, rows in preorder). Each node's window is
// itself plus its direct children; leaves convolve alone.
Tensor tree_convolution(const IndexedNode& root, const Tensor& embedding,
                        const TbcnnParams& params);

// One convolution pass where each node's input is a row of `rows` (N x D in
// preorder) instead of an embedding lookup; lets convolutions stack.
Tensor tree_convolution_over_rows(const IndexedNode& root, const Tensor& rows,
                                  const TbcnnParams& params);

// Elementwise max over the N per-node feature rows. N must be >= 1.
Tensor dynamic_max_pool(const Tensor& features);

// Pooled fixed-size encoding of one tree.
Tensor encode_tree(const IndexedAst& tree, const Tensor& embedding, const TbcnnParams& params);

// Stacked variant: layer 1 convolves embeddings, later layers convolve the
// previous layer's per-node features.
Tensor encode_tree(const IndexedAst& tree, const Tensor& embedding,
                   const std::vector<TbcnnParams>& layers);

// Parameter names of one encoder inside a ParamStore.
struct EncoderParamNames {
    std::string embedding;
    std::string w_top;
    std::string w_left;
    std::string w_right;
    std::string bias;
};

// Same computation as encode_tree, expressed on a tape over named
// parameters so gradients reach the conv weights and the embedding rows.
// All layers share the embedding name; only layer parameters differ.
ValueId build_tree_encoding(Tape& tape, const IndexedNode& root, const EncoderParamNames& names);
ValueId build_tree_encoding(Tape& tape, const IndexedNode& root,
                            const std::vector<EncoderParamNames>& layers);

}  // namespace bitbcnn
