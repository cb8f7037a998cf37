#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bitbcnn/rng.hpp"
#include "bitbcnn/tensor.hpp"
#include "bitbcnn/vocab.hpp"

namespace bitbcnn {

// One parent -> child edge of an indexed tree; the training unit of the
// node-type embedding model.
struct ContextPair {
    std::uint32_t parent;
    std::uint32_t child;
};

// Continuous vectors for node types. `input` rows are the embeddings the
// encoders consume; `output` is the projection used only while training
// the embeddings themselves.
struct EmbeddingTable {
    std::string language;
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    Tensor input;   // V x E
    Tensor output;  // V x E
};

// All parent->child edges of the tree in preorder. A single-node tree
// yields no pairs; every tree yields node_count - 1 pairs.
std::vector<ContextPair> emit_context_pairs(const IndexedAst& tree);

struct EmbeddingTrainResult {
    EmbeddingTable table;
    // Mean cross-entropy over all pairs under the initial parameters.
    double initial_loss = 0.0;
    // Running mean cross-entropy per epoch, in visiting order.
    std::vector<double> epoch_loss;
};

// Skip-gram over parent->child pairs with a full softmax across the
// vocabulary: p(child | parent) = softmax_c(input[parent] . output[c]).
// Edges are visited in a freshly shuffled order each epoch; one SGD step
// per edge. Initialization is uniform in [-0.5/E, 0.5/E] from `rng`.
EmbeddingTrainResult train_embeddings(const std::vector<ContextPair>& pairs,
                                      std::size_t vocab_size, std::size_t dim,
                                      std::size_t epochs, double lr, RngStream& rng,
                                      std::string language = "");

// Forward-only loss of one pair; shared by training and the gradient tests.
Scalar skipgram_pair_loss(const Tensor& input, const Tensor& output, const ContextPair& pair);

// k nearest known types by cosine similarity over input rows, excluding the
// query itself and any zero-norm row. Descending similarity, ties broken by
// ascending index.
std::vector<std::uint32_t> nearest_types(const EmbeddingTable& table, std::uint32_t type_index,
                                         std::size_t k);

// Flat embedding file: magic, version, language, V, E, V*E little-endian
// doubles (input rows), then the known-name list. Round-trips bit-exactly.
void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab, std::ostream& out);

struct LoadedEmbeddings {
    EmbeddingTable table;
    Vocabulary vocab;
};

LoadedEmbeddings load_embeddings(std::istream& in);

}  // namespace bitbcnn
