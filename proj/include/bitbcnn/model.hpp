#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "bitbcnn/encoder.hpp"
#include "bitbcnn/ops.hpp"
#include "bitbcnn/param_store.hpp"
#include "bitbcnn/vocab.hpp"

namespace bitbcnn {

struct ModelConfig {
    std::size_t embedding_dim = 30;  // E
    std::size_t conv_dim = 100;      // C
    std::size_t conv_layers = 1;     // stacked convolution passes per side
    std::size_t hidden1 = 200;       // H1
    std::size_t hidden2 = 200;       // H2
    double keep_prob = 0.7;
    std::string left_language = "srcml-family";
    std::string right_language = "python-family";
    bool freeze_embeddings = false;

    void validate() const;
    // Stable key=value rendering, hashed into artifact digests.
    std::string describe() const;
};

// A labeled cross-language tree pair: 1 = same algorithm, 0 = different.
struct PairSample {
    const IndexedAst* left_tree;
    const IndexedAst* right_tree;
    int label;
};

// The bilateral classifier: two independent tree encoders whose pooled
// outputs are concatenated and pushed through two fully connected tanh
// layers (dropout in train mode) into a binary softmax. The sides have
// fixed language roles and unshared parameters.
class BiTbcnnModel {
public:
    ModelConfig config;
    Vocabulary left_vocab;
    Vocabulary right_vocab;
    ParamStore params;

    // Parameters: per side an embedding matrix (from a pre-trained table
    // when given, uniform otherwise) and Glorot-initialized conv/head
    // weights; all biases start at zero.
    static BiTbcnnModel create(ModelConfig config, Vocabulary left_vocab, Vocabulary right_vocab,
                               const EmbeddingTable* left_embeddings,
                               const EmbeddingTable* right_embeddings, RngStream& rng);

    EncoderParamNames side_names(bool left, std::size_t layer = 0) const;
    std::vector<EncoderParamNames> side_layer_names(bool left) const;
    // Conv parameter tensors of one side, one entry per layer.
    std::vector<TbcnnParams> side_conv_params(bool left) const;

    void save(std::ostream& out, const std::string& run_config_text) const;
    static struct LoadedModel load(std::istream& in);
};

// A deserialized model plus the run configuration text embedded at save time.
struct LoadedModel {
    BiTbcnnModel model;
    std::string run_config_text;
};

// Probability vector [p_different, p_same]. Train mode draws dropout masks
// for both hidden layers from `dropout_rng`; infer mode is deterministic
// and ignores the stream. Throws UsageError when a tree's language does not
// match its side.
Tensor forward_pair(const IndexedAst& left, const IndexedAst& right, const BiTbcnnModel& model,
                    RunMode mode, RngStream* dropout_rng = nullptr);

// Cross-entropy of forward_pair against the sample label.
Scalar pair_loss(const PairSample& sample, const BiTbcnnModel& model, RunMode mode,
                 RngStream* dropout_rng = nullptr);

// Tape construction of the same forward pass for training.
struct PairGraph {
    ValueId probabilities;
    ValueId loss;
};
PairGraph build_pair_graph(Tape& tape, const PairSample& sample, const BiTbcnnModel& model,
                           RunMode mode, RngStream* dropout_rng);

// Classifier head alone, starting from two pooled encodings. Lets
// evaluation reuse cached per-tree encodings.
Tensor head_forward(const BiTbcnnModel& model, const Tensor& left_encoding,
                    const Tensor& right_encoding);

struct SimilarityDecision {
    int label;        // 1 = same algorithm; exact 0.5 resolves to 0
    double p_similar;
};

SimilarityDecision predict_similarity(const IndexedAst& left, const IndexedAst& right,
                                      const BiTbcnnModel& model);

SimilarityDecision decide_from_probabilities(const Tensor& probabilities);

}  // namespace bitbcnn
