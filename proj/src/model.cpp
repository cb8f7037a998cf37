#include "bitbcnn/model.hpp"

#include <sstream>

#include "bitbcnn/binary_io.hpp"

namespace bitbcnn {

void ModelConfig::validate() const {
    if (embedding_dim < 2) throw UsageError("embedding_dim must be at least 2");
    if (conv_dim < 1 || hidden1 < 1 || hidden2 < 1) {
        throw UsageError("layer widths must be positive");
    }
    if (conv_layers < 1) throw UsageError("at least one convolution layer is required");
    if (keep_prob <= 0.0 || keep_prob > 1.0) {
        throw UsageError("keep_prob must be in (0, 1]");
    }
    if (left_language == right_language) {
        throw UsageError("left and right languages must differ");
    }
    if (left_language.empty() || right_language.empty()) {
        throw UsageError("language tags must be non-empty");
    }
}

std::string ModelConfig::describe() const {
    std::ostringstream out;
    out << "embedding_dim=" << embedding_dim << "\nconv_dim=" << conv_dim
        << "\nconv_layers=" << conv_layers << "\nhidden1=" << hidden1
        << "\nhidden2=" << hidden2 << "\nkeep_prob=" << keep_prob
        << "\nleft_language=" << left_language << "\nright_language=" << right_language
        << "\nfreeze_embeddings=" << (freeze_embeddings ? 1 : 0) << "\n";
    return out.str();
}

namespace {

std::string conv_prefix(const std::string& side, std::size_t layer) {
    return layer == 0 ? side + ".conv" : side + ".conv" + std::to_string(layer + 1);
}

void add_side(ParamStore& params, const std::string& prefix, const Vocabulary& vocab,
              const EmbeddingTable* pretrained, const ModelConfig& config, RngStream& rng) {
    Tensor embedding;
    if (pretrained) {
        if (pretrained->vocab_size != vocab.size() || pretrained->dim != config.embedding_dim) {
            throw Error("pre-trained embedding table shape does not match " + prefix +
                        " vocabulary/config");
        }
        embedding = pretrained->input;
    } else {
        const double radius = 0.5 / static_cast<double>(config.embedding_dim);
        embedding = Tensor({vocab.size(), config.embedding_dim});
        for (std::size_t i = 0; i < embedding.size(); ++i) {
            embedding[i] = rng.next_uniform(-radius, radius);
        }
    }
    params.add(prefix + ".embedding", std::move(embedding), !config.freeze_embeddings);
    for (std::size_t layer = 0; layer < config.conv_layers; ++layer) {
        const std::size_t input_dim = layer == 0 ? config.embedding_dim : config.conv_dim;
        const std::string name = conv_prefix(prefix, layer);
        params.add(name + ".top", glorot_uniform(config.conv_dim, input_dim, rng));
        params.add(name + ".left", glorot_uniform(config.conv_dim, input_dim, rng));
        params.add(name + ".right", glorot_uniform(config.conv_dim, input_dim, rng));
        params.add(name + ".bias", Tensor::zeros({config.conv_dim}));
    }
}

}  // namespace

BiTbcnnModel BiTbcnnModel::create(ModelConfig config, Vocabulary left_vocab,
                                  Vocabulary right_vocab, const EmbeddingTable* left_embeddings,
                                  const EmbeddingTable* right_embeddings, RngStream& rng) {
    config.validate();
    if (left_vocab.language() != config.left_language ||
        right_vocab.language() != config.right_language) {
        throw Error("vocabulary languages do not match model configuration");
    }
    BiTbcnnModel model;
    model.config = std::move(config);
    model.left_vocab = std::move(left_vocab);
    model.right_vocab = std::move(right_vocab);

    add_side(model.params, "left", model.left_vocab, left_embeddings, model.config, rng);
    add_side(model.params, "right", model.right_vocab, right_embeddings, model.config, rng);

    const std::size_t joint = 2 * model.config.conv_dim;
    model.params.add("head.fc1.weight", glorot_uniform(model.config.hidden1, joint, rng));
    model.params.add("head.fc1.bias", Tensor::zeros({model.config.hidden1}));
    model.params.add("head.fc2.weight",
                     glorot_uniform(model.config.hidden2, model.config.hidden1, rng));
    model.params.add("head.fc2.bias", Tensor::zeros({model.config.hidden2}));
    model.params.add("head.out.weight", glorot_uniform(2, model.config.hidden2, rng));
    model.params.add("head.out.bias", Tensor::zeros({2}));
    return model;
}

EncoderParamNames BiTbcnnModel::side_names(bool left, std::size_t layer) const {
    const std::string side = left ? "left" : "right";
    const std::string prefix = conv_prefix(side, layer);
    return {side + ".embedding", prefix + ".top", prefix + ".left", prefix + ".right",
            prefix + ".bias"};
}

std::vector<EncoderParamNames> BiTbcnnModel::side_layer_names(bool left) const {
    std::vector<EncoderParamNames> layers;
    for (std::size_t layer = 0; layer < config.conv_layers; ++layer) {
        layers.push_back(side_names(left, layer));
    }
    return layers;
}

std::vector<TbcnnParams> BiTbcnnModel::side_conv_params(bool left) const {
    std::vector<TbcnnParams> layers;
    for (std::size_t layer = 0; layer < config.conv_layers; ++layer) {
        const EncoderParamNames names = side_names(left, layer);
        layers.push_back({params.value(names.w_top), params.value(names.w_left),
                          params.value(names.w_right), params.value(names.bias)});
    }
    return layers;
}

namespace {

void check_languages(const IndexedAst& left, const IndexedAst& right, const BiTbcnnModel& model) {
    if (left.language != model.config.left_language) {
        throw UsageError("left tree '" + left.source_id + "' is " + left.language +
                         " but the model's left side expects " + model.config.left_language);
    }
    if (right.language != model.config.right_language) {
        throw UsageError("right tree '" + right.source_id + "' is " + right.language +
                         " but the model's right side expects " + model.config.right_language);
    }
}

}  // namespace

PairGraph build_pair_graph(Tape& tape, const PairSample& sample, const BiTbcnnModel& model,
                           RunMode mode, RngStream* dropout_rng) {
    check_languages(*sample.left_tree, *sample.right_tree, model);
    if (mode == RunMode::kTrain && dropout_rng == nullptr) {
        throw Error("train mode requires a dropout rng");
    }
    ValueId left = build_tree_encoding(tape, sample.left_tree->root, model.side_layer_names(true));
    ValueId right =
        build_tree_encoding(tape, sample.right_tree->root, model.side_layer_names(false));
    ValueId joint = tape.concat(left, right);

    ValueId h1 = tape.tanh_map(
        tape.affine(joint, tape.param("head.fc1.weight"), tape.param("head.fc1.bias")));
    if (mode == RunMode::kTrain) {
        h1 = tape.mul_mask(h1, dropout_mask({model.config.hidden1}, model.config.keep_prob,
                                            *dropout_rng, mode));
    }
    ValueId h2 = tape.tanh_map(
        tape.affine(h1, tape.param("head.fc2.weight"), tape.param("head.fc2.bias")));
    if (mode == RunMode::kTrain) {
        h2 = tape.mul_mask(h2, dropout_mask({model.config.hidden2}, model.config.keep_prob,
                                            *dropout_rng, mode));
    }
    ValueId logits =
        tape.affine(h2, tape.param("head.out.weight"), tape.param("head.out.bias"));
    PairGraph graph;
    graph.probabilities = tape.softmax(logits);
    graph.loss = tape.cross_entropy(graph.probabilities, static_cast<std::size_t>(sample.label));
    return graph;
}

Tensor head_forward(const BiTbcnnModel& model, const Tensor& left_encoding,
                    const Tensor& right_encoding) {
    Tensor joint({left_encoding.size() + right_encoding.size()});
    std::copy(left_encoding.values().begin(), left_encoding.values().end(),
              joint.values().begin());
    std::copy(right_encoding.values().begin(), right_encoding.values().end(),
              joint.values().begin() + left_encoding.size());
    Tensor h1 = tanh_map(
        affine(joint, model.params.value("head.fc1.weight"), model.params.value("head.fc1.bias")));
    Tensor h2 = tanh_map(
        affine(h1, model.params.value("head.fc2.weight"), model.params.value("head.fc2.bias")));
    return softmax(
        affine(h2, model.params.value("head.out.weight"), model.params.value("head.out.bias")));
}

Tensor forward_pair(const IndexedAst& left, const IndexedAst& right, const BiTbcnnModel& model,
                    RunMode mode, RngStream* dropout_rng) {
    if (mode == RunMode::kInfer) {
        check_languages(left, right, model);
        Tensor left_enc =
            encode_tree(left, model.params.value("left.embedding"), model.side_conv_params(true));
        Tensor right_enc = encode_tree(right, model.params.value("right.embedding"),
                                       model.side_conv_params(false));
        return head_forward(model, left_enc, right_enc);
    }
    Tape tape(const_cast<ParamStore*>(&model.params));
    PairSample sample{&left, &right, 0};
    PairGraph graph = build_pair_graph(tape, sample, model, mode, dropout_rng);
    return tape.value(graph.probabilities);
}

Scalar pair_loss(const PairSample& sample, const BiTbcnnModel& model, RunMode mode,
                 RngStream* dropout_rng) {
    if (sample.label != 0 && sample.label != 1) {
        throw Error("pair label must be 0 or 1");
    }
    Tensor probs = forward_pair(*sample.left_tree, *sample.right_tree, model, mode, dropout_rng);
    return cross_entropy(probs, static_cast<std::size_t>(sample.label));
}

SimilarityDecision decide_from_probabilities(const Tensor& probabilities) {
    SimilarityDecision decision;
    decision.p_similar = probabilities[1];
    decision.label = probabilities[1] > 0.5 ? 1 : 0;
    return decision;
}

SimilarityDecision predict_similarity(const IndexedAst& left, const IndexedAst& right,
                                      const BiTbcnnModel& model) {
    return decide_from_probabilities(forward_pair(left, right, model, RunMode::kInfer));
}

namespace {
constexpr char kModelMagic[5] = "BTBM";
constexpr std::uint32_t kModelVersion = 1;

void write_vocab(std::ostream& out, const Vocabulary& vocab) {
    write_string(out, vocab.language());
    write_u64(out, vocab.known_names().size());
    for (const std::string& name : vocab.known_names()) write_string(out, name);
}

Vocabulary read_vocab(std::istream& in) {
    std::string language = read_string(in);
    const std::uint64_t count = read_u64(in);
    std::vector<std::string> names;
    names.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) names.push_back(read_string(in));
    Vocabulary vocab = Vocabulary::from_names(language, std::move(names));
    if (vocab.size() != count + 1) throw Error("model file vocabulary has duplicate names");
    return vocab;
}

}  // namespace

void BiTbcnnModel::save(std::ostream& out, const std::string& run_config_text) const {
    out.write(kModelMagic, 4);
    write_u32(out, kModelVersion);
    const std::string config_text = config.describe();
    write_string(out, to_hex(fnv1a(kFnvOffset, config_text + run_config_text)));
    write_string(out, run_config_text);
    write_u64(out, config.embedding_dim);
    write_u64(out, config.conv_dim);
    write_u64(out, config.conv_layers);
    write_u64(out, config.hidden1);
    write_u64(out, config.hidden2);
    write_f64(out, config.keep_prob);
    write_string(out, config.left_language);
    write_string(out, config.right_language);
    write_u32(out, config.freeze_embeddings ? 1 : 0);
    write_vocab(out, left_vocab);
    write_vocab(out, right_vocab);
    const auto names = params.names();
    write_u64(out, names.size());
    for (const std::string& name : names) {
        const Tensor& t = params.value(name);
        write_string(out, name);
        write_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) write_u64(out, d);
        for (Scalar v : t.values()) write_f64(out, v);
    }
    if (!out) throw Error("failed while writing model file");
}

LoadedModel BiTbcnnModel::load(std::istream& in) {
    expect_magic(in, kModelMagic, "model");
    const std::uint32_t version = read_u32(in);
    if (version != kModelVersion) {
        throw Error("unsupported model file version " + std::to_string(version));
    }
    LoadedModel loaded;
    read_string(in);  // digest; informational
    loaded.run_config_text = read_string(in);
    BiTbcnnModel& model = loaded.model;
    model.config.embedding_dim = read_u64(in);
    model.config.conv_dim = read_u64(in);
    model.config.conv_layers = read_u64(in);
    model.config.hidden1 = read_u64(in);
    model.config.hidden2 = read_u64(in);
    model.config.keep_prob = read_f64(in);
    model.config.left_language = read_string(in);
    model.config.right_language = read_string(in);
    model.config.freeze_embeddings = read_u32(in) != 0;
    model.left_vocab = read_vocab(in);
    model.right_vocab = read_vocab(in);
    const std::uint64_t tensor_count = read_u64(in);
    for (std::uint64_t i = 0; i < tensor_count; ++i) {
        std::string name = read_string(in);
        const std::uint32_t rank = read_u32(in);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = read_u64(in);
        std::vector<Scalar> values(shape_product(shape));
        for (Scalar& v : values) v = read_f64(in);
        const bool trainable =
            !(model.config.freeze_embeddings && name.ends_with(".embedding"));
        model.params.add(name, Tensor(std::move(shape), std::move(values)), trainable);
    }
    model.config.validate();
    return loaded;
}

}  // namespace bitbcnn
