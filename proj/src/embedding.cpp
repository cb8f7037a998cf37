#include "bitbcnn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bitbcnn/binary_io.hpp"
#include "bitbcnn/ops.hpp"

namespace bitbcnn {

namespace {

void emit_pairs(const IndexedNode& node, std::vector<ContextPair>& out) {
    for (const IndexedNode& child : node.children) {
        out.push_back({node.type_index, child.type_index});
    }
    for (const IndexedNode& child : node.children) emit_pairs(child, out);
}

}  // namespace

std::vector<ContextPair> emit_context_pairs(const IndexedAst& tree) {
    std::vector<ContextPair> pairs;
    if (tree.node_count > 0) pairs.reserve(tree.node_count - 1);
    emit_pairs(tree.root, pairs);
    return pairs;
}

Scalar skipgram_pair_loss(const Tensor& input, const Tensor& output, const ContextPair& pair) {
    const std::size_t dim = input.dim(1);
    const std::size_t vocab = output.dim(0);
    Tensor logits({vocab});
    const Scalar* parent_row = input.data() + pair.parent * dim;
    for (std::size_t c = 0; c < vocab; ++c) {
        const Scalar* out_row = output.data() + c * dim;
        Scalar dot = 0.0;
        for (std::size_t e = 0; e < dim; ++e) dot += parent_row[e] * out_row[e];
        logits[c] = dot;
    }
    return cross_entropy(softmax(logits), pair.child);
}

namespace {

// One SGD step on a single pair. Returns the loss before the update.
Scalar skipgram_step(Tensor& input, Tensor& output, const ContextPair& pair, double lr,
                     std::vector<Scalar>& probs) {
    const std::size_t dim = input.dim(1);
    const std::size_t vocab = output.dim(0);
    Scalar* parent_row = input.data() + pair.parent * dim;

    Scalar peak = -1e300;
    for (std::size_t c = 0; c < vocab; ++c) {
        const Scalar* out_row = output.data() + c * dim;
        Scalar dot = 0.0;
        for (std::size_t e = 0; e < dim; ++e) dot += parent_row[e] * out_row[e];
        probs[c] = dot;
        peak = std::max(peak, dot);
    }
    Scalar total = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
        probs[c] = std::exp(probs[c] - peak);
        total += probs[c];
    }
    for (std::size_t c = 0; c < vocab; ++c) probs[c] /= total;
    const Scalar loss = -std::log(std::max(probs[pair.child], kCrossEntropyClamp));

    // d logits = p - onehot(child); update output rows and the parent row.
    std::vector<Scalar> parent_grad(dim, 0.0);
    for (std::size_t c = 0; c < vocab; ++c) {
        const Scalar delta = probs[c] - (c == pair.child ? 1.0 : 0.0);
        Scalar* out_row = output.data() + c * dim;
        for (std::size_t e = 0; e < dim; ++e) {
            parent_grad[e] += delta * out_row[e];
            out_row[e] -= lr * delta * parent_row[e];
        }
    }
    for (std::size_t e = 0; e < dim; ++e) parent_row[e] -= lr * parent_grad[e];
    return loss;
}

}  // namespace

EmbeddingTrainResult train_embeddings(const std::vector<ContextPair>& pairs,
                                      std::size_t vocab_size, std::size_t dim,
                                      std::size_t epochs, double lr, RngStream& rng,
                                      std::string language) {
    if (pairs.empty()) throw Error("cannot train embeddings on an empty pair list");
    if (dim < 2) throw Error("embedding width must be at least 2");
    for (const ContextPair& pair : pairs) {
        if (pair.parent >= vocab_size || pair.child >= vocab_size) {
            throw Error("context pair index out of vocabulary range");
        }
    }

    EmbeddingTrainResult result;
    EmbeddingTable& table = result.table;
    table.language = std::move(language);
    table.vocab_size = vocab_size;
    table.dim = dim;
    const double radius = 0.5 / static_cast<double>(dim);
    table.input = Tensor({vocab_size, dim});
    table.output = Tensor({vocab_size, dim});
    for (std::size_t i = 0; i < table.input.size(); ++i) {
        table.input[i] = rng.next_uniform(-radius, radius);
    }
    for (std::size_t i = 0; i < table.output.size(); ++i) {
        table.output[i] = rng.next_uniform(-radius, radius);
    }

    double initial = 0.0;
    for (const ContextPair& pair : pairs) {
        initial += skipgram_pair_loss(table.input, table.output, pair);
    }
    result.initial_loss = initial / static_cast<double>(pairs.size());

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Scalar> probs(vocab_size, 0.0);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t idx : order) {
            total += skipgram_step(table.input, table.output, pairs[idx], lr, probs);
        }
        result.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
    }
    return result;
}

std::vector<std::uint32_t> nearest_types(const EmbeddingTable& table, std::uint32_t type_index,
                                         std::size_t k) {
    if (type_index >= table.vocab_size) throw Error("nearest_types: index out of range");
    if (k >= table.vocab_size) throw Error("nearest_types: k must be below the vocabulary size");
    const std::size_t dim = table.dim;
    auto norm = [&](std::uint32_t row) {
        const Scalar* r = table.input.data() + row * dim;
        Scalar acc = 0.0;
        for (std::size_t e = 0; e < dim; ++e) acc += r[e] * r[e];
        return std::sqrt(acc);
    };
    const Scalar query_norm = norm(type_index);
    if (query_norm == 0.0) return {};

    std::vector<std::pair<double, std::uint32_t>> ranked;
    const Scalar* q = table.input.data() + type_index * dim;
    for (std::uint32_t row = 0; row < table.vocab_size; ++row) {
        if (row == type_index) continue;
        const Scalar n = norm(row);
        if (n == 0.0) continue;  // zero-norm rows have no direction
        const Scalar* r = table.input.data() + row * dim;
        Scalar dot = 0.0;
        for (std::size_t e = 0; e < dim; ++e) dot += q[e] * r[e];
        ranked.emplace_back(dot / (query_norm * n), row);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].second);
    return out;
}

namespace {
constexpr char kEmbeddingMagic[5] = "BTVE";
constexpr std::uint32_t kEmbeddingVersion = 1;
}  // namespace

void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab, std::ostream& out) {
    if (vocab.size() != table.vocab_size) {
        throw Error("vocabulary size does not match embedding table");
    }
    out.write(kEmbeddingMagic, 4);
    write_u32(out, kEmbeddingVersion);
    write_string(out, table.language);
    write_u64(out, table.vocab_size);
    write_u64(out, table.dim);
    for (Scalar v : table.input.values()) write_f64(out, v);
    write_u64(out, vocab.known_names().size());
    for (const std::string& name : vocab.known_names()) write_string(out, name);
    if (!out) throw Error("failed while writing embedding file");
}

LoadedEmbeddings load_embeddings(std::istream& in) {
    expect_magic(in, kEmbeddingMagic, "node-type embedding");
    const std::uint32_t version = read_u32(in);
    if (version != kEmbeddingVersion) {
        throw Error("unsupported embedding file version " + std::to_string(version));
    }
    LoadedEmbeddings loaded;
    loaded.table.language = read_string(in);
    loaded.table.vocab_size = read_u64(in);
    loaded.table.dim = read_u64(in);
    std::vector<Scalar> values(loaded.table.vocab_size * loaded.table.dim);
    for (Scalar& v : values) v = read_f64(in);
    loaded.table.input = Tensor({loaded.table.vocab_size, loaded.table.dim}, std::move(values));
    const std::uint64_t name_count = read_u64(in);
    if (name_count + 1 != loaded.table.vocab_size) {
        throw Error("embedding file name list does not match vocabulary size");
    }
    std::vector<std::string> names;
    names.reserve(name_count);
    for (std::uint64_t i = 0; i < name_count; ++i) names.push_back(read_string(in));
    loaded.vocab = Vocabulary::from_names(loaded.table.language, std::move(names));
    if (loaded.vocab.size() != loaded.table.vocab_size) {
        throw Error("embedding file contains duplicate vocabulary names");
    }
    return loaded;
}

}  // namespace bitbcnn
