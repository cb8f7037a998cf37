#include "bitbcnn/vocab.hpp"

#include <algorithm>
#include <set>

namespace bitbcnn {

namespace {

void collect_names(const AstNode& node, std::set<std::string>& names) {
    names.insert(node.type_name);
    for (const AstNode& child : node.children) collect_names(child, names);
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<Ast>& corpus, const std::string& language) {
    if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
    std::set<std::string> names;
    for (const Ast& ast : corpus) {
        if (ast.language != language) {
            throw Error("vocabulary language '" + language + "' does not match tree '" +
                        ast.source_id + "' tagged '" + ast.language + "'");
        }
        collect_names(ast.root, names);
    }
    Vocabulary vocab;
    vocab.language_ = language;
    vocab.names_.assign(names.begin(), names.end());
    for (std::size_t i = 0; i < vocab.names_.size(); ++i) {
        vocab.index_.emplace(vocab.names_[i], static_cast<std::uint32_t>(i));
    }
    return vocab;
}

Vocabulary Vocabulary::from_names(const std::string& language, std::vector<std::string> names) {
    std::set<std::string> unique(names.begin(), names.end());
    Vocabulary vocab;
    vocab.language_ = language;
    vocab.names_.assign(unique.begin(), unique.end());
    for (std::size_t i = 0; i < vocab.names_.size(); ++i) {
        vocab.index_.emplace(vocab.names_[i], static_cast<std::uint32_t>(i));
    }
    return vocab;
}

std::uint32_t Vocabulary::index_of(const std::string& type_name) const {
    auto it = index_.find(type_name);
    return it == index_.end() ? unknown_index() : it->second;
}

const std::string& Vocabulary::name_of(std::uint32_t index) const {
    if (index >= names_.size()) {
        throw Error("index " + std::to_string(index) + " is not a known vocabulary entry");
    }
    return names_[index];
}

namespace {

IndexedNode index_node(const AstNode& node, const Vocabulary& vocab) {
    IndexedNode out;
    out.type_index = vocab.index_of(node.type_name);
    out.children.reserve(node.children.size());
    for (const AstNode& child : node.children) {
        out.children.push_back(index_node(child, vocab));
    }
    return out;
}

}  // namespace

IndexedAst index_tree(const Ast& ast, const Vocabulary& vocab) {
    if (ast.language != vocab.language()) {
        throw Error("cannot index '" + ast.source_id + "' (" + ast.language +
                    ") with a " + vocab.language() + " vocabulary");
    }
    IndexedAst out;
    out.root = index_node(ast.root, vocab);
    out.language = ast.language;
    out.source_id = ast.source_id;
    out.algorithm_label = ast.algorithm_label;
    out.node_count = node_count(ast.root);
    out.depth = tree_depth(ast.root);
    return out;
}

std::size_t count_unknown_nodes(const IndexedNode& root, const Vocabulary& vocab) {
    std::size_t n = root.type_index == vocab.unknown_index() ? 1 : 0;
    for (const IndexedNode& child : root.children) n += count_unknown_nodes(child, vocab);
    return n;
}

CorpusStats corpus_stats(const std::vector<IndexedAst>& corpus) {
    CorpusStats stats;
    if (corpus.empty()) return stats;
    stats.count = corpus.size();
    stats.min_nodes = corpus.front().node_count;
    double total = 0.0;
    for (const IndexedAst& tree : corpus) {
        stats.min_nodes = std::min(stats.min_nodes, tree.node_count);
        stats.max_nodes = std::max(stats.max_nodes, tree.node_count);
        total += static_cast<double>(tree.node_count);
        stats.depth_histogram[tree.depth] += 1;
        if (!tree.algorithm_label.empty()) stats.label_histogram[tree.algorithm_label] += 1;
    }
    stats.mean_nodes = total / static_cast<double>(corpus.size());
    return stats;
}

}  // namespace bitbcnn
