#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bitbcnn/ast.hpp"

namespace bitbcnn {

// Per-language-family bijection between node-type names and indices in
// [0, V). Known names are assigned in lexicographic order; index V-1 is the
// reserved unknown slot, so indexing never fails on unseen types.
class Vocabulary {
public:
    Vocabulary() = default;

    // Distinct type names of the corpus in lexicographic order plus the
    // unknown slot. Every tree must carry `language`; empty corpus is an error.
    static Vocabulary build(const std::vector<Ast>& corpus, const std::string& language);

    // Degenerate corpus: a known-name list (order-insensitive, deduplicated).
    static Vocabulary from_names(const std::string& language, std::vector<std::string> names);

    const std::string& language() const { return language_; }
    std::size_t size() const { return names_.size() + 1; }  // includes unknown
    std::uint32_t unknown_index() const { return static_cast<std::uint32_t>(names_.size()); }

    std::uint32_t index_of(const std::string& type_name) const;
    bool contains(const std::string& type_name) const { return index_.count(type_name) != 0; }
    // Valid for known indices only.
    const std::string& name_of(std::uint32_t index) const;
    const std::vector<std::string>& known_names() const { return names_; }

private:
    std::string language_;
    std::vector<std::string> names_;
    std::map<std::string, std::uint32_t> index_;
};

struct IndexedNode {
    std::uint32_t type_index = 0;
    std::vector<IndexedNode> children;
};

// An Ast with type names replaced by vocabulary indices; topology and
// metadata are preserved.
struct IndexedAst {
    IndexedNode root;
    std::string language;
    std::string source_id;
    std::string algorithm_label;
    std::size_t node_count = 0;
    std::size_t depth = 0;
};

// Unseen type names map to the unknown index rather than erroring.
IndexedAst index_tree(const Ast& ast, const Vocabulary& vocab);

std::size_t count_unknown_nodes(const IndexedNode& root, const Vocabulary& vocab);

struct CorpusStats {
    std::size_t count = 0;
    std::size_t min_nodes = 0;
    double mean_nodes = 0.0;
    std::size_t max_nodes = 0;
    std::map<std::size_t, std::size_t> depth_histogram;
    std::map<std::string, std::size_t> label_histogram;
};

CorpusStats corpus_stats(const std::vector<IndexedAst>& corpus);

}  // namespace bitbcnn
