#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bitbcnn/errors.hpp"

namespace bitbcnn {

// One node of an identifier-free syntax tree: a grammar node-type name and
// ordered children. Source text, literals, and identifiers never appear.
struct AstNode {
    std::string type_name;
    std::vector<AstNode> children;
};

struct Ast {
    AstNode root;
    std::string language;         // language family tag, e.g. "srcml-family"
    std::string source_id;
    std::string algorithm_label;  // empty when unlabeled
};

// Canonical tree text format:  tree := '(' name tree* ')'
// name = [A-Za-z0-9_:-]+, whitespace-insensitive between tokens, one tree
// per file. Throws ParseError with a byte offset on malformed input.
Ast parse_canonical_tree(std::string_view text);

// Inverse of parse_canonical_tree up to whitespace normalization:
// parse(serialize(t)) reproduces t exactly.
std::string serialize_canonical(const AstNode& root);

std::size_t node_count(const AstNode& root);
// Nodes on the longest root-to-leaf path; a lone node has depth 1.
std::size_t tree_depth(const AstNode& root);

bool is_valid_type_name(std::string_view name);

}  // namespace bitbcnn
