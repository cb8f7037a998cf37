#pragma once

#include <set>
#include <string>
#include <string_view>

#include "bitbcnn/ast.hpp"

namespace bitbcnn {

struct SrcmlOptions {
    // Element local names whose whole subtree is dropped. Empty by default:
    // every element the parser already emitted is kept.
    std::set<std::string> prune;
    std::string language = "srcml-family";
};

// Converts an srcML document into a node-type tree: each XML element becomes
// one node named by the element's local name (namespace prefix stripped).
// Text content, attributes, comments, and processing instructions are
// discarded, which is what removes identifiers from the tree.
Ast convert_srcml(std::string_view xml, const SrcmlOptions& options = {});

}  // namespace bitbcnn
