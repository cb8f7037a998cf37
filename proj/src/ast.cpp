#include "bitbcnn/ast.hpp"

#include <algorithm>

namespace bitbcnn {

namespace {

bool name_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == ':' || c == '-';
}

bool space_char(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

bool is_valid_type_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), name_char);
}

Ast parse_canonical_tree(std::string_view text) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < text.size() && space_char(text[pos])) ++pos;
    };

    // Stack of open nodes; children attach to the back.
    std::vector<AstNode> stack;
    Ast result;
    bool done = false;

    skip_space();
    if (pos >= text.size()) throw ParseError("empty input, expected '('", pos);

    while (true) {
        skip_space();
        if (pos >= text.size()) {
            if (!done) throw ParseError("unbalanced parentheses: tree truncated", pos);
            break;
        }
        char c = text[pos];
        if (done) throw ParseError("trailing garbage after tree", pos);
        if (c == '(') {
            ++pos;
            skip_space();
            std::size_t start = pos;
            while (pos < text.size() && name_char(text[pos])) ++pos;
            if (pos == start) throw ParseError("empty node name", start);
            AstNode node;
            node.type_name.assign(text.substr(start, pos - start));
            stack.push_back(std::move(node));
        } else if (c == ')') {
            if (stack.empty()) throw ParseError("unbalanced ')'", pos);
            ++pos;
            AstNode finished = std::move(stack.back());
            stack.pop_back();
            if (stack.empty()) {
                result.root = std::move(finished);
                done = true;
            } else {
                stack.back().children.push_back(std::move(finished));
            }
        } else {
            throw ParseError(std::string("unexpected character '") + c + "'", pos);
        }
    }
    return result;
}

namespace {

void serialize_into(const AstNode& node, std::string& out) {
    out.push_back('(');
    out.append(node.type_name);
    for (const AstNode& child : node.children) {
        out.push_back(' ');
        serialize_into(child, out);
    }
    out.push_back(')');
}

}  // namespace

std::string serialize_canonical(const AstNode& root) {
    std::string out;
    serialize_into(root, out);
    return out;
}

std::size_t node_count(const AstNode& root) {
    std::size_t n = 1;
    for (const AstNode& child : root.children) n += node_count(child);
    return n;
}

std::size_t tree_depth(const AstNode& root) {
    std::size_t deepest = 0;
    for (const AstNode& child : root.children) deepest = std::max(deepest, tree_depth(child));
    return deepest + 1;
}

}  // namespace bitbcnn
