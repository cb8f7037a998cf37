#include "bitbcnn/srcml.hpp"

#include <vector>

namespace bitbcnn {

namespace {

// Non-validating XML subset parser: elements, attributes, text, comments,
// CDATA, processing instructions, and a DOCTYPE line. Enough for srcML
// output; anything structurally broken raises ParseError with an offset.
class XmlReader {
public:
    XmlReader(std::string_view text, const SrcmlOptions& options)
        : text_(text), options_(options) {}

    AstNode parse_document() {
        skip_misc();
        if (pos_ >= text_.size()) throw ParseError("empty document: no root element", pos_);
        if (text_[pos_] != '<') throw ParseError("expected root element", pos_);
        AstNode root;
        bool kept = parse_element(root);
        if (!kept) throw ParseError("root element is pruned", 0);
        skip_misc();
        if (pos_ < text_.size()) throw ParseError("content after root element", pos_);
        return root;
    }

private:
    bool space(char c) const { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    void skip_space() {
        while (pos_ < text_.size() && space(text_[pos_])) ++pos_;
    }

    // Whitespace, comments, PIs, and DOCTYPE between markup.
    void skip_misc() {
        for (;;) {
            skip_space();
            if (starts_with("<!--")) {
                skip_comment();
            } else if (starts_with("<?")) {
                skip_until("?>", "unterminated processing instruction");
            } else if (starts_with("<!DOCTYPE")) {
                skip_until(">", "unterminated DOCTYPE");
            } else {
                return;
            }
        }
    }

    bool starts_with(std::string_view prefix) const {
        return text_.substr(pos_, prefix.size()) == prefix;
    }

    void skip_comment() {
        std::size_t start = pos_;
        pos_ += 4;
        std::size_t end = text_.find("-->", pos_);
        if (end == std::string_view::npos) throw ParseError("unterminated comment", start);
        pos_ = end + 3;
    }

    void skip_until(std::string_view terminator, const char* message) {
        std::size_t start = pos_;
        std::size_t end = text_.find(terminator, pos_);
        if (end == std::string_view::npos) throw ParseError(message, start);
        pos_ = end + terminator.size();
    }

    bool name_start(char c) const {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':';
    }

    bool name_char(char c) const {
        return name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
    }

    std::string read_name() {
        std::size_t start = pos_;
        if (pos_ >= text_.size() || !name_start(text_[pos_])) {
            throw ParseError("expected XML name", pos_);
        }
        while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    static std::string local_name(const std::string& qualified) {
        std::size_t colon = qualified.rfind(':');
        return colon == std::string::npos ? qualified : qualified.substr(colon + 1);
    }

    void skip_attributes() {
        for (;;) {
            skip_space();
            if (pos_ >= text_.size()) throw ParseError("unterminated start tag", pos_);
            char c = text_[pos_];
            if (c == '>' || c == '/') return;
            read_name();
            skip_space();
            if (pos_ >= text_.size() || text_[pos_] != '=') {
                throw ParseError("expected '=' in attribute", pos_);
            }
            ++pos_;
            skip_space();
            if (pos_ >= text_.size() || (text_[pos_] != '"' && text_[pos_] != '\'')) {
                throw ParseError("expected quoted attribute value", pos_);
            }
            char quote = text_[pos_++];
            std::size_t end = text_.find(quote, pos_);
            if (end == std::string_view::npos) throw ParseError("unterminated attribute value", pos_);
            pos_ = end + 1;
        }
    }

    // Parses the element at pos_ into `out`. Returns false when the element
    // is on the prune list, in which case `out` is untouched.
    bool parse_element(AstNode& out) {
        std::size_t tag_start = pos_;
        ++pos_;  // consume '<'
        std::string name = local_name(read_name());
        skip_attributes();
        bool pruned = options_.prune.count(name) != 0;
        AstNode node;
        node.type_name = name;

        if (starts_with("/>")) {
            pos_ += 2;
            if (pruned) return false;
            out = std::move(node);
            return true;
        }
        if (pos_ >= text_.size() || text_[pos_] != '>') {
            throw ParseError("malformed start tag", tag_start);
        }
        ++pos_;

        for (;;) {
            if (pos_ >= text_.size()) throw ParseError("unexpected end of document in element " + name, pos_);
            if (text_[pos_] == '<') {
                if (starts_with("</")) {
                    std::size_t close_start = pos_;
                    pos_ += 2;
                    std::string close = local_name(read_name());
                    skip_space();
                    if (pos_ >= text_.size() || text_[pos_] != '>') {
                        throw ParseError("malformed end tag", close_start);
                    }
                    ++pos_;
                    if (close != name) {
                        throw ParseError("mismatched end tag </" + close + "> for <" + name + ">",
                                         close_start);
                    }
                    if (pruned) return false;
                    out = std::move(node);
                    return true;
                }
                if (starts_with("<!--")) {
                    skip_comment();
                } else if (starts_with("<![CDATA[")) {
                    skip_until("]]>", "unterminated CDATA section");
                } else if (starts_with("<?")) {
                    skip_until("?>", "unterminated processing instruction");
                } else {
                    AstNode child;
                    if (parse_element(child)) node.children.push_back(std::move(child));
                }
            } else {
                ++pos_;  // character data is discarded
            }
        }
    }

    std::string_view text_;
    const SrcmlOptions& options_;
    std::size_t pos_ = 0;
};

}  // namespace

Ast convert_srcml(std::string_view xml, const SrcmlOptions& options) {
    // Strip a UTF-8 BOM if present.
    if (xml.size() >= 3 && static_cast<unsigned char>(xml[0]) == 0xEF &&
        static_cast<unsigned char>(xml[1]) == 0xBB && static_cast<unsigned char>(xml[2]) == 0xBF) {
        xml.remove_prefix(3);
    }
    XmlReader reader(xml, options);
    Ast ast;
    ast.root = reader.parse_document();
    ast.language = options.language;
    return ast;
}

}  // namespace bitbcnn
