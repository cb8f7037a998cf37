#include "bitbcnn/synth.hpp"

#include <filesystem>
#include <fstream>

#include "bitbcnn/binary_io.hpp"

namespace bitbcnn {

namespace {

// Base concrete kinds shared by every label's grammar. Motif kinds are
// aliased onto these for rendering.
const std::map<std::string, std::pair<std::string, std::string>>& base_kind_names() {
    // kind -> {srcml-family name, python-family name}
    static const std::map<std::string, std::pair<std::string, std::string>> names = {
        {"ROOT", {"unit", "Module"}},
        {"FUNC", {"function", "FunctionDef"}},
        {"PARAMS", {"parameter_list", "arguments"}},
        {"BLOCK", {"block", "body"}},
        {"STMT_EXPR", {"expr_stmt", "Expr"}},
        {"STMT_DECL", {"decl_stmt", "Assign"}},
        {"IF", {"if", "If"}},
        {"WHILE", {"while", "While"}},
        {"FOR", {"for", "For"}},
        {"COND", {"condition", "Compare"}},
        {"CONTROL", {"control", "iter"}},
        {"EXPR", {"expr", "value"}},
        {"CALL", {"call", "Call"}},
        {"ARGS", {"argument_list", "args"}},
        {"DECL", {"decl", "target"}},
        {"TYPE", {"type", "annotation"}},
        {"INIT", {"init", "keyword"}},
        {"RET", {"return", "Return"}},
        {"OP", {"operator", "BinOp"}},
        {"LIT", {"literal", "Constant"}},
        {"INDEX", {"index", "Subscript"}},
        {"NAME", {"name", "Name"}},
        // Rarer constructs; the filler never produces these, the motifs do.
        {"TERNARY", {"ternary", "IfExp"}},
        {"BREAK", {"break", "Break"}},
        {"LAMBDA", {"lambda", "Lambda"}},
        {"STRUCT", {"struct", "ClassDef"}},
        {"SWITCH", {"switch", "Match"}},
        {"CASE", {"case", "match_case"}},
        {"SIZEOF", {"sizeof", "ListComp"}},
    };
    return names;
}

// Motif kinds render as their base concrete kind.
const std::map<std::string, std::string>& motif_kind_bases() {
    static const std::map<std::string, std::string> bases = {
        {"MS_STMT", "STMT_EXPR"},  {"MS_EXPR", "EXPR"},      {"MS_CALL", "CALL"},
        {"MS_ARGS", "ARGS"},       {"MS_SUBCALL", "CALL"},   {"MS_ARGS2", "ARGS"},
        {"MS_SIG", "TERNARY"},     {"BS_FOR", "FOR"},        {"BS_FOR2", "FOR"},
        {"BS_BLOCK", "BLOCK"},     {"BS_IF", "IF"},          {"BS_BLOCK2", "BLOCK"},
        {"BS_SIG", "BREAK"},       {"QS_IF", "IF"},          {"QS_IF2", "IF"},
        {"QS_THEN", "BLOCK"},      {"QS_STMT", "STMT_EXPR"}, {"QS_EXPR", "EXPR"},
        {"QS_SIG", "LAMBDA"},      {"QS_BODY", "BLOCK"},     {"LL_STMT", "STMT_DECL"},
        {"LL_DECL", "DECL"},       {"LL_DECL2", "DECL"},     {"LL_SIG", "STRUCT"},
        {"BFS_WHILE", "WHILE"},    {"BFS_IF", "IF"},         {"BFS_BLOCK", "BLOCK"},
        {"BFS_SIG", "SWITCH"},     {"BFS_CASE", "CASE"},     {"KNS_STMT", "STMT_EXPR"},
        {"KNS_EXPR", "EXPR"},      {"KNS_IDX", "INDEX"},     {"KNS_IDX2", "INDEX"},
        {"KNS_SIG", "SIZEOF"},     {"KNS_EXPR2", "EXPR"},    {"BLOCK_MAIN", "BLOCK"},
        {"BLOCK1", "BLOCK"},       {"BLOCK2", "BLOCK"},      {"IF_A", "IF"},
        {"WHILE_A", "WHILE"},      {"FOR_A", "FOR"},         {"IF_B", "IF"},
    };
    return bases;
}

KindRendering make_rendering(bool srcml) {
    KindRendering rendering;
    for (const auto& [kind, names] : base_kind_names()) {
        rendering[kind] = srcml ? names.first : names.second;
    }
    for (const auto& [kind, base] : motif_kind_bases()) {
        rendering[kind] = rendering.at(base);
    }
    return rendering;
}

}  // namespace

KindRendering srcml_family_rendering() { return make_rendering(true); }
KindRendering python_family_rendering() { return make_rendering(false); }

KindRendering rendering_for(const std::string& language) {
    if (language == "srcml-family") return srcml_family_rendering();
    if (language == "python-family") return python_family_rendering();
    throw UsageError("no synthetic rendering for language '" + language + "'");
}

namespace {

void add_rule(SynthGrammar& g, const std::string& kind,
              std::vector<SynthProduction> options) {
    g.rules[kind] = SynthRule{std::move(options)};
}

// Filler productions common to every label.
void add_common_rules(SynthGrammar& g) {
    add_rule(g, "ROOT", {{0.65, {"FUNC"}}, {0.35, {"STMT_DECL", "FUNC"}}});
    add_rule(g, "FUNC", {{1.0, {"TYPE", "PARAMS", "BLOCK_MAIN"}}});
    add_rule(g, "PARAMS", {{0.25, {}}, {0.45, {"DECL"}}, {0.30, {"DECL", "DECL"}}});
    add_rule(g, "BLOCK1",
             {{0.50, {"@stmt_b"}},
              {0.35, {"@stmt_b", "@stmt_b"}},
              {0.15, {"@stmt_b", "@stmt_b", "@stmt_b"}}});
    add_rule(g, "BLOCK2", {{0.70, {"@stmt_c"}}, {0.30, {"@stmt_c", "@stmt_c"}}});
    add_rule(g, "IF_A", {{0.70, {"COND", "BLOCK1"}}, {0.30, {"COND", "BLOCK1", "BLOCK1"}}});
    add_rule(g, "WHILE_A", {{1.0, {"COND", "BLOCK1"}}});
    add_rule(g, "FOR_A", {{1.0, {"CONTROL", "BLOCK1"}}});
    add_rule(g, "IF_B", {{1.0, {"COND", "BLOCK2"}}});
    add_rule(g, "@stmt_b",
             {{0.40, {"STMT_EXPR"}}, {0.25, {"STMT_DECL"}}, {0.20, {"IF_B"}}, {0.15, {"RET"}}});
    add_rule(g, "@stmt_c", {{0.60, {"STMT_EXPR"}}, {0.40, {"RET"}}});
    add_rule(g, "STMT_EXPR", {{1.0, {"EXPR"}}});
    add_rule(g, "STMT_DECL", {{1.0, {"DECL"}}});
    add_rule(g, "EXPR",
             {{0.40, {"CALL"}},
              {0.20, {"NAME", "OP", "NAME"}},
              {0.20, {"NAME", "OP", "LIT"}},
              {0.10, {"INDEX", "OP", "LIT"}},
              {0.10, {"LIT"}}});
    add_rule(g, "CALL", {{1.0, {"NAME", "ARGS"}}});
    add_rule(g, "ARGS", {{0.25, {}}, {0.45, {"@arg"}}, {0.30, {"@arg", "@arg"}}});
    add_rule(g, "@arg", {{0.50, {"NAME"}}, {0.30, {"LIT"}}, {0.20, {"INDEX"}}});
    add_rule(g, "INDEX", {{0.70, {"NAME"}}, {0.30, {"NAME", "LIT"}}});
    add_rule(g, "COND", {{1.0, {"EXPR"}}});
    add_rule(g, "CONTROL", {{0.60, {"EXPR"}}, {0.40, {"STMT_DECL"}}});
    add_rule(g, "DECL", {{0.35, {"TYPE"}}, {0.65, {"TYPE", "INIT"}}});
    add_rule(g, "INIT", {{1.0, {"EXPR"}}});
    add_rule(g, "RET", {{0.35, {}}, {0.65, {"EXPR"}}});
    add_rule(g, "TYPE", {{0.80, {}}, {0.20, {"NAME"}}});

    // Motifs; each label guarantees its own and may rarely pick up another's.
    // Every motif pairs a characteristic branching shape with node types the
    // filler never emits, so several convolution windows are label-specific.
    add_rule(g, "@motif_ms", {{1.0, {"MS_STMT"}}});
    add_rule(g, "MS_STMT", {{1.0, {"MS_EXPR"}}});
    add_rule(g, "MS_EXPR", {{1.0, {"MS_CALL"}}});
    add_rule(g, "MS_CALL", {{1.0, {"NAME", "MS_ARGS"}}});
    add_rule(g, "MS_ARGS", {{1.0, {"MS_SUBCALL", "MS_SUBCALL"}}});
    add_rule(g, "MS_SUBCALL", {{1.0, {"NAME", "MS_ARGS2"}}});
    add_rule(g, "MS_ARGS2", {{0.5, {"MS_SIG"}}, {0.5, {"MS_SIG", "NAME"}}});
    add_rule(g, "MS_SIG", {{1.0, {"NAME", "LIT"}}});

    add_rule(g, "@motif_bs", {{1.0, {"BS_FOR"}}});
    add_rule(g, "BS_FOR", {{1.0, {"CONTROL", "BS_FOR2"}}});
    add_rule(g, "BS_FOR2", {{1.0, {"CONTROL", "BS_BLOCK"}}});
    add_rule(g, "BS_BLOCK", {{1.0, {"BS_IF"}}});
    add_rule(g, "BS_IF", {{1.0, {"COND", "BS_BLOCK2"}}});
    add_rule(g, "BS_BLOCK2", {{0.6, {"BS_SIG"}}, {0.4, {"STMT_EXPR", "BS_SIG"}}});

    add_rule(g, "@motif_qs", {{1.0, {"QS_IF"}}});
    add_rule(g, "QS_IF", {{1.0, {"COND", "QS_THEN", "QS_THEN"}}});
    add_rule(g, "QS_THEN", {{1.0, {"QS_STMT"}}});
    add_rule(g, "QS_STMT", {{1.0, {"QS_EXPR"}}});
    add_rule(g, "QS_EXPR", {{1.0, {"QS_SIG"}}});
    add_rule(g, "QS_SIG", {{1.0, {"PARAMS", "QS_BODY"}}});
    add_rule(g, "QS_BODY", {{0.7, {"RET"}}, {0.3, {"STMT_EXPR"}}});

    add_rule(g, "@motif_ll", {{1.0, {"LL_SIG"}}});
    add_rule(g, "LL_SIG", {{0.6, {"LL_DECL", "LL_DECL"}}, {0.4, {"LL_DECL"}}});
    add_rule(g, "LL_DECL", {{1.0, {"TYPE", "LL_DECL2"}}});
    add_rule(g, "LL_DECL2", {{1.0, {"TYPE", "INIT"}}});

    add_rule(g, "@motif_bfs", {{1.0, {"BFS_WHILE"}}});
    add_rule(g, "BFS_WHILE", {{1.0, {"COND", "BFS_IF"}}});
    add_rule(g, "BFS_IF", {{1.0, {"COND", "BFS_BLOCK"}}});
    add_rule(g, "BFS_BLOCK", {{1.0, {"BFS_SIG"}}});
    add_rule(g, "BFS_SIG",
             {{0.6, {"COND", "BFS_CASE", "BFS_CASE"}}, {0.4, {"COND", "BFS_CASE"}}});
    add_rule(g, "BFS_CASE", {{1.0, {"EXPR"}}});

    add_rule(g, "@motif_kns", {{1.0, {"KNS_STMT"}}});
    add_rule(g, "KNS_STMT", {{1.0, {"KNS_EXPR"}}});
    add_rule(g, "KNS_EXPR", {{1.0, {"KNS_IDX", "OP", "KNS_SIG"}}});
    add_rule(g, "KNS_IDX", {{1.0, {"NAME", "KNS_IDX2"}}});
    add_rule(g, "KNS_IDX2", {{1.0, {"NAME"}}});
    add_rule(g, "KNS_SIG", {{0.7, {"KNS_EXPR2"}}, {0.3, {"KNS_EXPR2", "KNS_EXPR2"}}});
    add_rule(g, "KNS_EXPR2", {{1.0, {"NAME"}}});
}

const std::vector<std::string>& all_labels() {
    static const std::vector<std::string> labels = {"ms", "bs", "qs", "ll", "bfs", "kns"};
    return labels;
}

SynthGrammar make_label_grammar(const std::string& label,
                                const std::map<std::size_t, double>& stmt_count_profile,
                                double contamination_weight) {
    SynthGrammar g;
    g.label = label;
    add_common_rules(g);

    // Main block: one motif statement at a varying position among fillers.
    SynthRule main_block;
    for (const auto& [count, weight] : stmt_count_profile) {
        // `count` filler statements plus the motif, motif position spread
        // over beginning / middle / end.
        const std::vector<std::size_t> positions = {0, count / 2, count};
        for (std::size_t pos : positions) {
            std::vector<std::string> children;
            for (std::size_t i = 0; i < count; ++i) {
                if (i == pos) children.push_back("@motif_" + label);
                children.push_back("@stmt_a");
            }
            if (pos >= count) children.push_back("@motif_" + label);
            main_block.options.push_back(
                {weight / static_cast<double>(positions.size()), std::move(children)});
        }
    }
    g.rules["BLOCK_MAIN"] = std::move(main_block);

    SynthRule stmt_a;
    stmt_a.options = {{0.28, {"STMT_EXPR"}}, {0.22, {"STMT_DECL"}}, {0.18, {"IF_A"}},
                      {0.14, {"WHILE_A"}},   {0.12, {"FOR_A"}},     {0.06, {"RET"}}};
    for (const std::string& other : all_labels()) {
        if (other == label) continue;
        stmt_a.options.push_back({contamination_weight, {"@motif_" + other}});
    }
    g.rules["@stmt_a"] = std::move(stmt_a);
    return g;
}

}  // namespace

std::vector<SynthGrammar> default_grammars() {
    std::vector<SynthGrammar> grammars;
    const double contamination = 0.008;
    grammars.push_back(make_label_grammar(
        "ms", {{1, 0.30}, {2, 0.35}, {3, 0.25}, {4, 0.10}}, contamination));
    grammars.push_back(make_label_grammar(
        "bs", {{1, 0.20}, {2, 0.35}, {3, 0.30}, {4, 0.15}}, contamination));
    grammars.push_back(make_label_grammar(
        "qs", {{2, 0.30}, {3, 0.35}, {4, 0.25}, {5, 0.10}}, contamination));
    grammars.push_back(make_label_grammar(
        "ll", {{2, 0.25}, {3, 0.30}, {4, 0.30}, {5, 0.15}}, contamination));
    grammars.push_back(make_label_grammar(
        "bfs", {{3, 0.25}, {4, 0.35}, {5, 0.25}, {6, 0.15}}, contamination));
    grammars.push_back(make_label_grammar(
        "kns", {{4, 0.25}, {5, 0.35}, {6, 0.25}, {7, 0.15}}, contamination));
    return grammars;
}

namespace {

struct GenerationState {
    const SynthGrammar& grammar;
    const KindRendering& rendering;
    RngStream& rng;
    std::size_t node_count = 0;
};

const SynthProduction& pick_production(const SynthRule& rule, RngStream& rng) {
    double total = 0.0;
    for (const SynthProduction& p : rule.options) total += p.weight;
    if (total <= 0.0) throw Error("synthetic rule has no positive production weight");
    double draw = rng.next_unit() * total;
    for (const SynthProduction& p : rule.options) {
        draw -= p.weight;
        if (draw < 0.0) return p;
    }
    return rule.options.back();
}

void expand_kind(GenerationState& state, const std::string& kind, std::size_t depth,
                 std::vector<AstNode>& out) {
    if (depth > state.grammar.max_depth) {
        throw Error("synthetic grammar for '" + state.grammar.label +
                    "' exceeded its depth cap of " + std::to_string(state.grammar.max_depth) +
                    " (likely unbounded recursion)");
    }
    const bool transparent = !kind.empty() && kind[0] == '@';
    auto rule_it = state.grammar.rules.find(kind);
    if (transparent) {
        if (rule_it == state.grammar.rules.end()) {
            throw Error("transparent kind '" + kind + "' has no rule");
        }
        const SynthProduction& production = pick_production(rule_it->second, state.rng);
        for (const std::string& child : production.children) {
            expand_kind(state, child, depth + 1, out);
        }
        return;
    }
    if (++state.node_count > state.grammar.max_nodes) {
        throw Error("synthetic grammar for '" + state.grammar.label +
                    "' exceeded its node cap of " + std::to_string(state.grammar.max_nodes));
    }
    auto name_it = state.rendering.find(kind);
    if (name_it == state.rendering.end()) {
        throw Error("kind '" + kind + "' has no rendering for the target language");
    }
    AstNode node;
    node.type_name = name_it->second;
    if (rule_it != state.grammar.rules.end()) {
        const SynthProduction& production = pick_production(rule_it->second, state.rng);
        for (const std::string& child : production.children) {
            expand_kind(state, child, depth + 1, node.children);
        }
    }
    out.push_back(std::move(node));
}

}  // namespace

AstNode generate_tree(const SynthGrammar& grammar, const KindRendering& rendering,
                      RngStream& rng) {
    GenerationState state{grammar, rendering, rng};
    std::vector<AstNode> roots;
    expand_kind(state, grammar.root_kind, 0, roots);
    if (roots.size() != 1) throw Error("grammar root must produce exactly one node");
    return std::move(roots.front());
}

CorpusManifest generate_corpus(const SynthCorpusConfig& config,
                               const std::vector<SynthGrammar>& grammars) {
    if (config.out_dir.empty()) throw UsageError("synthetic corpus needs an output directory");
    if (config.per_label_per_language == 0) {
        throw UsageError("per-label program count must be positive");
    }
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(config.out_dir) / "trees");

    CorpusManifest manifest;
    manifest.base_dir = config.out_dir;
    for (const std::string& language : config.languages) {
        const KindRendering rendering = rendering_for(language);
        for (const SynthGrammar& grammar : grammars) {
            // Stable substream per (language, label): corpora grow without
            // disturbing already-generated trees.
            std::uint64_t stream = kFnvOffset;
            stream = fnv1a(stream, language);
            stream = fnv1a(stream, grammar.label);
            RngStream rng = RngStream(config.seed).split(stream);
            for (std::size_t i = 0; i < config.per_label_per_language; ++i) {
                const AstNode tree = generate_tree(grammar, rendering, rng);
                char suffix[16];
                std::snprintf(suffix, sizeof(suffix), "%05zu", i);
                const std::string source_id = language + "_" + grammar.label + "_" + suffix;
                const std::string rel_path = "trees/" + source_id + ".tree";
                std::ofstream out(fs::path(config.out_dir) / rel_path);
                if (!out) throw Error("cannot write tree file " + rel_path);
                out << serialize_canonical(tree) << '\n';
                if (!out) throw Error("failed while writing tree file " + rel_path);
                manifest.entries.push_back(
                    {source_id, language, grammar.label, rel_path, kSplitUnassigned});
            }
        }
    }
    manifest.save((fs::path(config.out_dir) / "manifest.tsv").string());
    return manifest;
}

}  // namespace bitbcnn
