#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bitbcnn/ast.hpp"
#include "bitbcnn/manifest.hpp"
#include "bitbcnn/rng.hpp"

namespace bitbcnn {

// One alternative expansion of an abstract kind.
struct SynthProduction {
    double weight;
    std::vector<std::string> children;
};

struct SynthRule {
    std::vector<SynthProduction> options;
};

// Stochastic tree template for one algorithm label. Kinds name abstract
// node roles; kinds without a rule are leaves, and kinds starting with '@'
// are transparent dispatchers that splice their expansion into the parent
// instead of producing a node. Renderings map every concrete kind to a
// language family's node-type name.
struct SynthGrammar {
    std::string label;
    std::string root_kind = "ROOT";
    std::map<std::string, SynthRule> rules;
    std::size_t max_depth = 40;   // expansion depth; catches runaway recursion
    std::size_t max_nodes = 4000;
};

using KindRendering = std::map<std::string, std::string>;

KindRendering srcml_family_rendering();
KindRendering python_family_rendering();
KindRendering rendering_for(const std::string& language);

// Grammars for the six default labels. Every label shares the same filler
// productions; what separates them is a small structural motif guaranteed
// to appear (plus rare cross-label contamination) and mildly different
// statement-count profiles.
std::vector<SynthGrammar> default_grammars();

// Throws when the grammar exceeds its depth or node cap.
AstNode generate_tree(const SynthGrammar& grammar, const KindRendering& rendering,
                      RngStream& rng);

struct SynthCorpusConfig {
    std::vector<std::string> languages = {"srcml-family", "python-family"};
    std::size_t per_label_per_language = 50;
    std::uint64_t seed = 0;
    std::string out_dir;
};

// Writes one canonical tree file per program plus <out_dir>/manifest.tsv
// (splits unassigned) and returns the manifest.
CorpusManifest generate_corpus(const SynthCorpusConfig& config,
                               const std::vector<SynthGrammar>& grammars);

}  // namespace bitbcnn
