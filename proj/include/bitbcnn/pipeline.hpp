#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bitbcnn/manifest.hpp"
#include "bitbcnn/model.hpp"
#include "bitbcnn/rng.hpp"
#include "bitbcnn/vocab.hpp"

namespace bitbcnn {

// Stratified split: within every (language, algorithm) cell the entries are
// shuffled and round(ratio * cell_size) go to train, the rest to test.
// Returns warnings for degenerate cells (never throws on them).
std::vector<std::string> split_corpus(CorpusManifest& manifest, double train_ratio,
                                      RngStream& rng);

struct PairCounts {
    std::uint64_t total = 0;
    std::uint64_t similar = 0;
    std::uint64_t dissimilar = 0;
};

// Pair-space sizes from per-label counts of the two sides.
PairCounts count_pairs(const std::map<std::string, std::uint64_t>& left_label_counts,
                       const std::map<std::string, std::uint64_t>& right_label_counts);

// A labeled pair by manifest position (left entry, right entry).
struct PairRef {
    std::size_t left_index;
    std::size_t right_index;
    int label;
};

// Uniform sample without replacement inside one epoch: n_similar same-label
// pairs and n_dissimilar different-label pairs from the given split,
// shuffled together. Throws naming the shortfall when a pool is too small.
std::vector<PairRef> sample_pairs(const CorpusManifest& manifest, const std::string& left_language,
                                  const std::string& right_language, std::size_t n_similar,
                                  std::size_t n_dissimilar, RngStream& rng,
                                  const std::string& split = kSplitTrain);

// Loads, parses, and indexes canonical tree files on first use, keyed by
// manifest position. Trees index against the vocabulary of their language.
class TreeCache {
public:
    TreeCache(const CorpusManifest& manifest, const Vocabulary& left_vocab,
              const Vocabulary& right_vocab);

    const IndexedAst& tree(std::size_t entry_index);
    const CorpusManifest& manifest() const { return manifest_; }

private:
    const CorpusManifest& manifest_;
    const Vocabulary& left_vocab_;
    const Vocabulary& right_vocab_;
    std::map<std::size_t, IndexedAst> cache_;
};

enum class Optimizer { kSgd, kAdam };

Optimizer optimizer_from_name(const std::string& name);

// Defaults reflect what actually trains the bilateral objective: plain SGD
// (any lr, momentum, or batch size tried) never escapes the constant
// predictor on balanced pair batches, so the pipeline defaults to
// mini-batched Adam. SGD remains selectable.
struct TrainConfig {
    std::size_t epochs = 100;
    Optimizer optimizer = Optimizer::kAdam;
    double lr = 0.001;      // customary 0.01 for sgd
    double momentum = 0.0;  // sgd only
    std::size_t batch_size = 16;
    std::size_t similar_per_epoch = 1000;
    std::size_t dissimilar_per_epoch = 1000;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch;
    double mean_loss;
    double accuracy;  // on the epoch's own samples, train-mode forward
};

// The supervised loop: per epoch draw a balanced pair sample, then one
// backward + SGD step per pair. Aborts naming the epoch and pair if the
// loss ever goes non-finite.
std::vector<EpochStats> train_model(BiTbcnnModel& model, const CorpusManifest& manifest,
                                    TreeCache& cache, const TrainConfig& config);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct MetricsReport {
    // confusion[actual][predicted]
    std::array<std::array<std::uint64_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};
    std::array<ClassMetrics, 2> per_class;
    double accuracy = 0.0;

    static MetricsReport from_confusion(const std::array<std::array<std::uint64_t, 2>, 2>& m);
    std::string summary() const;
};

// Binary-classification metrics of the model's decisions over given pairs.
// Per-tree encodings are computed once and reused across pairs.
MetricsReport evaluate_binary(const BiTbcnnModel& model, const std::vector<PairRef>& pairs,
                              TreeCache& cache);

struct DetectionResult {
    std::string label;
    std::map<std::string, double> scores;  // label -> p_similar against that reference
};

// Scores the query against one reference per label and returns the argmax;
// ties resolve to the lexicographically first label.
DetectionResult detect_algorithm(const IndexedAst& query,
                                 const std::map<std::string, const IndexedAst*>& references,
                                 const BiTbcnnModel& model);

// Draws one reference tree per label for a detection trial.
using ReferenceSampler =
    std::function<std::map<std::string, const IndexedAst*>(RngStream& rng)>;

// Samples references uniformly from the train split of `language`; throws
// UsageError naming any label with no candidates.
ReferenceSampler manifest_reference_sampler(const CorpusManifest& manifest, TreeCache& cache,
                                            const std::string& language);

struct DetectionEval {
    double accuracy = 0.0;
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_label;  // correct, total
};

// Fraction of queries whose detected label matches the true label;
// references are re-drawn per query.
DetectionEval evaluate_detection(const BiTbcnnModel& model,
                                 const std::vector<const IndexedAst*>& queries,
                                 const ReferenceSampler& sampler, RngStream& rng);

// Line-oriented history artifact: commented run-configuration header
// followed by one `epoch<TAB>mean_loss<TAB>accuracy` record per epoch.
// Formatting is exact, so identical runs produce identical bytes.
void write_history_file(const std::string& path, const std::vector<EpochStats>& history,
                        const std::string& run_config_text, const std::string& corpus_digest);

// Vocabulary from the train split of one language (canonical files loaded
// from disk).
Vocabulary vocabulary_from_split(const CorpusManifest& manifest, const std::string& language,
                                 const std::string& split = kSplitTrain);

// Context pairs of every train-split tree of one language.
std::vector<ContextPair> context_pairs_from_split(const CorpusManifest& manifest,
                                                  const Vocabulary& vocab,
                                                  const std::string& split = kSplitTrain);

Ast load_canonical_file(const std::string& path, const std::string& language,
                        const std::string& source_id, const std::string& label);

}  // namespace bitbcnn
