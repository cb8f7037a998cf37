#include "bitbcnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bitbcnn/binary_io.hpp"
#include "bitbcnn/tape.hpp"

namespace bitbcnn {

std::vector<std::string> split_corpus(CorpusManifest& manifest, double train_ratio,
                                      RngStream& rng) {
    if (train_ratio <= 0.0 || train_ratio >= 1.0) {
        throw UsageError("train ratio must be in (0, 1)");
    }
    // Cells in deterministic order: (language, label) sorted, entries sorted
    // by source_id within each cell.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const ManifestEntry& e = manifest.entries[i];
        cells[{e.language, e.algorithm_label}].push_back(i);
    }
    std::vector<std::string> warnings;
    for (auto& [key, indices] : cells) {
        std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return manifest.entries[a].source_id < manifest.entries[b].source_id;
        });
        rng.shuffle(indices);
        const std::size_t cell_size = indices.size();
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_ratio * static_cast<double>(cell_size) + 0.5));
        n_train = std::min(n_train, cell_size);
        if (n_train == 0 || n_train == cell_size) {
            warnings.push_back("cell (" + key.first + ", " + key.second + ") with " +
                               std::to_string(cell_size) + " entries has an empty " +
                               (n_train == 0 ? "train" : "test") + " side");
        }
        for (std::size_t k = 0; k < cell_size; ++k) {
            manifest.entries[indices[k]].split = k < n_train ? kSplitTrain : kSplitTest;
        }
    }
    return warnings;
}

PairCounts count_pairs(const std::map<std::string, std::uint64_t>& left_label_counts,
                       const std::map<std::string, std::uint64_t>& right_label_counts) {
    PairCounts counts;
    std::uint64_t left_total = 0, right_total = 0;
    for (const auto& [label, n] : left_label_counts) left_total += n;
    for (const auto& [label, n] : right_label_counts) right_total += n;
    counts.total = left_total * right_total;
    for (const auto& [label, n] : left_label_counts) {
        auto it = right_label_counts.find(label);
        if (it != right_label_counts.end()) counts.similar += n * it->second;
    }
    counts.dissimilar = counts.total - counts.similar;
    return counts;
}

namespace {

// Uniform draw of `want` distinct pairs from the similar or dissimilar
// pool. Enumerates the pool when it is small relative to the request;
// otherwise rejection-samples uniformly over the full grid.
void draw_pairs(const std::vector<std::size_t>& left, const std::vector<std::size_t>& right,
                const CorpusManifest& manifest, bool want_similar, std::size_t want,
                std::uint64_t pool_size, RngStream& rng, std::vector<PairRef>& out) {
    if (want == 0) return;
    auto is_similar = [&](std::size_t li, std::size_t ri) {
        return manifest.entries[li].algorithm_label == manifest.entries[ri].algorithm_label;
    };
    const std::uint64_t grid = static_cast<std::uint64_t>(left.size()) * right.size();
    if (pool_size <= std::max<std::uint64_t>(4 * want, 4096)) {
        std::vector<PairRef> pool;
        pool.reserve(pool_size);
        for (std::size_t li : left) {
            for (std::size_t ri : right) {
                if (is_similar(li, ri) == want_similar) {
                    pool.push_back({li, ri, want_similar ? 1 : 0});
                }
            }
        }
        // Partial Fisher-Yates: the first `want` entries are a uniform sample.
        for (std::size_t k = 0; k < want; ++k) {
            std::size_t j = k + static_cast<std::size_t>(rng.next_below(pool.size() - k));
            std::swap(pool[k], pool[j]);
        }
        out.insert(out.end(), pool.begin(), pool.begin() + want);
        return;
    }
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(want * 2);
    std::size_t found = 0;
    while (found < want) {
        const std::size_t li = left[rng.next_below(left.size())];
        const std::size_t ri = right[rng.next_below(right.size())];
        if (is_similar(li, ri) != want_similar) continue;
        const std::uint64_t key = static_cast<std::uint64_t>(li) * manifest.entries.size() + ri;
        if (!chosen.insert(key).second) continue;
        out.push_back({li, ri, want_similar ? 1 : 0});
        ++found;
    }
    (void)grid;
}

}  // namespace

std::vector<PairRef> sample_pairs(const CorpusManifest& manifest, const std::string& left_language,
                                  const std::string& right_language, std::size_t n_similar,
                                  std::size_t n_dissimilar, RngStream& rng,
                                  const std::string& split) {
    const std::vector<std::size_t> left = manifest.indices_of(left_language, split);
    const std::vector<std::size_t> right = manifest.indices_of(right_language, split);
    const PairCounts counts = count_pairs(manifest.label_counts(left_language, split),
                                          manifest.label_counts(right_language, split));
    if (counts.similar < n_similar) {
        throw UsageError("requested " + std::to_string(n_similar) + " similar pairs but only " +
                         std::to_string(counts.similar) + " exist in split '" + split + "'");
    }
    if (counts.dissimilar < n_dissimilar) {
        throw UsageError("requested " + std::to_string(n_dissimilar) +
                         " dissimilar pairs but only " + std::to_string(counts.dissimilar) +
                         " exist in split '" + split + "'");
    }
    std::vector<PairRef> sample;
    sample.reserve(n_similar + n_dissimilar);
    draw_pairs(left, right, manifest, true, n_similar, counts.similar, rng, sample);
    draw_pairs(left, right, manifest, false, n_dissimilar, counts.dissimilar, rng, sample);
    rng.shuffle(sample);
    return sample;
}

Ast load_canonical_file(const std::string& path, const std::string& language,
                        const std::string& source_id, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open tree file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    Ast ast = parse_canonical_tree(buffer.str());
    ast.language = language;
    ast.source_id = source_id;
    ast.algorithm_label = label;
    return ast;
}

TreeCache::TreeCache(const CorpusManifest& manifest, const Vocabulary& left_vocab,
                     const Vocabulary& right_vocab)
    : manifest_(manifest), left_vocab_(left_vocab), right_vocab_(right_vocab) {}

const IndexedAst& TreeCache::tree(std::size_t entry_index) {
    auto it = cache_.find(entry_index);
    if (it != cache_.end()) return it->second;
    const ManifestEntry& entry = manifest_.entries.at(entry_index);
    const Vocabulary* vocab = nullptr;
    if (entry.language == left_vocab_.language()) {
        vocab = &left_vocab_;
    } else if (entry.language == right_vocab_.language()) {
        vocab = &right_vocab_;
    } else {
        throw UsageError("entry " + entry.source_id + " has language '" + entry.language +
                         "' matching neither model side");
    }
    Ast ast = load_canonical_file(manifest_.resolve_path(entry), entry.language, entry.source_id,
                                  entry.algorithm_label);
    return cache_.emplace(entry_index, index_tree(ast, *vocab)).first->second;
}

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "sgd") return Optimizer::kSgd;
    if (name == "adam") return Optimizer::kAdam;
    throw UsageError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::vector<EpochStats> train_model(BiTbcnnModel& model, const CorpusManifest& manifest,
                                    TreeCache& cache, const TrainConfig& config) {
    if (config.lr <= 0.0) throw UsageError("learning rate must be positive");
    if (config.batch_size == 0) throw UsageError("batch size must be positive");
    RngStream sample_rng = RngStream(config.seed).split(1);
    RngStream dropout_rng = RngStream(config.seed).split(2);
    std::vector<EpochStats> history;
    history.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<PairRef> batch =
            sample_pairs(manifest, model.config.left_language, model.config.right_language,
                         config.similar_per_epoch, config.dissimilar_per_epoch, sample_rng);
        double loss_total = 0.0;
        std::uint64_t correct = 0;
        std::size_t accumulated = 0;
        model.params.zero_grads();
        auto apply_update = [&] {
            if (accumulated == 0) return;
            // Mean gradient over the mini-batch.
            for (auto& [name, slot] : model.params.slots()) {
                for (std::size_t k = 0; k < slot.grad.size(); ++k) {
                    slot.grad[k] /= static_cast<double>(accumulated);
                }
            }
            if (config.optimizer == Optimizer::kAdam) {
                model.params.adam_step(config.lr);
            } else {
                model.params.sgd_step(config.lr, config.momentum);
            }
            model.params.zero_grads();
            accumulated = 0;
        };
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const PairRef& ref = batch[i];
            PairSample sample{&cache.tree(ref.left_index), &cache.tree(ref.right_index),
                              ref.label};
            Tape tape(&model.params);
            PairGraph graph;
            try {
                graph = build_pair_graph(tape, sample, model, RunMode::kTrain, &dropout_rng);
            } catch (const DimensionError& e) {
                throw Error("training aborted at epoch " + std::to_string(epoch) + ", sample " +
                            std::to_string(i) + " (" + sample.left_tree->source_id + ", " +
                            sample.right_tree->source_id + "): " + e.what());
            }
            const Scalar loss = tape.value(graph.loss)[0];
            if (!std::isfinite(loss)) {
                throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                            std::to_string(i) + " (" + sample.left_tree->source_id + ", " +
                            sample.right_tree->source_id + ")");
            }
            loss_total += loss;
            const Tensor& probs = tape.value(graph.probabilities);
            const int predicted = probs[1] > 0.5 ? 1 : 0;
            if (predicted == ref.label) ++correct;
            tape.backward(graph.loss);
            ++accumulated;
            if (accumulated == config.batch_size) apply_update();
        }
        apply_update();  // trailing partial batch
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = batch.empty() ? 0.0 : loss_total / static_cast<double>(batch.size());
        stats.accuracy =
            batch.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(batch.size());
        history.push_back(stats);
    }
    return history;
}

MetricsReport MetricsReport::from_confusion(
    const std::array<std::array<std::uint64_t, 2>, 2>& m) {
    MetricsReport report;
    report.confusion = m;
    std::uint64_t total = 0, diagonal = 0;
    for (int actual = 0; actual < 2; ++actual) {
        for (int predicted = 0; predicted < 2; ++predicted) total += m[actual][predicted];
        diagonal += m[actual][actual];
    }
    for (int cls = 0; cls < 2; ++cls) {
        const std::uint64_t tp = m[cls][cls];
        const std::uint64_t predicted_cls = m[0][cls] + m[1][cls];
        const std::uint64_t actual_cls = m[cls][0] + m[cls][1];
        ClassMetrics& cm = report.per_class[cls];
        cm.support = actual_cls;
        cm.precision = predicted_cls ? static_cast<double>(tp) / predicted_cls : 0.0;
        cm.recall = actual_cls ? static_cast<double>(tp) / actual_cls : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0.0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
    }
    report.accuracy = total ? static_cast<double>(diagonal) / total : 0.0;
    return report;
}

std::string MetricsReport::summary() const {
    std::ostringstream out;
    out << "label\tprecision\trecall\tf1\tsupport\n";
    char line[160];
    for (int cls = 1; cls >= 0; --cls) {
        std::snprintf(line, sizeof(line), "%d\t%.4f\t%.4f\t%.4f\t%llu\n", cls,
                      per_class[cls].precision, per_class[cls].recall, per_class[cls].f1,
                      static_cast<unsigned long long>(per_class[cls].support));
        out << line;
    }
    std::snprintf(line, sizeof(line), "accuracy\t%.4f\n", accuracy);
    out << line;
    out << "confusion (rows actual 0/1, cols predicted 0/1):\n";
    for (int actual = 0; actual < 2; ++actual) {
        out << confusion[actual][0] << '\t' << confusion[actual][1] << '\n';
    }
    return out.str();
}

namespace {

// Pooled encodings computed once per distinct tree.
class EncodingCache {
public:
    EncodingCache(const BiTbcnnModel& model, TreeCache& trees)
        : model_(model),
          trees_(trees),
          left_layers_(model.side_conv_params(true)),
          right_layers_(model.side_conv_params(false)) {}

    const Tensor& encoding(std::size_t entry_index) {
        auto it = cache_.find(entry_index);
        if (it != cache_.end()) return it->second;
        const IndexedAst& tree = trees_.tree(entry_index);
        const bool left = tree.language == model_.config.left_language;
        Tensor enc = encode_tree(tree,
                                 model_.params.value(left ? "left.embedding" : "right.embedding"),
                                 left ? left_layers_ : right_layers_);
        return cache_.emplace(entry_index, std::move(enc)).first->second;
    }

private:
    const BiTbcnnModel& model_;
    TreeCache& trees_;
    std::vector<TbcnnParams> left_layers_;
    std::vector<TbcnnParams> right_layers_;
    std::map<std::size_t, Tensor> cache_;
};

}  // namespace

MetricsReport evaluate_binary(const BiTbcnnModel& model, const std::vector<PairRef>& pairs,
                              TreeCache& cache) {
    if (pairs.empty()) throw UsageError("evaluate_binary requires at least one pair");
    EncodingCache encodings(model, cache);
    std::array<std::array<std::uint64_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};
    for (const PairRef& ref : pairs) {
        const Tensor probs = head_forward(model, encodings.encoding(ref.left_index),
                                          encodings.encoding(ref.right_index));
        const SimilarityDecision decision = decide_from_probabilities(probs);
        confusion[ref.label][decision.label] += 1;
    }
    return MetricsReport::from_confusion(confusion);
}

DetectionResult detect_algorithm(const IndexedAst& query,
                                 const std::map<std::string, const IndexedAst*>& references,
                                 const BiTbcnnModel& model) {
    if (references.empty()) throw UsageError("detect_algorithm requires at least one reference");
    DetectionResult result;
    bool first = true;
    double best = 0.0;
    for (const auto& [label, reference] : references) {
        const SimilarityDecision decision = predict_similarity(query, *reference, model);
        result.scores[label] = decision.p_similar;
        // std::map iterates labels in ascending order, so strict > keeps the
        // lexicographically first label on ties.
        if (first || decision.p_similar > best) {
            best = decision.p_similar;
            result.label = label;
            first = false;
        }
    }
    return result;
}

ReferenceSampler manifest_reference_sampler(const CorpusManifest& manifest, TreeCache& cache,
                                            const std::string& language) {
    // label -> manifest positions of train-split candidates
    auto by_label = std::make_shared<std::map<std::string, std::vector<std::size_t>>>();
    for (std::size_t i : manifest.indices_of(language, kSplitTrain)) {
        (*by_label)[manifest.entries[i].algorithm_label].push_back(i);
    }
    for (const std::string& label : manifest.labels()) {
        if (by_label->find(label) == by_label->end()) {
            throw UsageError("no train-split " + language + " reference for label '" + label +
                             "'");
        }
    }
    TreeCache* cache_ptr = &cache;
    return [by_label, cache_ptr](RngStream& rng) {
        std::map<std::string, const IndexedAst*> refs;
        for (const auto& [label, candidates] : *by_label) {
            const std::size_t pick = candidates[rng.next_below(candidates.size())];
            refs[label] = &cache_ptr->tree(pick);
        }
        return refs;
    };
}

DetectionEval evaluate_detection(const BiTbcnnModel& model,
                                 const std::vector<const IndexedAst*>& queries,
                                 const ReferenceSampler& sampler, RngStream& rng) {
    DetectionEval eval;
    for (const IndexedAst* query : queries) {
        const auto references = sampler(rng);
        const DetectionResult result = detect_algorithm(*query, references, model);
        auto& bucket = eval.per_label[query->algorithm_label];
        bucket.second += 1;
        eval.total += 1;
        if (result.label == query->algorithm_label) {
            bucket.first += 1;
            eval.correct += 1;
        }
    }
    eval.accuracy = eval.total ? static_cast<double>(eval.correct) / eval.total : 0.0;
    return eval;
}

void write_history_file(const std::string& path, const std::vector<EpochStats>& history,
                        const std::string& run_config_text, const std::string& corpus_digest) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write history file: " + path);
    out << "# corpus_digest=" << corpus_digest << "\n";
    out << "# config_digest=" << to_hex(fnv1a(kFnvOffset, run_config_text)) << "\n";
    std::istringstream config(run_config_text);
    std::string line;
    while (std::getline(config, line)) out << "# " << line << "\n";
    out << "epoch\tmean_loss\taccuracy\n";
    char buf[96];
    for (const EpochStats& stats : history) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\n", stats.epoch, stats.mean_loss,
                      stats.accuracy);
        out << buf;
    }
    if (!out) throw Error("failed while writing history file: " + path);
}

Vocabulary vocabulary_from_split(const CorpusManifest& manifest, const std::string& language,
                                 const std::string& split) {
    std::vector<Ast> corpus;
    for (std::size_t i : manifest.indices_of(language, split)) {
        const ManifestEntry& entry = manifest.entries[i];
        corpus.push_back(load_canonical_file(manifest.resolve_path(entry), entry.language,
                                             entry.source_id, entry.algorithm_label));
    }
    if (corpus.empty()) {
        throw UsageError("no " + language + " entries in split '" + split + "'");
    }
    return Vocabulary::build(corpus, language);
}

std::vector<ContextPair> context_pairs_from_split(const CorpusManifest& manifest,
                                                  const Vocabulary& vocab,
                                                  const std::string& split) {
    std::vector<ContextPair> pairs;
    for (std::size_t i : manifest.indices_of(vocab.language(), split)) {
        const ManifestEntry& entry = manifest.entries[i];
        Ast ast = load_canonical_file(manifest.resolve_path(entry), entry.language,
                                      entry.source_id, entry.algorithm_label);
        IndexedAst indexed = index_tree(ast, vocab);
        std::vector<ContextPair> tree_pairs = emit_context_pairs(indexed);
        pairs.insert(pairs.end(), tree_pairs.begin(), tree_pairs.end());
    }
    return pairs;
}

}  // namespace bitbcnn
