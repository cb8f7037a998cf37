// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria cover gradient correctness, the eta coefficient
// grid, pooling properties, pair counting, overfit capability, a synthetic
// end-to-end replication, embedding sanity, and artifact reproducibility.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bitbcnn/embedding.hpp"
#include "bitbcnn/model.hpp"
#include "bitbcnn/pipeline.hpp"
#include "bitbcnn/synth.hpp"
#include "bitbcnn/tape.hpp"

using namespace bitbcnn;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion,
                what.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

void run_criterion(int criterion, const std::string& what,
                   const std::function<std::pair<bool, std::string>()>& body) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        auto [passed, text] = body();
        ok = passed;
        detail = text;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(criterion, what, ok, detail, seconds);
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

IndexedNode random_tree(std::size_t nodes, std::size_t vocab, RngStream& rng) {
    IndexedNode root;
    root.type_index = static_cast<std::uint32_t>(rng.next_below(vocab));
    std::vector<IndexedNode*> pool = {&root};
    for (std::size_t i = 1; i < nodes; ++i) {
        IndexedNode* parent = pool[rng.next_below(pool.size())];
        IndexedNode child;
        child.type_index = static_cast<std::uint32_t>(rng.next_below(vocab));
        parent->children.push_back(child);
        pool.clear();
        std::vector<IndexedNode*> stack = {&root};
        while (!stack.empty()) {
            IndexedNode* node = stack.back();
            stack.pop_back();
            pool.push_back(node);
            for (IndexedNode& c : node->children) stack.push_back(&c);
        }
    }
    return root;
}

IndexedAst as_ast(IndexedNode root, const std::string& language, const std::string& id,
                  const std::string& label = "") {
    IndexedAst ast;
    ast.root = std::move(root);
    ast.language = language;
    ast.source_id = id;
    ast.algorithm_label = label;
    std::function<std::size_t(const IndexedNode&)> count = [&](const IndexedNode& n) {
        std::size_t total = 1;
        for (const IndexedNode& c : n.children) total += count(c);
        return total;
    };
    std::function<std::size_t(const IndexedNode&)> depth = [&](const IndexedNode& n) {
        std::size_t deepest = 0;
        for (const IndexedNode& c : n.children) deepest = std::max(deepest, depth(c));
        return deepest + 1;
    };
    ast.node_count = count(ast.root);
    ast.depth = depth(ast.root);
    return ast;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// ---- criterion 1: full-model gradients vs central finite differences ----

std::pair<bool, std::string> criterion_gradients() {
    ModelConfig config;
    config.embedding_dim = 4;
    config.conv_dim = 4;
    config.hidden1 = 4;
    config.hidden2 = 4;
    RngStream rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        RngStream init = rng.split(trial);
        BiTbcnnModel model = BiTbcnnModel::create(
            config, Vocabulary::from_names("srcml-family", {"a", "b", "c"}),
            Vocabulary::from_names("python-family", {"X", "Y", "Z"}), nullptr, nullptr, init);
        IndexedAst left =
            as_ast(random_tree(3 + init.next_below(6), 4, init), "srcml-family", "L");
        IndexedAst right =
            as_ast(random_tree(3 + init.next_below(6), 4, init), "python-family", "R");
        PairSample sample{&left, &right, static_cast<int>(init.next_below(2))};
        const RunMode mode = trial % 2 == 0 ? RunMode::kTrain : RunMode::kInfer;
        const std::uint64_t mask_seed = 7000 + trial;

        auto loss_of = [&](Tape& tape) {
            RngStream dropout(mask_seed);
            return build_pair_graph(tape, sample, model, mode, &dropout).loss;
        };
        model.params.zero_grads();
        {
            Tape tape(&model.params);
            tape.backward(loss_of(tape));
        }
        auto numeric = finite_difference_gradient(
            [&](ParamStore& p) {
                Tape tape(&p);
                return tape.value(loss_of(tape))[0];
            },
            model.params, 1e-5);
        for (const auto& [name, fd] : numeric) {
            const Tensor& analytic = model.params.grad(name);
            for (std::size_t i = 0; i < fd.size(); ++i) {
                worst = std::max(worst, relative_error(analytic[i], fd[i]));
            }
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max relative error %.3g over 20 pairs", worst);
    return {worst < 1e-4, detail};
}

// ---- criterion 2: eta coefficient grid ----

std::pair<bool, std::string> criterion_eta() {
    for (std::size_t depth = 1; depth <= 4; ++depth) {
        for (std::size_t level = 1; level <= depth; ++level) {
            for (std::size_t siblings = 1; siblings <= 8; ++siblings) {
                for (std::size_t position = 1; position <= siblings; ++position) {
                    EtaWeights eta = compute_eta({level, depth, position, siblings});
                    if (eta.top < 0 || eta.left < 0 || eta.right < 0) {
                        return {false, "negative coefficient in grid"};
                    }
                    if (std::abs(eta.top + eta.left + eta.right - 1.0) >= 1e-12) {
                        return {false, "coefficients do not sum to 1"};
                    }
                }
            }
        }
    }
    const EtaWeights root = compute_eta({2, 2, 1, 1});
    if (root.top != 1.0 || root.left != 0.0 || root.right != 0.0) {
        return {false, "window root is not (1,0,0)"};
    }
    const EtaWeights lone = compute_eta({1, 1, 1, 1});
    if (lone.top != 1.0) return {false, "depth-1 window root is not pure top"};
    const EtaWeights leftmost = compute_eta({1, 2, 1, 3});
    if (leftmost.left != 1.0 || leftmost.right != 0.0) {
        return {false, "leftmost child is not pure left"};
    }
    const EtaWeights rightmost = compute_eta({1, 2, 3, 3});
    if (rightmost.right != 1.0 || rightmost.left != 0.0) {
        return {false, "rightmost child is not pure right"};
    }
    const EtaWeights only = compute_eta({1, 2, 1, 1});
    if (std::abs(only.left - 0.5) > 1e-15 || std::abs(only.right - 0.5) > 1e-15) {
        return {false, "only child does not split the remainder evenly"};
    }
    return {true, "grid d<=4, n<=8 plus boundary cases"};
}

// ---- criterion 3: pooling properties ----

std::pair<bool, std::string> criterion_pooling() {
    RngStream rng(33);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = 1 + rng.next_below(10), cols = 1 + rng.next_below(6);
        Tensor features({rows, cols});
        for (std::size_t i = 0; i < features.size(); ++i) {
            features[i] = rng.next_uniform(-3, 3);
        }
        const Tensor pooled = dynamic_max_pool(features);
        if (rows == 1 && pooled.values() != features.values()) {
            return {false, "single-row identity violated"};
        }
        std::vector<std::size_t> order(rows);
        for (std::size_t i = 0; i < rows; ++i) order[i] = i;
        rng.shuffle(order);
        Tensor shuffled({rows, cols});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                shuffled.at(r, c) = features.at(order[r], c);
            }
        }
        if (dynamic_max_pool(shuffled).values() != pooled.values()) {
            return {false, "permutation invariance violated"};
        }
    }
    return {true, "permutation invariance and single-node identity, 1000 trials"};
}

// ---- criterion 4: pair counting vs exhaustive enumeration ----

std::pair<bool, std::string> criterion_pair_counts() {
    RngStream rng(44);
    const std::vector<std::string> labels = {"ms", "bs", "qs", "ll", "bfs", "kns"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> left_items, right_items;
        std::map<std::string, std::uint64_t> left, right;
        const std::size_t n_left = 1 + rng.next_below(50), n_right = 1 + rng.next_below(50);
        for (std::size_t i = 0; i < n_left; ++i) {
            const std::string& label = labels[rng.next_below(labels.size())];
            left_items.push_back(label);
            left[label] += 1;
        }
        for (std::size_t i = 0; i < n_right; ++i) {
            const std::string& label = labels[rng.next_below(labels.size())];
            right_items.push_back(label);
            right[label] += 1;
        }
        std::uint64_t total = 0, similar = 0;
        for (const auto& a : left_items) {
            for (const auto& b : right_items) {
                ++total;
                if (a == b) ++similar;
            }
        }
        const PairCounts counts = count_pairs(left, right);
        if (counts.total != total || counts.similar != similar ||
            counts.dissimilar != total - similar) {
            return {false, "mismatch against exhaustive enumeration"};
        }
    }
    const PairCounts reference = count_pairs({{"all", 2500}}, {{"all", 2500}});
    if (reference.total != 6250000) return {false, "2500x2500 total is not 6,250,000"};
    return {true, "100 random distributions exact; 2500x2500 = 6,250,000"};
}

// ---- criterion 5: overfit capability on a 20-pair toy corpus ----

std::pair<bool, std::string> criterion_overfit() {
    const fs::path dir = fs::temp_directory_path() / "bitbcnn_acceptance_toy";
    fs::remove_all(dir);
    SynthCorpusConfig synth_cfg;
    synth_cfg.out_dir = dir.string();
    synth_cfg.per_label_per_language = 10;
    synth_cfg.seed = 3;
    const CorpusManifest full = generate_corpus(synth_cfg, default_grammars());

    // Two labels, two dialects.
    CorpusManifest toy;
    toy.base_dir = full.base_dir;
    for (const ManifestEntry& e : full.entries) {
        if (e.algorithm_label == "ms" || e.algorithm_label == "bs") {
            ManifestEntry copy = e;
            copy.split = kSplitTrain;
            toy.entries.push_back(copy);
        }
    }
    ModelConfig config;
    config.embedding_dim = 8;
    config.conv_dim = 16;
    config.hidden1 = 16;
    config.hidden2 = 16;
    config.keep_prob = 1.0;  // full capacity for the memorization check
    RngStream init(7);
    BiTbcnnModel model =
        BiTbcnnModel::create(config, vocabulary_from_split(toy, "srcml-family"),
                             vocabulary_from_split(toy, "python-family"), nullptr, nullptr, init);
    TreeCache cache(toy, model.left_vocab, model.right_vocab);
    RngStream pair_rng(1);
    auto pairs = sample_pairs(toy, "srcml-family", "python-family", 10, 10, pair_rng);

    RngStream order_rng(2);
    for (int epoch = 0; epoch < 200; ++epoch) {
        order_rng.shuffle(pairs);
        for (const PairRef& ref : pairs) {
            PairSample sample{&cache.tree(ref.left_index), &cache.tree(ref.right_index),
                              ref.label};
            Tape tape(&model.params);
            PairGraph graph = build_pair_graph(tape, sample, model, RunMode::kInfer, nullptr);
            model.params.zero_grads();
            tape.backward(graph.loss);
            model.params.sgd_step(0.1);
        }
        int correct = 0;
        for (const PairRef& ref : pairs) {
            const auto decision = predict_similarity(cache.tree(ref.left_index),
                                                     cache.tree(ref.right_index), model);
            if (decision.label == ref.label) ++correct;
        }
        if (correct == 20) {
            fs::remove_all(dir);
            char detail[96];
            std::snprintf(detail, sizeof(detail), "100%% train accuracy at epoch %d", epoch);
            return {true, detail};
        }
    }
    fs::remove_all(dir);
    return {false, "did not reach 100% train accuracy within 200 epochs"};
}

// ---- criterion 6: synthetic end-to-end replication ----

std::pair<bool, std::string> criterion_end_to_end() {
    const fs::path dir = fs::temp_directory_path() / "bitbcnn_acceptance_e2e";
    fs::remove_all(dir);
    SynthCorpusConfig synth_cfg;
    synth_cfg.out_dir = dir.string();
    synth_cfg.per_label_per_language = 200;
    synth_cfg.seed = 11;
    CorpusManifest manifest = generate_corpus(synth_cfg, default_grammars());

    const std::uint64_t seed = 5;
    RngStream root(seed);
    RngStream split_rng = root.split(10);
    split_corpus(manifest, 0.7, split_rng);

    Vocabulary left_vocab = vocabulary_from_split(manifest, "srcml-family");
    Vocabulary right_vocab = vocabulary_from_split(manifest, "python-family");
    RngStream left_rng = root.split(11), right_rng = root.split(12);
    auto left_emb = train_embeddings(context_pairs_from_split(manifest, left_vocab),
                                     left_vocab.size(), 30, 5, 0.05, left_rng, "srcml-family");
    auto right_emb =
        train_embeddings(context_pairs_from_split(manifest, right_vocab), right_vocab.size(), 30,
                         5, 0.05, right_rng, "python-family");

    ModelConfig config;  // defaults throughout
    RngStream init = root.split(13);
    BiTbcnnModel model = BiTbcnnModel::create(config, left_vocab, right_vocab, &left_emb.table,
                                              &right_emb.table, init);
    TreeCache cache(manifest, model.left_vocab, model.right_vocab);
    TrainConfig train_config;  // defaults: 100 epochs, 1000+1000 per epoch
    train_config.seed = seed;
    const auto history = train_model(model, manifest, cache, train_config);

    RngStream eval_rng(9);
    const auto test_pairs =
        sample_pairs(manifest, "srcml-family", "python-family", 2000, 2000, eval_rng, kSplitTest);
    const MetricsReport report = evaluate_binary(model, test_pairs, cache);

    // 300 held-out queries, one fresh reference per label per query.
    RngStream query_rng(13);
    std::vector<std::size_t> query_indices = manifest.indices_of("srcml-family", kSplitTest);
    query_rng.shuffle(query_indices);
    std::vector<const IndexedAst*> queries;
    for (std::size_t k = 0; k < 300 && k < query_indices.size(); ++k) {
        queries.push_back(&cache.tree(query_indices[k]));
    }
    ReferenceSampler sampler = manifest_reference_sampler(manifest, cache, "python-family");
    RngStream ref_rng = query_rng.split(1);
    const DetectionEval detection = evaluate_detection(model, queries, sampler, ref_rng);

    fs::remove_all(dir);
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "f1 similar %.3f, f1 dissimilar %.3f (need >= 0.90); detection %.3f over %llu "
                  "queries (need >= 0.75); final train acc %.3f",
                  report.per_class[1].f1, report.per_class[0].f1, detection.accuracy,
                  static_cast<unsigned long long>(detection.total), history.back().accuracy);
    const bool ok = report.per_class[1].f1 >= 0.90 && report.per_class[0].f1 >= 0.90 &&
                    detection.accuracy >= 0.75;
    return {ok, detail};
}

// ---- criterion 7: embedding training sanity ----

std::pair<bool, std::string> criterion_embeddings() {
    // Initial loss equals the uniform-softmax entropy within 5%.
    RngStream rng(3);
    std::vector<ContextPair> pairs;
    for (std::uint32_t i = 0; i < 60; ++i) pairs.push_back({i % 13, (i * 5 + 2) % 13});
    const auto zero_epochs = train_embeddings(pairs, 13, 8, 0, 0.05, rng);
    if (relative_error(zero_epochs.initial_loss, std::log(13.0)) > 0.05) {
        return {false, "initial loss differs from ln V by more than 5%"};
    }

    // A single deterministic pair becomes near-certain.
    RngStream rng2(17);
    std::vector<ContextPair> lone = {{0, 1}};
    const auto trained = train_embeddings(lone, 2, 4, 500, 0.05, rng2);
    double z0 = 0, z1 = 0;
    for (std::size_t e = 0; e < 4; ++e) {
        z0 += trained.table.input[e] * trained.table.output[e];
        z1 += trained.table.input[e] * trained.table.output[4 + e];
    }
    const double p = std::exp(z1) / (std::exp(z0) + std::exp(z1));
    if (p <= 0.9) return {false, "p(child|parent) did not exceed 0.9"};

    // Embedding files round-trip bit-exactly.
    Vocabulary vocab = Vocabulary::from_names("srcml-family", {"a", "b", "c", "d"});
    RngStream rng3(21);
    std::vector<ContextPair> mix = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 2}};
    const auto table = train_embeddings(mix, vocab.size(), 6, 25, 0.05, rng3, "srcml-family");
    std::stringstream first, second;
    save_embeddings(table.table, vocab, first);
    auto loaded = load_embeddings(first);
    save_embeddings(loaded.table, loaded.vocab, second);
    if (first.str() != second.str() ||
        loaded.table.input.values() != table.table.input.values()) {
        return {false, "embedding file round-trip is not bit-exact"};
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail),
                  "initial loss %.4f vs ln V %.4f; p(B|A)=%.3f; file round-trip exact",
                  zero_epochs.initial_loss, std::log(13.0), p);
    return {true, detail};
}

// ---- criterion 8: byte-identical artifacts under a fixed seed ----

std::pair<bool, std::string> criterion_reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "bitbcnn_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto run_once = [&](const std::string& tag) {
        SynthCorpusConfig synth_cfg;
        synth_cfg.out_dir = (dir / ("corpus_" + tag)).string();
        synth_cfg.per_label_per_language = 10;
        synth_cfg.seed = 77;
        CorpusManifest manifest = generate_corpus(synth_cfg, default_grammars());
        const std::uint64_t seed = 123;
        RngStream root(seed);
        RngStream split_rng = root.split(10);
        split_corpus(manifest, 0.7, split_rng);
        Vocabulary left_vocab = vocabulary_from_split(manifest, "srcml-family");
        Vocabulary right_vocab = vocabulary_from_split(manifest, "python-family");
        RngStream el = root.split(11), er = root.split(12);
        auto left_emb = train_embeddings(context_pairs_from_split(manifest, left_vocab),
                                         left_vocab.size(), 8, 2, 0.05, el, "srcml-family");
        auto right_emb = train_embeddings(context_pairs_from_split(manifest, right_vocab),
                                          right_vocab.size(), 8, 2, 0.05, er, "python-family");
        ModelConfig config;
        config.embedding_dim = 8;
        config.conv_dim = 8;
        config.hidden1 = 8;
        config.hidden2 = 8;
        RngStream init = root.split(13);
        BiTbcnnModel model = BiTbcnnModel::create(config, left_vocab, right_vocab,
                                                  &left_emb.table, &right_emb.table, init);
        TreeCache cache(manifest, model.left_vocab, model.right_vocab);
        TrainConfig tc;
        tc.epochs = 3;
        tc.similar_per_epoch = 20;
        tc.dissimilar_per_epoch = 20;
        tc.seed = seed;
        const auto history = train_model(model, manifest, cache, tc);
        const std::string run_config = "acceptance repro run\nseed=123\n";
        std::ofstream model_out(dir / ("model_" + tag + ".btbm"), std::ios::binary);
        model.save(model_out, run_config);
        model_out.close();
        write_history_file((dir / ("history_" + tag + ".tsv")).string(), history, run_config,
                           manifest.digest());
    };
    run_once("a");
    run_once("b");

    const bool models_equal = slurp(dir / "model_a.btbm") == slurp(dir / "model_b.btbm") &&
                              !slurp(dir / "model_a.btbm").empty();
    const bool histories_equal = slurp(dir / "history_a.tsv") == slurp(dir / "history_b.tsv") &&
                                 !slurp(dir / "history_a.tsv").empty();
    bool corpora_equal = true;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "corpus_a")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), dir / "corpus_a");
        if (slurp(entry.path()) != slurp(dir / "corpus_b" / rel)) {
            corpora_equal = false;
            break;
        }
    }
    fs::remove_all(dir);
    std::string detail = std::string("model files ") + (models_equal ? "identical" : "DIFFER") +
                         ", history files " + (histories_equal ? "identical" : "DIFFER") +
                         ", synth corpora " + (corpora_equal ? "identical" : "DIFFER");
    return {models_equal && histories_equal && corpora_equal, detail};
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    run_criterion(1, "full-model gradients vs finite differences", criterion_gradients);
    run_criterion(2, "eta coefficient grid and boundaries", criterion_eta);
    run_criterion(3, "dynamic max pooling properties", criterion_pooling);
    run_criterion(4, "pair counting vs exhaustive oracle", criterion_pair_counts);
    run_criterion(5, "overfit capability on a 20-pair toy corpus", criterion_overfit);
    run_criterion(6, "synthetic end-to-end replication", criterion_end_to_end);
    run_criterion(7, "node-type embedding sanity", criterion_embeddings);
    run_criterion(8, "seeded runs produce byte-identical artifacts", criterion_reproducibility);
    if (failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
}
