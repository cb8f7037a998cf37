// Command-line surface for the cross-language program classifier: corpus
// ingestion, synthetic corpus generation, training, evaluation, and
// single-query classification.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bitbcnn/manifest.hpp"
#include "bitbcnn/model.hpp"
#include "bitbcnn/pipeline.hpp"
#include "bitbcnn/srcml.hpp"
#include "bitbcnn/synth.hpp"

namespace fs = std::filesystem;
using namespace bitbcnn;

namespace {

std::set<std::string> parse_csv_set(const std::string& csv) {
    std::set<std::string> out;
    std::stringstream stream(csv);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Everything a training run depends on; echoed into the artifacts so a run
// can be reproduced from the files it wrote.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string optimizer_name = "adam";
    double train_ratio = 0.7;
    std::size_t embed_epochs = 5;
    double embed_lr = 0.05;
    bool random_embeddings = false;
    std::string labels_csv;

    void validate() {
        model.validate();
        train.optimizer = optimizer_from_name(optimizer_name);
        if (train.lr <= 0.0) throw UsageError("lr must be positive");
        if (train.batch_size == 0) throw UsageError("batch-size must be positive");
        if (train_ratio <= 0.0 || train_ratio >= 1.0) {
            throw UsageError("train-ratio must be in (0, 1)");
        }
        if (embed_lr <= 0.0) throw UsageError("embed-lr must be positive");
        if (train.momentum < 0.0 || train.momentum >= 1.0) {
            throw UsageError("momentum must be in [0, 1)");
        }
    }

    std::string describe() const {
        std::ostringstream out;
        out << model.describe();
        out << "epochs=" << train.epochs << "\noptimizer=" << optimizer_name
            << "\nlr=" << train.lr << "\nmomentum=" << train.momentum
            << "\nbatch_size=" << train.batch_size << "\nsimilar_per_epoch="
            << train.similar_per_epoch << "\ndissimilar_per_epoch="
            << train.dissimilar_per_epoch << "\nseed=" << train.seed
            << "\ntrain_ratio=" << train_ratio << "\nembed_epochs=" << embed_epochs
            << "\nembed_lr=" << embed_lr << "\nrandom_embeddings=" << random_embeddings
            << "\nlabels=" << labels_csv << "\n";
        return out.str();
    }
};

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::size_t per_label) {
    SynthCorpusConfig config;
    config.out_dir = out_dir;
    config.seed = seed;
    config.per_label_per_language = per_label;
    CorpusManifest manifest = generate_corpus(config, default_grammars());
    std::cout << "generated " << manifest.entries.size() << " trees under " << out_dir << "\n";
    std::cout << "manifest: " << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    return 0;
}

int cmd_ingest(const std::vector<std::string>& paths, const std::string& manifest_path,
               const std::string& store_dir, const std::string& language,
               const std::string& label, const std::string& format,
               const std::set<std::string>& label_set) {
    if (!label_set.empty() && label_set.count(label) == 0) {
        throw UsageError("label '" + label + "' is outside the configured label set");
    }
    fs::create_directories(fs::path(store_dir) / "trees");

    // Extend an existing manifest when present.
    CorpusManifest manifest;
    if (fs::exists(manifest_path)) {
        manifest = CorpusManifest::load(manifest_path, label_set, {});
    }
    manifest.base_dir = fs::path(manifest_path).parent_path().string();
    if (manifest.base_dir.empty()) manifest.base_dir = ".";
    std::set<std::string> used_ids;
    for (const ManifestEntry& e : manifest.entries) used_ids.insert(e.source_id);

    std::vector<std::string> failures;
    for (const std::string& path : paths) {
        try {
            std::string text = read_file(path);
            Ast ast;
            if (format == "srcml") {
                SrcmlOptions options;
                options.language = language;
                ast = convert_srcml(text, options);
            } else {
                ast = parse_canonical_tree(text);
                ast.language = language;
            }
            const std::string source_id = fs::path(path).stem().string();
            if (source_id.empty() || used_ids.count(source_id)) {
                throw UsageError("duplicate or empty source id '" + source_id + "'");
            }
            used_ids.insert(source_id);
            const std::string rel_path = "trees/" + source_id + ".tree";
            std::ofstream out(fs::path(store_dir) / rel_path);
            if (!out) throw Error("cannot write " + rel_path);
            out << serialize_canonical(ast.root) << '\n';
            manifest.entries.push_back({source_id, language, label, rel_path, kSplitUnassigned});
        } catch (const std::exception& e) {
            failures.push_back(path + ": " + e.what());
        }
    }
    manifest.save(manifest_path);
    std::cout << "ingested " << (paths.size() - failures.size()) << " of " << paths.size()
              << " files into " << store_dir << "\n";
    if (!failures.empty()) {
        for (const std::string& f : failures) std::cerr << "failed: " << f << "\n";
        return 2;
    }
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& model_path,
              const std::string& history_path, const std::string& split_manifest_path,
              const std::string& embeddings_prefix, RunConfig config,
              const std::set<std::string>& label_set) {
    config.validate();
    CorpusManifest manifest = CorpusManifest::load(manifest_path, label_set, {});
    const std::set<std::string> languages = manifest.languages();
    if (languages.count(config.model.left_language) == 0 ||
        languages.count(config.model.right_language) == 0) {
        throw UsageError("manifest must cover both model languages (" +
                         config.model.left_language + ", " + config.model.right_language + ")");
    }

    RngStream root_rng(config.train.seed);
    RngStream split_rng = root_rng.split(10);
    for (const std::string& warning : split_corpus(manifest, config.train_ratio, split_rng)) {
        std::cerr << "warning: " << warning << "\n";
    }
    if (!split_manifest_path.empty()) manifest.save(split_manifest_path);

    Vocabulary left_vocab =
        vocabulary_from_split(manifest, config.model.left_language, kSplitTrain);
    Vocabulary right_vocab =
        vocabulary_from_split(manifest, config.model.right_language, kSplitTrain);

    const EmbeddingTable* left_table = nullptr;
    const EmbeddingTable* right_table = nullptr;
    EmbeddingTrainResult left_result, right_result;
    if (!config.random_embeddings) {
        RngStream left_rng = root_rng.split(11);
        RngStream right_rng = root_rng.split(12);
        left_result = train_embeddings(context_pairs_from_split(manifest, left_vocab),
                                       left_vocab.size(), config.model.embedding_dim,
                                       config.embed_epochs, config.embed_lr, left_rng,
                                       left_vocab.language());
        right_result = train_embeddings(context_pairs_from_split(manifest, right_vocab),
                                        right_vocab.size(), config.model.embedding_dim,
                                        config.embed_epochs, config.embed_lr, right_rng,
                                        right_vocab.language());
        left_table = &left_result.table;
        right_table = &right_result.table;
        std::cout << "embedding loss left " << left_result.initial_loss << " -> "
                  << (left_result.epoch_loss.empty() ? left_result.initial_loss
                                                     : left_result.epoch_loss.back())
                  << ", right " << right_result.initial_loss << " -> "
                  << (right_result.epoch_loss.empty() ? right_result.initial_loss
                                                      : right_result.epoch_loss.back())
                  << "\n";
        if (!embeddings_prefix.empty()) {
            std::ofstream left_out(embeddings_prefix + ".left.emb", std::ios::binary);
            save_embeddings(left_result.table, left_vocab, left_out);
            std::ofstream right_out(embeddings_prefix + ".right.emb", std::ios::binary);
            save_embeddings(right_result.table, right_vocab, right_out);
        }
    }

    RngStream init_rng = root_rng.split(13);
    BiTbcnnModel model = BiTbcnnModel::create(config.model, std::move(left_vocab),
                                              std::move(right_vocab), left_table, right_table,
                                              init_rng);

    TreeCache cache(manifest, model.left_vocab, model.right_vocab);
    const std::vector<EpochStats> history = train_model(model, manifest, cache, config.train);
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i % 10 == 0 || i + 1 == history.size()) {
            std::cout << "epoch " << history[i].epoch << " loss " << history[i].mean_loss
                      << " acc " << history[i].accuracy << "\n";
        }
    }

    const std::string run_config =
        config.describe() + "corpus_digest=" + manifest.digest() + "\n";
    std::ofstream model_out(model_path, std::ios::binary);
    if (!model_out) throw Error("cannot write model file: " + model_path);
    model.save(model_out, run_config);
    write_history_file(history_path, history, run_config, manifest.digest());
    std::cout << "model written to " << model_path << "\n";
    return 0;
}

IndexedAst load_query_tree(const std::string& path, const BiTbcnnModel& model, bool left_side) {
    Ast ast = parse_canonical_tree(read_file(path));
    ast.language = left_side ? model.config.left_language : model.config.right_language;
    ast.source_id = fs::path(path).stem().string();
    return index_tree(ast, left_side ? model.left_vocab : model.right_vocab);
}

BiTbcnnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open model file: " + path);
    return BiTbcnnModel::load(in).model;
}

int cmd_classify_pair(const std::string& model_path, const std::string& left_path,
                      const std::string& right_path, const std::string& left_language,
                      const std::string& right_language) {
    BiTbcnnModel model = load_model(model_path);
    if (!left_language.empty() && left_language != model.config.left_language) {
        throw UsageError("left input declared " + left_language + " but the model's left side is " +
                         model.config.left_language + " (inputs swapped?)");
    }
    if (!right_language.empty() && right_language != model.config.right_language) {
        throw UsageError("right input declared " + right_language +
                         " but the model's right side is " + model.config.right_language +
                         " (inputs swapped?)");
    }
    IndexedAst left = load_query_tree(left_path, model, true);
    IndexedAst right = load_query_tree(right_path, model, false);
    const SimilarityDecision decision = predict_similarity(left, right, model);
    std::printf("%d\t%.6f\n", decision.label, decision.p_similar);
    return 0;
}

int cmd_detect(const std::string& model_path, const std::string& query_path,
               const std::string& manifest_path, std::uint64_t seed,
               const std::set<std::string>& label_set) {
    BiTbcnnModel model = load_model(model_path);
    CorpusManifest manifest = CorpusManifest::load(manifest_path, label_set, {});
    // Every configured label needs a right-language training reference.
    const auto right_counts = manifest.label_counts(model.config.right_language, kSplitTrain);
    for (const std::string& label : label_set) {
        if (right_counts.find(label) == right_counts.end()) {
            throw UsageError("manifest has no train-split " + model.config.right_language +
                             " reference for label '" + label + "'");
        }
    }
    IndexedAst query = load_query_tree(query_path, model, true);
    TreeCache cache(manifest, model.left_vocab, model.right_vocab);
    ReferenceSampler sampler =
        manifest_reference_sampler(manifest, cache, model.config.right_language);
    RngStream rng(seed);
    const auto references = sampler(rng);
    const DetectionResult result = detect_algorithm(query, references, model);
    for (const auto& [label, score] : result.scores) {
        std::printf("%s\t%.6f\n", label.c_str(), score);
    }
    std::printf("detected\t%s\n", result.label.c_str());
    return 0;
}

int cmd_eval_binary(const std::string& model_path, const std::string& manifest_path,
                    std::uint64_t seed, std::size_t n_similar, std::size_t n_dissimilar,
                    const std::string& split, const std::string& out_path,
                    const std::set<std::string>& label_set) {
    BiTbcnnModel model = load_model(model_path);
    CorpusManifest manifest = CorpusManifest::load(manifest_path, label_set, {});
    RngStream rng(seed);
    const std::vector<PairRef> pairs =
        sample_pairs(manifest, model.config.left_language, model.config.right_language,
                     n_similar, n_dissimilar, rng, split);
    TreeCache cache(manifest, model.left_vocab, model.right_vocab);
    const MetricsReport report = evaluate_binary(model, pairs, cache);
    std::cout << report.summary();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot write metrics file: " + out_path);
        out << report.summary();
    }
    return 0;
}

int cmd_eval_detect(const std::string& model_path, const std::string& manifest_path,
                    std::uint64_t seed, std::size_t n_queries, const std::string& split,
                    const std::set<std::string>& label_set) {
    BiTbcnnModel model = load_model(model_path);
    CorpusManifest manifest = CorpusManifest::load(manifest_path, label_set, {});
    TreeCache cache(manifest, model.left_vocab, model.right_vocab);

    std::vector<std::size_t> query_indices =
        manifest.indices_of(model.config.left_language, split);
    if (query_indices.empty()) {
        throw UsageError("no " + model.config.left_language + " queries in split '" + split + "'");
    }
    RngStream rng(seed);
    RngStream pick_rng = rng.split(1);
    RngStream ref_rng = rng.split(2);
    std::vector<const IndexedAst*> queries;
    if (n_queries >= query_indices.size()) {
        for (std::size_t i : query_indices) queries.push_back(&cache.tree(i));
    } else {
        pick_rng.shuffle(query_indices);
        for (std::size_t k = 0; k < n_queries; ++k) {
            queries.push_back(&cache.tree(query_indices[k]));
        }
    }
    ReferenceSampler sampler =
        manifest_reference_sampler(manifest, cache, model.config.right_language);
    const DetectionEval eval = evaluate_detection(model, queries, sampler, ref_rng);
    std::printf("queries\t%llu\ncorrect\t%llu\naccuracy\t%.4f\n",
                static_cast<unsigned long long>(eval.total),
                static_cast<unsigned long long>(eval.correct), eval.accuracy);
    for (const auto& [label, counts] : eval.per_label) {
        std::printf("label\t%s\t%llu/%llu\n", label.c_str(),
                    static_cast<unsigned long long>(counts.first),
                    static_cast<unsigned long long>(counts.second));
    }
    return 0;
}

int cmd_stats(const std::string& manifest_path, const std::set<std::string>& label_set) {
    CorpusManifest manifest = CorpusManifest::load(manifest_path, label_set, {});
    for (const std::string& language : manifest.languages()) {
        std::vector<Ast> trees;
        for (std::size_t i : manifest.indices_of(language)) {
            const ManifestEntry& e = manifest.entries[i];
            trees.push_back(load_canonical_file(manifest.resolve_path(e), e.language, e.source_id,
                                                e.algorithm_label));
        }
        Vocabulary vocab = Vocabulary::build(trees, language);
        std::vector<IndexedAst> indexed;
        indexed.reserve(trees.size());
        for (const Ast& ast : trees) indexed.push_back(index_tree(ast, vocab));
        const CorpusStats stats = corpus_stats(indexed);
        std::printf("language\t%s\n", language.c_str());
        std::printf("  programs\t%zu\n", stats.count);
        std::printf("  node types\t%zu (+1 unknown slot)\n", vocab.known_names().size());
        std::printf("  nodes min/mean/max\t%zu/%.1f/%zu\n", stats.min_nodes, stats.mean_nodes,
                    stats.max_nodes);
        for (const auto& [label, count] : stats.label_histogram) {
            std::printf("  label\t%s\t%zu\n", label.c_str(), count);
        }
        std::size_t depth_min = 0, depth_max = 0;
        if (!stats.depth_histogram.empty()) {
            depth_min = stats.depth_histogram.begin()->first;
            depth_max = stats.depth_histogram.rbegin()->first;
        }
        std::printf("  depth min/max\t%zu/%zu\n", depth_min, depth_max);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-language program classifier (bilateral tree-based convolutional model)"};
    app.require_subcommand(1);

    std::string labels_csv = "ms,bs,qs,ll,bfs,kns";
    app.add_option("--labels", labels_csv, "Comma-separated algorithm label set")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    std::size_t synth_per_label = 200;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed")->required();
    synth->add_option("--per-label", synth_per_label, "Programs per label per language")
        ->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Add tree files to a corpus store");
    std::vector<std::string> ingest_paths;
    std::string ingest_manifest, ingest_store, ingest_language, ingest_label;
    std::string ingest_format = "canonical";
    ingest->add_option("files", ingest_paths, "Input files")->required();
    ingest->add_option("--manifest", ingest_manifest, "Manifest to create or extend")->required();
    ingest->add_option("--store", ingest_store, "Corpus store directory")->required();
    ingest->add_option("--language", ingest_language, "Language family tag")->required();
    ingest->add_option("--label", ingest_label, "Algorithm label for all files")->required();
    ingest->add_option("--format", ingest_format, "canonical | srcml")
        ->check(CLI::IsMember({"canonical", "srcml"}))
        ->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train a model from a manifest");
    std::string train_manifest, train_model_path, train_history_path, train_split_out,
        train_emb_prefix;
    RunConfig run;
    train->add_option("--manifest", train_manifest, "Corpus manifest")->required();
    train->add_option("--out-model", train_model_path, "Model file to write")->required();
    train->add_option("--out-history", train_history_path, "History file to write")->required();
    train->add_option("--out-manifest", train_split_out,
                      "Write the split-assigned manifest here");
    train->add_option("--out-embeddings", train_emb_prefix,
                      "Write pre-trained embedding files with this prefix");
    train->add_option("--seed", run.train.seed, "Run seed")->required();
    train->add_option("--epochs", run.train.epochs)->capture_default_str();
    train->add_option("--optimizer", run.optimizer_name, "adam | sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    train->add_option("--lr", run.train.lr, "Learning rate (0.01 is the usual sgd value)")
        ->capture_default_str();
    train->add_option("--momentum", run.train.momentum, "sgd momentum")->capture_default_str();
    train->add_option("--batch-size", run.train.batch_size, "Gradients averaged per update")
        ->capture_default_str();
    train->add_option("--similar-per-epoch", run.train.similar_per_epoch)->capture_default_str();
    train->add_option("--dissimilar-per-epoch", run.train.dissimilar_per_epoch)
        ->capture_default_str();
    train->add_option("--embedding-dim", run.model.embedding_dim)->capture_default_str();
    train->add_option("--conv-dim", run.model.conv_dim)->capture_default_str();
    train->add_option("--conv-layers", run.model.conv_layers)->capture_default_str();
    train->add_option("--hidden1", run.model.hidden1)->capture_default_str();
    train->add_option("--hidden2", run.model.hidden2)->capture_default_str();
    train->add_option("--keep-prob", run.model.keep_prob)->capture_default_str();
    train->add_option("--left-language", run.model.left_language)->capture_default_str();
    train->add_option("--right-language", run.model.right_language)->capture_default_str();
    train->add_flag("--freeze-embeddings", run.model.freeze_embeddings,
                    "Do not fine-tune embeddings during supervised training");
    train->add_option("--train-ratio", run.train_ratio)->capture_default_str();
    train->add_option("--embed-epochs", run.embed_epochs)->capture_default_str();
    train->add_option("--embed-lr", run.embed_lr)->capture_default_str();
    train->add_flag("--random-embeddings", run.random_embeddings,
                    "Skip embedding pre-training; initialize uniformly");

    // classify-pair
    auto* classify = app.add_subcommand("classify-pair", "Score one cross-language pair");
    std::string cls_model, cls_left, cls_right, cls_left_lang, cls_right_lang;
    classify->add_option("--model", cls_model)->required();
    classify->add_option("--left", cls_left, "Left tree file (left-language program)")->required();
    classify->add_option("--right", cls_right, "Right tree file")->required();
    classify->add_option("--left-language", cls_left_lang,
                         "Declared language of the left input (checked against the model)");
    classify->add_option("--right-language", cls_right_lang,
                         "Declared language of the right input");

    // detect
    auto* detect = app.add_subcommand("detect", "Detect the algorithm of a left-language program");
    std::string det_model, det_query, det_manifest;
    std::uint64_t det_seed = 0;
    detect->add_option("--model", det_model)->required();
    detect->add_option("--query", det_query, "Canonical tree file (left language)")->required();
    detect->add_option("--manifest", det_manifest, "Split manifest with train references")
        ->required();
    detect->add_option("--seed", det_seed, "Reference draw seed")->capture_default_str();

    // eval-binary
    auto* evalb = app.add_subcommand("eval-binary", "Binary pair-classification metrics");
    std::string evb_model, evb_manifest, evb_out, evb_split = kSplitTest;
    std::uint64_t evb_seed = 0;
    std::size_t evb_similar = 2000, evb_dissimilar = 2000;
    evalb->add_option("--model", evb_model)->required();
    evalb->add_option("--manifest", evb_manifest)->required();
    evalb->add_option("--seed", evb_seed, "Pair draw seed")->capture_default_str();
    evalb->add_option("--similar", evb_similar)->capture_default_str();
    evalb->add_option("--dissimilar", evb_dissimilar)->capture_default_str();
    evalb->add_option("--split", evb_split)->capture_default_str();
    evalb->add_option("--out", evb_out, "Also write the report here");

    // eval-detect
    auto* evald = app.add_subcommand("eval-detect", "Algorithm-detection accuracy");
    std::string evd_model, evd_manifest, evd_split = kSplitTest;
    std::uint64_t evd_seed = 0;
    std::size_t evd_queries = 300;
    evald->add_option("--model", evd_model)->required();
    evald->add_option("--manifest", evd_manifest)->required();
    evald->add_option("--seed", evd_seed)->capture_default_str();
    evald->add_option("--queries", evd_queries)->capture_default_str();
    evald->add_option("--split", evd_split)->capture_default_str();

    // stats
    auto* stats = app.add_subcommand("stats", "Corpus summary from a manifest");
    std::string stats_manifest;
    stats->add_option("--manifest", stats_manifest)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::set<std::string> label_set = parse_csv_set(labels_csv);
        run.labels_csv = labels_csv;
        if (synth->parsed()) return cmd_synth(synth_out, synth_seed, synth_per_label);
        if (ingest->parsed()) {
            return cmd_ingest(ingest_paths, ingest_manifest, ingest_store, ingest_language,
                              ingest_label, ingest_format, label_set);
        }
        if (train->parsed()) {
            return cmd_train(train_manifest, train_model_path, train_history_path,
                             train_split_out, train_emb_prefix, run, label_set);
        }
        if (classify->parsed()) {
            return cmd_classify_pair(cls_model, cls_left, cls_right, cls_left_lang,
                                     cls_right_lang);
        }
        if (detect->parsed()) {
            return cmd_detect(det_model, det_query, det_manifest, det_seed, label_set);
        }
        if (evalb->parsed()) {
            return cmd_eval_binary(evb_model, evb_manifest, evb_seed, evb_similar, evb_dissimilar,
                                   evb_split, evb_out, label_set);
        }
        if (evald->parsed()) {
            return cmd_eval_detect(evd_model, evd_manifest, evd_seed, evd_queries, evd_split,
                                   label_set);
        }
        if (stats->parsed()) return cmd_stats(stats_manifest, label_set);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
