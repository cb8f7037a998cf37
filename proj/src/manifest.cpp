#include "bitbcnn/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bitbcnn/binary_io.hpp"

namespace bitbcnn {

namespace {

std::string dirname_of(const std::string& path) {
    std::size_t slash = path.find_last_of('/');
    if (slash == std::string::npos) return ".";
    if (slash == 0) return "/";
    return path.substr(0, slash);
}

}  // namespace

CorpusManifest CorpusManifest::load(const std::string& path,
                                    const std::set<std::string>& label_set,
                                    const std::set<std::string>& language_set) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open manifest: " + path);
    CorpusManifest manifest;
    manifest.base_dir = dirname_of(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 5) {
            throw ParseError("manifest line " + std::to_string(line_no) +
                                 ": expected 5 tab-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        manifest.entries.push_back({fields[0], fields[1], fields[2], fields[3], fields[4]});
    }
    manifest.validate(label_set, language_set);
    return manifest;
}

void CorpusManifest::save(const std::string& path) const {
    namespace fs = std::filesystem;
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    const std::string target_dir = dirname_of(path);
    for (const ManifestEntry& e : entries) {
        // Paths are relative to the manifest's own directory; rewrite them
        // when the file is being written somewhere else.
        std::string entry_path = e.path;
        if (!e.path.empty() && e.path[0] != '/' && !base_dir.empty() &&
            target_dir != base_dir) {
            fs::path resolved = fs::path(base_dir) / e.path;
            if (!resolved.is_absolute()) resolved = fs::absolute(resolved);
            fs::path target = fs::path(target_dir);
            if (!target.is_absolute()) target = fs::absolute(target);
            entry_path = resolved.lexically_normal()
                             .lexically_proximate(target.lexically_normal())
                             .generic_string();
        }
        out << e.source_id << '\t' << e.language << '\t' << e.algorithm_label << '\t'
            << entry_path << '\t' << e.split << '\n';
    }
    if (!out) throw Error("failed while writing manifest: " + path);
}

void CorpusManifest::validate(const std::set<std::string>& label_set,
                              const std::set<std::string>& language_set) const {
    std::set<std::string> seen;
    for (const ManifestEntry& e : entries) {
        if (!seen.insert(e.source_id).second) {
            throw UsageError("duplicate source_id in manifest: " + e.source_id);
        }
        if (!label_set.empty() && label_set.count(e.algorithm_label) == 0) {
            throw UsageError("manifest entry " + e.source_id + " has label '" +
                             e.algorithm_label + "' outside the configured label set");
        }
        if (!language_set.empty() && language_set.count(e.language) == 0) {
            throw UsageError("manifest entry " + e.source_id + " has language '" + e.language +
                             "' outside the configured language set");
        }
        if (e.split != kSplitTrain && e.split != kSplitTest && e.split != kSplitUnassigned) {
            throw UsageError("manifest entry " + e.source_id + " has invalid split '" + e.split +
                             "'");
        }
    }
}

std::string CorpusManifest::resolve_path(const ManifestEntry& entry) const {
    if (!entry.path.empty() && entry.path[0] == '/') return entry.path;
    if (base_dir.empty()) return entry.path;
    return base_dir + "/" + entry.path;
}

std::map<std::string, std::uint64_t> CorpusManifest::label_counts(const std::string& language,
                                                                  const std::string& split) const {
    std::map<std::string, std::uint64_t> counts;
    for (const ManifestEntry& e : entries) {
        if (e.language != language) continue;
        if (!split.empty() && e.split != split) continue;
        counts[e.algorithm_label] += 1;
    }
    return counts;
}

std::vector<std::size_t> CorpusManifest::indices_of(const std::string& language,
                                                    const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].language != language) continue;
        if (!split.empty() && entries[i].split != split) continue;
        out.push_back(i);
    }
    return out;
}

std::set<std::string> CorpusManifest::labels() const {
    std::set<std::string> out;
    for (const ManifestEntry& e : entries) out.insert(e.algorithm_label);
    return out;
}

std::set<std::string> CorpusManifest::languages() const {
    std::set<std::string> out;
    for (const ManifestEntry& e : entries) out.insert(e.language);
    return out;
}

std::string CorpusManifest::digest() const {
    std::uint64_t h = kFnvOffset;
    for (const ManifestEntry& e : entries) {
        h = fnv1a(h, e.source_id);
        h = fnv1a(h, e.language);
        h = fnv1a(h, e.algorithm_label);
        h = fnv1a(h, e.path);
        h = fnv1a(h, e.split);
    }
    return to_hex(h);
}

}  // namespace bitbcnn
