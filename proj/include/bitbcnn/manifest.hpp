#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bitbcnn/errors.hpp"

namespace bitbcnn {

inline const std::set<std::string> kDefaultLabels = {"ms", "bs", "qs", "ll", "bfs", "kns"};
inline const std::set<std::string> kDefaultLanguages = {"srcml-family", "python-family"};

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitTest = "test";
inline constexpr const char* kSplitUnassigned = "unassigned";

struct ManifestEntry {
    std::string source_id;
    std::string language;
    std::string algorithm_label;
    std::string path;   // relative to the manifest file's directory
    std::string split;  // train | test | unassigned
};

// Corpus catalog: one tab-separated record per program. source_ids are
// unique; labels and languages must come from the configured sets.
struct CorpusManifest {
    std::vector<ManifestEntry> entries;
    std::string base_dir;  // directory of the manifest file, for path resolution

    static CorpusManifest load(const std::string& path,
                               const std::set<std::string>& label_set = kDefaultLabels,
                               const std::set<std::string>& language_set = kDefaultLanguages);
    void save(const std::string& path) const;

    void validate(const std::set<std::string>& label_set,
                  const std::set<std::string>& language_set) const;

    std::string resolve_path(const ManifestEntry& entry) const;

    // label -> count among entries matching language and split
    // (empty split string matches every split).
    std::map<std::string, std::uint64_t> label_counts(const std::string& language,
                                                      const std::string& split = "") const;
    std::vector<std::size_t> indices_of(const std::string& language,
                                        const std::string& split = "") const;
    std::set<std::string> labels() const;
    std::set<std::string> languages() const;

    // FNV-1a digest over all records, recorded in artifacts.
    std::string digest() const;
};

}  // namespace bitbcnn
