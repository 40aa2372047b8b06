#pragma once

#include "iplan/core/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace iplan::data {

inline constexpr const char* kManifestFormat = "iplan-manifest/1";
inline constexpr const char* kManifestFile = "manifest.json";

enum class CorpusSource { RplanLike, LifullLike, Synthetic };

std::string to_string(CorpusSource s);
CorpusSource source_from_string(const std::string& s);

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct CorpusManifest {
    CorpusSource source = CorpusSource::Synthetic;
    RoomTypeRegistry registry;
    SplitFractions split;
    std::uint64_t seed = 0;
    std::vector<std::string> items;

    // Default fractions per source: 70/15/15 for rplan-like and synthetic,
    // 85/0/15 for lifull-like.
    static CorpusManifest for_source(CorpusSource source, RoomTypeRegistry registry, std::uint64_t seed = 0);

    void validate() const;
    nlohmann::json to_json() const;
    static CorpusManifest from_json(const nlohmann::json& j);
};

// Loads every item listed in the manifest (or every *.json layout when the
// list is empty), sorted by id. All-or-nothing: the first bad file raises.
std::vector<Layout> load_corpus(const std::filesystem::path& dir, const CorpusManifest& manifest);
// Reads `dir/manifest.json` and loads the corpus it describes.
std::vector<Layout> load_corpus(const std::filesystem::path& dir);
CorpusManifest read_manifest(const std::filesystem::path& dir);

// Writes one `<id>.json` per layout plus the manifest (items filled from ids).
void save_corpus(const std::filesystem::path& dir, const std::vector<Layout>& corpus, CorpusManifest manifest);

struct Split {
    std::vector<Layout> train;
    std::vector<Layout> val;
    std::vector<Layout> test;
};

Split split(const std::vector<Layout>& corpus, const CorpusManifest& manifest);

} // namespace iplan::data
