#include "iplan/data/corpus.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"
#include "iplan/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace iplan::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(CorpusSource s)
{
    switch (s) {
    case CorpusSource::RplanLike: return "rplan-like";
    case CorpusSource::LifullLike: return "lifull-like";
    case CorpusSource::Synthetic: return "synthetic";
    }
    return "synthetic";
}

CorpusSource source_from_string(const std::string& s)
{
    if (s == "rplan-like")
        return CorpusSource::RplanLike;
    if (s == "lifull-like")
        return CorpusSource::LifullLike;
    if (s == "synthetic")
        return CorpusSource::Synthetic;
    throw ParseError("unknown corpus source '" + s + "'");
}

CorpusManifest CorpusManifest::for_source(CorpusSource source, RoomTypeRegistry registry, std::uint64_t seed)
{
    CorpusManifest m;
    m.source = source;
    m.registry = std::move(registry);
    m.seed = seed;
    if (source == CorpusSource::LifullLike)
        m.split = {0.85, 0.0, 0.15};
    return m;
}

void CorpusManifest::validate() const
{
    registry.validate();
    const double sum = split.train + split.val + split.test;
    if (split.train < 0 || split.val < 0 || split.test < 0 || std::abs(sum - 1.0) > 1e-9)
        throw DataError("split fractions must be non-negative and sum to 1");
}

json CorpusManifest::to_json() const
{
    return {{"format", kManifestFormat}, {"source", to_string(source)}, {"registry", registry_to_json(registry)},
        {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}}, {"seed", seed},
        {"items", items}};
}

CorpusManifest CorpusManifest::from_json(const json& j)
{
    try {
        if (j.value("format", std::string()) != kManifestFormat)
            throw ParseError("manifest format tag must be " + std::string(kManifestFormat));
        CorpusManifest m;
        m.source = source_from_string(j.at("source").get<std::string>());
        m.registry = registry_from_json(j.at("registry"));
        const json& s = j.at("split");
        m.split = {s.at("train").get<double>(), s.at("val").get<double>(), s.at("test").get<double>()};
        m.seed = j.value("seed", std::uint64_t{0});
        m.items = j.value("items", std::vector<std::string>{});
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
}

CorpusManifest read_manifest(const fs::path& dir)
{
    return CorpusManifest::from_json(read_json_file(dir / kManifestFile));
}

std::vector<Layout> load_corpus(const fs::path& dir, const CorpusManifest& manifest)
{
    manifest.validate();
    std::vector<fs::path> files;
    if (!manifest.items.empty()) {
        for (const std::string& id : manifest.items)
            files.push_back(dir / (id + ".json"));
    } else if (fs::is_directory(dir)) {
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json"
                && entry.path().filename() != kManifestFile)
                files.push_back(entry.path());
    }
    if (files.empty()) {
        std::cerr << "warning: corpus at " << dir.string() << " is empty\n";
        return {};
    }
    std::vector<Layout> corpus;
    corpus.reserve(files.size());
    for (const fs::path& file : files) {
        Layout layout = load_layout(file);
        if (layout.id.empty())
            layout.id = file.stem().string();
        if (!(layout.registry == manifest.registry))
            throw RegistryError(file.filename().string() + ": registry differs from the manifest");
        corpus.push_back(std::move(layout));
    }
    std::sort(corpus.begin(), corpus.end(), [](const Layout& a, const Layout& b) { return a.id < b.id; });
    return corpus;
}

std::vector<Layout> load_corpus(const fs::path& dir) { return load_corpus(dir, read_manifest(dir)); }

void save_corpus(const fs::path& dir, const std::vector<Layout>& corpus, CorpusManifest manifest)
{
    fs::create_directories(dir);
    manifest.items.clear();
    for (const Layout& layout : corpus) {
        if (layout.id.empty())
            throw DataError("cannot save a layout without an id");
        save_layout(dir / (layout.id + ".json"), layout);
        manifest.items.push_back(layout.id);
    }
    std::sort(manifest.items.begin(), manifest.items.end());
    write_json_file(dir / kManifestFile, manifest.to_json());
}

Split split(const std::vector<Layout>& corpus, const CorpusManifest& manifest)
{
    manifest.validate();
    const auto n = corpus.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(manifest.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(manifest.split.train * static_cast<double>(n)));
    const auto n_val = std::min(n - std::min(n, n_train),
        static_cast<std::size_t>(std::llround(manifest.split.val * static_cast<double>(n))));
    Split out;
    for (std::size_t i = 0; i < n; ++i) {
        const Layout& item = corpus[order[i]];
        if (i < n_train)
            out.train.push_back(item);
        else if (i < n_train + n_val)
            out.val.push_back(item);
        else
            out.test.push_back(item);
    }
    return out;
}

} // namespace iplan::data
