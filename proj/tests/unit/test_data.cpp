#include <doctest.h>

#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"
#include "iplan/data/corpus.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/geometry/repair.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace iplan;
using namespace iplan::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("iplan_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<PixelBox> boxes_of(const Layout& l)
{
    std::vector<PixelBox> out;
    for (const Room& r : l.rooms)
        out.push_back(r.box);
    return out;
}

} // namespace

TEST_CASE("synth_corpus is reproducible")
{
    Rng a(42), b(42);
    CHECK(synth_corpus(3, {}, a) == synth_corpus(3, {}, b));
}

TEST_CASE("synthetic layouts satisfy the grammar and tile their interiors")
{
    Rng rng(1);
    const auto corpus = synth_corpus(1000, {}, rng);
    const int living = synthetic_registry().id_of("LivingRoom");
    const int bathroom = synthetic_registry().id_of("Bathroom");
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Layout& l = corpus[i];
        REQUIRE_NOTHROW(l.validate());
        CHECK(l.N() >= 2);
        CHECK(l.N() <= 6);
        const int corners = count_corners(l.boundary.interior);
        CHECK(corners >= 4);
        CHECK(corners <= 10);
        int living_count = 0;
        int smallest_area = 1 << 30, smallest_bath = 1 << 30, largest_other = 0;
        for (const Room& r : l.rooms) {
            living_count += r.type_id == living;
            smallest_area = std::min(smallest_area, r.box.area());
            if (r.type_id == bathroom)
                smallest_bath = std::min(smallest_bath, r.box.area());
            else
                largest_other = std::max(largest_other, r.box.area());
        }
        CHECK(living_count == 1);
        if (smallest_bath < (1 << 30))
            CHECK(smallest_bath == smallest_area);
        if (i < 200) {
            // Post-optimizer losses act as the tiling oracle.
            const auto problem = geometry::RepairProblem::from_boundary(l.boundary, boxes_of(l));
            CHECK(geometry::coverage_loss(problem) == 0.0);
            CHECK(geometry::interior_loss(problem) == 0.0);
        }
    }
}

TEST_CASE("split fractions, determinism and partition property")
{
    Rng rng(3);
    const auto corpus = synth_corpus(100, {}, rng);
    auto manifest = CorpusManifest::for_source(CorpusSource::RplanLike, synthetic_registry(), 17);
    const Split s = split(corpus, manifest);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
    const Split again = split(corpus, manifest);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);

    const auto lifull = CorpusManifest::for_source(CorpusSource::LifullLike, synthetic_registry());
    CHECK(lifull.split.train == doctest::Approx(0.85));

    // Property: a partition for arbitrary sizes and seeds.
    Rng meta(5);
    const auto pool = synth_corpus(60, {}, rng);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = uniform_int(meta, 1, 60);
        std::vector<Layout> items(pool.begin(), pool.begin() + n);
        manifest.seed = meta();
        const Split p = split(items, manifest);
        std::multiset<std::string> ids;
        for (const auto* part : {&p.train, &p.val, &p.test})
            for (const Layout& l : *part)
                ids.insert(l.id);
        CHECK(ids.size() == static_cast<std::size_t>(n));
        CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == static_cast<std::size_t>(n));
        CHECK(std::abs(static_cast<double>(p.train.size()) - 0.7 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(p.val.size()) - 0.15 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(p.test.size()) - 0.15 * n) <= 1.0);
    }
}

TEST_CASE("corpus save and load")
{
    Rng rng(9);
    const auto corpus = synth_corpus(10, {}, rng);
    const auto manifest = CorpusManifest::for_source(CorpusSource::Synthetic, synthetic_registry(), 1);

    SUBCASE("reload is deterministic and ordered by id")
    {
        const fs::path dir = fresh_dir("reload");
        save_corpus(dir, corpus, manifest);
        const auto a = load_corpus(dir);
        const auto b = load_corpus(dir);
        CHECK(a == b);
        CHECK(a == corpus);
        CHECK(read_manifest(dir).items.size() == 10);
    }
    SUBCASE("empty directory gives an empty corpus")
    {
        const fs::path dir = fresh_dir("empty");
        CHECK(load_corpus(dir, manifest).empty());
    }
    SUBCASE("one malformed file fails the whole load and names it")
    {
        const fs::path dir = fresh_dir("malformed");
        save_corpus(dir, corpus, manifest);
        std::ofstream(dir / (corpus[4].id + ".json")) << "{\"format\": \"iplan-layout/1\", \"rooms\": 3}";
        try {
            load_corpus(dir);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(corpus[4].id) != std::string::npos);
        }
    }
    SUBCASE("registry mismatch")
    {
        const fs::path dir = fresh_dir("mismatch");
        auto other = corpus;
        for (Layout& l : other)
            l.registry.max_counts[0] = 3;
        save_corpus(dir, other, manifest);
        CHECK_THROWS_AS(load_corpus(dir), RegistryError);
    }
    SUBCASE("manifest schema")
    {
        auto j = manifest.to_json();
        CHECK(j["format"] == "iplan-manifest/1");
        CHECK(CorpusManifest::from_json(j).split.train == doctest::Approx(0.7));
        j["split"]["val"] = 0.5;
        CHECK_THROWS_AS(CorpusManifest::from_json(j), DataError);
    }
}
