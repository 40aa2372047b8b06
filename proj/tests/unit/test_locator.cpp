#include "torch_doctest.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/raster.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/nn/locator.hpp"

#include <cmath>
#include <filesystem>

using namespace iplan;
using namespace iplan::nn;

namespace {

RoomLocator untrained(std::uint64_t seed = 1)
{
    torch::manual_seed(seed);
    RoomLocator loc{synthetic_registry(), LocatorNet(synthetic_registry().K()), {}};
    loc.net->eval();
    return loc;
}

Layout layout_with_rooms(int n, std::uint64_t seed)
{
    Rng rng(seed);
    data::SynthConfig cfg;
    cfg.min_rooms = cfg.max_rooms = n;
    return data::synth_layout(cfg, rng, "loc");
}

} // namespace

TEST_CASE("build_state")
{
    const Layout l = layout_with_rooms(3, 1);
    const int K = l.registry.K();
    const LocatorState empty = build_state(l.boundary, {}, l.registry);
    REQUIRE(empty.channels.size() == static_cast<std::size_t>(K + 4));
    for (int k = 3; k < K + 4; ++k)
        CHECK((empty.channels[k] == 0).all());
    CHECK((empty.channels[0] == l.boundary.boundary).all());
    CHECK((empty.channels[2] == l.boundary.interior).all());

    const int second = l.registry.id_of("SecondRoom");
    const LocatorState one = build_state(l.boundary, {{second, {64, 64}}}, l.registry);
    CHECK((one.channels[3 + second] != 0).count() == 81);
    CHECK((one.summary() == one.channels[3 + second]).all());

    std::vector<Placement> placed{{0, {30, 40}}, {3, {70, 70}}, {3, {72, 75}}, {1, {5, 5}}};
    const LocatorState a = build_state(l.boundary, placed, l.registry);
    std::reverse(placed.begin(), placed.end());
    const LocatorState b = build_state(l.boundary, placed, l.registry);
    for (int k = 0; k < K + 4; ++k)
        CHECK((a.channels[k] == b.channels[k]).all());

    CHECK_THROWS_AS(build_state(l.boundary, {{K, {10, 10}}}, l.registry), RegistryError);
    CHECK(a.to_tensor().sizes().vec() == std::vector<std::int64_t>{K + 4, 128, 128});
}

TEST_CASE("summary channel is the OR of the type channels")
{
    const Layout l = layout_with_rooms(4, 2);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Placement> placed;
        for (int n = uniform_int(rng, 0, 8); n > 0; --n)
            placed.push_back({uniform_int(rng, 0, l.registry.K() - 1), {uniform_int(rng, 0, 127), uniform_int(rng, 0, 127)}});
        const LocatorState s = build_state(l.boundary, placed, l.registry);
        Mask any = empty_mask();
        for (int k = 0; k < s.K; ++k)
            any = any.max(s.channels[3 + k]);
        CHECK((any == s.summary()).all());
        for (const Mask& m : s.channels)
            CHECK(((m == 0) || (m == 1)).all());
    }
}

TEST_CASE("locator_forward")
{
    const RoomLocator loc = untrained();
    const Layout l = layout_with_rooms(3, 3);
    const LocatorState s = build_state(l.boundary, {{0, l.rooms[0].center}}, l.registry);
    const LocatorOutput out = locator_forward(loc, s, 2);
    CHECK(out.logits.sizes().vec() == std::vector<std::int64_t>{l.registry.K() + 3, 128, 128});
    CHECK(torch::equal(out.logits, locator_forward(loc, s, 2).logits));
    LocatorState zero = s;
    for (Mask& m : zero.channels)
        m.setZero();
    CHECK(torch::isfinite(locator_forward(loc, zero, 0).logits).all().item<bool>());
    CHECK_THROWS_AS(locator_forward(loc, s, l.registry.K()), RegistryError);
}

TEST_CASE("locator_loss closed forms")
{
    // K = 1: four classes; uniform logits give -w ln(1/4) per pixel.
    const torch::Tensor uniform = torch::zeros({4, 1, 1});
    const auto label = [](std::int64_t y) { return torch::full({1, 1}, y, torch::kInt64); };
    CHECK(locator_loss(uniform, label(0), 1).item<double>() == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-6));
    CHECK(locator_loss(uniform, label(2), 1).item<double>() == doctest::Approx(1.25 * std::log(4.0)).epsilon(1e-6));

    // Whole grid with mixed labels.
    const int K = 6;
    LabelGrid grid(128, 128);
    int types = 0;
    for (int i = 0; i < grid.size(); ++i) {
        grid.data()[i] = i % (K + 3);
        types += grid.data()[i] < K;
    }
    const double expected = (2.0 * types + 1.25 * (grid.size() - types)) * std::log(K + 3.0);
    CHECK(locator_loss(torch::zeros({K + 3, 128, 128}), label_tensor(grid), K).item<double>()
        == doctest::Approx(expected).epsilon(1e-6));

    torch::Tensor confident = torch::full({4, 1, 1}, -1e4f);
    confident[1][0][0] = 1e4f;
    CHECK(locator_loss(confident, label(1), 1).item<double>() == doctest::Approx(0.0));
    CHECK_THROWS_AS(locator_loss(uniform, label(4), 1), DomainError);
    CHECK_THROWS_AS(locator_loss(uniform, label(-1), 1), DomainError);
}

TEST_CASE("make_training_example")
{
    SUBCASE("single room")
    {
        Layout l = layout_with_rooms(2, 5);
        l.rooms.resize(1);
        Rng rng(1);
        const TrainingExample ex = make_training_example(l, rng);
        CHECK((ex.state.summary() == 0).all());
        CHECK(ex.next_type == l.rooms[0].type_id);
        CHECK((ex.target == ex.next_type).count() == 81);
    }
    SUBCASE("target labels")
    {
        const Layout l = layout_with_rooms(5, 6);
        const int K = l.registry.K();
        Rng rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            const TrainingExample ex = make_training_example(l, rng);
            const Mask next = stamped(empty_mask(), l.rooms[ex.next_room].center);
            Mask kept = empty_mask();
            for (int i : ex.kept)
                stamp_center(kept, l.rooms[i].center);
            for (int r = 0; r < 128; ++r)
                for (int c = 0; c < 128; ++c) {
                    int expected = l.boundary.interior(r, c) ? free_label(K) : outside_label(K);
                    if (kept(r, c))
                        expected = existing_label(K);
                    if (next(r, c))
                        expected = ex.next_type;
                    REQUIRE(ex.target(r, c) == expected);
                }
            if (ex.kept.size() == 4)
                CHECK((ex.target < K).count() == 81);
        }
    }
    SUBCASE("next room is uniform given three kept")
    {
        const Layout l = layout_with_rooms(4, 7);
        Rng rng(11);
        std::array<int, 4> hits{};
        int conditioned = 0;
        for (int trial = 0; trial < 40000; ++trial) {
            const TrainingExample ex = make_training_example(l, rng);
            if (ex.kept.size() != 3)
                continue;
            ++conditioned;
            ++hits[ex.next_room];
        }
        for (int h : hits)
            CHECK(std::abs(double(h) / conditioned - 0.25) <= 0.02);
    }
}

TEST_CASE("predict_center and locate_all")
{
    const RoomLocator loc = untrained(3);
    const Layout l = layout_with_rooms(4, 8);
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const LocatorState s = build_state(l.boundary, {{0, l.rooms[0].center}}, l.registry);
        for (DecodeMode mode : {DecodeMode::Argmax, DecodeMode::Sample}) {
            const Pixel p = predict_center(loc, s, trial % l.registry.K(), mode, rng);
            CHECK(l.boundary.interior(p.row, p.col) == 1);
            CHECK(s.summary()(p.row, p.col) == 0);
        }
    }
    const LocatorState s = build_state(l.boundary, {}, l.registry);
    Rng a(8), b(8);
    CHECK(predict_center(loc, s, 1, DecodeMode::Sample, a) == predict_center(loc, s, 1, DecodeMode::Sample, b));

    SUBCASE("no admissible pixel")
    {
        Boundary tiny;
        tiny.interior.block(60, 60, 5, 5).setOnes();
        tiny.boundary = data::boundary_ring(tiny.interior);
        const LocatorState full = build_state(tiny, {{0, {62, 62}}}, l.registry);
        CHECK_THROWS_AS(predict_center(loc, full, 0, DecodeMode::Argmax, rng), NoFreeSpace);
        try {
            Rng r(1);
            locate_all(loc, tiny, {0, 1}, r, DecodeMode::Argmax);
            FAIL("expected NoFreeSpace");
        } catch (const NoFreeSpace& e) {
            CHECK(std::string(e.what()).find("step 1") != std::string::npos);
        }
    }
    SUBCASE("single type reduces to predict_center")
    {
        Rng r1(3), r2(3);
        CHECK(locate_all(loc, l.boundary, {2}, r1, DecodeMode::Sample)
            == std::vector<Pixel>{predict_center(loc, s, 2, DecodeMode::Sample, r2)});
    }
    SUBCASE("an edit at step j leaves earlier steps untouched")
    {
        const std::vector<int> types{0, 1, 3, 3};
        Rng r1(5), r2(5);
        const auto plain = locate_all(loc, l.boundary, types, r1, DecodeMode::Sample);
        const Pixel moved = l.rooms[0].center;
        const auto edited = locate_all(loc, l.boundary, types, r2, DecodeMode::Sample,
            [&](int step, int, const Pixel&) { return step == 2 ? std::optional<Pixel>(moved) : std::nullopt; });
        REQUIRE(edited.size() == types.size());
        CHECK(edited[0] == plain[0]);
        CHECK(edited[1] == plain[1]);
        CHECK(edited[2] == moved);
    }
    CHECK_THROWS_AS(locate_all(loc, l.boundary, {}, rng, DecodeMode::Argmax), ValidationError);
}

TEST_CASE("short training run and checkpoint")
{
    Rng rng(2);
    const auto corpus = data::synth_corpus(3, {}, rng);
    LocatorConfig cfg;
    cfg.epochs = 3;
    const auto trained = train_locator(corpus, cfg, rng);
    REQUIRE(trained.trace.size() == 3);
    for (const auto& row : trained.trace)
        CHECK(std::isfinite(row.loss));
    CHECK(trained.trace.back().loss < trained.trace.front().loss);
    CHECK_THROWS_AS(train_locator({}, cfg, rng), DataError);

    const auto path = std::filesystem::temp_directory_path() / "iplan_locator.pt";
    save_locator(path, trained.locator);
    const RoomLocator loaded = load_locator(path, synthetic_registry());
    const LocatorState s = build_state(corpus[0].boundary, {}, corpus[0].registry);
    CHECK(torch::allclose(locator_forward(loaded, s, 0).logits, locator_forward(trained.locator, s, 0).logits));
    CHECK_THROWS_AS(load_locator(path, rplan_registry()), RegistryError);
    std::filesystem::remove(path);
}
