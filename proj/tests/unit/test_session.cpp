#include "torch_doctest.hpp"

#include "../support/session_script.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/service/config.hpp"
#include "iplan/service/store.hpp"

#include <cstdlib>
#include <filesystem>

using namespace iplan;
using namespace iplan::service;
using iplan::testing::random_models;
namespace fs = std::filesystem;

namespace {

Layout sample_layout(std::uint64_t seed, int rooms = 3)
{
    Rng rng(seed);
    data::SynthConfig cfg;
    cfg.min_rooms = cfg.max_rooms = rooms;
    return data::synth_layout(cfg, rng, "gt");
}

std::shared_ptr<const Models> shared_models()
{
    static const auto m = random_models(11);
    return m;
}

nlohmann::json without_event_count(nlohmann::json snap)
{
    snap.erase("events");
    return snap;
}

EditOp op(EditOp::Kind k) { return EditOp{k}; }

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("iplan_session_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("create_session picks the first undetermined phase")
{
    const Layout l = sample_layout(1);
    const auto m = shared_models();
    CHECK(Session(spec_from_layout(l, Variant::Auto, 0), m).phase() == Phase::Types);
    CHECK(Session(spec_from_layout(l, Variant::Typed, 0), m).phase() == Phase::Locate);
    CHECK(Session(spec_from_layout(l, Variant::Full, 0), m).phase() == Phase::Partition);

    SessionSpec constrained = spec_from_layout(l, Variant::Typed, 0);
    constrained.variant = Variant::Auto;
    CHECK(Session(constrained, m).phase() == Phase::Locate);

    SessionSpec full = spec_from_layout(l, Variant::Full, 0);
    full.centers.reset();
    CHECK_THROWS_AS(Session(full, m), VariantError);
    SessionSpec typed = spec_from_layout(l, Variant::Auto, 0);
    typed.variant = Variant::Typed;
    CHECK_THROWS_AS(Session(typed, m), VariantError);
    SessionSpec uneven = spec_from_layout(l, Variant::Full, 0);
    uneven.centers->pop_back();
    CHECK_THROWS_AS(Session(uneven, m), VariantError);

    auto partial = std::make_shared<Models>(*m);
    partial->types.reset();
    CHECK_THROWS_AS(Session(spec_from_layout(l, Variant::Auto, 0), partial), VariantError);
    CHECK_NOTHROW(Session(spec_from_layout(l, Variant::Typed, 0), partial));
    CHECK(variant_from_string("II") == Variant::Typed);
    CHECK_THROWS_AS(variant_from_string("IV"), VariantError);
}

TEST_CASE("proposal and accept protocol walks the phases in order")
{
    const Layout l = sample_layout(2);
    Session s(spec_from_layout(l, Variant::Auto, 5), shared_models());
    REQUIRE(s.log().size() == 1);

    const SessionDelta first = s.step();
    REQUIRE(first.pending);
    CHECK(first.pending->phase == Phase::Types);
    CHECK(!first.pending->types.empty());
    // A pending proposal blocks further steps.
    CHECK(s.step().pending->types == first.pending->types);
    CHECK(s.log().size() == 2);
    CHECK_THROWS_AS(s.edit([] { EditOp o{EditOp::Kind::SetBox}; o.box = {0, 0, 5, 5}; return o; }()), EditError);

    s.edit(op(EditOp::Kind::Accept));
    CHECK(s.phase() == Phase::Locate);
    CHECK(s.types() == first.pending->types);
    const int N = static_cast<int>(s.types().size());

    std::vector<Phase> seen;
    while (s.phase() != Phase::Done) {
        const std::size_t centers = s.centers().size();
        const SessionDelta d = s.step();
        seen.push_back(d.pending->phase);
        if (d.pending->phase == Phase::Locate)
            CHECK(d.pending->index == static_cast<int>(centers));
        s.edit(op(EditOp::Kind::Accept));
    }
    REQUIRE(static_cast<int>(seen.size()) == 2 * N + 1);
    CHECK(std::is_sorted(seen.begin(), seen.end()));
    CHECK(seen.back() == Phase::Repair);
    REQUIRE(s.result());
    CHECK_NOTHROW(s.result()->validate());
    CHECK(s.result()->N() == N);
    CHECK(s.commits() == 2 * N + 2);
    CHECK_THROWS_AS(s.step(), EditError);
    CHECK_THROWS_AS(s.edit(op(EditOp::Kind::Accept)), EditError);
}

TEST_CASE("run_auto is deterministic per seed")
{
    const Layout l = sample_layout(3);
    const auto m = shared_models();
    const Layout a = run_auto(spec_from_layout(l, Variant::Auto, 9), m);
    CHECK(a == run_auto(spec_from_layout(l, Variant::Auto, 9), m));
    CHECK_NOTHROW(a.validate());
    const Layout full = run_auto(spec_from_layout(l, Variant::Full, 9), m);
    CHECK(full.N() == l.N());
    for (int i = 0; i < l.N(); ++i)
        CHECK(full.rooms[static_cast<std::size_t>(i)].type_id == l.rooms[static_cast<std::size_t>(i)].type_id);
}

TEST_CASE("edits")
{
    const Layout l = sample_layout(4, 4);
    const auto m = shared_models();

    SUBCASE("moving a placed center changes only later predictions")
    {
        Session s(spec_from_layout(l, Variant::Typed, 1), m);
        s.step();
        s.edit(op(EditOp::Kind::Accept));
        s.step();
        s.edit(op(EditOp::Kind::Accept));
        const Pixel kept = s.centers()[0];
        EditOp move{EditOp::Kind::MoveCenter};
        move.index = 1;
        move.center = l.rooms[3].center;
        s.edit(move);
        REQUIRE(s.centers().size() == 2);
        CHECK(s.centers()[0] == kept);
        CHECK(s.centers()[1] == move.center);

        // Oracle: the locator queried directly on the edited prefix.
        Rng unused(0);
        const auto state = nn::build_state(l.boundary, {{s.types()[0], kept}, {s.types()[1], move.center}}, m->registry);
        const Pixel expected = nn::predict_center(*m->locator, state, s.types()[2], nn::DecodeMode::Argmax, unused);
        CHECK(s.step().pending->center == expected);

        move.index = 0;
        s.edit(move);
        CHECK(s.centers().size() == 1);
        CHECK(!s.pending());
    }
    SUBCASE("set_box is blended verbatim")
    {
        Session s(spec_from_layout(l, Variant::Full, 1), m);
        EditOp set{EditOp::Kind::SetBox};
        set.index = -1;
        set.box = {30, 40, 70, 90};
        const auto before = s.states().back();
        s.edit(set);
        CHECK(s.boxes().front() == set.box);
        const auto expected = nn::blend(before, nn::soft_mask(*m->partitioner, set.box.cast<double>()),
            l.rooms[0].type_id, m->registry.K());
        CHECK((s.states().back() == expected).all());
        set.box = {30, 40, 30, 90};
        CHECK_THROWS_AS(s.edit(set), ValidationError);
        set.box = {30, 40, 60, 90};
        set.index = 3;
        CHECK_THROWS_AS(s.edit(set), EditError);

        EditOp move{EditOp::Kind::MoveCenter};
        move.index = 0;
        move.center = {50, 50};
        CHECK_THROWS_AS(s.edit(move), EditError);
        move.index = 2;
        CHECK_NOTHROW(s.edit(move));
        CHECK(s.centers()[2] == Pixel{50, 50});
        CHECK(s.centers()[1] == l.rooms[1].center);
    }
    SUBCASE("reorder_remaining permutes the unvisited rooms")
    {
        Session s(spec_from_layout(l, Variant::Full, 1), m);
        s.step();
        s.edit(op(EditOp::Kind::Accept));
        EditOp reorder{EditOp::Kind::ReorderRemaining};
        reorder.order = {3, 1, 2};
        s.edit(reorder);
        CHECK(s.types()[1] == l.rooms[3].type_id);
        CHECK(s.centers()[1] == l.rooms[3].center);
        CHECK(s.centers()[3] == l.rooms[2].center);
        reorder.order = {0, 1, 2};
        CHECK_THROWS_AS(s.edit(reorder), ValidationError);
    }
    SUBCASE("rollback_to(0) equals a fresh session")
    {
        const SessionSpec spec = spec_from_layout(l, Variant::Auto, 21);
        Session s(spec, m);
        Rng script(3);
        testing::run_random_script(s, script, 30);
        EditOp back{EditOp::Kind::RollbackTo};
        back.step = 0;
        s.edit(back);
        Session fresh(spec, m);
        CHECK(without_event_count(s.snapshot()) == without_event_count(fresh.snapshot()));
        CHECK(s.step().pending->to_json(m->registry) == fresh.step().pending->to_json(m->registry));
        back.step = 5;
        CHECK_THROWS_AS(s.edit(back), ValidationError);
    }
    SUBCASE("reject discards the proposal without committing")
    {
        Session s(spec_from_layout(l, Variant::Auto, 2), m);
        s.step();
        s.edit(op(EditOp::Kind::Reject));
        CHECK(!s.pending());
        CHECK(s.commits() == 0);
        CHECK_THROWS_AS(s.edit(op(EditOp::Kind::Reject)), EditError);
        EditOp set{EditOp::Kind::SetTypes};
        set.types = {0, 1};
        s.edit(set);
        CHECK(s.phase() == Phase::Locate);
        CHECK(s.types() == std::vector<int>{0, 1});
    }
}

TEST_CASE("a failing step leaves the session unchanged")
{
    Boundary tiny;
    tiny.interior.block(60, 60, 5, 5).setOnes();
    tiny.boundary = data::boundary_ring(tiny.interior);
    SessionSpec spec;
    spec.boundary = tiny;
    spec.variant = Variant::Typed;
    spec.types = std::vector<int>{0, 1};
    Session s(spec, shared_models());
    s.step();
    s.edit(op(EditOp::Kind::Accept));
    const auto bytes = s.state_bytes();
    const auto log = s.log();
    try {
        s.step();
        FAIL("expected NoFreeSpace");
    } catch (const NoFreeSpace& e) {
        CHECK(std::string(e.what()).find("LOCATE step 1") != std::string::npos);
    }
    CHECK(s.state_bytes() == bytes);
    CHECK(s.log() == log);
}

TEST_CASE("event log replays to the identical session")
{
    const auto m = shared_models();
    Rng meta(17);
    for (int trial = 0; trial < 8; ++trial) {
        const Layout l = sample_layout(100 + static_cast<std::uint64_t>(trial), uniform_int(meta, 2, 4));
        const auto variant = static_cast<Variant>(uniform_int(meta, 0, 2));
        Session s(spec_from_layout(l, variant, meta()), m);
        testing::run_random_script(s, meta, 40);
        const Session replayed = Session::replay(s.log(), m);
        CHECK(replayed.state_bytes() == s.state_bytes());
        if (s.log().size() > 20) {
            const Session restored = Session::restore(
                nlohmann::json::from_cbor(Session::replay({s.log().begin(), s.log().begin() + 20}, m).state_bytes()),
                s.log(), m);
            CHECK(restored.state_bytes() == s.state_bytes());
        }
    }

    // A log whose recorded proposal cannot be reproduced is rejected.
    Session s(spec_from_layout(sample_layout(5), Variant::Full, 1), m);
    s.step();
    auto log = s.log();
    log.back()["proposal"]["box"] = {0, 0, 1, 1};
    CHECK_THROWS_AS(Session::replay(log, m), SequenceError);
}

TEST_CASE("edit ops round-trip through JSON")
{
    const RoomTypeRegistry reg = synthetic_registry();
    const auto parse = [&](const char* text) { return EditOp::from_json(nlohmann::json::parse(text), reg); };
    const EditOp types = parse(R"({"op": "set_types", "types": ["LivingRoom", 2]})");
    CHECK(types.types == std::vector<int>{reg.id_of("LivingRoom"), 2});
    std::vector<int> counts(static_cast<std::size_t>(reg.K()), 0);
    counts[1] = 2;
    const EditOp by_count = EditOp::from_json({{"op", "set_types"}, {"counts", counts}}, reg);
    CHECK(by_count.types == std::vector<int>{1, 1});
    const EditOp box = parse(R"({"op": "set_box", "box": [1, 2, 3, 4]})");
    CHECK(box.index == -1);
    CHECK(EditOp::from_json(box.to_json(reg), reg).box == PixelBox{1, 2, 3, 4});
    CHECK(parse(R"({"op": "rollback_to", "step": 3})").step == 3);
    CHECK_THROWS_AS(parse(R"({"op": "teleport"})"), EditError);
    CHECK_THROWS_AS(parse(R"({"op": "move_center", "index": 1})"), ParseError);
    CHECK_THROWS_AS(parse(R"({"op": "set_types", "types": ["Garage"]})"), RegistryError);
}

TEST_CASE("store persists events and snapshots")
{
    const auto m = shared_models();
    const fs::path dir = fresh_dir("store");
    std::string id;
    std::vector<std::uint8_t> bytes;
    {
        SessionStore store(m, dir);
        SessionSpec spec = spec_from_layout(sample_layout(6, 4), Variant::Typed, 4);
        spec.id = "";
        id = store.create(spec);
        CHECK(id == "s1");
        while (store.with(id, [](Session& s) { return s.phase(); }) != Phase::Done) {
            store.with(id, [](Session& s) { return s.step(); });
            store.with(id, [](Session& s) { return s.edit(EditOp{EditOp::Kind::Reject}); });
            store.with(id, [](Session& s) { return s.step(); });
            store.with(id, [](Session& s) { return s.edit({}); });
        }
        bytes = store.with(id, [](Session& s) { return s.state_bytes(); });
        CHECK_THROWS_AS(store.with("nope", [](Session& s) { return s.view(); }), NotFound);
        spec.id = id;
        CHECK_THROWS_AS(store.create(spec), ValidationError);
        spec.id = "../x";
        CHECK_THROWS_AS(store.create(spec), ValidationError);
    }
    CHECK(fs::exists(dir / id / "snapshot-20.cbor"));
    SessionStore reloaded(m, dir);
    CHECK(reloaded.ids() == std::vector<std::string>{id});
    CHECK(reloaded.with(id, [](Session& s) { return s.state_bytes(); }) == bytes);
    CHECK(load_session(dir / id, m).state_bytes() == Session::replay(read_events(dir / id), m).state_bytes());
    fs::remove_all(dir);
}

TEST_CASE("config")
{
    nlohmann::json j = {{"format", "iplan-config/1"}, {"registry", "synthetic"},
        {"paths", {{"locator", "models/locator.pt"}, {"sessions", "/abs/sessions"}}}, {"decode", "sample"},
        {"widths", {{"locator", 0.5}}}, {"seeds", {{"generate", 7}}},
        {"train", {{"partitioner", {{"warmup_iterations", 10}}}}}};
    const Config cfg = Config::from_json(j, "/etc/iplan");
    CHECK(cfg.paths.locator == fs::path("/etc/iplan/models/locator.pt"));
    CHECK(cfg.paths.sessions == fs::path("/abs/sessions"));
    CHECK(cfg.decode == nn::DecodeMode::Sample);
    CHECK(cfg.locator.width_factor == 0.5);
    CHECK(cfg.generate_seed == 7);
    CHECK(cfg.partitioner.warmup_iterations == 10);
    CHECK(Config::from_json(cfg.to_json()).partitioner.warmup_iterations == 10);

    ::setenv("IPLAN_LOCATOR", "/env/loc.pt", 1);
    ::setenv("IPLAN_SEED", "99", 1);
    Config overridden = cfg;
    apply_env_overrides(overridden);
    CHECK(overridden.paths.locator == fs::path("/env/loc.pt"));
    CHECK(overridden.generate_seed == 7);
    ::unsetenv("IPLAN_LOCATOR");
    ::unsetenv("IPLAN_SEED");

    j["format"] = "iplan-config/0";
    CHECK_THROWS_AS(Config::from_json(j), ParseError);
    Config missing;
    missing.paths.partitioner = "/nonexistent/partitioner.pt";
    CHECK_THROWS_AS(load_models(missing), DataError);

    const fs::path dir = fresh_dir("models");
    fs::create_directories(dir);
    const auto m = shared_models();
    nn::save_partitioner(dir / "p.pt", *m->partitioner);
    Config present;
    present.paths.partitioner = dir / "p.pt";
    CHECK(load_models(present)->partitioner.has_value());
    present.registry = rplan_registry();
    CHECK_THROWS_AS(load_models(present), RegistryError);
    fs::remove_all(dir);
}
