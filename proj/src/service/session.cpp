#include "iplan/service/session.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

namespace iplan::service {

using nlohmann::json;

namespace {

constexpr int kTypeRetries = 16;

template <typename F>
auto with_context(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const NoFreeSpace& e) {
        throw NoFreeSpace(where + ": " + e.detail());
    } catch (const DomainError& e) {
        throw DomainError(where + ": " + e.detail());
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.detail());
    } catch (const NumericsError& e) {
        throw NumericsError(where + ": " + e.detail());
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.detail());
    }
}

json names_of(const std::vector<int>& types, const RoomTypeRegistry& reg)
{
    json out = json::array();
    for (int t : types)
        out.push_back(reg.names.at(static_cast<std::size_t>(t)));
    return out;
}

std::vector<int> types_from_json(const json& j, const RoomTypeRegistry& reg)
{
    std::vector<int> out;
    for (const json& t : j) {
        const int id = t.is_string() ? reg.id_of(t.get<std::string>()) : t.get<int>();
        if (id < 0 || id >= reg.K())
            throw RegistryError("type id " + std::to_string(id) + " out of range");
        out.push_back(id);
    }
    return out;
}

json pixel_json(const Pixel& p) { return {p.row, p.col}; }

Pixel pixel_from(const json& j)
{
    const auto v = j.get<std::vector<int>>();
    if (v.size() != 2)
        throw ParseError("a pixel needs 2 coordinates");
    return {v[0], v[1]};
}

json box_json(const PixelBox& b) { return {b.top, b.left, b.bottom, b.right}; }

PixelBox box_from(const json& j)
{
    const auto v = j.get<std::vector<int>>();
    if (v.size() != 4)
        throw ParseError("a box needs 4 coordinates");
    return {v[0], v[1], v[2], v[3]};
}

json boxes_json(const std::vector<PixelBox>& boxes)
{
    json out = json::array();
    for (const PixelBox& b : boxes)
        out.push_back(box_json(b));
    return out;
}

std::vector<PixelBox> boxes_from(const json& j)
{
    std::vector<PixelBox> out;
    for (const json& b : j)
        out.push_back(box_from(b));
    return out;
}

json centers_json(const std::vector<Pixel>& centers)
{
    json out = json::array();
    for (const Pixel& p : centers)
        out.push_back(pixel_json(p));
    return out;
}

std::vector<Pixel> centers_from(const json& j)
{
    std::vector<Pixel> out;
    for (const json& p : j)
        out.push_back(pixel_from(p));
    return out;
}

json loss_json(const geometry::LossTerms& l)
{
    return {{"coverage", l.coverage}, {"interior", l.interior}, {"total", l.total}};
}

geometry::LossTerms loss_from(const json& j)
{
    return {j.at("coverage").get<double>(), j.at("interior").get<double>(), j.at("total").get<double>()};
}

std::string rng_string(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from(const std::string& s)
{
    Rng rng;
    std::istringstream is(s);
    is >> rng;
    if (!is)
        throw ParseError("bad rng state");
    return rng;
}

json raster_json(const nn::PartitionState& s)
{
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(s.size()) * sizeof(float));
    std::memcpy(bytes.data(), s.data(), bytes.size());
    return json::binary(std::move(bytes));
}

nn::PartitionState raster_from(const json& j)
{
    const auto& bytes = j.get_binary();
    nn::PartitionState s(kResolution, kResolution);
    if (bytes.size() != static_cast<std::size_t>(s.size()) * sizeof(float))
        throw ParseError("partition state has the wrong size");
    std::memcpy(s.data(), bytes.data(), bytes.size());
    return s;
}

bool inside_canvas(const Pixel& p)
{
    return p.row >= 0 && p.row < kResolution && p.col >= 0 && p.col < kResolution;
}

std::vector<nn::Placement> placements(const std::vector<int>& types, const std::vector<Pixel>& centers)
{
    std::vector<nn::Placement> out;
    for (std::size_t i = 0; i < centers.size(); ++i)
        out.push_back({types[i], centers[i]});
    return out;
}

// The LOCATE factor: conditions on the boundary, the types and the centers
// placed so far, never on boxes.
Pixel locate_next(const Models& m, const Boundary& b, const std::vector<int>& types,
    const std::vector<Pixel>& centers, Rng& rng)
{
    const std::size_t j = centers.size();
    const nn::LocatorState state = nn::build_state(b, placements(types, centers), m.registry);
    return nn::predict_center(*m.locator, state, types[j], m.decode, rng);
}

const char* op_name(EditOp::Kind k)
{
    switch (k) {
    case EditOp::Kind::Accept: return "accept";
    case EditOp::Kind::Reject: return "reject";
    case EditOp::Kind::SetTypes: return "set_types";
    case EditOp::Kind::MoveCenter: return "move_center";
    case EditOp::Kind::SetBox: return "set_box";
    case EditOp::Kind::ReorderRemaining: return "reorder_remaining";
    case EditOp::Kind::RollbackTo: return "rollback_to";
    }
    return "";
}

} // namespace

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::Full: return "full";
    case Variant::Typed: return "typed";
    case Variant::Auto: return "auto";
    }
    return "";
}

Variant variant_from_string(const std::string& s)
{
    if (s == "I" || s == "full")
        return Variant::Full;
    if (s == "II" || s == "typed")
        return Variant::Typed;
    if (s == "III" || s == "auto")
        return Variant::Auto;
    throw VariantError("unknown variant '" + s + "'");
}

std::string to_string(Phase p)
{
    switch (p) {
    case Phase::Types: return "TYPES";
    case Phase::Locate: return "LOCATE";
    case Phase::Partition: return "PARTITION";
    case Phase::Repair: return "REPAIR";
    case Phase::Done: return "DONE";
    }
    return "";
}

Phase phase_from_string(const std::string& s)
{
    for (Phase p : {Phase::Types, Phase::Locate, Phase::Partition, Phase::Repair, Phase::Done})
        if (to_string(p) == s)
            return p;
    throw ParseError("unknown phase '" + s + "'");
}

void Models::validate() const
{
    registry.validate();
    if (types && !(types->registry == registry))
        throw RegistryError("type sampler was trained for another registry");
    if (locator && !(locator->registry == registry))
        throw RegistryError("locator was trained for another registry");
    if (partitioner && !(partitioner->registry == registry))
        throw RegistryError("partitioner was trained for another registry");
}

json SessionSpec::to_json(const RoomTypeRegistry& reg) const
{
    return {{"id", id}, {"variant", service::to_string(variant)}, {"seed", seed},
        {"boundary", boundary_to_json(boundary)}, {"types", types ? names_of(*types, reg) : json(nullptr)},
        {"centers", centers ? centers_json(*centers) : json(nullptr)}};
}

SessionSpec SessionSpec::from_json(const json& j, const RoomTypeRegistry& reg)
{
    try {
        SessionSpec spec;
        spec.id = j.value("id", std::string("session"));
        spec.variant = variant_from_string(j.value("variant", std::string("auto")));
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.boundary = boundary_from_json(j.at("boundary"));
        if (j.contains("types") && !j["types"].is_null())
            spec.types = types_from_json(j["types"], reg);
        if (j.contains("centers") && !j["centers"].is_null())
            spec.centers = centers_from(j["centers"]);
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("session spec: ") + e.what());
    }
}

SessionSpec spec_from_layout(const Layout& layout, Variant variant, std::uint64_t seed)
{
    SessionSpec spec;
    spec.id = layout.id;
    spec.boundary = layout.boundary;
    spec.variant = variant;
    spec.seed = seed;
    if (variant != Variant::Auto) {
        std::vector<int> types;
        for (const Room& r : layout.rooms)
            types.push_back(r.type_id);
        spec.types = types;
    }
    if (variant == Variant::Full) {
        std::vector<Pixel> centers;
        for (const Room& r : layout.rooms)
            centers.push_back(r.center);
        spec.centers = centers;
    }
    return spec;
}

json Proposal::to_json(const RoomTypeRegistry& reg) const
{
    json j{{"phase", service::to_string(phase)}, {"index", index}};
    switch (phase) {
    case Phase::Types:
        j["types"] = names_of(types, reg);
        break;
    case Phase::Locate:
        j["center"] = pixel_json(center);
        break;
    case Phase::Partition:
        j["box"] = box_json(box.box);
        j["raw"] = {box.raw.top, box.raw.left, box.raw.bottom, box.raw.right};
        j["expanded"] = box.expanded;
        break;
    case Phase::Repair:
        j["boxes"] = boxes_json(repaired);
        j["before"] = loss_json(before);
        j["after"] = loss_json(after);
        break;
    case Phase::Done:
        break;
    }
    return j;
}

Proposal Proposal::from_json(const json& j, const RoomTypeRegistry& reg)
{
    try {
        Proposal p;
        p.phase = phase_from_string(j.at("phase").get<std::string>());
        p.index = j.at("index").get<int>();
        switch (p.phase) {
        case Phase::Types:
            p.types = types_from_json(j.at("types"), reg);
            break;
        case Phase::Locate:
            p.center = pixel_from(j.at("center"));
            break;
        case Phase::Partition: {
            p.box.box = box_from(j.at("box"));
            const auto raw = j.at("raw").get<std::vector<double>>();
            p.box.raw = {raw.at(0), raw.at(1), raw.at(2), raw.at(3)};
            p.box.expanded = j.at("expanded").get<bool>();
            break;
        }
        case Phase::Repair:
            p.repaired = boxes_from(j.at("boxes"));
            p.before = loss_from(j.at("before"));
            p.after = loss_from(j.at("after"));
            break;
        case Phase::Done:
            break;
        }
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("proposal: ") + e.what());
    }
}

json EditOp::to_json(const RoomTypeRegistry& reg) const
{
    json j{{"op", op_name(kind)}};
    switch (kind) {
    case Kind::SetTypes:
        j["types"] = names_of(types, reg);
        break;
    case Kind::MoveCenter:
        j["index"] = index;
        j["center"] = pixel_json(center);
        break;
    case Kind::SetBox:
        j["index"] = index;
        j["box"] = box_json(box);
        break;
    case Kind::ReorderRemaining:
        j["order"] = order;
        break;
    case Kind::RollbackTo:
        j["step"] = step;
        break;
    default:
        break;
    }
    return j;
}

EditOp EditOp::from_json(const json& j, const RoomTypeRegistry& reg)
{
    EditOp op;
    std::string name;
    try {
        name = j.at("op").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("edit: ") + e.what());
    }
    bool known = false;
    for (Kind k : {Kind::Accept, Kind::Reject, Kind::SetTypes, Kind::MoveCenter, Kind::SetBox,
             Kind::ReorderRemaining, Kind::RollbackTo})
        if (name == op_name(k)) {
            op.kind = k;
            known = true;
        }
    if (!known)
        throw EditError("unknown edit op '" + name + "'");
    try {
        switch (op.kind) {
        case Kind::SetTypes:
            if (j.contains("counts")) {
                const TypeCount q{j["counts"].get<std::vector<int>>()};
                if (static_cast<int>(q.counts.size()) != reg.K())
                    throw ParseError("counts need one entry per room type");
                op.types = expand_types(q);
            } else {
                op.types = types_from_json(j.at("types"), reg);
            }
            break;
        case Kind::MoveCenter:
            op.index = j.at("index").get<int>();
            op.center = pixel_from(j.at("center"));
            break;
        case Kind::SetBox:
            op.index = j.value("index", -1);
            op.box = box_from(j.at("box"));
            break;
        case Kind::ReorderRemaining:
            op.order = j.at("order").get<std::vector<int>>();
            break;
        case Kind::RollbackTo:
            op.step = j.at("step").get<int>();
            break;
        default:
            break;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("edit ") + name + ": " + e.what());
    }
    return op;
}

json SessionDelta::to_json(const RoomTypeRegistry& reg) const
{
    return {{"event", event}, {"phase", service::to_string(phase)}, {"commits", commits},
        {"pending", pending ? pending->to_json(reg) : json(nullptr)}};
}

Session::Session(SessionSpec spec, std::shared_ptr<const Models> models)
    : Session(std::move(spec), std::move(models), true)
{
}

Session::Session(SessionSpec spec, std::shared_ptr<const Models> models, bool log_creation)
    : spec_(std::move(spec)), models_(std::move(models))
{
    if (!models_)
        throw VariantError("no models loaded");
    const RoomTypeRegistry& reg = models_->registry;
    spec_.boundary.validate();
    if (spec_.variant == Variant::Full && !(spec_.types && spec_.centers))
        throw VariantError("the full variant needs room types and centers");
    if (spec_.variant == Variant::Typed && !spec_.types)
        throw VariantError("the typed variant needs room types");
    if (spec_.centers && !spec_.types)
        throw VariantError("centers given without room types");
    if (spec_.types) {
        if (spec_.types->empty())
            throw VariantError("room type list is empty");
        for (int t : *spec_.types)
            if (t < 0 || t >= reg.K())
                throw RegistryError("type id " + std::to_string(t) + " out of range");
    }
    if (spec_.centers) {
        if (spec_.centers->size() != spec_.types->size())
            throw VariantError("need one center per room type");
        for (const Pixel& c : *spec_.centers)
            if (!inside_canvas(c))
                throw VariantError("center outside the canvas");
    }

    core_.phase = spec_.centers ? Phase::Partition : spec_.types ? Phase::Locate : Phase::Types;
    if (core_.phase == Phase::Types && !models_->types)
        throw VariantError("sampling room types needs a type sampler");
    if (core_.phase <= Phase::Locate && !models_->locator)
        throw VariantError("placing centers needs a room locator");
    if (!models_->partitioner)
        throw VariantError("partitioning needs a partitioner");
    if (spec_.types)
        core_.types = *spec_.types;
    if (spec_.centers)
        core_.centers = *spec_.centers;
    core_.rng = Rng(spec_.seed);
    core_.states.push_back(nn::initial_partition_state(spec_.boundary));
    commit(core_);
    if (log_creation)
        append({{"event", "create"}, {"spec", spec_.to_json(reg)}});
}

void Session::commit(Core& core) const
{
    core.history.push_back({core.phase, core.types, core.centers, core.boxes, core.states.size(), core.result, core.rng});
}

void Session::append(json event)
{
    event["seq"] = log_.size();
    log_.push_back(std::move(event));
}

Proposal Session::propose(Core& core) const
{
    const Models& m = *models_;
    Proposal p;
    p.phase = core.phase;
    switch (core.phase) {
    case Phase::Types: {
        for (int attempt = 0; attempt < kTypeRetries && p.types.empty(); ++attempt)
            p.types = expand_types(nn::sample_types(*m.types, spec_.boundary, core.rng, 1).front());
        if (p.types.empty())
            throw DataError("TYPES: the type sampler proposed no rooms in " + std::to_string(kTypeRetries) + " draws");
        break;
    }
    case Phase::Locate: {
        p.index = static_cast<int>(core.centers.size());
        p.center = with_context("LOCATE step " + std::to_string(p.index),
            [&] { return locate_next(m, spec_.boundary, core.types, core.centers, core.rng); });
        break;
    }
    case Phase::Partition: {
        const std::size_t j = core.boxes.size();
        p.index = static_cast<int>(j);
        p.box = with_context("PARTITION step " + std::to_string(j),
            [&] { return nn::regress_box(*m.partitioner, core.states.back(), core.centers[j], core.types[j]); });
        break;
    }
    case Phase::Repair: {
        p.index = static_cast<int>(core.boxes.size());
        const auto result = with_context("REPAIR", [&] {
            return geometry::repair(geometry::RepairProblem::from_boundary(spec_.boundary, core.boxes), m.repair);
        });
        p.repaired = result.rounded();
        p.before = result.initial;
        p.after = result.final;
        break;
    }
    case Phase::Done:
        throw EditError("session is DONE");
    }
    return p;
}

SessionDelta Session::step()
{
    if (core_.phase == Phase::Done)
        throw EditError("session is DONE");
    if (core_.pending)
        return delta("step");
    Core next = core_;
    next.pending = propose(next);
    core_ = std::move(next);
    append({{"event", "step"}, {"proposal", core_.pending->to_json(models_->registry)}});
    return delta("step");
}

SessionDelta Session::edit(const EditOp& op)
{
    Core next = core_;
    apply(next, op);
    core_ = std::move(next);
    append({{"event", "edit"}, {"op", op.to_json(models_->registry)}});
    return delta(op_name(op.kind));
}

void Session::apply(Core& core, const EditOp& op) const
{
    const Models& m = *models_;
    const int N = static_cast<int>(core.types.size());
    const std::string phase = to_string(core.phase);
    const auto mismatch = [&](const std::string& what) { return EditError(std::string(op_name(op.kind)) + " " + what + " in phase " + phase); };

    const auto place_center = [&](int i, const Pixel& c) {
        core.centers.resize(static_cast<std::size_t>(i));
        core.centers.push_back(c);
        if (static_cast<int>(core.centers.size()) == N)
            core.phase = Phase::Partition;
    };
    const auto place_box = [&](const PixelBox& box) {
        const std::size_t j = core.boxes.size();
        const nn::PartitionStep step = with_context("PARTITION step " + std::to_string(j), [&] {
            return nn::partition_step(*m.partitioner, core.states.back(), {core.types[j], core.centers[j]}, box);
        });
        core.states.push_back(step.state);
        core.boxes.push_back(box);
        if (static_cast<int>(core.boxes.size()) == N)
            core.phase = Phase::Repair;
    };
    const auto finish = [&](const std::vector<PixelBox>& repaired) {
        Layout layout;
        layout.id = spec_.id;
        layout.registry = m.registry;
        layout.boundary = spec_.boundary;
        for (int i = 0; i < N; ++i) {
            const PixelBox& b = repaired[static_cast<std::size_t>(i)];
            const Pixel& c = core.centers[static_cast<std::size_t>(i)];
            const Pixel inside{std::clamp(c.row, b.top, b.bottom - 1), std::clamp(c.col, b.left, b.right - 1)};
            layout.rooms.push_back({core.types[static_cast<std::size_t>(i)], inside, b});
        }
        layout.validate();
        core.result = std::move(layout);
        core.phase = Phase::Done;
    };

    switch (op.kind) {
    case EditOp::Kind::Accept: {
        if (!core.pending)
            throw mismatch("without a pending proposal");
        const Proposal p = *core.pending;
        core.pending.reset();
        switch (p.phase) {
        case Phase::Types:
            core.types = p.types;
            core.centers.clear();
            core.phase = Phase::Locate;
            if (!m.locator)
                throw VariantError("placing centers needs a room locator");
            break;
        case Phase::Locate:
            place_center(p.index, p.center);
            break;
        case Phase::Partition:
            place_box(p.box.box);
            break;
        case Phase::Repair:
            finish(p.repaired);
            break;
        case Phase::Done:
            break;
        }
        commit(core);
        return;
    }
    case EditOp::Kind::Reject:
        if (!core.pending)
            throw mismatch("without a pending proposal");
        core.pending.reset();
        return;
    case EditOp::Kind::SetTypes: {
        if (core.phase != Phase::Types && core.phase != Phase::Locate)
            throw mismatch("not allowed");
        if (op.types.empty())
            throw ValidationError("set_types needs at least one room");
        for (int t : op.types)
            if (t < 0 || t >= m.registry.K())
                throw RegistryError("type id " + std::to_string(t) + " out of range");
        if (!m.locator)
            throw VariantError("placing centers needs a room locator");
        core.pending.reset();
        core.types = op.types;
        core.centers.clear();
        core.phase = Phase::Locate;
        commit(core);
        return;
    }
    case EditOp::Kind::MoveCenter: {
        if (!inside_canvas(op.center))
            throw ValidationError("move_center target outside the canvas");
        if (core.phase == Phase::Locate) {
            if (op.index < 0 || op.index > static_cast<int>(core.centers.size()))
                throw mismatch("for room " + std::to_string(op.index) + " which is not placed yet");
            core.pending.reset();
            place_center(op.index, op.center);
        } else if (core.phase == Phase::Partition) {
            if (op.index < static_cast<int>(core.boxes.size()) || op.index >= N)
                throw mismatch("for room " + std::to_string(op.index) + " which is already partitioned");
            if (core.pending && core.pending->index == op.index)
                core.pending.reset();
            core.centers[static_cast<std::size_t>(op.index)] = op.center;
        } else {
            throw mismatch("not allowed");
        }
        commit(core);
        return;
    }
    case EditOp::Kind::SetBox: {
        if (core.phase != Phase::Partition)
            throw mismatch("not allowed");
        if (op.index != -1 && op.index != static_cast<int>(core.boxes.size()))
            throw mismatch("for room " + std::to_string(op.index) + " which is not the current room");
        const PixelBox& b = op.box;
        if (!(0 <= b.top && b.top < b.bottom && b.bottom <= kResolution && 0 <= b.left && b.left < b.right
                && b.right <= kResolution))
            throw ValidationError("set_box needs a non-empty box inside the canvas");
        core.pending.reset();
        place_box(b);
        commit(core);
        return;
    }
    case EditOp::Kind::ReorderRemaining: {
        int first = 0;
        if (core.phase == Phase::Locate)
            first = static_cast<int>(core.centers.size());
        else if (core.phase == Phase::Partition)
            first = static_cast<int>(core.boxes.size());
        else
            throw mismatch("not allowed");
        std::vector<int> sorted = op.order;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> expected(static_cast<std::size_t>(N - first));
        std::iota(expected.begin(), expected.end(), first);
        if (sorted != expected)
            throw ValidationError("reorder_remaining needs a permutation of rooms " + std::to_string(first) + ".."
                + std::to_string(N - 1));
        std::vector<int> types = core.types;
        std::vector<Pixel> centers = core.centers;
        for (std::size_t k = 0; k < op.order.size(); ++k) {
            const auto from = static_cast<std::size_t>(op.order[k]);
            const auto to = static_cast<std::size_t>(first) + k;
            types[to] = core.types[from];
            if (core.phase == Phase::Partition)
                centers[to] = core.centers[from];
        }
        core.pending.reset();
        core.types = std::move(types);
        core.centers = std::move(centers);
        commit(core);
        return;
    }
    case EditOp::Kind::RollbackTo: {
        const int commits = static_cast<int>(core.history.size()) - 1;
        if (op.step < 0 || op.step > commits)
            throw ValidationError("rollback_to needs a step in 0.." + std::to_string(commits));
        const Mark mark = core.history[static_cast<std::size_t>(op.step)];
        core.phase = mark.phase;
        core.types = mark.types;
        core.centers = mark.centers;
        core.boxes = mark.boxes;
        core.states.resize(mark.n_states);
        core.result = mark.result;
        core.rng = mark.rng;
        core.pending.reset();
        core.history.resize(static_cast<std::size_t>(op.step) + 1);
        return;
    }
    }
}

SessionDelta Session::delta(const std::string& event) const
{
    return {event, core_.phase, commits(), core_.pending};
}

json Session::view() const
{
    const RoomTypeRegistry& reg = models_->registry;
    return {{"id", spec_.id}, {"variant", to_string(spec_.variant)}, {"seed", spec_.seed},
        {"phase", to_string(core_.phase)}, {"commits", commits()}, {"events", log_.size()},
        {"types", names_of(core_.types, reg)}, {"centers", centers_json(core_.centers)},
        {"boxes", boxes_json(core_.boxes)},
        {"pending", core_.pending ? core_.pending->to_json(reg) : json(nullptr)},
        {"state_hash", nn::state_hash(core_.states.back())},
        {"layout", core_.result ? layout_to_json(*core_.result) : json(nullptr)}};
}

json Session::snapshot() const
{
    const RoomTypeRegistry& reg = models_->registry;
    json states = json::array();
    for (const auto& s : core_.states)
        states.push_back(raster_json(s));
    json history = json::array();
    for (const Mark& m : core_.history)
        history.push_back({{"phase", to_string(m.phase)}, {"types", m.types}, {"centers", centers_json(m.centers)},
            {"boxes", boxes_json(m.boxes)}, {"n_states", m.n_states},
            {"result", m.result ? layout_to_json(*m.result) : json(nullptr)}, {"rng", rng_string(m.rng)}});
    return {{"format", "iplan-session/1"}, {"events", log_.size()}, {"spec", spec_.to_json(reg)},
        {"phase", to_string(core_.phase)}, {"types", core_.types}, {"centers", centers_json(core_.centers)},
        {"boxes", boxes_json(core_.boxes)}, {"states", states},
        {"pending", core_.pending ? core_.pending->to_json(reg) : json(nullptr)},
        {"result", core_.result ? layout_to_json(*core_.result) : json(nullptr)}, {"rng", rng_string(core_.rng)},
        {"history", history}};
}

std::vector<std::uint8_t> Session::state_bytes() const { return json::to_cbor(snapshot()); }

Image Session::render() const
{
    if (core_.result)
        return render_layout(*core_.result);
    return render_partition(spec_.boundary, core_.states.back(), models_->registry.K(), core_.centers);
}

void Session::apply_event(const json& event)
{
    const std::string kind = event.at("event").get<std::string>();
    const std::size_t seq = log_.size();
    if (kind == "step") {
        step();
        if (!core_.pending || core_.pending->to_json(models_->registry) != event.at("proposal"))
            throw SequenceError("replay diverged at event " + std::to_string(seq));
    } else if (kind == "edit") {
        edit(EditOp::from_json(event.at("op"), models_->registry));
    } else {
        throw ParseError("unexpected event '" + kind + "' at " + std::to_string(seq));
    }
}

Session Session::replay(const std::vector<json>& log, std::shared_ptr<const Models> models)
{
    if (log.empty() || log.front().value("event", std::string()) != "create")
        throw ParseError("event log must start with a create event");
    const RoomTypeRegistry reg = models ? models->registry : RoomTypeRegistry{};
    Session s(SessionSpec::from_json(log.front().at("spec"), reg), std::move(models), false);
    s.log_.push_back(log.front());
    for (std::size_t i = 1; i < log.size(); ++i)
        s.apply_event(log[i]);
    return s;
}

Session Session::restore(const json& snap, const std::vector<json>& log, std::shared_ptr<const Models> models)
{
    try {
        if (snap.value("format", std::string()) != "iplan-session/1")
            throw ParseError("not a session snapshot");
        const std::size_t events = snap.at("events").get<std::size_t>();
        if (events > log.size() || events == 0)
            throw ParseError("snapshot is ahead of the event log");
        const RoomTypeRegistry reg = models ? models->registry : RoomTypeRegistry{};
        Session s(SessionSpec::from_json(snap.at("spec"), reg), std::move(models), false);
        Core& core = s.core_;
        core.phase = phase_from_string(snap.at("phase").get<std::string>());
        core.types = snap.at("types").get<std::vector<int>>();
        core.centers = centers_from(snap.at("centers"));
        core.boxes = boxes_from(snap.at("boxes"));
        core.states.clear();
        for (const json& r : snap.at("states"))
            core.states.push_back(raster_from(r));
        if (!snap.at("pending").is_null())
            core.pending = Proposal::from_json(snap["pending"], reg);
        if (!snap.at("result").is_null())
            core.result = layout_from_json(snap["result"]);
        core.rng = rng_from(snap.at("rng").get<std::string>());
        core.history.clear();
        for (const json& m : snap.at("history")) {
            std::optional<Layout> result;
            if (!m.at("result").is_null())
                result = layout_from_json(m["result"]);
            core.history.push_back({phase_from_string(m.at("phase").get<std::string>()),
                m.at("types").get<std::vector<int>>(), centers_from(m.at("centers")), boxes_from(m.at("boxes")),
                m.at("n_states").get<std::size_t>(), result, rng_from(m.at("rng").get<std::string>())});
        }
        s.log_.assign(log.begin(), log.begin() + static_cast<std::ptrdiff_t>(events));
        for (std::size_t i = events; i < log.size(); ++i)
            s.apply_event(log[i]);
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("session snapshot: ") + e.what());
    }
}

Layout run_auto(const SessionSpec& spec, std::shared_ptr<const Models> models)
{
    Session s(spec, std::move(models));
    while (s.phase() != Phase::Done) {
        s.step();
        s.edit({});
    }
    return *s.result();
}

Image render_partition(const Boundary& b, const nn::PartitionState& s, int K, const std::vector<Pixel>& centers)
{
    Image img(kResolution, kResolution, 3);
    const auto paint = [&](int r, int c, const Rgb& color) {
        for (int ch = 0; ch < 3; ++ch)
            img.at(r, c, ch) = color[static_cast<std::size_t>(ch)];
    };
    for (int r = 0; r < kResolution; ++r)
        for (int c = 0; c < kResolution; ++c) {
            Rgb color = kExteriorColor;
            if (b.interior(r, c)) {
                const int t = static_cast<int>(std::lround(s(r, c) * K)) - 1;
                color = t >= 0 && t < K ? room_color(t) : kFreeColor;
            }
            if (b.boundary(r, c))
                color = kBoundaryColor;
            if (b.frontdoor(r, c))
                color = kFrontDoorColor;
            paint(r, c, color);
        }
    for (const Pixel& p : centers)
        for (int r = p.row - 1; r <= p.row + 1; ++r)
            for (int c = p.col - 1; c <= p.col + 1; ++c)
                if (inside_canvas({r, c}))
                    paint(r, c, kBoundaryColor);
    return img;
}

} // namespace iplan::service
