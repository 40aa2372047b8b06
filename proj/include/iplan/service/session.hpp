#pragma once

#include "iplan/core/render.hpp"
#include "iplan/core/rng.hpp"
#include "iplan/core/types.hpp"
#include "iplan/geometry/repair.hpp"
#include "iplan/nn/bcvae.hpp"
#include "iplan/nn/locator.hpp"
#include "iplan/nn/partitioner.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace iplan::service {

// Interaction variants by how much the caller supplies: full = boundary,
// types and centers (I); typed = boundary and types (II); auto = boundary (III).
enum class Variant { Full, Typed, Auto };
enum class Phase { Types, Locate, Partition, Repair, Done };

std::string to_string(Variant v);
// Accepts "I"/"II"/"III" and "full"/"typed"/"auto".
Variant variant_from_string(const std::string& s);
std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

// Trained networks shared read-only by every session.
struct Models {
    RoomTypeRegistry registry;
    std::optional<nn::TypeSampler> types;
    std::optional<nn::RoomLocator> locator;
    std::optional<nn::Partitioner> partitioner;
    nn::DecodeMode decode = nn::DecodeMode::Argmax;
    geometry::RepairConfig repair;

    // Throws RegistryError when a network was trained for another registry.
    void validate() const;
};

struct SessionSpec {
    std::string id = "session";
    Boundary boundary;
    Variant variant = Variant::Auto;
    std::uint64_t seed = 0;
    // Ordered room types; rooms are visited in this order.
    std::optional<std::vector<int>> types;
    std::optional<std::vector<Pixel>> centers;

    nlohmann::json to_json(const RoomTypeRegistry& reg) const;
    static SessionSpec from_json(const nlohmann::json& j, const RoomTypeRegistry& reg);
};

// Boundary from the layout; types and centers from its rooms as far as the
// variant consumes them.
SessionSpec spec_from_layout(const Layout& layout, Variant variant, std::uint64_t seed);

// What one step() proposes. Which fields are meaningful depends on `phase`.
struct Proposal {
    Phase phase = Phase::Types;
    int index = 0; // room index for centers and boxes
    std::vector<int> types;
    Pixel center;
    nn::RegressedBox box;
    std::vector<PixelBox> repaired;
    geometry::LossTerms before, after;

    nlohmann::json to_json(const RoomTypeRegistry& reg) const;
    static Proposal from_json(const nlohmann::json& j, const RoomTypeRegistry& reg);
};

struct EditOp {
    enum class Kind { Accept, Reject, SetTypes, MoveCenter, SetBox, ReorderRemaining, RollbackTo };
    Kind kind = Kind::Accept;
    std::vector<int> types;
    int index = 0;
    Pixel center;
    PixelBox box;
    std::vector<int> order; // absolute room indices of the remaining rooms
    int step = 0;

    nlohmann::json to_json(const RoomTypeRegistry& reg) const;
    // Throws EditError on an unknown op and ParseError on malformed arguments.
    static EditOp from_json(const nlohmann::json& j, const RoomTypeRegistry& reg);
};

struct SessionDelta {
    std::string event;
    Phase phase = Phase::Types; // after the event
    int commits = 0;
    std::optional<Proposal> pending;

    nlohmann::json to_json(const RoomTypeRegistry& reg) const;
};

// Interactive pipeline run. Every step() produces a proposal that the caller
// accepts, rejects or replaces through edit(); nothing advances on its own.
// Every successful call is appended to the event log, and a failed call leaves
// the session untouched.
class Session {
public:
    // Throws VariantError when the variant's inputs or models are missing.
    Session(SessionSpec spec, std::shared_ptr<const Models> models);

    SessionDelta step();
    SessionDelta edit(const EditOp& op);

    const SessionSpec& spec() const { return spec_; }
    const Models& models() const { return *models_; }
    Phase phase() const { return core_.phase; }
    int commits() const { return static_cast<int>(core_.history.size()) - 1; }
    const std::optional<Proposal>& pending() const { return core_.pending; }
    const std::vector<int>& types() const { return core_.types; }
    const std::vector<Pixel>& centers() const { return core_.centers; }
    const std::vector<PixelBox>& boxes() const { return core_.boxes; }
    const std::vector<nn::PartitionState>& states() const { return core_.states; }
    const std::optional<Layout>& result() const { return core_.result; }
    const std::vector<nlohmann::json>& log() const { return log_; }

    // Client-facing summary (GET /state).
    nlohmann::json view() const;
    // Complete state including rasters, rng and rollback history.
    nlohmann::json snapshot() const;
    // CBOR of snapshot(); equal bytes mean identical sessions.
    std::vector<std::uint8_t> state_bytes() const;
    Image render() const;

    // Rebuilds a session from its log. Throws SequenceError when a recorded
    // proposal is not reproduced.
    static Session replay(const std::vector<nlohmann::json>& log, std::shared_ptr<const Models> models);
    // Restores a snapshot and applies the events logged after it.
    static Session restore(const nlohmann::json& snapshot, const std::vector<nlohmann::json>& log,
        std::shared_ptr<const Models> models);

private:
    struct Mark {
        Phase phase;
        std::vector<int> types;
        std::vector<Pixel> centers;
        std::vector<PixelBox> boxes;
        std::size_t n_states;
        std::optional<Layout> result;
        Rng rng;
    };
    struct Core {
        Phase phase = Phase::Types;
        std::vector<int> types;
        std::vector<Pixel> centers;
        std::vector<PixelBox> boxes;
        std::vector<nn::PartitionState> states;
        std::optional<Proposal> pending;
        std::optional<Layout> result;
        Rng rng;
        std::vector<Mark> history; // history[k]: state after k commits
    };

    Session(SessionSpec spec, std::shared_ptr<const Models> models, bool log_creation);

    Proposal propose(Core& core) const;
    void apply(Core& core, const EditOp& op) const;
    void commit(Core& core) const;
    SessionDelta delta(const std::string& event) const;
    void append(nlohmann::json event);
    void apply_event(const nlohmann::json& event);

    SessionSpec spec_;
    std::shared_ptr<const Models> models_;
    Core core_;
    std::vector<nlohmann::json> log_;
};

// Steps and accepts until DONE, then returns the repaired layout.
Layout run_auto(const SessionSpec& spec, std::shared_ptr<const Models> models);

// Partition state drawn with room colors, plus boundary, door and centers.
Image render_partition(const Boundary& b, const nn::PartitionState& s, int K, const std::vector<Pixel>& centers);

} // namespace iplan::service
